#!/usr/bin/env python3
"""
Environment-aware progress display for long integrations.
"""

import os
import sys
import time

try:
    from tqdm import tqdm
except ImportError:
    tqdm = None


BATCH_ENV_VARS = ("SLURM_JOB_ID", "PBS_JOBID", "LSB_JOBID")
LONG_RUN = 100_000


class SimpleProgress:
    """Simple progress reporter for non-interactive environments.

    Progress is counted in integration units (steps or samples); the line
    shows the matching simulated time when time_scale is given.
    """

    def __init__(self, total, desc="Progress", logger=None, time_scale=None):
        self.total = max(int(total), 1)
        self.current = 0
        self.desc = desc
        self.last_percent = -1.0
        self.start_time = time.time()
        self.logger = logger
        self.time_scale = time_scale

    def _emit(self, message):
        if self.logger:
            self.logger.echo(message, to_console=True)
        else:
            print(message)
            sys.stdout.flush()

    def _position(self, count):
        if self.time_scale is None:
            return f"{count}/{self.total}"
        return f"t={count * self.time_scale:.2f}/{self.total * self.time_scale:.2f}"

    def update(self, n=1):
        self.current = min(self.current + n, self.total)
        percent = 100 * self.current / self.total

        # Long runs update every 0.25%, otherwise every 1.25%
        update_interval = 0.25 if self.total > LONG_RUN else 1.25

        if percent >= self.last_percent + update_interval:
            elapsed = time.time() - self.start_time
            self._emit(f"{self.desc}: {percent:.2f}% ({self._position(self.current)}) - {elapsed:.1f}s")
            self.last_percent = percent

    def close(self):
        if self.last_percent < 100:
            elapsed = time.time() - self.start_time
            self._emit(f"{self.desc}: 100.00% ({self._position(self.total)}) - {elapsed:.1f}s")
            self.last_percent = 100.0

    def __enter__(self):
        self._emit(f"{self.desc}: 0.00% ({self._position(0)})")
        self.last_percent = 0.0
        return self

    def __exit__(self, *args):
        self.close()


class NullProgress:
    """Progress handler that discards updates."""

    def update(self, n=1):
        pass

    def close(self):
        pass

    def __enter__(self):
        return self

    def __exit__(self, *args):
        pass


def detect_environment():
    """Detect execution environment."""
    return {
        'is_tty': sys.stdout.isatty(),
        'is_ci': os.environ.get('CI') is not None,
        'is_batch': any(os.environ.get(name) is not None for name in BATCH_ENV_VARS),
        'term': os.environ.get('TERM', 'unknown'),
    }


def get_progress_handler(total, desc="Integrating", mode='auto', logger=None, time_scale=None):
    """Get appropriate progress handler for the environment.

    Args:
        total: Number of units of work
        desc: Label printed in front of the progress
        mode: 'auto', 'simple', 'bar' or 'none'
        logger: Optional Logger receiving the simple progress lines
        time_scale: Simulated time per unit, shown by SimpleProgress

    Returns:
        Context manager with update(n); NullProgress for mode 'none'
    """
    if mode == 'none':
        return NullProgress()
    if mode not in ('auto', 'simple', 'bar'):
        raise ValueError(f"Unknown progress mode '{mode}'")

    env = detect_environment()

    # Force simple progress in non-interactive environments
    use_simple = (
        mode == 'simple' or
        (mode == 'auto' and (env['is_ci'] or env['is_batch'] or not env['is_tty']))
    )

    if use_simple or tqdm is None:
        return SimpleProgress(total, desc, logger=logger, time_scale=time_scale)
    return tqdm(
        total=total,
        desc=desc,
        ascii=True if env['term'] == 'unknown' else None,
        leave=False,
    )
