#!/usr/bin/env python3
"""
Measurements of what the criterion predicts.

Lyapunov spectrum of the Jacobi cocycle, splitting dimensions by exponent
clustering, finite-time cone invariance, and the fraction of an orbit spent
where the criterion fails.
"""

import threading
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as linalg

from .criterion import BAND_TOL, QFormParams, _check_set, _forms, criterion_matrix, reference_beta
from .dynamics import DEFAULT_STEP, TangentPair, integrate
from .models import CurvatureModel, eigen_split
from .progress import get_progress_handler
from .utils import chunked, make_rng, parallel_map, time_grid
from .validate import ContractViolation, IntegrationOverflowError, ParameterError, require_positive

DEFAULT_REORTH_PERIOD = 0.5
GAP_THRESHOLD_FACTOR = 0.25
CONE_BATCH = 64

VERDICT_PARTIAL = "partially hyperbolic"
VERDICT_ANOSOV = "Anosov-like (E^c empty)"
VERDICT_NONE = "no dominated splitting detected"


@dataclass(frozen=True, eq=False)
class LyapunovReport:
    exponents: Tuple[float, ...]
    T_used: float
    transient: float
    reorth_period: float
    residual: float
    scale: float = 1.0

    @property
    def symmetry_defect(self) -> float:
        """max |chi_i + chi_(2(n-1)+1-i)|, zero for an exactly symplectic spectrum."""
        values = np.asarray(self.exponents)
        return float(np.max(np.abs(values + values[::-1])))

    def to_dict(self) -> dict:
        return {
            "exponents": list(self.exponents),
            "T_used": self.T_used,
            "transient": self.transient,
            "reorth_period": self.reorth_period,
            "residual": self.residual,
            "symmetry_defect": self.symmetry_defect,
        }


@dataclass(frozen=True)
class SplittingDims:
    stable: int
    center: int
    unstable: int
    verdict: str
    gap_threshold: float

    def as_tuple(self) -> Tuple[int, int, int]:
        return self.stable, self.center, self.unstable

    def matches_rank(self, r: int) -> bool:
        """Whether dim E^s = dim E^u = r."""
        return self.verdict == VERDICT_PARTIAL and self.stable == self.unstable == r

    def to_dict(self) -> dict:
        return {
            "stable": self.stable,
            "center": self.center,
            "unstable": self.unstable,
            "verdict": self.verdict,
            "gap_threshold": self.gap_threshold,
        }


@dataclass(frozen=True, eq=False)
class ConeInvarianceReport:
    fraction_retained: float
    min_exit_time: Optional[float]
    contraction_stat: float
    median_growth_rate: float
    retained: np.ndarray
    exit_times: np.ndarray
    final_ratios: np.ndarray

    def to_dict(self) -> dict:
        return {
            "fraction_retained": self.fraction_retained,
            "min_exit_time": self.min_exit_time,
            "contraction_stat": self.contraction_stat,
            "median_growth_rate": self.median_growth_rate,
            "samples": int(self.retained.size),
        }


@dataclass(frozen=True, eq=False)
class BadSetReport:
    fraction: float
    times: np.ndarray
    min_forms: np.ndarray
    in_bad_set: np.ndarray
    beta: Optional[float] = None
    expected: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "fraction": self.fraction,
            "beta": self.beta,
            "expected_fraction": self.expected,
            "samples": int(self.times.size),
        }


def _qr_positive(Q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """QR with a non-negative diagonal of R."""
    Q, R = linalg.qr(Q)
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    return Q * signs, np.abs(np.diag(R))


def _model_scale(model: CurvatureModel) -> float:
    return float(model.metadata.get("a", 1.0))


def lyapunov_spectrum(
    model: CurvatureModel,
    T: float,
    step: float = DEFAULT_STEP,
    reorth_period: float = DEFAULT_REORTH_PERIOD,
    seed: int = 0,
    transient: Optional[float] = None,
    progress_mode: str = "none",
    logger=None,
) -> LyapunovReport:
    """
    Lyapunov spectrum of the Jacobi system by QR re-orthonormalization.

    A random orthonormal frame of the 2(n-1)-dimensional tangent space is
    propagated; every reorth_period it is re-orthonormalized and the log of
    the diagonal of R is accumulated. Intervals inside the transient only
    relax the frame and are not averaged.

    Args:
        model: Curvature model
        T: Total integration time, at least 10 * reorth_period
        step: RK4 step
        reorth_period: Time between re-orthonormalizations
        seed: Seed of the initial frame
        transient: Burn-in time discarded before averaging (default T/4)
        progress_mode: 'auto', 'simple', 'bar' or 'none'
        logger: Optional Logger

    Returns:
        LyapunovReport with ascending exponents

    Raises:
        ParameterError: On invalid T, reorth_period or transient
        IntegrationOverflowError: If the frame overflows between
            re-orthonormalizations
    """
    T = require_positive("T", T)
    reorth_period = require_positive("reorth_period", reorth_period)
    if T < 10 * reorth_period:
        raise ParameterError(f"T must be at least 10 * reorth_period = {10 * reorth_period}, got {T}")
    transient = T / 4 if transient is None else float(transient)
    if not 0 <= transient < T:
        raise ParameterError(f"transient must lie in [0, T), got {transient}")

    n_intervals = int(np.ceil(T / reorth_period - 1e-9))
    period = T / n_intervals
    n_burn = min(int(round(transient / period)), n_intervals - 1)
    n_avg = n_intervals - n_burn
    n_check = n_burn + int(np.ceil(0.75 * n_avg))

    dim2 = 2 * model.frame_dim
    frame, _ = _qr_positive(make_rng(seed).standard_normal((dim2, dim2)))
    log_sums = np.zeros(dim2)
    checkpoint = None

    if logger:
        logger.echo(f"Lyapunov spectrum of '{model.name}': T={T:g}, burn-in {n_burn * period:g}, period {period:g}")

    with get_progress_handler(n_intervals, "Lyapunov spectrum", progress_mode, logger, time_scale=period) as progress:
        for k in range(n_intervals):
            try:
                frame = integrate(model, frame, k * period, (k + 1) * period, step)
            except IntegrationOverflowError as e:
                raise IntegrationOverflowError(
                    f"frame overflowed between re-orthonormalizations; reduce reorth_period (now {period:g})",
                    e.time,
                )
            frame, growth = _qr_positive(frame)
            if k >= n_burn:
                log_sums += np.log(np.where(growth > 0, growth, 1.0))
            if k + 1 == n_check:
                checkpoint = log_sums / ((n_check - n_burn) * period)
            progress.update(1)

    exponents = log_sums / (n_avg * period)
    order = np.argsort(exponents)
    residual = 0.0 if checkpoint is None else float(np.max(np.abs(exponents - checkpoint)))
    report = LyapunovReport(
        exponents=tuple(float(x) for x in exponents[order]),
        T_used=T,
        transient=n_burn * period,
        reorth_period=period,
        residual=residual,
        scale=_model_scale(model),
    )
    if logger:
        logger.echo("Exponents: " + ", ".join(f"{x:.6g}" for x in report.exponents))
    return report


def splitting_dims(report: LyapunovReport, gap_threshold: Optional[float] = None) -> SplittingDims:
    """
    Cluster exponents at gaps above the threshold.

    The most negative cluster is E^s, the most positive one E^u, and
    everything between them E^c. Two clusters mean an empty center; a
    single cluster means no dominated splitting.

    Args:
        report: Lyapunov spectrum
        gap_threshold: Minimum gap between clusters (default 0.25 * model scale)

    Returns:
        SplittingDims with sizes (stable, center, unstable)
    """
    threshold = GAP_THRESHOLD_FACTOR * report.scale if gap_threshold is None else float(gap_threshold)
    threshold = require_positive("gap_threshold", threshold)
    values = np.sort(np.asarray(report.exponents))
    cuts = np.flatnonzero(np.diff(values) > threshold) + 1
    sizes = [len(cluster) for cluster in np.split(values, cuts)]

    if len(sizes) == 1:
        return SplittingDims(0, sizes[0], 0, VERDICT_NONE, threshold)
    if len(sizes) == 2:
        return SplittingDims(sizes[0], 0, sizes[1], VERDICT_ANOSOV, threshold)
    return SplittingDims(sizes[0], sum(sizes[1:-1]), sizes[-1], VERDICT_PARTIAL, threshold)


class _ConeTracker:
    """Q^c along a batch of trajectories, using the eigen split of K(t)."""

    def __init__(self, model: CurvatureModel, r: int, c: float):
        self.model = model
        self.r = r
        self.c = c
        self._fixed = self._projectors(0.0) if model.constant else None

    def _projectors(self, t: float) -> Tuple[np.ndarray, np.ndarray]:
        split = eigen_split(self.model.operator(t), self.r).split
        return split.proj_A, split.proj_B

    def q_values(self, t: float, state: np.ndarray) -> np.ndarray:
        proj_a, proj_b = self._fixed or self._projectors(t)
        dim = state.shape[0] // 2
        eta, sigma = state[:dim], state[dim:]
        return (
            np.sum(eta * (proj_a @ sigma), axis=0)
            - self.c * self.c * np.sum(eta * (proj_b @ eta), axis=0)
            - np.sum(sigma * (proj_b @ sigma), axis=0)
        )


def cone_invariance_test(
    model: CurvatureModel,
    r: int,
    params: QFormParams,
    T: float,
    count: int,
    seed: int,
    initial: Sequence[TangentPair] = (),
    step: float = DEFAULT_STEP,
    workers: Optional[int] = None,
    progress_mode: str = "none",
    logger=None,
) -> ConeInvarianceReport:
    """
    Propagate C+ samples and record whether they stay in the positive cone.

    A sample is retained when Q^c > 0 after every integration step up to T.
    Trajectories are renormalized every unit of time, with the log of the
    norm accumulated, so growth never aborts the run.

    Args:
        model: Curvature model
        r: Dimension of A
        params: Form parameters
        T: Final time
        count: Number of random C+ samples (split at t=0)
        seed: Sampling seed
        initial: Extra starting pairs, appended after the random samples
        step: RK4 step
        workers: Thread count; results do not depend on it
        progress_mode: 'auto', 'simple', 'bar' or 'none'
        logger: Optional Logger

    Returns:
        ConeInvarianceReport with per-sample rows

    Raises:
        ContractViolation: If an initial pair is not in C+
    """
    T = require_positive("T", T)
    if count < 0 or (count == 0 and not initial):
        raise ParameterError(f"count must be at least 1, got {count}")
    tracker = _ConeTracker(model, r, params.c)
    split0 = eigen_split(model.operator(0.0), r).split

    columns = []
    if count:
        _, positive = _check_set(params.c, r, model.frame_dim - r, count, seed)
        columns.append(split0.to_frame(positive))
    extra = [pair.as_vector() for pair in initial]
    if extra:
        extra = np.column_stack(extra)
        extra = extra / np.linalg.norm(extra, axis=0)
        if np.any(tracker.q_values(0.0, extra) <= 0):
            raise ContractViolation("initial pairs must lie in the positive cone C+")
        columns.append(extra)
    states = np.hstack(columns)
    total = states.shape[1]

    edges = list(np.arange(0.0, T, 1.0)) + [T]
    # Batch size must not depend on the worker count
    chunks = list(chunked(np.arange(total), CONE_BATCH))
    lock = threading.Lock()

    if logger:
        logger.echo(f"Cone invariance: {total} samples to T={T:g} at c={params.c:g}")

    with get_progress_handler(len(chunks) * (len(edges) - 1), "Cone invariance", progress_mode, logger) as progress:

        def run_chunk(index):
            state = states[:, index]
            exit_time = np.full(index.size, np.nan)
            log_norm = np.zeros(index.size)

            def watch(t, current):
                escaped = np.isnan(exit_time) & (tracker.q_values(t, current) <= 0)
                exit_time[escaped] = t

            for t0, t1 in zip(edges[:-1], edges[1:]):
                state = integrate(model, state, t0, t1, step, callback=watch)
                norms = np.linalg.norm(state, axis=0)
                log_norm += np.log(norms)
                state = state / norms
                with lock:
                    progress.update(1)
            ratio = tracker.q_values(T, state)
            return exit_time, log_norm, ratio

        results = parallel_map(run_chunk, chunks, workers)

    exit_times = np.concatenate([res[0] for res in results])
    log_norms = np.concatenate([res[1] for res in results])
    ratios = np.concatenate([res[2] for res in results])
    retained = np.isnan(exit_times)
    report = ConeInvarianceReport(
        fraction_retained=float(np.mean(retained)),
        min_exit_time=None if retained.all() else float(np.nanmin(exit_times)),
        contraction_stat=float(np.median(ratios)),
        median_growth_rate=float(np.median(log_norms) / T),
        retained=retained,
        exit_times=exit_times,
        final_ratios=ratios,
    )
    if logger:
        logger.echo(f"Retained {report.fraction_retained:.4f} of samples")
    return report


def expected_bad_fraction(model: CurvatureModel, r: int, beta: Optional[float] = None) -> float:
    """
    Analytic fraction of the orbit where the B-curvature leaves the band below -beta^2.

    For the bump scenario this is the measure of {t : -a^2 + h chi(t) > -beta^2}
    per period; constant models are either entirely good or entirely bad.

    Raises:
        ParameterError: For time-dependent models without a bump
    """
    beta = reference_beta(model, beta)
    if model.constant:
        split = eigen_split(model.operator(0.0), r)
        band = beta is not None and split.eigenvalues[r] > -beta * beta + BAND_TOL
        return 1.0 if split.degenerate or band else 0.0
    bump = model.metadata.get("bump")
    if bump is None or model.period is None:
        raise ParameterError(f"no analytic bad set for model '{model.name}'")
    a = model.metadata["a"]
    amplitude = model.metadata["amplitude"]
    ref = a if beta is None else beta
    if amplitude <= 0:
        return 0.0
    level = (a * a - ref * ref + BAND_TOL) / amplitude
    return min(bump.superlevel_measure(level) / model.period, 1.0)


def time_in_bad_set(
    model: CurvatureModel,
    r: int,
    params: QFormParams,
    T: Optional[float] = None,
    dt: float = 0.01,
    beta: Optional[float] = None,
    seed: int = 0,
    count: int = 256,
    workers: Optional[int] = None,
    progress_mode: str = "none",
    logger=None,
) -> BadSetReport:
    """
    Fraction of sample times in [0, T] at which the criterion fails pointwise.

    A time is bad when the eigen split degenerates, when the form minimum
    over a fixed set of C0 samples is <= 0, or when lambda_(r+1)(t) rises
    above -beta^2 (beta defaults to the model's reference rate).

    Args:
        model: Curvature model
        r: Dimension of A
        params: Form parameters
        T: End of the time window (default one period, or 10)
        dt: Sampling interval, > 0
        beta: Reference rate of the pinched band
        seed: Seed of the boundary sample set
        count: Number of boundary samples
        workers: Thread count
        progress_mode: 'auto', 'simple', 'bar' or 'none'
        logger: Optional Logger

    Returns:
        BadSetReport with one row per sample time
    """
    dt = require_positive("dt", dt)
    if T is None:
        T = model.period if model.period is not None else 10.0
    T = require_positive("T", T)
    beta = reference_beta(model, beta)
    boundary, _ = _check_set(params.c, r, model.frame_dim - r, count, seed)
    times = time_grid(T, dt)

    with get_progress_handler(times.size, "Bad-set scan", progress_mode, logger, time_scale=dt) as progress:
        lock = threading.Lock()

        def classify(t):
            K = model.operator(t)
            split = eigen_split(K, r)
            min_form = float(np.min(_forms(criterion_matrix(params, split.split, K), boundary)))
            band = beta is not None and split.eigenvalues[r] > -beta * beta + BAND_TOL
            with lock:
                progress.update(1)
            return min_form, bool(split.degenerate or band or min_form <= 0)

        results = parallel_map(classify, times, workers)

    min_forms = np.array([res[0] for res in results])
    bad = np.array([res[1] for res in results])
    try:
        expected = expected_bad_fraction(model, r, beta)
    except ParameterError:
        expected = None
    report = BadSetReport(
        fraction=float(np.mean(bad)),
        times=times,
        min_forms=min_forms,
        in_bad_set=bad,
        beta=beta,
        expected=expected,
    )
    if logger:
        logger.echo(f"Time in bad set: {report.fraction:.4f} over [0, {T:g}]")
    return report
