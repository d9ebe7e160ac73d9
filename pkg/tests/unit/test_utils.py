#!/usr/bin/env python3
"""Unit tests for utility functions."""

import os
import threading
from unittest.mock import patch

import numpy as np
import pytest

from curvature_ph.utils import chunked, format_float, make_rng, parallel_map, time_grid, worker_count


@pytest.mark.parametrize("value, expected", [
    (1.5, "1.5"),
    (0.1, "0.10000000000000001"),
    (-2.0, "-2"),
    (float("nan"), "nan"),
    (float("inf"), "inf"),
    (float("-inf"), "-inf"),
])
def test_format_float(value, expected):
    assert format_float(value) == expected


def test_format_float_is_lossless(rng):
    for value in rng.standard_normal(50) * 1e3:
        assert float(format_float(value)) == value


def test_make_rng_streams():
    """Test identical seeds repeat and distinct streams differ."""
    np.testing.assert_array_equal(make_rng(7).random(4), make_rng(7).random(4))
    assert not np.array_equal(make_rng(7).random(4), make_rng(7, stream=1).random(4))
    np.testing.assert_array_equal(make_rng(7, stream=1).random(4), make_rng(7, stream=1).random(4))


def test_chunked():
    assert list(chunked(list(range(7)), 3)) == [[0, 1, 2], [3, 4, 5], [6]]
    chunks = list(chunked(np.arange(5), 2))
    assert [c.tolist() for c in chunks] == [[0, 1], [2, 3], [4]]


def test_chunked_invalid_size():
    with pytest.raises(ValueError, match="chunk_size"):
        list(chunked([1, 2], 0))


class TestWorkerCount:
    """Test the CURVATURE_PH_WORKERS override."""

    def test_env_override(self):
        with patch.dict(os.environ, {"CURVATURE_PH_WORKERS": "3"}):
            assert worker_count() == 3

    def test_default_without_env(self):
        with patch.dict(os.environ, {"CURVATURE_PH_WORKERS": ""}):
            assert worker_count(default=5) == 5
            assert worker_count() >= 1

    @pytest.mark.parametrize("raw", ["many", "0", "-2"])
    def test_invalid_env(self, raw):
        with patch.dict(os.environ, {"CURVATURE_PH_WORKERS": raw}):
            with pytest.raises(ValueError, match="CURVATURE_PH_WORKERS"):
                worker_count()


def test_parallel_map_preserves_order():
    def square(x):
        return x * x

    assert parallel_map(square, range(20), workers=4) == [x * x for x in range(20)]
    assert parallel_map(square, range(5), workers=1) == [0, 1, 4, 9, 16]


def test_parallel_map_reads_env(single_worker):
    calling = threading.get_ident()
    seen = parallel_map(lambda _: threading.get_ident(), range(4))
    assert set(seen) == {calling}


def test_time_grid():
    grid = time_grid(10.0, 0.01)
    assert grid.size == 1001
    assert grid[0] == 0.0
    assert grid[-1] == pytest.approx(10.0)
    np.testing.assert_allclose(time_grid(1.0, 0.25, t_start=0.5), [0.5, 0.75, 1.0])
