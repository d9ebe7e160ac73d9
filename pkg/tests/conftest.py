#!/usr/bin/env python3
"""Shared model fixtures."""

import os
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest

from curvature_ph.models import (
    BumpSpec,
    DirectionPath,
    RootDatum,
    constant_curvature_model,
    higher_rank_model,
    non_anosov_scenario,
    rank_one_symmetric_model,
)

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def rank_one():
    """Rank-one space, a=1, n=4, r=2: K = diag(-4, -4, -1)."""
    return rank_one_symmetric_model(1.0, 4, 2)


@pytest.fixture
def constant():
    return constant_curvature_model(1.0, 4)


@pytest.fixture
def two_root_family():
    """Roots (1,0) and (0,1), direction turning from the first to the second."""
    roots = [RootDatum((1.0, 0.0)), RootDatum((0.0, 1.0))]
    return higher_rank_model(roots, 2, DirectionPath((1.0, 0.0), (0.0, 1.0)))


@pytest.fixture
def on_gamma():
    """Orbit of the closed geodesic in the non-Anosov example, a=1, n=3, r=1."""
    return non_anosov_scenario(1.0, 3, 1, BumpSpec(0.0, 0.5), 10.0, on_gamma=True)


@pytest.fixture
def bump_model():
    """Bump of width 0.5 on a period-10 orbit: 10% duty cycle."""
    return non_anosov_scenario(1.0, 3, 1, BumpSpec(0.0, 0.5), 10.0)


@pytest.fixture
def single_worker():
    with patch.dict(os.environ, {"CURVATURE_PH_WORKERS": "1"}):
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
