#!/usr/bin/env python3
"""Unit tests for the quadratic-form criterion."""

import numpy as np
import pytest

from curvature_ph.criterion import (
    REASON_BAND,
    REASON_NO_SPLITTING,
    ConeClass,
    ConeSample,
    QFormParams,
    aligned_family_minimum,
    assemble_S,
    cone_sample,
    corollary_epsilon,
    corollary_margin,
    criterion_check,
    fd_derivative_oracle,
    form_derivative,
    gap_functions,
    negative_curvature_check,
    qform_eval,
    reference_beta,
    sample_times,
)
from curvature_ph.dynamics import TangentPair
from curvature_ph.models import CurvatureModel, eigen_split, full_split
from curvature_ph.validate import ContractViolation, ParameterError, PreconditionError

RANK_ONE_MIN = 4.0 - 1.5 - 1.0 / 1.5


def _split(model, r, t=0.0):
    return eigen_split(model.operator(t), r).split


def _indefinite():
    K = np.diag([-1.0, 0.5])
    return CurvatureModel("indefinite", 3, lambda t: K, constant=True)


class TestQForm:
    """Test evaluation of Q^c and its derivative."""

    @pytest.mark.parametrize("c", [0.0, -1.0, float("nan")])
    def test_invalid_rate(self, c):
        with pytest.raises(ParameterError, match="c must be positive"):
            QFormParams(c)

    def test_qform_value(self, rank_one):
        """Test g(eta_A, sigma_A) - c^2 |eta_B|^2 - |sigma_B|^2 by hand."""
        pair = TangentPair([1.0, 0.0, 2.0], [3.0, 0.0, 1.0])
        assert qform_eval(QFormParams(1.5), _split(rank_one, 2), pair) == pytest.approx(3.0 - 9.0 - 1.0)

    def test_qform_dimension_mismatch(self, rank_one):
        with pytest.raises(ContractViolation):
            qform_eval(QFormParams(1.0), _split(rank_one, 2), TangentPair([1.0], [1.0]))

    def test_S_is_symmetric_with_coupling_blocks(self, rng):
        K_A = np.diag([-4.0, -3.0])
        K_B = np.array([[-1.0]])
        X = rng.standard_normal((2, 1))
        S = assemble_S(QFormParams(2.0), K_A, K_B, X)
        np.testing.assert_array_equal(S, S.T)
        np.testing.assert_array_equal(S[:2, :2], -K_A)
        np.testing.assert_array_equal(S[2:4, 2:4], np.eye(2))
        np.testing.assert_array_equal(S[:2, 4:5], 4.0 * X)
        assert S[4, 5] == -4.0 - 1.0

    def test_S_rejects_bad_coupling_shape(self):
        with pytest.raises(ContractViolation, match="aprime"):
            assemble_S(QFormParams(1.0), -np.eye(2), -np.eye(1), np.zeros((1, 2)))

    def test_S_rejects_asymmetric_block(self):
        with pytest.raises(ContractViolation):
            assemble_S(QFormParams(1.0), np.array([[0.0, 1.0], [0.0, 0.0]]), -np.eye(1))

    def test_derivative_matches_flow(self, rank_one, rng):
        """Test g~(S w, w) against a central difference of Q along the integrated flow."""
        params = QFormParams(1.5)
        split = _split(rank_one, 2)
        for _ in range(5):
            pair = TangentPair(rng.standard_normal(3), rng.standard_normal(3))
            exact = form_derivative(params, split, rank_one.operator(0.0), pair)
            numeric = fd_derivative_oracle(rank_one, split, params, pair)
            assert exact == pytest.approx(numeric, abs=1e-5)

    def test_derivative_matches_flow_through_bump(self, bump_model, rng):
        params = QFormParams(1.5)
        pair = TangentPair(rng.standard_normal(2), rng.standard_normal(2))
        t0 = 0.3
        exact = form_derivative(params, _split(bump_model, 1, t0), bump_model.operator(t0), pair)
        numeric = fd_derivative_oracle(bump_model, lambda t: _split(bump_model, 1, t), params, pair, t0=t0)
        assert exact == pytest.approx(numeric, abs=1e-5)

    def test_invariant_under_rebasing(self, rank_one, rng):
        """Test Q^c and its derivative do not depend on the bases chosen inside A and B."""
        params = QFormParams(1.5)
        K = rank_one.operator(0.0)
        split = _split(rank_one, 2).with_aprime(rng.standard_normal((2, 1)))
        rot_A, _ = np.linalg.qr(rng.standard_normal((2, 2)))
        rot_B = np.array([[-1.0]])
        rotated = split.rebased(rot_A, rot_B)
        assert rotated.projection_identity_defect() <= 1e-12
        np.testing.assert_allclose(rotated.full_aprime(), split.full_aprime(), atol=1e-12)
        for _ in range(10):
            pair = TangentPair(rng.standard_normal(3), rng.standard_normal(3))
            assert qform_eval(params, rotated, pair) == pytest.approx(
                qform_eval(params, split, pair), rel=1e-12, abs=1e-10
            )
            assert form_derivative(params, rotated, K, pair) == pytest.approx(
                form_derivative(params, split, K, pair), rel=1e-12, abs=1e-10
            )

    @pytest.mark.parametrize("scale", [0.5, 3.0, -2.0])
    def test_derivative_is_quadratic(self, rank_one, rng, scale):
        params = QFormParams(1.5)
        split = _split(rank_one, 2)
        K = rank_one.operator(0.0)
        eta, sigma = rng.standard_normal(3), rng.standard_normal(3)
        base = form_derivative(params, split, K, TangentPair(eta, sigma))
        scaled = form_derivative(params, split, K, TangentPair(scale * eta, scale * sigma))
        assert scaled == pytest.approx(scale * scale * base, rel=1e-12)


class TestConeSampling:
    """Test deterministic cone sampling."""

    @pytest.mark.parametrize("cone_class", list(ConeClass))
    def test_classes_are_consistent(self, rank_one, cone_class):
        samples = cone_sample(QFormParams(1.5), _split(rank_one, 2), 100, 3, cone_class)
        assert len(samples) == 100
        assert all(s.cone_class == cone_class for s in samples)

    def test_boundary_normalization(self, rank_one):
        """Test g(eta_A, sigma_A) = 1 on boundary samples."""
        split = _split(rank_one, 2)
        for s in cone_sample(QFormParams(1.5), split, 50, 0, ConeClass.BOUNDARY):
            w = split.coordinates(s.pair.as_vector())
            assert w[:2] @ w[2:4] == pytest.approx(1.0)
            assert abs(s.qvalue) <= 1e-12

    def test_same_seed_same_samples(self, rank_one):
        split = _split(rank_one, 2)
        first = cone_sample(QFormParams(1.5), split, 20, 42, ConeClass.POSITIVE)
        second = cone_sample(QFormParams(1.5), split, 20, 42, ConeClass.POSITIVE)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.pair.as_vector(), b.pair.as_vector())

    def test_boundary_without_b(self):
        samples = cone_sample(QFormParams(1.0), full_split(3), 30, 1, "C0")
        assert all(abs(s.qvalue) <= 1e-12 for s in samples)

    def test_zero_count_rejected(self, rank_one):
        with pytest.raises(ParameterError, match="count"):
            cone_sample(QFormParams(1.0), _split(rank_one, 2), 0, 0, ConeClass.BOUNDARY)

    def test_inconsistent_sample_rejected(self):
        pair = TangentPair([1.0], [1.0])
        with pytest.raises(ContractViolation, match="cone class C-"):
            ConeSample(pair, ConeClass.NEGATIVE, 0.5)


def test_sample_times(rank_one, bump_model):
    assert sample_times(rank_one) == (0.0,)
    times = sample_times(bump_model)
    assert len(times) == 64
    assert times[0] == 0.0 and times[-1] < 10.0
    assert sample_times(bump_model, [1, 2]) == (1.0, 2.0)
    with pytest.raises(ParameterError):
        sample_times(rank_one, [])


class TestAlignedFamily:

    def test_rank_one_minimum(self, rank_one):
        """Test the closed form 4a - c - a^2/c and that the minimizer lies on C0."""
        params = QFormParams(1.5)
        split = _split(rank_one, 2)
        value, pair = aligned_family_minimum(rank_one, split, params)
        assert value == pytest.approx(RANK_ONE_MIN, abs=1e-7)
        assert abs(qform_eval(params, split, pair)) < 1e-9
        assert form_derivative(params, split, rank_one.operator(0.0), pair) == pytest.approx(value, abs=1e-9)

    def test_large_rate_goes_negative(self, rank_one):
        value, _ = aligned_family_minimum(rank_one, _split(rank_one, 2), QFormParams(4.0))
        assert value == pytest.approx(-0.25, abs=1e-7)


class TestCriterionCheck:
    """Test the pointwise criterion."""

    def test_rank_one_passes(self, rank_one):
        report = criterion_check(rank_one, 2, QFormParams(1.5), 500, 7)
        assert report.passed
        assert report.reason is None
        assert report.min_form_boundary == pytest.approx(RANK_ONE_MIN, abs=1e-7)
        assert report.min_form_positive > 0
        assert report.samples_used == 1000
        assert len(report.samples) == 1000
        assert report.to_dict()["params"] == {"c": 1.5, "r": 2, "model": rank_one.name}

    def test_large_rate_fails(self, rank_one):
        report = criterion_check(rank_one, 2, QFormParams(4.0), 200, 7)
        assert report.verdict == "fail"
        assert report.aligned_minimum == pytest.approx(-0.25, abs=1e-7)
        assert report.min_form_boundary <= report.aligned_minimum
        assert report.argmin is not None

    def test_sampled_minimum_bounds_exact_minimum(self, rank_one):
        report = criterion_check(rank_one, 2, QFormParams(1.5), 500, 7, refine=False)
        assert report.aligned_minimum is None
        assert report.min_form_boundary >= RANK_ONE_MIN - 1e-9

    def test_degenerate_split_reports_no_splitting(self, constant):
        report = criterion_check(constant, 1, QFormParams(1.0), 50, 0)
        assert report.verdict == "fail"
        assert report.reason == REASON_NO_SPLITTING

    def test_closed_geodesic_leaves_pinched_band(self, on_gamma):
        """Test that K_B = 0 keeps the form positive but leaves the band below -a^2."""
        params = QFormParams(1.5)
        report = criterion_check(on_gamma, 1, params, 200, 0)
        assert report.verdict == "fail"
        assert report.reason == REASON_BAND
        assert criterion_check(on_gamma, 1, params, 200, 0, beta=1.0).reason == REASON_BAND

        form_only = criterion_check(on_gamma, 1, params, 200, 0, pinched_band=False)
        assert form_only.passed
        assert form_only.min_form_boundary == pytest.approx(2.5, abs=1e-7)

    def test_bump_fails_only_through_band(self, bump_model):
        params = QFormParams(1.5)
        times = [0.0, 0.2, 5.0]
        report = criterion_check(bump_model, 1, params, 100, 3, times=times, refine=False)
        assert report.reason == REASON_BAND
        assert criterion_check(bump_model, 1, params, 100, 3, times=times, refine=False, pinched_band=False).passed

    def test_deterministic_across_workers(self, bump_model):
        params = QFormParams(1.5)
        times = np.linspace(0.0, 1.0, 6)
        serial = criterion_check(bump_model, 1, params, 100, 11, times=times, refine=False, workers=1)
        threaded = criterion_check(bump_model, 1, params, 100, 11, times=times, refine=False, workers=4)
        assert serial.to_dict() == threaded.to_dict()
        np.testing.assert_array_equal(serial.samples.form_value, threaded.samples.form_value)

    def test_logger_receives_summary(self, rank_one):
        class Recorder:
            def __init__(self):
                self.messages = []

            def echo(self, message, **kwargs):
                self.messages.append(message)

        recorder = Recorder()
        criterion_check(rank_one, 2, QFormParams(1.5), 20, 0, refine=False, logger=recorder)
        assert any("verdict pass" in m for m in recorder.messages)


class TestNegativeCurvature:

    def test_constant_curvature_form(self, constant):
        """Test |sigma|^2 + |eta|^2 = 1 on unit samples when K = -Id."""
        report = negative_curvature_check(constant, 100, seed=0)
        assert report.passed
        assert report.min_form_boundary == pytest.approx(1.0)
        assert report.min_form_positive == pytest.approx(1.0)
        assert report.r == 3

    def test_rank_one_passes(self, rank_one):
        assert negative_curvature_check(rank_one, 100).passed

    def test_non_negative_curvature_rejected(self):
        with pytest.raises(ParameterError, match="K < 0"):
            negative_curvature_check(_indefinite(), 10)


class TestGapFunctions:
    """Test eigenvalue-gap functions and the completed-square margin."""

    def test_rank_one_gap(self, rank_one):
        report = gap_functions(rank_one, [0.0], 2)
        assert report.alpha_inf == pytest.approx(2.0)
        assert report.beta_sup == pytest.approx(1.0)
        assert report.uniform_gap
        assert report.suggested_e == pytest.approx(1.5)

    @pytest.mark.parametrize("e", [0.9, 1.1, 1.5, 1.9, 2.5])
    def test_margin_positive(self, e):
        assert corollary_margin(2.0, 1.0, e) > 0

    @pytest.mark.parametrize("e", [0.2, 4.0])
    def test_margin_negative(self, e):
        assert corollary_margin(2.0, 1.0, e) < 0

    def test_admissible_rates(self, rank_one):
        report = gap_functions(rank_one, [0.0], 2)
        assert report.admissible(1.5)
        assert not report.admissible(0.9)
        assert not report.admissible(2.5)
        assert report.margin(1.5) == pytest.approx(RANK_ONE_MIN)

    def test_crossing_roots_have_no_uniform_gap(self, two_root_family):
        report = gap_functions(two_root_family, np.linspace(0.0, np.pi / 2, 101), 1)
        assert report.alpha_inf == pytest.approx(np.sqrt(0.5))
        assert report.beta_sup == pytest.approx(np.sqrt(0.5))
        assert not report.uniform_gap
        assert report.suggested_e is None
        assert min(row.gap for row in report.rows) < 1e-12

    def test_positive_eigenvalue_is_undefined(self):
        report = gap_functions(_indefinite(), [0.0, 1.0], 1)
        assert report.undefined == (0.0, 1.0)
        assert not report.uniform_gap
        assert report.alpha_inf == pytest.approx(1.0)

    def test_empty_samples(self, rank_one):
        with pytest.raises(ParameterError):
            gap_functions(rank_one, [], 2)


class TestCorollaryEpsilon:

    def test_positive_tolerance(self, rank_one):
        report = corollary_epsilon(rank_one, 2, QFormParams(1.5), seed=0, count=200)
        assert report.epsilon > 0
        assert report.base_min_form > 0
        assert report.margin == pytest.approx(RANK_ONE_MIN)
        assert report.to_dict()["iterations"] == len(report.trace)

    def test_tolerance_bracketed(self, rank_one):
        """Test the trace ends where the minimum form changes sign."""
        report = corollary_epsilon(rank_one, 2, QFormParams(1.5), seed=0, count=100, tol=1e-9)
        positive = [s for _, s, value in report.trace if value > 0]
        negative = [s for _, s, value in report.trace if value <= 0]
        assert max(positive, default=0.0) == pytest.approx(report.epsilon)
        assert min(negative) > report.epsilon

    def test_tolerance_shrinks_with_rate(self, rank_one):
        """Test a rate closer to alpha leaves less room for rotation of the eigenspaces."""
        slow = corollary_epsilon(rank_one, 2, QFormParams(1.5), seed=0, count=200)
        fast = corollary_epsilon(rank_one, 2, QFormParams(1.9), seed=0, count=200)
        assert 0 < fast.epsilon <= slow.epsilon

    def test_failing_base_criterion(self, rank_one):
        with pytest.raises(PreconditionError, match="criterion fails"):
            corollary_epsilon(rank_one, 2, QFormParams(4.0), seed=0, count=50)

    def test_empty_b_rejected(self, rank_one):
        with pytest.raises(ParameterError, match="nonempty B"):
            corollary_epsilon(rank_one, 3, QFormParams(1.5), seed=0, count=10)


class TestReferenceBeta:

    def test_model_default(self, rank_one, on_gamma):
        assert reference_beta(rank_one) == 1.0
        assert reference_beta(on_gamma) == 1.0

    def test_explicit_value_wins(self, rank_one):
        assert reference_beta(rank_one, 0.5) == 0.5

    def test_model_without_reference(self):
        assert reference_beta(_indefinite()) is None

    def test_invalid_beta(self, rank_one):
        with pytest.raises(ParameterError, match="beta must be positive"):
            reference_beta(rank_one, 0.0)
