#!/usr/bin/env python3
"""
Quadratic-form criterion for partial hyperbolicity of the geodesic flow.

Q^c(eta, sigma) = g(eta_A, sigma_A) - c^2 g(eta_B, eta_B) - g(sigma_B, sigma_B)
and its derivative along the flow, g~(S^c w, w). The criterion holds when the
derivative is positive on the boundary C0 and on the positive cone C+.
Split coordinates are ordered (eta_A, sigma_A, eta_B, sigma_B).
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize

from .dynamics import TangentPair, propagate_span
from .models import (
    GAP_TOL,
    CurvatureModel,
    HigherRankFamily,
    SplitSpec,
    eigen_split,
    full_split,
)
from .utils import make_rng, parallel_map
from .validate import (
    ContractViolation,
    ParameterError,
    PreconditionError,
    require_positive,
    require_symmetric,
)

BOUNDARY_TOL = 1e-12
CONE_MARGIN = 1e-12
BAND_TOL = 1e-12
SAMPLES_PER_PERIOD = 64

REASON_NO_SPLITTING = "no splitting"
REASON_BAND = "leaves pinched band"


@dataclass(frozen=True)
class QFormParams:
    """Rate c of the quadratic form Q^c."""

    c: float

    def __post_init__(self):
        object.__setattr__(self, "c", require_positive("c", self.c))


class ConeClass(str, Enum):
    BOUNDARY = "C0"
    POSITIVE = "C+"
    NEGATIVE = "C-"


@dataclass(frozen=True, eq=False)
class ConeSample:
    pair: TangentPair
    cone_class: ConeClass
    qvalue: float

    def __post_init__(self):
        q = self.qvalue
        consistent = {
            ConeClass.BOUNDARY: abs(q) <= BOUNDARY_TOL,
            ConeClass.POSITIVE: q > 0,
            ConeClass.NEGATIVE: q < 0,
        }[self.cone_class]
        if not consistent:
            raise ContractViolation(f"Q = {q:.3e} does not belong to cone class {self.cone_class.value}")


@dataclass(frozen=True, eq=False)
class SampleTable:
    """Per-sample values of a criterion run, one entry per (time, sample)."""

    t: np.ndarray
    cone_class: Tuple[str, ...]
    q_value: np.ndarray
    form_value: np.ndarray

    def rows(self) -> Iterator[Tuple[int, float, str, float, float]]:
        for i in range(len(self.cone_class)):
            yield i, float(self.t[i]), self.cone_class[i], float(self.q_value[i]), float(self.form_value[i])

    def __len__(self) -> int:
        return len(self.cone_class)


@dataclass(frozen=True, eq=False)
class CriterionReport:
    min_form_boundary: float
    min_form_positive: float
    samples_used: int
    verdict: str
    c: float
    r: int
    model: str
    argmin: Optional[TangentPair] = None
    argmin_t: float = 0.0
    reason: Optional[str] = None
    aligned_minimum: Optional[float] = None
    samples: Optional[SampleTable] = None

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {
            "min_form_boundary": self.min_form_boundary,
            "min_form_positive": self.min_form_positive,
            "samples_used": self.samples_used,
            "verdict": self.verdict,
            "params": {"c": self.c, "r": self.r, "model": self.model},
            "argmin": None if self.argmin is None else {
                "t": self.argmin_t,
                "eta": [float(x) for x in self.argmin.eta],
                "sigma": [float(x) for x in self.argmin.sigma],
            },
            "reason": self.reason,
            "aligned_minimum": self.aligned_minimum,
        }


@dataclass(frozen=True)
class GapRow:
    sample: float
    alpha: float
    beta: float
    gap: float
    defined: bool


def corollary_margin(alpha: float, beta: float, e: float) -> float:
    """2 alpha - e - beta^2 / e, the coefficient left after completing the square."""
    e = require_positive("e", e)
    return 2.0 * alpha - e - beta * beta / e


@dataclass(frozen=True, eq=False)
class GapReport:
    alpha_inf: float
    beta_sup: float
    uniform_gap: bool
    suggested_e: Optional[float]
    r: int
    rows: Tuple[GapRow, ...] = ()
    undefined: Tuple[float, ...] = ()

    def margin(self, e: float) -> float:
        return corollary_margin(self.alpha_inf, self.beta_sup, e)

    def admissible(self, e: float) -> bool:
        """Whether e lies strictly between beta_sup and alpha_inf."""
        return self.uniform_gap and self.beta_sup < e < self.alpha_inf

    def to_dict(self) -> dict:
        return {
            "alpha_inf": self.alpha_inf,
            "beta_sup": self.beta_sup,
            "uniform_gap": self.uniform_gap,
            "suggested_e": self.suggested_e,
            "r": self.r,
            "undefined_samples": list(self.undefined),
            "margin_at_suggested_e": None if self.suggested_e is None else self.margin(self.suggested_e),
        }


@dataclass(frozen=True, eq=False)
class EpsilonReport:
    epsilon: float
    base_min_form: float
    margin: Optional[float]
    blocks: int
    trace: Tuple[Tuple[int, float, float], ...] = ()

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "base_min_form": self.base_min_form,
            "margin": self.margin,
            "blocks": self.blocks,
            "iterations": len(self.trace),
        }


def _split_dims(split: SplitSpec) -> Tuple[int, int]:
    return split.r, split.dim - split.r


def _q_coords(c: float, r: int, b: int, coords: np.ndarray) -> np.ndarray:
    eta_a, sigma_a = coords[:r], coords[r:2 * r]
    eta_b, sigma_b = coords[2 * r:2 * r + b], coords[2 * r + b:]
    return (
        np.sum(eta_a * sigma_a, axis=0)
        - c * c * np.sum(eta_b * eta_b, axis=0)
        - np.sum(sigma_b * sigma_b, axis=0)
    )


def _forms(S: np.ndarray, coords: np.ndarray) -> np.ndarray:
    return np.einsum("im,ij,jm->m", coords, S, coords)


def qform_eval(params: QFormParams, split: SplitSpec, pair: TangentPair) -> float:
    """
    Evaluate Q^c at a tangent pair.

    Args:
        params: Form parameters (c)
        split: A/B decomposition of v-perp
        pair: (eta, sigma) in the parallel frame

    Returns:
        g(eta_A, sigma_A) - c^2 |eta_B|^2 - |sigma_B|^2

    Raises:
        ContractViolation: If pair and split dimensions differ
    """
    if pair.dim != split.dim:
        raise ContractViolation(f"pair has dimension {pair.dim}, split acts on {split.dim}")
    r, b = _split_dims(split)
    return float(_q_coords(params.c, r, b, split.coordinates(pair.as_vector())))


def assemble_S(params: QFormParams, K_A, K_B, aprime=None) -> np.ndarray:
    """
    Symmetric matrix S^c with d/dt Q^c = g~(S^c w, w).

    Blocks in (eta_A, sigma_A, eta_B, sigma_B) order; aprime is the B->A block
    of (P_A)', its transposes fill the mirrored positions.

    Raises:
        ContractViolation: If a curvature block is not symmetric or aprime has the wrong shape
    """
    K_A = require_symmetric("K_A", K_A)
    K_B = require_symmetric("K_B", K_B)
    r, b = K_A.shape[0], K_B.shape[0]
    X = np.zeros((r, b)) if aprime is None else np.asarray(aprime, dtype=float)
    if X.shape != (r, b):
        raise ContractViolation(f"aprime must have shape {(r, b)}, got {X.shape}")
    c2 = params.c * params.c
    zero_r = np.zeros((r, r))
    zero_b = np.zeros((b, b))
    anti = -c2 * np.eye(b) + K_B
    return np.block([
        [-K_A, zero_r, c2 * X, 0.5 * X],
        [zero_r, np.eye(r), 0.5 * X, X],
        [c2 * X.T, 0.5 * X.T, zero_b, anti],
        [0.5 * X.T, X.T, anti, zero_b],
    ])


def _blocks(split: SplitSpec, K) -> Tuple[np.ndarray, np.ndarray]:
    K = require_symmetric("K", K)
    K_A = split.basis_A.T @ K @ split.basis_A
    K_B = split.basis_B.T @ K @ split.basis_B
    return 0.5 * (K_A + K_A.T), 0.5 * (K_B + K_B.T)


def criterion_matrix(params: QFormParams, split: SplitSpec, K) -> np.ndarray:
    K_A, K_B = _blocks(split, K)
    return assemble_S(params, K_A, K_B, split.aprime)


def form_derivative(params: QFormParams, split: SplitSpec, K, pair: TangentPair) -> float:
    """d/dt Q^c at pair, with K_A = P_A K P_A and K_B = P_B K P_B."""
    if pair.dim != split.dim:
        raise ContractViolation(f"pair has dimension {pair.dim}, split acts on {split.dim}")
    S = criterion_matrix(params, split, K)
    w = split.coordinates(pair.as_vector())
    return float(w @ S @ w)


SplitRule = Union[SplitSpec, Callable[[float], SplitSpec]]


def _split_at(split_rule: SplitRule, t: float) -> SplitSpec:
    return split_rule if isinstance(split_rule, SplitSpec) else split_rule(t)


def fd_derivative_oracle(
    model: CurvatureModel,
    split_rule: SplitRule,
    params: QFormParams,
    pair: TangentPair,
    h: float = 1e-4,
    step: Optional[float] = None,
    t0: float = 0.0,
) -> float:
    """
    Central finite difference of t -> Q^c(flow_t(pair)) at t0.

    Independent check of form_derivative: the flow comes from the integrator,
    not from S^c. Agrees with form_derivative to O(h^2) when the split is
    parallel and K is block-diagonal in it.
    """
    h = require_positive("h", h)
    step = h if step is None else step
    forward = propagate_span(model, pair, t0, t0 + h, step)
    backward = propagate_span(model, pair, t0, t0 - h, step)
    q_forward = qform_eval(params, _split_at(split_rule, t0 + h), forward)
    q_backward = qform_eval(params, _split_at(split_rule, t0 - h), backward)
    return (q_forward - q_backward) / (2.0 * h)


def _draw_unit(rng: np.random.Generator, dim2: int, count: int) -> np.ndarray:
    draws = rng.standard_normal((dim2, count))
    return draws / np.linalg.norm(draws, axis=0)


def _sample_coords(
    c: float,
    r: int,
    b: int,
    count: int,
    rng: np.random.Generator,
    cone_class: ConeClass,
) -> np.ndarray:
    """
    Cone samples in split coordinates, one column each.

    Draws are unit vectors. Boundary samples are projected onto C0 by scaling
    the B part, then rescaled to g(eta_A, sigma_A) = 1 (unit norm when B is
    empty). Positive and negative samples are pushed into their cone the
    same way and renormalized to unit norm. Degenerate draws are redrawn.
    """
    if count < 1:
        raise ParameterError(f"count must be at least 1, got {count}")
    if r == 0 and cone_class != ConeClass.NEGATIVE:
        raise ParameterError(f"cone class {cone_class.value} is empty when A = 0")
    dim2 = 2 * (r + b)
    out = np.empty((dim2, count))
    pending = np.arange(count)
    while pending.size:
        W = _draw_unit(rng, dim2, pending.size)
        tau = rng.uniform(0.0, 1.0, pending.size)
        eta_a, sigma_a = W[:r], W[r:2 * r]
        pairing = np.sum(eta_a * sigma_a, axis=0)
        b_energy = c * c * np.sum(W[2 * r:2 * r + b] ** 2, axis=0) + np.sum(W[2 * r + b:] ** 2, axis=0)

        if cone_class == ConeClass.BOUNDARY:
            if b == 0:
                eta_norm2 = np.sum(eta_a * eta_a, axis=0)
                with np.errstate(divide="ignore", invalid="ignore"):
                    sigma_a -= eta_a * (pairing / eta_norm2)
                W /= np.linalg.norm(W, axis=0)
            else:
                sigma_a *= np.where(pairing < 0, -1.0, 1.0)
                pairing = np.abs(pairing)
                with np.errstate(divide="ignore", invalid="ignore"):
                    W[2 * r:] *= np.sqrt(pairing / b_energy)
                    W /= np.sqrt(pairing)
        elif cone_class == ConeClass.POSITIVE:
            sigma_a *= np.where(pairing < 0, -1.0, 1.0)
            pairing = np.abs(pairing)
            if b:
                inside = pairing - b_energy > 0
                with np.errstate(divide="ignore", invalid="ignore"):
                    scale = np.where(inside, 1.0, tau * np.sqrt(pairing / b_energy))
                W[2 * r:] *= scale
            W /= np.linalg.norm(W, axis=0)
        else:
            if b == 0:
                sigma_a *= np.where(pairing > 0, -1.0, 1.0)
            else:
                outside = pairing - b_energy < 0
                with np.errstate(divide="ignore", invalid="ignore"):
                    scale = np.where(outside, 1.0, (1.5 + tau) * np.sqrt(np.abs(pairing) / b_energy))
                W[2 * r:] *= scale
            W /= np.linalg.norm(W, axis=0)

        finite = np.all(np.isfinite(W), axis=0)
        q = np.where(finite, _q_coords(c, r, b, np.where(finite, W, 0.0)), np.nan)
        if cone_class == ConeClass.BOUNDARY:
            ok = finite & (np.abs(q) <= BOUNDARY_TOL)
        elif cone_class == ConeClass.POSITIVE:
            ok = finite & (q > CONE_MARGIN)
        else:
            ok = finite & (q < -CONE_MARGIN)
        out[:, pending[ok]] = W[:, ok]
        pending = pending[~ok]
    return out


def cone_sample(
    params: QFormParams,
    split: SplitSpec,
    count: int,
    seed: int,
    cone_class: ConeClass,
) -> List[ConeSample]:
    """
    Draw deterministic samples of a cone of Q^c.

    Args:
        params: Form parameters
        split: A/B decomposition
        count: Number of samples, >= 1
        seed: RNG seed; identical seeds give identical samples
        cone_class: BOUNDARY, POSITIVE or NEGATIVE

    Returns:
        List of ConeSample whose qvalue matches cone_class

    Raises:
        ParameterError: If count < 1 or the class is empty for this split
    """
    cone_class = ConeClass(cone_class)
    r, b = _split_dims(split)
    coords = _sample_coords(params.c, r, b, count, make_rng(seed), cone_class)
    samples = []
    for column in coords.T:
        pair = TangentPair.from_vector(split.to_frame(column))
        samples.append(ConeSample(pair, cone_class, float(_q_coords(params.c, r, b, column))))
    return samples


def sample_times(model: CurvatureModel, times: Optional[Sequence[float]] = None) -> Tuple[float, ...]:
    """Times along the orbit at which pointwise checks are made."""
    if times is not None:
        times = tuple(float(t) for t in times)
        if not times:
            raise ParameterError("at least one sample time is required")
        return times
    if model.constant or model.period is None:
        return (0.0,)
    return tuple(float(t) for t in np.linspace(0.0, model.period, SAMPLES_PER_PERIOD, endpoint=False))


def _check_set(c: float, r: int, b: int, count: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    rng = make_rng(seed)
    boundary = _sample_coords(c, r, b, count, rng, ConeClass.BOUNDARY)
    positive = _sample_coords(c, r, b, count, rng, ConeClass.POSITIVE)
    return boundary, positive


def aligned_family_minimum(
    model: CurvatureModel,
    split: SplitSpec,
    params: QFormParams,
    t: float = 0.0,
) -> Tuple[float, TangentPair]:
    """
    Brute-force minimum of the form over the aligned family on C0.

    The family puts eta_A along the weakest A eigendirection, tilts sigma_A
    towards the next one, and aligns eta_B, sigma_B with the B eigendirection
    of largest |K_B - c^2|. With g(eta_A, sigma_A) = 1 it has three parameters
    (log A-ratio, A-angle, B-angle). A grid scan is refined with Nelder-Mead.
    For block-diagonal K and A' = 0 this is the exact minimum over C0, e.g.
    4a - c - a^2/c for the rank-one model.

    Returns:
        (minimum value, minimizing pair in the parallel frame)
    """
    r, b = _split_dims(split)
    if r == 0:
        raise ParameterError("aligned family needs A != 0")
    c = params.c
    K = model.operator(t)
    S = criterion_matrix(params, split, K)
    K_A, K_B = _blocks(split, K)
    a_values, a_vectors = np.linalg.eigh(K_A)
    u1 = a_vectors[:, -1]
    u2 = a_vectors[:, -2] if r >= 2 else np.zeros(r)
    if b:
        b_values, b_vectors = np.linalg.eigh(K_B)
        u_b = b_vectors[:, int(np.argmax(np.abs(b_values - c * c)))]
    else:
        u_b = np.zeros(0)
    phi_limit = np.pi / 2 - 1e-6

    def coords(theta: np.ndarray) -> np.ndarray:
        theta = np.atleast_2d(theta)
        rho = np.exp(np.clip(theta[:, 0], -8.0, 8.0))
        phi = np.clip(theta[:, 1], -phi_limit, phi_limit) if r >= 2 else np.zeros(len(theta))
        psi = theta[:, 2]
        eta_a = np.outer(u1, rho)
        sigma_a = (np.outer(u1, np.cos(phi)) + np.outer(u2, np.sin(phi))) / (rho * np.cos(phi))
        eta_b = np.outer(u_b, np.cos(psi) / c)
        sigma_b = np.outer(u_b, np.sin(psi))
        return np.vstack([eta_a, sigma_a, eta_b, sigma_b])

    rho_grid = np.linspace(-3.0, 3.0, 61)
    phi_grid = np.linspace(-1.4, 1.4, 29) if r >= 2 else np.zeros(1)
    psi_grid = np.linspace(-np.pi, np.pi, 73) if b else np.zeros(1)
    grid = np.array(np.meshgrid(rho_grid, phi_grid, psi_grid, indexing="ij")).reshape(3, -1).T
    values = _forms(S, coords(grid))
    start = grid[int(np.argmin(values))]

    result = minimize(
        lambda theta: float(_forms(S, coords(theta))[0]),
        start,
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 20000, "maxfev": 20000},
    )
    best = result.x if result.fun < values.min() else start
    best_coords = coords(best)[:, 0]
    value = float(min(result.fun, values.min()))
    return value, TangentPair.from_vector(split.to_frame(best_coords))


def _report(
    params: QFormParams,
    r: int,
    model: CurvatureModel,
    evaluations: Sequence[dict],
    count: int,
    reason: Optional[str],
    aligned: Optional[float],
) -> CriterionReport:
    boundary_min = min(ev["boundary_min"] for ev in evaluations)
    if aligned is not None:
        boundary_min = min(boundary_min, aligned)
    positive_min = min(ev["positive_min"] for ev in evaluations)
    worst = min(evaluations, key=lambda ev: ev["worst"])
    passed = reason is None and boundary_min > 0 and positive_min > 0
    table = SampleTable(
        t=np.concatenate([ev["t"] for ev in evaluations]),
        cone_class=tuple(cls for ev in evaluations for cls in ev["classes"]),
        q_value=np.concatenate([ev["q"] for ev in evaluations]),
        form_value=np.concatenate([ev["forms"] for ev in evaluations]),
    )
    return CriterionReport(
        min_form_boundary=float(boundary_min),
        min_form_positive=float(positive_min),
        samples_used=len(table),
        verdict="pass" if passed else "fail",
        c=params.c,
        r=r,
        model=model.name,
        argmin=worst["argmin"],
        argmin_t=worst["time"],
        reason=reason,
        aligned_minimum=aligned,
        samples=table,
    )


def _evaluate(S: np.ndarray, split: SplitSpec, boundary: np.ndarray, positive: np.ndarray, t: float, c: float) -> dict:
    r, b = _split_dims(split)
    f_boundary = _forms(S, boundary)
    f_positive = _forms(S, positive)
    forms = np.concatenate([f_boundary, f_positive])
    coords = np.hstack([boundary, positive])
    k = int(np.argmin(forms))
    return {
        "time": t,
        "boundary_min": float(f_boundary.min()),
        "positive_min": float(f_positive.min()),
        "worst": float(forms[k]),
        "argmin": TangentPair.from_vector(split.to_frame(coords[:, k])),
        "t": np.full(forms.size, t),
        "classes": (ConeClass.BOUNDARY.value,) * boundary.shape[1] + (ConeClass.POSITIVE.value,) * positive.shape[1],
        "q": _q_coords(c, r, b, coords),
        "forms": forms,
    }


def reference_beta(model: CurvatureModel, beta: Optional[float] = None) -> Optional[float]:
    """Explicit beta if given, else the model's reference rate (None when it has none)."""
    if beta is not None:
        return require_positive("beta", beta)
    value = model.metadata.get("reference_beta")
    return None if value is None else float(value)


def negative_curvature_check(
    model: CurvatureModel,
    count: int,
    seed: int = 0,
    times: Optional[Sequence[float]] = None,
    logger=None,
) -> CriterionReport:
    """
    Hyperbolicity check with the degenerate form Q(eta, sigma) = g(eta, sigma).

    A is all of v-perp and there is no B part, so the derivative is
    |sigma|^2 - g(K eta, eta) >= |sigma|^2 + a^2 |eta|^2.

    Raises:
        ParameterError: If the model has a non-negative curvature eigenvalue
    """
    params = QFormParams(1.0)
    dim = model.frame_dim
    split = full_split(dim)
    boundary, positive = _check_set(params.c, dim, 0, count, seed)
    evaluations = []
    for t in sample_times(model, times):
        K = model.operator(t)
        if np.max(np.linalg.eigvalsh(K)) >= 0:
            raise ParameterError(f"negative curvature check needs K < 0, failed at t={t}")
        S = assemble_S(params, K, np.zeros((0, 0)))
        evaluations.append(_evaluate(S, split, boundary, positive, t, params.c))
    report = _report(params, dim, model, evaluations, count, None, None)
    if logger:
        logger.echo(f"Negative curvature check: min boundary {report.min_form_boundary:.6g}, verdict {report.verdict}")
    return report


def criterion_check(
    model: CurvatureModel,
    r: int,
    params: QFormParams,
    count: int,
    seed: int,
    times: Optional[Sequence[float]] = None,
    beta: Optional[float] = None,
    pinched_band: bool = True,
    refine: bool = True,
    workers: Optional[int] = None,
    logger=None,
) -> CriterionReport:
    """
    Check positivity of d/dt Q^c on sampled C0 and C+ along the orbit.

    At every sample time the split comes from eigen_split(K(t), r). A zero
    eigenvalue gap fails the check with reason "no splitting". A B eigenvalue
    above -beta^2 fails it with reason "leaves pinched band"; beta defaults to
    the model's reference rate. With refine, the aligned-family minimum is
    folded into the verdict.

    Args:
        model: Curvature model
        r: Dimension of A
        params: Form parameters
        count: Samples per cone
        seed: Sampling seed
        times: Sample times along the orbit (default: 0, or a grid over one period)
        beta: Rate for the pinched-band test (default: model reference_beta)
        pinched_band: Set False to check the form alone, without the band test
        refine: Also run aligned_family_minimum
        workers: Thread count for per-time evaluation
        logger: Optional Logger

    Returns:
        CriterionReport; verdict pass iff both sampled minima (and the
        aligned minimum, when computed) are positive and no reason was raised
    """
    dim = model.frame_dim
    b = dim - r
    boundary, positive = _check_set(params.c, r, b, count, seed)
    ts = sample_times(model, times)
    band_beta = reference_beta(model, beta) if pinched_band else None

    def evaluate_at(t: float) -> dict:
        split_t = eigen_split(model.operator(t), r)
        S = criterion_matrix(params, split_t.split, model.operator(t))
        ev = _evaluate(S, split_t.split, boundary, positive, t, params.c)
        ev["degenerate"] = split_t.degenerate
        ev["band"] = band_beta is not None and b > 0 and split_t.eigenvalues[r] > -band_beta * band_beta + BAND_TOL
        if refine:
            ev["aligned"] = aligned_family_minimum(model, split_t.split, params, t)
        return ev

    evaluations = parallel_map(evaluate_at, ts, workers)
    reason = None
    if any(ev["degenerate"] for ev in evaluations):
        reason = REASON_NO_SPLITTING
    elif any(ev["band"] for ev in evaluations):
        reason = REASON_BAND
    aligned = None
    if refine:
        worst = min(evaluations, key=lambda ev: ev["aligned"][0])
        aligned = worst["aligned"][0]
        if aligned < worst["worst"]:
            worst["worst"] = aligned
            worst["argmin"] = worst["aligned"][1]
    report = _report(params, r, model, evaluations, count, reason, aligned)
    if logger:
        logger.echo(
            f"Criterion c={params.c:g}, r={r}: min C0 {report.min_form_boundary:.6g}, "
            f"min C+ {report.min_form_positive:.6g}, verdict {report.verdict}"
            + (f" ({reason})" if reason else "")
        )
    return report


ModelFamily = Union[CurvatureModel, HigherRankFamily]


def _operator_at(family: ModelFamily, sample: float) -> np.ndarray:
    if isinstance(family, HigherRankFamily):
        return family.at(sample).operator(0.0)
    return family.operator(sample)


def gap_functions(model_family: ModelFamily, samples: Sequence[float], r: int) -> GapReport:
    """
    Eigenvalue-gap functions alpha = sqrt(-lambda_(r)), beta = sqrt(-lambda_(r+1)).

    Samples are times along the orbit for a CurvatureModel, or direction
    parameters s for a HigherRankFamily. A positive eigenvalue leaves alpha
    or beta undefined at that sample and rules out a uniform gap.

    Raises:
        ParameterError: If samples is empty
    """
    samples = [float(s) for s in samples]
    if not samples:
        raise ParameterError("gap_functions needs at least one sample")
    rows = []
    for sample in samples:
        split = eigen_split(_operator_at(model_family, sample), r)
        lam_r, lam_next = split.eigenvalues[r - 1], split.eigenvalues[r]
        alpha = float(np.sqrt(-lam_r)) if lam_r <= 0 else float("nan")
        beta = float(np.sqrt(-lam_next)) if lam_next <= 0 else float("nan")
        rows.append(GapRow(sample, alpha, beta, split.gap, bool(np.isfinite(alpha) and np.isfinite(beta))))

    undefined = tuple(row.sample for row in rows if not row.defined)
    alphas = [row.alpha for row in rows if np.isfinite(row.alpha)]
    betas = [row.beta for row in rows if np.isfinite(row.beta)]
    alpha_inf = float(min(alphas)) if alphas else float("nan")
    beta_sup = float(max(betas)) if betas else float("nan")
    uniform = not undefined and alpha_inf - beta_sup > GAP_TOL
    return GapReport(
        alpha_inf=alpha_inf,
        beta_sup=beta_sup,
        uniform_gap=bool(uniform),
        suggested_e=0.5 * (alpha_inf + beta_sup) if uniform else None,
        r=r,
        rows=tuple(rows),
        undefined=undefined,
    )


def _random_aprime_blocks(r: int, b: int, count: int, seed: int) -> List[np.ndarray]:
    rng = make_rng(seed, stream=1)
    blocks = []
    for _ in range(count):
        block = rng.standard_normal((r, b))
        blocks.append(block / np.linalg.norm(block, 2))
    return blocks


def corollary_epsilon(
    model: CurvatureModel,
    r: int,
    params: QFormParams,
    seed: int,
    count: int,
    blocks: int = 8,
    times: Optional[Sequence[float]] = None,
    tol: float = 1e-6,
    max_iter: int = 200,
    logger=None,
) -> EpsilonReport:
    """
    Estimate the tolerance on ||A'|| below which the criterion still holds.

    Random unit-norm B->A blocks scaled by s are injected into S^c; epsilon is
    the largest s for which the minimum form over the C0 and C+ samples
    stays positive, for the worst of the blocks. The minimum is concave in s,
    so bisection on a doubling bracket converges.

    Raises:
        PreconditionError: If the criterion fails with A' = 0
        ParameterError: If B is empty
    """
    dim = model.frame_dim
    b = dim - r
    if b < 1:
        raise ParameterError("corollary_epsilon needs a nonempty B")
    base = criterion_check(model, r, params, count, seed, times=times)
    if not base.passed:
        detail = base.reason or f"min form {min(base.min_form_boundary, base.min_form_positive):.6g}"
        raise PreconditionError(f"criterion fails with A' = 0 ({detail})")
    boundary, positive = _check_set(params.c, r, b, count, seed)
    coords = np.hstack([boundary, positive])
    aprimes = _random_aprime_blocks(r, b, blocks, seed)
    base_values = []
    slopes = []
    for t in sample_times(model, times):
        K_A, K_B = _blocks(eigen_split(model.operator(t), r).split, model.operator(t))
        S0 = assemble_S(params, K_A, K_B)
        f0 = _forms(S0, coords)
        for block in aprimes:
            dS = assemble_S(params, K_A, K_B, block) - S0
            base_values.append(f0)
            slopes.append(_forms(dS, coords))
    base_values = np.array(base_values)
    slopes = np.array(slopes)

    def min_form(s: float) -> float:
        return float(np.min(base_values + s * slopes))

    trace = []
    lo, hi = 0.0, max(min_form(0.0), 1e-3)
    iteration = 0
    while min_form(hi) > 0 and iteration < max_iter:
        trace.append((iteration, hi, min_form(hi)))
        lo, hi = hi, 2.0 * hi
        iteration += 1
    if min_form(hi) > 0:
        epsilon = hi
    else:
        while hi - lo > tol * max(1.0, hi) and iteration < max_iter:
            mid = 0.5 * (lo + hi)
            value = min_form(mid)
            trace.append((iteration, mid, value))
            if value > 0:
                lo = mid
            else:
                hi = mid
            iteration += 1
        epsilon = lo

    gaps = gap_functions(model, sample_times(model, times), r)
    margin = gaps.margin(params.c) if np.isfinite(gaps.alpha_inf) and np.isfinite(gaps.beta_sup) else None
    if logger:
        logger.echo(f"Corollary tolerance at c={params.c:g}: epsilon = {epsilon:.6g}")
    return EpsilonReport(
        epsilon=float(epsilon),
        base_min_form=float(min(base.min_form_boundary, base.min_form_positive)),
        margin=margin,
        blocks=blocks,
        trace=tuple(trace),
    )
