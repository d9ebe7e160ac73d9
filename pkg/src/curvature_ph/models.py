#!/usr/bin/env python3
"""
Curvature-operator models along geodesics.

Every model is a rule t -> K(t), the Jacobi operator R(v, .)v restricted to
v-perp and written in a parallel orthonormal frame of v-perp. For locally
symmetric spaces the curvature tensor is parallel, so K is constant along
the geodesic; the conformally perturbed scenario varies K along the orbit.
"""

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Callable, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .validate import (
    ContractViolation,
    NumericError,
    ParameterError,
    require_positive,
    require_symmetric,
    require_unit,
)

GAP_TOL = 1e-12
GRAM_TOL = 1e-12


def _frozen(matrix) -> np.ndarray:
    arr = np.array(matrix, dtype=float)
    arr.setflags(write=False)
    return arr


def _check_dim(n) -> int:
    if int(n) != n or n < 3:
        raise ParameterError(f"manifold dimension n must be an integer >= 3, got {n}")
    return int(n)


def _check_split_rank(r, n: int) -> int:
    if int(r) != r or not 1 <= r <= n - 2:
        raise ParameterError(f"r must satisfy 1 <= r <= n-2 = {n - 2}, got {r}")
    return int(r)


@dataclass(frozen=True, eq=False)
class CurvatureModel:
    """Symmetric Jacobi operator K(t) along a geodesic, in a parallel frame."""

    name: str
    dim_n: int
    operator_rule: Callable[[float], np.ndarray]
    metadata: Mapping[str, Any] = field(default_factory=dict)
    lipschitz: float = 0.0
    period: Optional[float] = None
    constant: bool = False

    def __post_init__(self):
        object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))

    @property
    def frame_dim(self) -> int:
        return self.dim_n - 1

    def operator(self, t: float = 0.0) -> np.ndarray:
        return self.operator_rule(float(t))

    def eigenvalues(self, t: float = 0.0) -> np.ndarray:
        return np.linalg.eigvalsh(self.operator(t))

    def curvature_range(self, ts: Iterable[float] = (0.0,)) -> Tuple[float, float]:
        """Smallest and largest sectional curvature against eigen-directions."""
        spectra = np.concatenate([self.eigenvalues(t) for t in ts])
        return float(spectra.min()), float(spectra.max())

    def check(self, ts: Sequence[float], step: float = 1e-3) -> None:
        """
        Verify symmetry and declared continuity of K at sample times.

        Args:
            ts: Sample times
            step: Finite-difference step for the continuity bound

        Raises:
            ContractViolation: If K(t) is not symmetric, has the wrong shape,
                or changes faster than the declared Lipschitz constant
        """
        for t in ts:
            k_now = require_symmetric(f"K({t})", self.operator(t), tol=0.0)
            if k_now.shape != (self.frame_dim, self.frame_dim):
                raise ContractViolation(f"K({t}) has shape {k_now.shape}, expected n-1 = {self.frame_dim}")
            jump = np.max(np.abs(self.operator(t + step) - k_now))
            if jump > self.lipschitz * step * (1 + 1e-9) + 1e-15:
                raise ContractViolation(f"K jumps by {jump:.3e} over step {step} at t={t}")


@dataclass(frozen=True, eq=False)
class SplitSpec:
    """
    Orthogonal decomposition v-perp = A + B with the projection derivative.

    basis_A and basis_B hold orthonormal frame vectors as columns; aprime is
    the B->A block of (P_A)' in those bases. Split coordinates are ordered
    (eta_A, sigma_A, eta_B, sigma_B).
    """

    basis_A: np.ndarray
    basis_B: np.ndarray
    aprime: Optional[np.ndarray] = None

    def __post_init__(self):
        basis_a = np.atleast_2d(np.asarray(self.basis_A, dtype=float))
        dim = basis_a.shape[0]
        basis_b = np.asarray(self.basis_B, dtype=float)
        if basis_b.size == 0:
            basis_b = np.zeros((dim, 0))
        r = basis_a.shape[1]
        aprime = np.zeros((r, dim - r)) if self.aprime is None else np.asarray(self.aprime, dtype=float)
        if basis_b.shape[1] != dim - r:
            raise ContractViolation(f"bases span {r + basis_b.shape[1]} directions, frame has {dim}")
        if aprime.shape != (r, dim - r):
            raise ContractViolation(f"aprime must have shape {(r, dim - r)}, got {aprime.shape}")
        gram = np.hstack([basis_a, basis_b])
        if np.max(np.abs(gram.T @ gram - np.eye(dim))) > GRAM_TOL:
            raise ContractViolation("split bases are not orthonormal")
        object.__setattr__(self, "basis_A", _frozen(basis_a))
        object.__setattr__(self, "basis_B", _frozen(basis_b))
        object.__setattr__(self, "aprime", _frozen(aprime))
        zero = np.zeros((dim, dim - r))
        zero_a = np.zeros((dim, r))
        transform = np.block([
            [basis_a.T, zero_a.T],
            [zero_a.T, basis_a.T],
            [basis_b.T, zero.T],
            [zero.T, basis_b.T],
        ])
        object.__setattr__(self, "_transform", _frozen(transform))

    @property
    def r(self) -> int:
        return self.basis_A.shape[1]

    @property
    def dim(self) -> int:
        return self.basis_A.shape[0]

    @property
    def proj_A(self) -> np.ndarray:
        return self.basis_A @ self.basis_A.T

    @property
    def proj_B(self) -> np.ndarray:
        return self.basis_B @ self.basis_B.T

    def full_aprime(self) -> np.ndarray:
        """(P_A)' on the whole frame, rebuilt from its B->A block."""
        block = self.basis_A @ self.aprime @ self.basis_B.T
        return block + block.T

    def projection_identity_defect(self) -> float:
        """max |P_A (P_A)' - (P_A)' P_B|, zero for a consistent A'."""
        full = self.full_aprime()
        return float(np.max(np.abs(self.proj_A @ full - full @ self.proj_B), initial=0.0))

    def coordinates(self, frame_vectors: np.ndarray) -> np.ndarray:
        """Map stacked (eta; sigma) frame vectors (2D or 2D x m) to split coordinates."""
        return self._transform @ frame_vectors

    def to_frame(self, coords: np.ndarray) -> np.ndarray:
        return self._transform.T @ coords

    def with_aprime(self, aprime: np.ndarray) -> "SplitSpec":
        return SplitSpec(self.basis_A, self.basis_B, aprime)

    def rebased(self, rot_A: np.ndarray, rot_B: np.ndarray) -> "SplitSpec":
        """Same subspaces, bases rotated by orthogonal rot_A and rot_B."""
        return SplitSpec(
            self.basis_A @ rot_A,
            self.basis_B @ rot_B,
            rot_A.T @ self.aprime @ rot_B,
        )


def full_split(dim: int) -> SplitSpec:
    """A = all of v-perp, B empty: the negative-curvature variant."""
    return SplitSpec(np.eye(dim), np.zeros((dim, 0)))


@dataclass(frozen=True, eq=False)
class EigenSplit:
    split: SplitSpec
    eigenvalues: np.ndarray
    gap: float

    @property
    def degenerate(self) -> bool:
        return self.gap <= GAP_TOL


def eigen_split(K, r: int) -> EigenSplit:
    """
    Split v-perp by the eigenvalues of K, most negative first.

    A is spanned by eigenvectors of the r most negative eigenvalues, B by the
    rest. The gap lambda_(r+1) - lambda_(r) is reported even when it is zero;
    callers treat a zero gap as "no splitting".

    Args:
        K: Symmetric Jacobi operator
        r: Dimension of A

    Returns:
        EigenSplit with aprime = 0 and ascending eigenvalues

    Raises:
        ContractViolation: If K is not symmetric
        ParameterError: If r is out of range
        NumericError: If the eigen-solver fails
    """
    K = require_symmetric("K", K)
    dim = K.shape[0]
    if int(r) != r or not 1 <= r <= dim - 1:
        raise ParameterError(f"r must satisfy 1 <= r <= {dim - 1}, got {r}")
    try:
        values, vectors = np.linalg.eigh(K)
    except np.linalg.LinAlgError as e:
        raise NumericError(f"eigen-decomposition failed: {e}")
    split = SplitSpec(vectors[:, :r], vectors[:, r:])
    gap = max(float(values[r] - values[r - 1]), 0.0)
    return EigenSplit(split=split, eigenvalues=_frozen(values), gap=gap)


def constant_curvature_model(a: float, n: int) -> CurvatureModel:
    """Constant sectional curvature -a^2: K(t) = -a^2 Id."""
    a = require_positive("a", a)
    n = _check_dim(n)
    K = _frozen(-a * a * np.eye(n - 1))
    return CurvatureModel(
        name="constant",
        dim_n=n,
        operator_rule=lambda t: K,
        metadata={"a": a, "reference_beta": a},
        constant=True,
    )


def rank_one_symmetric_model(a: float, n: int, r: int) -> CurvatureModel:
    """
    Rank-one locally symmetric space with curvature in [-4a^2, -a^2].

    Args:
        a: Curvature scale (1/length)
        n: Manifold dimension
        r: Dimension of A, the -4a^2 eigenspace

    Returns:
        Constant model K = diag(-4a^2 Id_r, -a^2 Id_{n-1-r})

    Raises:
        ParameterError: If a <= 0, n < 3 or r is outside [1, n-2]
    """
    a = require_positive("a", a)
    n = _check_dim(n)
    r = _check_split_rank(r, n)
    diag = np.concatenate([np.full(r, -4 * a * a), np.full(n - 1 - r, -a * a)])
    K = _frozen(np.diag(diag))
    return CurvatureModel(
        name="rank_one",
        dim_n=n,
        operator_rule=lambda t: K,
        metadata={"a": a, "r": r, "reference_beta": a},
        constant=True,
    )


@dataclass(frozen=True)
class RootDatum:
    """A root: linear functional on the flat with its multiplicity."""

    covector: Tuple[float, ...]
    multiplicity: int = 1

    def __post_init__(self):
        covector = tuple(float(x) for x in np.ravel(self.covector))
        if not covector or not any(covector):
            raise ParameterError("root covector must be nonzero")
        if int(self.multiplicity) != self.multiplicity or self.multiplicity < 1:
            raise ParameterError(f"root multiplicity must be a positive integer, got {self.multiplicity}")
        object.__setattr__(self, "covector", covector)
        object.__setattr__(self, "multiplicity", int(self.multiplicity))

    def __call__(self, direction) -> float:
        return float(np.dot(self.covector, direction))


@dataclass(frozen=True)
class DirectionPath:
    """Great-circle path of unit directions, parametrized by angle s in [0, span]."""

    start: Tuple[float, ...]
    end: Tuple[float, ...]

    def __post_init__(self):
        start = np.asarray(self.start, dtype=float)
        end = np.asarray(self.end, dtype=float)
        if start.shape != end.shape or start.ndim != 1:
            raise ParameterError("path endpoints must be vectors of equal length")
        if not np.linalg.norm(start) or not np.linalg.norm(end):
            raise ParameterError("path endpoints must be nonzero")
        e1 = start / np.linalg.norm(start)
        target = end / np.linalg.norm(end)
        if np.dot(target, e1) < 0 and np.linalg.norm(target - np.dot(target, e1) * e1) < 1e-15:
            raise ParameterError("path endpoints are antipodal, the great circle through them is not unique")
        object.__setattr__(self, "start", tuple(start))
        object.__setattr__(self, "end", tuple(end))

    def _plane(self) -> Tuple[np.ndarray, np.ndarray, float]:
        e1 = np.asarray(self.start) / np.linalg.norm(self.start)
        target = np.asarray(self.end) / np.linalg.norm(self.end)
        ortho = target - np.dot(target, e1) * e1
        norm = np.linalg.norm(ortho)
        if norm < 1e-15:
            return e1, np.zeros_like(e1), 0.0
        return e1, ortho / norm, float(np.arctan2(norm, np.dot(target, e1)))

    @property
    def span(self) -> float:
        return self._plane()[2]

    def __call__(self, s: float) -> np.ndarray:
        e1, e2, _ = self._plane()
        return np.cos(s) * e1 + np.sin(s) * e2


@dataclass(frozen=True, eq=False)
class HigherRankFamily:
    """
    Jacobi operators of a rank >= 2 symmetric space along directions X(s).

    Each root contributes eigenvalue -alpha(X)^2 with its multiplicity; the
    flat contributes rank-1 zero eigenvalues.
    """

    roots: Tuple[RootDatum, ...]
    rank: int
    direction_path: Callable[[float], np.ndarray]

    @property
    def dim_n(self) -> int:
        return sum(root.multiplicity for root in self.roots) + self.rank

    def direction(self, s: float) -> np.ndarray:
        X = np.asarray(self.direction_path(s), dtype=float)
        norm = np.linalg.norm(X)
        if X.shape != (self.rank,):
            raise ParameterError(f"direction must have {self.rank} components, got shape {X.shape}")
        if norm < 1e-15:
            raise ParameterError(f"zero direction vector at s={s}")
        return X / norm

    def block_eigenvalues(self, s: float) -> np.ndarray:
        """-alpha_i(X(s))^2 per root, in root order (not sorted)."""
        X = self.direction(s)
        return np.array([-root(X) ** 2 for root in self.roots])

    def at(self, s: float) -> CurvatureModel:
        blocks = self.block_eigenvalues(s)
        diag = np.concatenate(
            [np.full(root.multiplicity, value) for root, value in zip(self.roots, blocks)]
            + [np.zeros(self.rank - 1)]
        )
        K = _frozen(np.diag(diag))
        return CurvatureModel(
            name="higher_rank",
            dim_n=self.dim_n,
            operator_rule=lambda t: K,
            metadata={"s": float(s), "direction": tuple(self.direction(s)), "rank": self.rank},
            constant=True,
        )

    def locate_crossings(self, ss: Sequence[float], i: int = 0, j: int = 1) -> List[float]:
        """
        Directions where root blocks i and j exchange order.

        Scans the grid for sign changes of alpha_j(X)^2 - alpha_i(X)^2 and
        refines each bracket with brentq.
        """
        def diff(s):
            values = self.block_eigenvalues(s)
            return float(values[i] - values[j])

        ss = list(ss)
        signs = [diff(s) for s in ss]
        crossings = []
        for k in range(len(ss) - 1):
            if signs[k] == 0.0:
                crossings.append(float(ss[k]))
            elif signs[k] * signs[k + 1] < 0:
                crossings.append(float(brentq(diff, ss[k], ss[k + 1], xtol=1e-14)))
        if ss and signs[-1] == 0.0:
            crossings.append(float(ss[-1]))
        return crossings


def higher_rank_model(roots: Sequence[RootDatum], rank: int, direction_path: Callable[[float], np.ndarray]) -> HigherRankFamily:
    """
    Build the family of Jacobi operators for a higher-rank symmetric space.

    Args:
        roots: Root data (covector on the flat, multiplicity)
        rank: Dimension k of the flat, at least 2
        direction_path: s -> X(s), direction in the flat

    Returns:
        HigherRankFamily; family.at(s) is the constant model along X(s)

    Raises:
        ParameterError: On empty roots, rank < 2 or covector length mismatch
    """
    roots = tuple(roots)
    if int(rank) != rank or rank < 2:
        raise ParameterError(f"rank must be an integer >= 2, got {rank}")
    if not roots:
        raise ParameterError("at least one root is required")
    for root in roots:
        if len(root.covector) != rank:
            raise ParameterError(f"root covector {root.covector} does not live on a rank-{rank} flat")
    family = HigherRankFamily(roots=roots, rank=int(rank), direction_path=direction_path)
    _check_dim(family.dim_n)
    return family


def orthogonal_frame(v) -> np.ndarray:
    """
    Orthonormal basis of v-perp as columns of an n x (n-1) matrix.

    Uses the Householder reflection taking e_0 to v, so for v = e_0 the
    frame is (e_1, ..., e_{n-1}).
    """
    v = np.asarray(v, dtype=float)
    n = v.size
    u = np.eye(n)[0] - v
    norm2 = float(u @ u)
    if norm2 < 1e-30:
        return np.eye(n)[:, 1:]
    reflection = np.eye(n) - 2.0 * np.outer(u, u) / norm2
    return reflection[:, 1:]


def conformal_perturbation(K, hessian_alpha, v) -> np.ndarray:
    """
    Jacobi operator of the metric e^alpha g for alpha C^2-close to zero.

    K1(Z, W) = K(Z, W) - 1/2 Hess(alpha)(Z, W) - 1/2 Hess(alpha)(v, v) g(Z, W)
    for Z, W in v-perp, with g(v, v) = 1. K is given in orthogonal_frame(v).

    Args:
        K: Symmetric (n-1) x (n-1) Jacobi operator
        hessian_alpha: Symmetric n x n Hessian of alpha, v-direction included
        v: Unit velocity in R^n

    Returns:
        Perturbed operator K1, symmetric

    Raises:
        ContractViolation: On non-symmetric inputs, non-unit v or shape mismatch
    """
    v = require_unit("v", v)
    n = v.size
    hess = require_symmetric("hessian_alpha", hessian_alpha)
    K = require_symmetric("K", K)
    if hess.shape != (n, n) or K.shape != (n - 1, n - 1):
        raise ContractViolation(
            f"expected K of shape {(n - 1, n - 1)} and Hessian of shape {(n, n)}, "
            f"got {K.shape} and {hess.shape}"
        )
    frame = orthogonal_frame(v)
    perturbed = K - 0.5 * frame.T @ hess @ frame - 0.5 * float(v @ hess @ v) * np.eye(n - 1)
    return 0.5 * (perturbed + perturbed.T)


@dataclass(frozen=True)
class BumpSpec:
    """Compactly supported bump chi(t) with chi(center) = 1."""

    center: float = 0.0
    width: float = 1.0
    amplitude: Optional[float] = None
    smoothness: str = "mollifier"

    def __post_init__(self):
        require_positive("bump.width", self.width)
        if self.smoothness != "mollifier":
            raise ParameterError(f"unknown bump profile '{self.smoothness}'")
        if self.amplitude is not None and (not np.isfinite(self.amplitude) or self.amplitude < 0):
            raise ParameterError(f"bump.amplitude must be non-negative, got {self.amplitude}")

    def profile(self, t):
        u = (np.asarray(t, dtype=float) - self.center) / self.width
        inside = np.abs(u) < 1.0
        safe = np.where(inside, u, 0.0)
        return np.where(inside, np.exp(1.0 - 1.0 / (1.0 - safe * safe)), 0.0)

    def derivative(self, t):
        u = (np.asarray(t, dtype=float) - self.center) / self.width
        inside = np.abs(u) < 1.0
        safe = np.where(inside, u, 0.0)
        denom = 1.0 - safe * safe
        value = np.exp(1.0 - 1.0 / denom) * (-2.0 * safe / denom ** 2) / self.width
        return np.where(inside, value, 0.0)

    def max_slope(self) -> float:
        grid = self.center + self.width * np.linspace(-1.0, 1.0, 4001)
        return float(np.max(np.abs(self.derivative(grid)))) * 1.01

    def superlevel_measure(self, level: float) -> float:
        """Length of {t : chi(t) > level}."""
        if level <= 0.0:
            return 2.0 * self.width
        if level >= 1.0:
            return 0.0
        return 2.0 * self.width * float(np.sqrt(1.0 - 1.0 / (1.0 - np.log(level))))


def non_anosov_scenario(
    a: float,
    n: int,
    r: int,
    bump: BumpSpec,
    period: float,
    on_gamma: bool = False,
) -> CurvatureModel:
    """
    Rank-one model with the B-curvature lifted to zero near a closed geodesic.

    The metric e^alpha g has Hess(alpha) = -2 h chi(t) on the B directions
    along the orbit, which raises the B-block from -a^2 to -a^2 + h chi(t).
    With the default amplitude h = a^2 the B-curvature vanishes at the bump
    peak. The profile repeats with the period of the closed geodesic.

    Args:
        a: Curvature scale of the unperturbed rank-one space
        n: Manifold dimension
        r: Dimension of A
        bump: Bump along the orbit; width must be below period/2
        period: Length of the closed geodesic
        on_gamma: Take chi = 1, the orbit of the closed geodesic itself

    Returns:
        Periodic CurvatureModel

    Raises:
        ParameterError: On invalid rank-one parameters or bump width
    """
    base = rank_one_symmetric_model(a, n, r)
    period = require_positive("period", period)
    if bump.width >= period / 2:
        raise ParameterError(f"bump.width must be below period/2 = {period / 2}, got {bump.width}")
    a = base.metadata["a"]
    amplitude = a * a if bump.amplitude is None else float(bump.amplitude)

    hessian = np.zeros((n, n))
    hessian[1 + r:, 1 + r:] = -2.0 * amplitude * np.eye(n - 1 - r)
    e0 = np.eye(n)[0]
    K0 = base.operator(0.0)
    shift = _frozen(conformal_perturbation(K0, hessian, e0) - K0)

    if on_gamma:
        K_gamma = _frozen(K0 + shift)
        rule = lambda t: K_gamma
        lipschitz = 0.0
    else:
        def rule(t):
            offset = (t - bump.center + period / 2) % period - period / 2
            return _frozen(K0 + float(bump.profile(bump.center + offset)) * shift)
        lipschitz = amplitude * bump.max_slope()

    return CurvatureModel(
        name="non_anosov",
        dim_n=n,
        operator_rule=rule,
        metadata={
            "a": a,
            "r": r,
            "reference_beta": a,
            "amplitude": amplitude,
            "bump": bump,
            "on_gamma": bool(on_gamma),
        },
        lipschitz=lipschitz,
        period=period,
        constant=bool(on_gamma),
    )
