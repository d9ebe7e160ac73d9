#!/usr/bin/env python3
"""
Linearized geodesic flow: eta' = sigma, sigma' = -K(t) eta.

Fixed-step classical RK4 for arbitrary models, closed-form propagators for
constant ones, and the Wronskian used to check the integrator.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .models import CurvatureModel
from .validate import (
    ContractViolation,
    IntegrationOverflowError,
    ParameterError,
    require_finite,
    require_positive,
    require_same_shape,
)

DEFAULT_STEP = 1e-3


@dataclass(frozen=True, eq=False)
class TangentPair:
    """(eta, sigma): Jacobi field value and covariant derivative in the parallel frame."""

    eta: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        eta = np.array(require_finite("eta", self.eta), dtype=float).ravel()
        sigma = np.array(require_finite("sigma", self.sigma), dtype=float).ravel()
        require_same_shape("TangentPair", eta, sigma)
        eta.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "sigma", sigma)

    @property
    def dim(self) -> int:
        return self.eta.size

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.eta, self.sigma])

    @classmethod
    def from_vector(cls, vector) -> "TangentPair":
        vector = np.asarray(vector, dtype=float)
        if vector.ndim != 1 or vector.size % 2:
            raise ContractViolation(f"cannot split vector of shape {vector.shape} into (eta, sigma)")
        half = vector.size // 2
        return cls(vector[:half], vector[half:])


def symplectic_form(dim: int) -> np.ndarray:
    """Canonical J = [[0, I], [-I, 0]] on (eta; sigma)."""
    eye = np.eye(dim)
    zero = np.zeros((dim, dim))
    return np.block([[zero, eye], [-eye, zero]])


@dataclass(frozen=True, eq=False)
class PropagatorMatrix:
    """Linear map (eta_0; sigma_0) -> (eta(t); sigma(t))."""

    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0] // 2

    def apply(self, pair: TangentPair) -> TangentPair:
        if pair.dim != self.dim:
            raise ContractViolation(f"pair has dimension {pair.dim}, propagator acts on {self.dim}")
        return TangentPair.from_vector(self.entries @ pair.as_vector())

    def symplectic_defect(self) -> float:
        J = symplectic_form(self.dim)
        return float(np.max(np.abs(self.entries.T @ J @ self.entries - J)))


def jacobi_rhs(pair: TangentPair, K) -> TangentPair:
    """
    Right-hand side of the Jacobi system.

    Args:
        pair: Current (eta, sigma)
        K: Symmetric Jacobi operator at the current time

    Returns:
        (sigma, -K eta)

    Raises:
        ContractViolation: If dimensions disagree
    """
    K = np.asarray(K, dtype=float)
    if K.shape != (pair.dim, pair.dim):
        raise ContractViolation(f"operator of shape {K.shape} does not act on dimension {pair.dim}")
    return TangentPair(pair.sigma, -K @ pair.eta)


def closed_form_block(lam: float, t: float) -> np.ndarray:
    """
    Exact 2x2 propagator of eta'' = -lam eta over time t.

    Negative lam gives cosh/sinh growth, zero gives the free shear, positive
    lam gives rotation.
    """
    lam = float(lam)
    t = float(t)
    if lam < 0:
        mu = np.sqrt(-lam)
        ch, sh = np.cosh(mu * t), np.sinh(mu * t)
        return np.array([[ch, sh / mu], [mu * sh, ch]])
    if lam == 0:
        return np.array([[1.0, t], [0.0, 1.0]])
    mu = np.sqrt(lam)
    c, s = np.cos(mu * t), np.sin(mu * t)
    return np.array([[c, s / mu], [-mu * s, c]])


def integrate(
    model: CurvatureModel,
    state: np.ndarray,
    t_start: float,
    t_end: float,
    step: float = DEFAULT_STEP,
    callback: Optional[Callable[[float, np.ndarray], None]] = None,
) -> np.ndarray:
    """
    Classical RK4 on stacked states (eta; sigma), one column per solution.

    The step is shrunk so that the grid lands exactly on t_end; t_end may be
    before t_start. callback(t, state) runs after every step.

    Raises:
        IntegrationOverflowError: If the state leaves the float range
    """
    step = require_positive("step", step)
    state = np.array(state, dtype=float)
    span = float(t_end) - float(t_start)
    if span == 0.0:
        return state
    n_steps = max(int(np.ceil(abs(span) / step - 1e-9)), 1)
    h = span / n_steps
    dim = state.shape[0] // 2

    def rhs(K, Y):
        return np.concatenate([Y[dim:], -K @ Y[:dim]])

    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_steps):
            t = t_start + k * h
            K0 = model.operator(t)
            K_mid = model.operator(t + 0.5 * h)
            K1 = model.operator(t + h)
            k1 = rhs(K0, state)
            k2 = rhs(K_mid, state + 0.5 * h * k1)
            k3 = rhs(K_mid, state + 0.5 * h * k2)
            k4 = rhs(K1, state + h * k3)
            state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(state)):
                raise IntegrationOverflowError("Jacobi field left the floating-point range", t + h)
            if callback is not None:
                callback(t_start + (k + 1) * h, state)
    return state


def _check_pair(model: CurvatureModel, pair: TangentPair) -> None:
    if pair.dim != model.frame_dim:
        raise ContractViolation(f"pair has dimension {pair.dim}, model frame has {model.frame_dim}")


def propagate_span(
    model: CurvatureModel,
    pair0: TangentPair,
    t_start: float,
    t_end: float,
    step: float = DEFAULT_STEP,
) -> TangentPair:
    """Propagate pair0 from t_start to t_end, forward or backward in time."""
    _check_pair(model, pair0)
    state = integrate(model, pair0.as_vector(), t_start, t_end, step)
    return TangentPair.from_vector(state)


def propagate_rk4(
    model: CurvatureModel,
    pair0: TangentPair,
    t_end: float,
    step: float = DEFAULT_STEP,
) -> TangentPair:
    """
    Solve the Jacobi system from time 0 to t_end.

    Args:
        model: Curvature model supplying K(t)
        pair0: Initial (eta, sigma)
        t_end: Final time, >= 0
        step: RK4 step, > 0

    Returns:
        (eta(t_end), sigma(t_end)); pair0 unchanged when t_end = 0

    Raises:
        ParameterError: On negative t_end or non-positive step
        IntegrationOverflowError: If the solution overflows
    """
    if t_end < 0:
        raise ParameterError(f"t_end must be >= 0, got {t_end}")
    if t_end == 0:
        _check_pair(model, pair0)
        return pair0
    return propagate_span(model, pair0, 0.0, t_end, step)


def transition_matrix(
    model: CurvatureModel,
    t_end: float,
    step: float = DEFAULT_STEP,
    t_start: float = 0.0,
) -> PropagatorMatrix:
    """Propagator whose columns are the solutions started from basis pairs."""
    identity = np.eye(2 * model.frame_dim)
    return PropagatorMatrix(integrate(model, identity, t_start, t_end, step))


def closed_form_propagator(model: CurvatureModel, t: float) -> PropagatorMatrix:
    """Exact propagator of a constant model, assembled in the eigenbasis of K."""
    if not model.constant:
        raise ParameterError(f"model '{model.name}' is not constant along the geodesic")
    values, vectors = np.linalg.eigh(model.operator(0.0))
    blocks = np.array([closed_form_block(lam, t) for lam in values])

    def rotate(entries):
        return vectors @ np.diag(entries) @ vectors.T

    entries = np.block([
        [rotate(blocks[:, 0, 0]), rotate(blocks[:, 0, 1])],
        [rotate(blocks[:, 1, 0]), rotate(blocks[:, 1, 1])],
    ])
    return PropagatorMatrix(entries)


def wronskian(p1: TangentPair, p2: TangentPair) -> float:
    """Symplectic pairing g(eta_1, sigma_2) - g(sigma_1, eta_2)."""
    if p1.dim != p2.dim:
        raise ContractViolation(f"Dimension mismatch in wronskian: {p1.dim} vs {p2.dim}")
    return float(p1.eta @ p2.sigma - p1.sigma @ p2.eta)
