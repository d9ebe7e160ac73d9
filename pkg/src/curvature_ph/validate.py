#!/usr/bin/env python3
"""
Validation helpers and error types for curvature models and experiments.
"""

from typing import Optional

import numpy as np


SYMMETRY_TOL = 1e-12
UNIT_TOL = 1e-12


class ParameterError(ValueError):
    """Invalid model or sampling parameter."""


class ContractViolation(ValueError):
    """An operation received inputs that break its preconditions."""


class PreconditionError(ValueError):
    """A prerequisite computation did not hold."""


class ConfigError(ValueError):
    """Experiment configuration could not be parsed or validated."""

    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None):
        self.line = line
        self.key = key
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericError(ArithmeticError):
    """A numerical routine failed."""


class IntegrationOverflowError(NumericError):
    """Integration produced non-finite values."""

    def __init__(self, message: str, time: float):
        self.time = time
        super().__init__(f"{message} (reached t={time:.6g})")


def require_positive(name: str, value: float) -> float:
    """
    Check that a scalar parameter is strictly positive and finite.

    Args:
        name: Parameter name used in the error message
        value: Value to check

    Returns:
        The value as float

    Raises:
        ParameterError: If value is not a positive finite number
    """
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ParameterError(f"{name} must be positive, got {value}")
    return value


def require_finite(name: str, array) -> np.ndarray:
    arr = np.asarray(array, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ContractViolation(f"{name} has non-finite entries")
    return arr


def require_symmetric(name: str, matrix, tol: float = SYMMETRY_TOL) -> np.ndarray:
    """
    Check that a matrix is square and symmetric.

    Args:
        name: Operator name used in the error message
        matrix: Array-like square matrix
        tol: Absolute tolerance on max |M - M^T|

    Returns:
        The matrix as a float ndarray

    Raises:
        ContractViolation: If the matrix is not square, finite and symmetric
    """
    mat = require_finite(name, matrix)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ContractViolation(f"{name} must be a square matrix, got shape {mat.shape}")
    if mat.size and np.max(np.abs(mat - mat.T)) > tol:
        raise ContractViolation(f"{name} is not symmetric")
    return mat


def require_unit(name: str, vector, tol: float = UNIT_TOL) -> np.ndarray:
    vec = require_finite(name, vector)
    if vec.ndim != 1:
        raise ContractViolation(f"{name} must be a vector")
    if abs(np.linalg.norm(vec) - 1.0) > tol:
        raise ContractViolation(f"{name} must have unit length")
    return vec


def require_same_shape(what: str, *arrays) -> None:
    shapes = {np.shape(a) for a in arrays}
    if len(shapes) != 1:
        raise ContractViolation(f"Dimension mismatch in {what}: {sorted(shapes)}")
