"""Dense spectral reductions: eigenvalues, singular values, norms, log|det|.

Eigenvalues are labeled by nonincreasing modulus with ties broken by
increasing principal argument; singular values are nonincreasing. log|det|
is computed from the singular values and cross-checked against an
LU-factorization value; disagreement is an internal-consistency error.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidValueError,
    NumericalConsistencyError,
    ShapeError,
    ValidationError,
)

__all__ = [
    "SpectralSummary",
    "WeylCheck",
    "eigenvalues",
    "singular_values",
    "summarize",
    "shifted",
    "check_weyl",
    "log_abs_det_lu",
    "max_dimension",
]

DEFAULT_MAX_DIMENSION = 2000

# Tolerance for the SVD-vs-LU log|det| cross-check (relative to magnitude).
_LOGDET_AGREEMENT_TOL = 1e-6


def max_dimension() -> int:
    """Dense-solve dimension cap; override with env var CIRCLAW_MAX_N."""
    raw = os.environ.get("CIRCLAW_MAX_N")
    if raw is None:
        return DEFAULT_MAX_DIMENSION
    try:
        cap = int(raw)
    except ValueError:
        raise ValidationError(f"CIRCLAW_MAX_N must be an integer, got {raw!r}")
    if cap < 1:
        raise ValidationError(f"CIRCLAW_MAX_N must be positive, got {cap}")
    return cap


def _as_matrix(a, square: bool = True) -> np.ndarray:
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-d matrix, got shape {m.shape}")
    if square and m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m.view(np.float64))):
        raise InvalidValueError("matrix contains non-finite entries")
    if max(m.shape) > max_dimension():
        raise ValidationError(
            f"dimension {max(m.shape)} exceeds dense-solve cap {max_dimension()} "
            "(set CIRCLAW_MAX_N to raise it)"
        )
    return m


@dataclass(frozen=True)
class SpectralSummary:
    """Eigenvalues, singular values, and derived norms of one matrix.

    ``log_abs_det`` is None when the matrix is singular (a zero singular
    value, or a determinant that vanishes or underflows).
    """

    eigenvalues: np.ndarray
    singular_values: np.ndarray
    log_abs_det: float | None
    singular: bool
    spectral_radius: float
    operator_norm: float
    hs_norm_sq: float


@dataclass(frozen=True)
class WeylCheck:
    lhs: float  # sum of squared eigenvalue moduli
    rhs: float  # sum of squared singular values
    holds: bool


def eigenvalues(a) -> np.ndarray:
    """All eigenvalues, sorted by nonincreasing modulus, then by argument.

    Ties in modulus are broken by increasing principal argument in (-pi, pi].
    """
    m = _as_matrix(a)
    vals = np.linalg.eigvals(m)
    ang = np.angle(vals)
    # atan2 maps a negative-zero imaginary part on the negative real axis
    # to -pi; fold it back so the argument lives in (-pi, pi]
    ang[ang == -np.pi] = np.pi
    order = np.lexsort((ang, -np.abs(vals)))
    return vals[order]


def singular_values(a) -> np.ndarray:
    """Singular values in nonincreasing order; rectangular input allowed."""
    m = _as_matrix(a, square=False)
    return np.linalg.svd(m, compute_uv=False)


def shifted(a, z: complex) -> np.ndarray:
    """Return a - z*I."""
    m = _as_matrix(a)
    out = m.copy()
    idx = np.arange(m.shape[0])
    out[idx, idx] -= z
    return out


def log_abs_det_lu(a) -> tuple[float, bool]:
    """log|det| from a pivoted LU factorization; (value, singular)."""
    m = _as_matrix(a)
    sign, logdet = np.linalg.slogdet(m)
    if sign == 0 or not np.isfinite(logdet):
        return float("-inf"), True
    return float(logdet), False


def summarize(a) -> SpectralSummary:
    """Full spectral summary with the log|det| cross-check applied."""
    m = _as_matrix(a)
    eig = eigenvalues(m)
    sv = singular_values(m)
    hs_norm_sq = float(np.sum(np.abs(m) ** 2))
    spectral_radius = float(np.abs(eig[0])) if eig.size else 0.0
    operator_norm = float(sv[0]) if sv.size else 0.0

    lu_val, lu_singular = log_abs_det_lu(m)
    svd_singular = bool(sv.size == 0 or sv[-1] == 0.0)
    singular = svd_singular or lu_singular
    if singular:
        log_abs_det = None
    else:
        log_abs_det = float(np.sum(np.log(sv)))
        if not np.isfinite(log_abs_det):
            singular, log_abs_det = True, None
        else:
            diff = abs(log_abs_det - lu_val)
            if diff > _LOGDET_AGREEMENT_TOL * max(1.0, abs(log_abs_det), abs(lu_val)):
                raise NumericalConsistencyError(
                    f"log|det| disagreement: singular-value sum {log_abs_det} "
                    f"vs LU factorization {lu_val}"
                )
    return SpectralSummary(
        eigenvalues=eig,
        singular_values=sv,
        log_abs_det=log_abs_det,
        singular=singular,
        spectral_radius=spectral_radius,
        operator_norm=operator_norm,
        hs_norm_sq=hs_norm_sq,
    )


def check_weyl(a) -> WeylCheck:
    """Compare the eigenvalue and singular-value second moments.

    The eigenvalue sum never exceeds the singular-value sum; equality holds
    for normal matrices.
    """
    m = _as_matrix(a)
    lhs = float(np.sum(np.abs(eigenvalues(m)) ** 2))
    rhs = float(np.sum(singular_values(m) ** 2))
    return WeylCheck(lhs=lhs, rhs=rhs, holds=bool(lhs <= rhs + 1e-8 * rhs))
