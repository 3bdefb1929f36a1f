"""Standardized i.i.d. matrix samplers and deterministic perturbation builders.

Entry laws are standardized to mean 0 and unit second absolute moment, so the
scaled matrix X/sqrt(n) has bulk spectrum filling the unit disc. Perturbations
are declared by a small spec (kind, rank budget, Hilbert-Schmidt budget) and
realized as dense complex matrices.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BudgetViolationError,
    InvalidValueError,
    ShapeError,
    ValidationError,
)

__all__ = [
    "DISTRIBUTION_KINDS",
    "PERTURBATION_KINDS",
    "EntryDistribution",
    "PerturbationSpec",
    "MatrixSample",
    "AssembledPair",
    "sample_matrix",
    "build_perturbation",
    "assemble",
    "numerical_rank",
    "derive_seed",
    "read_matrix_csv",
    "write_matrix_csv",
]

DISTRIBUTION_KINDS = (
    "complex-gaussian",
    "real-gaussian",
    "rademacher",
    "complex-rademacher",
    "centered-bernoulli",
    "centered-uniform",
)

PERTURBATION_KINDS = ("zero", "all-ones", "low-rank", "file")

# Singular values at or below this fraction of s1 count as numerically zero.
RANK_TOLERANCE = 1e-10

_SQRT_HALF = np.sqrt(0.5)
_SQRT_THREE = np.sqrt(3.0)
_U64_MASK = (1 << 64) - 1

_BERNOULLI_RE = re.compile(r"^centered-bernoulli\((.+)\)$")


@dataclass(frozen=True)
class EntryDistribution:
    """A scalar entry law with mean 0 and E|X|^2 = 1.

    ``kind`` is one of :data:`DISTRIBUTION_KINDS`; ``p`` is the success
    probability for ``centered-bernoulli`` and must be None otherwise.
    """

    kind: str
    p: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in DISTRIBUTION_KINDS:
            raise ValidationError(
                f"unknown distribution kind {self.kind!r}; "
                f"expected one of {', '.join(DISTRIBUTION_KINDS)}"
            )
        if self.kind == "centered-bernoulli":
            if self.p is None or not (0.0 < self.p < 1.0):
                raise ValidationError(
                    f"centered-bernoulli requires p in (0, 1), got {self.p!r}"
                )
        elif self.p is not None:
            raise ValidationError(f"{self.kind} takes no parameter, got p={self.p!r}")

    @classmethod
    def parse(cls, text: str) -> "EntryDistribution":
        """Parse the exact wire strings, e.g. ``"centered-bernoulli(0.3)"``."""
        m = _BERNOULLI_RE.match(text)
        if m:
            try:
                p = float(m.group(1))
            except ValueError:
                raise ValidationError(f"bad centered-bernoulli parameter: {text!r}")
            return cls("centered-bernoulli", p)
        return cls(text)

    def __str__(self) -> str:
        if self.kind == "centered-bernoulli":
            return f"centered-bernoulli({self.p!r})"
        return self.kind

    @property
    def is_complex(self) -> bool:
        return self.kind in ("complex-gaussian", "complex-rademacher")

    def _draw_row(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """One row of standardized draws; entry k consumes a fixed draw prefix.

        Complex kinds interleave real/imaginary draws so that entry k depends
        only on draws 2k and 2k+1 of the row stream, independent of n.
        """
        kind = self.kind
        if kind == "real-gaussian":
            return rng.standard_normal(n).astype(np.complex128)
        if kind == "complex-gaussian":
            g = rng.standard_normal(2 * n)
            return (g[0::2] + 1j * g[1::2]) * _SQRT_HALF
        if kind == "rademacher":
            return (2.0 * rng.integers(0, 2, n) - 1.0).astype(np.complex128)
        if kind == "complex-rademacher":
            s = 2.0 * rng.integers(0, 2, 2 * n) - 1.0
            return (s[0::2] + 1j * s[1::2]) * _SQRT_HALF
        if kind == "centered-bernoulli":
            p = self.p
            b = (rng.random(n) < p).astype(np.float64)
            return ((b - p) / np.sqrt(p * (1.0 - p))).astype(np.complex128)
        if kind == "centered-uniform":
            u = rng.random(n)
            return ((2.0 * u - 1.0) * _SQRT_THREE).astype(np.complex128)
        raise AssertionError(f"unhandled kind {kind}")


@dataclass(frozen=True)
class MatrixSample:
    """An n-by-n draw of i.i.d. standardized entries."""

    dim: int
    entries: np.ndarray
    seed: int
    distribution: EntryDistribution

    def __post_init__(self) -> None:
        if self.entries.shape != (self.dim, self.dim):
            raise ShapeError(
                f"entries shape {self.entries.shape} does not match dim {self.dim}"
            )
        if not np.all(np.isfinite(self.entries.view(np.float64))):
            raise InvalidValueError("matrix sample contains non-finite entries")


@dataclass(frozen=True)
class AssembledPair:
    """The scaled pair A = X/sqrt(n) and B = (X + M)/sqrt(n)."""

    a_matrix: np.ndarray
    b_matrix: np.ndarray
    dim: int
    perturbation_rank: int


@dataclass(frozen=True)
class PerturbationSpec:
    """Declarative description of a deterministic additive perturbation.

    ``rank_budget`` and ``hs_budget_coefficient`` (the c in ||M||^2 <= c n^2)
    are enforced against the realized matrix; None means "infer from the
    realized matrix", which makes the constraint vacuous.
    """

    kind: str
    scale: float = 1.0
    left_factors: tuple[tuple[complex, ...], ...] = field(default=())
    right_factors: tuple[tuple[complex, ...], ...] = field(default=())
    path: str | None = None
    rank_budget: int | None = None
    hs_budget_coefficient: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in PERTURBATION_KINDS:
            raise ValidationError(
                f"unknown perturbation kind {self.kind!r}; "
                f"expected one of {', '.join(PERTURBATION_KINDS)}"
            )
        if self.kind == "file" and not self.path:
            raise ValidationError("file perturbation requires a path")
        if self.kind == "low-rank":
            if not self.left_factors or len(self.left_factors) != len(self.right_factors):
                raise ValidationError(
                    "low-rank perturbation requires matching nonempty factor lists"
                )
        if self.rank_budget is not None and self.rank_budget < 0:
            raise ValidationError("rank_budget must be nonnegative")

    @classmethod
    def zero(cls) -> "PerturbationSpec":
        return cls("zero", rank_budget=0, hs_budget_coefficient=0.0)

    @classmethod
    def all_ones(cls, scale: float = 1.0) -> "PerturbationSpec":
        return cls(
            "all-ones",
            scale=scale,
            rank_budget=1,
            hs_budget_coefficient=scale * scale,
        )

    @classmethod
    def low_rank(
        cls,
        left_factors,
        right_factors,
        rank_budget: int | None = None,
        hs_budget_coefficient: float | None = None,
    ) -> "PerturbationSpec":
        left = tuple(tuple(complex(v) for v in vec) for vec in left_factors)
        right = tuple(tuple(complex(v) for v in vec) for vec in right_factors)
        if rank_budget is None:
            rank_budget = len(left)
        return cls(
            "low-rank",
            left_factors=left,
            right_factors=right,
            rank_budget=rank_budget,
            hs_budget_coefficient=hs_budget_coefficient,
        )

    @classmethod
    def from_file(
        cls,
        path,
        rank_budget: int | None = None,
        hs_budget_coefficient: float | None = None,
    ) -> "PerturbationSpec":
        return cls(
            "file",
            path=str(path),
            rank_budget=rank_budget,
            hs_budget_coefficient=hs_budget_coefficient,
        )

    @property
    def k(self) -> int:
        """Number of factor pairs of a low-rank spec."""
        return len(self.left_factors)


def derive_seed(master_seed: int, *key: int) -> int:
    """Derive a 64-bit sub-seed from a master seed and an integer key path.

    Pure function of its arguments; used so that replicated experiments can
    run in any order (or in parallel) and still draw identical samples.
    """
    ss = np.random.SeedSequence(master_seed & _U64_MASK, spawn_key=tuple(key))
    return int(ss.generate_state(1, np.uint64)[0])


def _row_generator(seed: int, stream: int, row: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed & _U64_MASK, spawn_key=(stream, row))
    return np.random.Generator(np.random.Philox(ss))


def sample_matrix(
    dist: EntryDistribution, n: int, seed: int, stream: int = 0
) -> MatrixSample:
    """Draw an n-by-n matrix of i.i.d. standardized entries.

    Entry (j, k) is a pure function of (seed, stream, j, k): each row has its
    own counter-based bit stream keyed by (seed, stream, j), and entry k
    consumes a fixed prefix of it. Two calls with equal arguments return
    bitwise-identical matrices, and rows may be generated in any order.
    """
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ShapeError(f"matrix dimension must be a positive integer, got {n!r}")
    if stream < 0:
        raise ValidationError(f"stream must be nonnegative, got {stream}")
    entries = np.empty((n, n), dtype=np.complex128)
    for j in range(n):
        entries[j] = dist._draw_row(_row_generator(seed, stream, j), n)
    return MatrixSample(dim=n, entries=entries, seed=seed, distribution=dist)


def numerical_rank(m: np.ndarray, singular_values: np.ndarray | None = None) -> int:
    """Count singular values above RANK_TOLERANCE * s1."""
    if singular_values is None:
        singular_values = np.linalg.svd(np.asarray(m, dtype=np.complex128), compute_uv=False)
    if singular_values.size == 0 or singular_values[0] == 0.0:
        return 0
    return int(np.count_nonzero(singular_values > RANK_TOLERANCE * singular_values[0]))


def read_matrix_csv(path, n: int) -> np.ndarray:
    """Read an n-by-n complex matrix from rows ``j,k,re,im`` (1-indexed).

    Entries absent from the file are zero. Duplicate coordinates and
    out-of-range indices are rejected.
    """
    m = np.zeros((n, n), dtype=np.complex128)
    seen: set[tuple[int, int]] = set()
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ValidationError(
                f"{path}:{lineno}: expected 'j,k,re,im', got {line!r}"
            )
        try:
            j, k = int(parts[0]), int(parts[1])
            re_v, im_v = float(parts[2]), float(parts[3])
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: malformed row {line!r}")
        if not (1 <= j <= n and 1 <= k <= n):
            raise ShapeError(
                f"{path}:{lineno}: index ({j},{k}) outside 1..{n}"
            )
        if (j, k) in seen:
            raise ValidationError(f"{path}:{lineno}: duplicate entry ({j},{k})")
        seen.add((j, k))
        if not (np.isfinite(re_v) and np.isfinite(im_v)):
            raise InvalidValueError(f"{path}:{lineno}: non-finite value")
        m[j - 1, k - 1] = complex(re_v, im_v)
    return m


def write_matrix_csv(path, m: np.ndarray) -> None:
    """Write nonzero entries of a complex matrix as ``j,k,re,im`` rows."""
    m = np.asarray(m, dtype=np.complex128)
    lines = []
    for j in range(m.shape[0]):
        for k in range(m.shape[1]):
            v = m[j, k]
            if v != 0:
                lines.append(f"{j + 1},{k + 1},{float(v.real)!r},{float(v.imag)!r}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def _realize(spec: PerturbationSpec, n: int) -> np.ndarray:
    kind = spec.kind
    if kind == "zero":
        return np.zeros((n, n), dtype=np.complex128)
    if kind == "all-ones":
        return np.full((n, n), spec.scale, dtype=np.complex128)
    if kind == "low-rank":
        for vec in (*spec.left_factors, *spec.right_factors):
            if len(vec) != n:
                raise ShapeError(
                    f"low-rank factor has length {len(vec)}, expected {n}"
                )
        if spec.k > n:
            raise ShapeError(f"low-rank k={spec.k} exceeds dimension {n}")
        u = np.array(spec.left_factors, dtype=np.complex128).T
        v = np.array(spec.right_factors, dtype=np.complex128).T
        return u @ v.conj().T
    if kind == "file":
        return read_matrix_csv(spec.path, n)
    raise AssertionError(f"unhandled kind {kind}")


def build_perturbation(spec: PerturbationSpec, n: int) -> np.ndarray:
    """Realize the perturbation matrix and enforce its declared budgets."""
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ShapeError(f"matrix dimension must be a positive integer, got {n!r}")
    m = _realize(spec, n)
    if spec.rank_budget is not None:
        s = np.linalg.svd(m, compute_uv=False)
        rank = numerical_rank(m, singular_values=s)
        if rank > spec.rank_budget:
            raise BudgetViolationError(
                f"{spec.kind} perturbation has numerical rank {rank}, "
                f"declared budget {spec.rank_budget}"
            )
    if spec.hs_budget_coefficient is not None:
        hs_sq = float(np.sum(np.abs(m) ** 2))
        limit = spec.hs_budget_coefficient * n * n
        if hs_sq > limit * (1.0 + 1e-12) + 1e-300:
            raise BudgetViolationError(
                f"perturbation squared HS norm {hs_sq} exceeds c*n^2 = {limit}"
            )
    return m


def assemble(x: MatrixSample, m: np.ndarray) -> AssembledPair:
    """Form A = X/sqrt(n) and B = (X + M)/sqrt(n)."""
    m = np.asarray(m, dtype=np.complex128)
    if m.shape != (x.dim, x.dim):
        raise ShapeError(
            f"perturbation shape {m.shape} does not match sample dim {x.dim}"
        )
    inv_sqrt_n = 1.0 / np.sqrt(float(x.dim))
    return AssembledPair(
        a_matrix=x.entries * inv_sqrt_n,
        b_matrix=(x.entries + m) * inv_sqrt_n,
        dim=x.dim,
        perturbation_rank=numerical_rank(m),
    )
