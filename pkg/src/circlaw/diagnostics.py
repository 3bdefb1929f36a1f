"""Finite-n diagnostics for the perturbed-vs-central spectral comparison.

Each operation turns one step of the log-determinant comparison argument
into a measurable quantity: the normalized log|det| gap at a shift z, the
rank bound on the Kolmogorov distance between singular-value ECDFs, extreme
singular-value scaling across dimensions, weak-convergence probes through
smooth test functions, the rank-one outlier case, and the Green-identity
quadrature for polynomial root-counting measures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Iterator, Sequence

import numpy as np

from . import ensemble, measures, spectral
from .errors import (
    DomainError,
    InsufficientDataError,
    InvalidValueError,
    ShapeError,
    ValidationError,
)
from .measures import EmpiricalMeasure1D

if TYPE_CHECKING:
    from .harness import ExperimentConfig

__all__ = [
    "ZGrid",
    "DeltaDiagnostics",
    "RankCheck",
    "DimScalingStats",
    "ScalingReport",
    "ConstantCaseResult",
    "GreenIdentityResult",
    "Rectangle",
    "BumpFunction",
    "LemmaSuiteReport",
    "delta_at",
    "verify_rank_inequality",
    "delta_scan",
    "scaling_scan",
    "replacement_check",
    "constant_case",
    "green_identity_residual",
    "build_pair",
    "experiment_rows",
    "aggregate_scaling",
    "default_test_functions",
    "run_lemma_trials",
]

# Slack constants for the recorded inequality checks.
CROSS_CHECK_RTOL = 1e-8
CROSS_CHECK_ATOL = 1e-12
RANK_SLACK = 1e-12
CHAIN_SLACK = 1e-8


@dataclass(frozen=True)
class ZGrid:
    """Finite rectangular grid of complex shift points."""

    re_range: tuple[float, float]
    im_range: tuple[float, float]
    step: float

    def __post_init__(self) -> None:
        if self.step <= 0:
            raise ValidationError(f"grid step must be positive, got {self.step}")
        for name, (lo, hi) in (("re_range", self.re_range), ("im_range", self.im_range)):
            if not (np.isfinite(lo) and np.isfinite(hi)) or hi < lo:
                raise ValidationError(f"{name} must be a finite ordered pair, got {(lo, hi)}")

    @staticmethod
    def _axis(lo: float, hi: float, step: float) -> np.ndarray:
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return lo + step * np.arange(count)

    def points(self) -> np.ndarray:
        """Grid points, imaginary part varying slowest."""
        res = self._axis(*self.re_range, self.step)
        ims = self._axis(*self.im_range, self.step)
        return (res[None, :] + 1j * ims[:, None]).ravel()

    def __len__(self) -> int:
        return self.points().size


@dataclass(frozen=True)
class DeltaDiagnostics:
    """Per-shift record of the log|det| gap and its controlling inequalities.

    ``delta`` is the singular-value route (mean log-atom difference);
    ``delta_logdet`` is the independent LU-factorization route. Both are NaN
    when ``singular_flag`` is set.
    """

    z: complex
    delta: float
    delta_logdet: float
    s_max_a: float
    s_min_a: float
    s_max_b: float
    s_min_b: float
    ks: float
    rank_bound: float
    ibp_bound: float
    singular_flag: bool

    @property
    def cross_check_ok(self) -> bool:
        """Both delta routes agree to CROSS_CHECK_RTOL; vacuous when flagged."""
        if self.singular_flag:
            return True
        return abs(self.delta - self.delta_logdet) <= (
            CROSS_CHECK_RTOL * max(abs(self.delta), abs(self.delta_logdet))
            + CROSS_CHECK_ATOL
        )

    @property
    def rank_inequality_ok(self) -> bool:
        return self.ks <= self.rank_bound + RANK_SLACK

    @property
    def chain_bound_ok(self) -> bool:
        """|delta| <= (log s_max - log s_min) * ks; vacuous when flagged."""
        if self.singular_flag:
            return True
        return abs(self.delta) <= self.ibp_bound + CHAIN_SLACK


@dataclass(frozen=True)
class RankCheck:
    ks: float
    bound: float
    holds: bool


def delta_at(pair: ensemble.AssembledPair, z: complex) -> DeltaDiagnostics:
    """Evaluate the normalized log|det| gap and its bounds at one shift.

    If either shifted matrix is numerically singular the record comes back
    with ``singular_flag`` set and NaN gap values instead of an exception.
    """
    n = pair.dim
    shifted_a = spectral.shifted(pair.a_matrix, z)
    shifted_b = spectral.shifted(pair.b_matrix, z)
    sv_a = spectral.singular_values(shifted_a)
    sv_b = spectral.singular_values(shifted_b)
    lu_a, sing_a = spectral.log_abs_det_lu(shifted_a)
    lu_b, sing_b = spectral.log_abs_det_lu(shifted_b)

    ks = measures.kolmogorov_distance(
        EmpiricalMeasure1D(sv_a), EmpiricalMeasure1D(sv_b)
    )
    rank_bound = pair.perturbation_rank / n
    s_max_a, s_min_a = float(sv_a[0]), float(sv_a[-1])
    s_max_b, s_min_b = float(sv_b[0]), float(sv_b[-1])

    singular = bool(sing_a or sing_b or s_min_a == 0.0 or s_min_b == 0.0)
    if singular:
        delta = delta_logdet = ibp_bound = float("nan")
    else:
        delta = measures.log_integral_diff(
            EmpiricalMeasure1D(sv_a), EmpiricalMeasure1D(sv_b)
        )
        delta_logdet = (lu_a - lu_b) / n
        s_max = max(s_max_a, s_max_b)
        s_min = min(s_min_a, s_min_b)
        ibp_bound = (math.log(s_max) - math.log(s_min)) * ks

    return DeltaDiagnostics(
        z=complex(z),
        delta=delta,
        delta_logdet=delta_logdet,
        s_max_a=s_max_a,
        s_min_a=s_min_a,
        s_max_b=s_max_b,
        s_min_b=s_min_b,
        ks=ks,
        rank_bound=rank_bound,
        ibp_bound=ibp_bound,
        singular_flag=singular,
    )


def verify_rank_inequality(a, b) -> RankCheck:
    """Check the rank bound on the singular-value ECDF distance.

    For n-by-m inputs the measures carry the n eigenvalues of sqrt(AA*), so
    singular values are zero-padded to the row count, and the bound is
    rank(a - b) / n. The bound is shift-invariant: subtracting z*I from both
    operands leaves a - b unchanged.
    """
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    rows = a.shape[0]

    def padded(s: np.ndarray) -> np.ndarray:
        if s.size < rows:
            return np.concatenate([s, np.zeros(rows - s.size)])
        return s

    sv_a = padded(spectral.singular_values(a))
    sv_b = padded(spectral.singular_values(b))
    ks = measures.kolmogorov_distance(
        EmpiricalMeasure1D(sv_a), EmpiricalMeasure1D(sv_b)
    )
    bound = ensemble.numerical_rank(a - b) / rows
    return RankCheck(ks=ks, bound=bound, holds=bool(ks <= bound + RANK_SLACK))


def delta_scan(pair: ensemble.AssembledPair, grid: ZGrid) -> list[DeltaDiagnostics]:
    """Evaluate delta_at on every grid point; flagged points are kept."""
    return [delta_at(pair, z) for z in grid.points()]


def build_pair(config: "ExperimentConfig", dim: int, replicate: int) -> ensemble.AssembledPair:
    """Sample and assemble one (dim, replicate) unit of an experiment.

    The sample seed is a pure function of (master_seed, dim, replicate), so
    units can be computed in any order or concurrently.
    """
    seed = ensemble.derive_seed(config.master_seed, dim, replicate)
    x = ensemble.sample_matrix(config.distribution, dim, seed)
    m = ensemble.build_perturbation(config.perturbation, dim)
    return ensemble.assemble(x, m)


def experiment_rows(
    config: "ExperimentConfig",
) -> Iterator[tuple[int, int, DeltaDiagnostics]]:
    """Yield (dim, replicate, diagnostics) over the full configured scan."""
    for dim in config.dims:
        for replicate in range(config.replicates):
            pair = build_pair(config, dim, replicate)
            for diag in delta_scan(pair, config.z_grid):
                yield dim, replicate, diag


@dataclass(frozen=True)
class DimScalingStats:
    """Aggregates over all non-flagged (replicate, z) rows at one dimension."""

    dim: int
    median_abs_delta: float
    median_ks: float
    min_smin: float
    max_smax: float
    rows: int
    flagged: int


@dataclass(frozen=True)
class ScalingReport:
    """Per-dimension statistics plus log-log fitted growth/decay exponents.

    ``a_hat`` tracks growth of the largest shifted singular value, ``b_hat``
    decay of the smallest, ``eps_hat`` decay of the Kolmogorov distance.
    ``smin_violation_fraction`` is the fraction of rows whose smallest
    shifted singular value drops below n**(-reference_exponent_b0).
    """

    dims: tuple[int, ...]
    per_dim: tuple[DimScalingStats, ...]
    a_hat: float
    b_hat: float
    eps_hat: float
    reference_exponent_b0: float
    smin_violation_fraction: float


def _fit_slope(dims: Sequence[int], values: Sequence[float]) -> float:
    """OLS slope of log(value) against log(dim) over positive values.

    Returns 0.0 when fewer than two positive values remain (a flat or
    degenerate statistic carries no measurable exponent).
    """
    pts = [(math.log(d), math.log(v)) for d, v in zip(dims, values)
           if np.isfinite(v) and v > 0]
    if len(pts) < 2:
        return 0.0
    xs, ys = zip(*pts)
    slope, _ = np.polyfit(xs, ys, 1)
    return float(slope)


def aggregate_scaling(
    rows: Sequence[tuple[int, int, DeltaDiagnostics]],
    b0: float,
    min_dims: int = 2,
) -> ScalingReport:
    """Aggregate scan rows into per-dim statistics and fitted exponents."""
    by_dim: dict[int, list[DeltaDiagnostics]] = {}
    for dim, _replicate, diag in rows:
        by_dim.setdefault(dim, []).append(diag)

    per_dim: list[DimScalingStats] = []
    violations = 0
    total = 0
    for dim in sorted(by_dim):
        diags = by_dim[dim]
        ok = [d for d in diags if not d.singular_flag]
        if not ok:
            continue
        smins = [min(d.s_min_a, d.s_min_b) for d in ok]
        threshold = dim ** (-b0)
        violations += sum(1 for s in smins if s < threshold)
        total += len(ok)
        per_dim.append(
            DimScalingStats(
                dim=dim,
                median_abs_delta=float(np.median([abs(d.delta) for d in ok])),
                median_ks=float(np.median([d.ks for d in ok])),
                min_smin=float(min(smins)),
                max_smax=float(max(max(d.s_max_a, d.s_max_b) for d in ok)),
                rows=len(diags),
                flagged=len(diags) - len(ok),
            )
        )

    if len(per_dim) < min_dims:
        raise InsufficientDataError(
            f"only {len(per_dim)} usable dimensions after singular flags; "
            f"need at least {min_dims}"
        )

    dims = tuple(s.dim for s in per_dim)
    if len(per_dim) < 2:
        a_hat = b_hat = eps_hat = float("nan")
    else:
        a_hat = _fit_slope(dims, [s.max_smax for s in per_dim])
        b_hat = -_fit_slope(dims, [s.min_smin for s in per_dim])
        eps_hat = -_fit_slope(dims, [s.median_ks for s in per_dim])
    return ScalingReport(
        dims=dims,
        per_dim=tuple(per_dim),
        a_hat=a_hat,
        b_hat=b_hat,
        eps_hat=eps_hat,
        reference_exponent_b0=b0,
        smin_violation_fraction=(violations / total) if total else 0.0,
    )


def scaling_scan(config: "ExperimentConfig") -> ScalingReport:
    """Run the configured scan across dimensions and fit scaling exponents."""
    if len(config.dims) < 3:
        raise ValidationError(
            f"scaling scan needs at least 3 dimensions, got {len(config.dims)}"
        )
    if config.replicates < 1:
        raise ValidationError("scaling scan needs at least 1 replicate")
    rows = list(experiment_rows(config))
    return aggregate_scaling(rows, config.reference_exponent_b0)


def replacement_check(
    pair: ensemble.AssembledPair,
    test_functions: Sequence[Callable[[np.ndarray], np.ndarray]],
) -> list[float]:
    """Difference of ESD integrals of each test function between A and B."""
    eig_a = spectral.eigenvalues(pair.a_matrix)
    eig_b = spectral.eigenvalues(pair.b_matrix)
    return [
        float(np.mean(np.asarray(f(eig_a), dtype=np.float64))
              - np.mean(np.asarray(f(eig_b), dtype=np.float64)))
        for f in test_functions
    ]


@dataclass(frozen=True)
class ConstantCaseResult:
    """Outlier and bulk summary for the rank-one all-ones perturbation."""

    lambda1: complex
    lambda2: complex
    s1_central: float


def constant_case(
    n: int, dist: ensemble.EntryDistribution, seed: int
) -> ConstantCaseResult:
    """Sample X, perturb by the all-ones matrix, and report the outlier.

    Returns the two largest-modulus eigenvalues of (X + ones)/sqrt(n) and
    the operator norm of the unperturbed X/sqrt(n).
    """
    if n < 2:
        raise ShapeError(f"constant case needs n >= 2, got {n}")
    x = ensemble.sample_matrix(dist, n, seed)
    m = ensemble.build_perturbation(ensemble.PerturbationSpec.all_ones(), n)
    pair = ensemble.assemble(x, m)
    eig = spectral.eigenvalues(pair.b_matrix)
    s1 = float(spectral.singular_values(pair.a_matrix)[0])
    return ConstantCaseResult(
        lambda1=complex(eig[0]), lambda2=complex(eig[1]), s1_central=s1
    )


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned rectangle in the complex plane."""

    re_lo: float
    re_hi: float
    im_lo: float
    im_hi: float

    def __post_init__(self) -> None:
        if not (self.re_lo < self.re_hi and self.im_lo < self.im_hi):
            raise ValidationError("rectangle bounds must satisfy lo < hi")


@dataclass(frozen=True)
class BumpFunction:
    """Smooth compactly supported radial bump with an analytic Laplacian.

    f(z) = amplitude * exp(1 - 1/(1 - u)) with u = |z - center|^2 / radius^2
    inside the support disc, 0 outside. f(center) = amplitude.
    """

    center: complex = 0.0 + 0.0j
    radius: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValidationError(f"bump radius must be positive, got {self.radius}")

    def _u(self, z: np.ndarray) -> np.ndarray:
        d = np.asarray(z, dtype=np.complex128) - self.center
        return (d.real * d.real + d.imag * d.imag) / (self.radius * self.radius)

    def value(self, z) -> np.ndarray:
        u = self._u(z)
        out = np.zeros_like(u)
        inside = u < 1.0 - 1e-12
        out[inside] = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - u[inside]))
        return out

    __call__ = value

    def laplacian(self, z) -> np.ndarray:
        """Exact 2-d Laplacian; vanishes smoothly at the support boundary."""
        u = self._u(z)
        out = np.zeros_like(u)
        # Near u = 1 the exponential underflow dominates the rational blowup;
        # cut slightly early to avoid inf * 0.
        inside = u < 1.0 - 1e-9
        ui = u[inside]
        one_minus = 1.0 - ui
        h1 = -1.0 / one_minus**2
        h2 = -2.0 / one_minus**3
        g = np.exp(1.0 - 1.0 / one_minus)
        out[inside] = (
            (4.0 * self.amplitude / (self.radius * self.radius))
            * g
            * (ui * (h2 + h1 * h1) + h1)
        )
        return out


def default_test_functions(
    radius: float = 1.2, center: complex = 0.0 + 0.0j
) -> list[Callable[[np.ndarray], np.ndarray]]:
    """Radial bumps and polynomial-times-bump probes for weak convergence."""
    bump = BumpFunction(center=center, radius=radius)
    half = BumpFunction(center=center, radius=radius / 2.0)

    def real_part_weighted(z):
        return np.real(z) * bump(z)

    def modulus_sq_weighted(z):
        z = np.asarray(z, dtype=np.complex128)
        return (z.real**2 + z.imag**2) * bump(z)

    return [bump, half, real_part_weighted, modulus_sq_weighted]


@dataclass(frozen=True)
class GreenIdentityResult:
    lhs: float
    rhs: float
    residual: float


def green_identity_residual(
    roots: Sequence[complex],
    f: BumpFunction,
    grid_step: float,
    domain: Rectangle,
) -> GreenIdentityResult:
    """Compare the root-counting sum of f against its log-modulus integral.

    lhs sums f over the roots (counting measure, not normalized). rhs is the
    midpoint Riemann sum of laplacian(f) * log|P| over the domain, scaled by
    1/(2 pi), with P the monic polynomial having the given roots. Grid nodes
    within grid_step/2 of a root are skipped; the log singularity there is
    integrable, so the skip contributes O(h^2 log h) to the residual.
    """
    roots_arr = np.asarray(list(roots), dtype=np.complex128)
    if roots_arr.size == 0:
        raise ValidationError("at least one root is required")
    if not np.all(np.isfinite(roots_arr.view(np.float64))):
        raise InvalidValueError("roots must be finite")
    if grid_step <= 0:
        raise ValidationError(f"grid step must be positive, got {grid_step}")
    if 2.0 * f.radius / grid_step < 8.0:
        raise ValidationError(
            f"grid step {grid_step} does not resolve the support width "
            f"{2.0 * f.radius} (need >= 8 cells across)"
        )
    c = f.center
    if not (
        domain.re_lo <= c.real - f.radius
        and c.real + f.radius <= domain.re_hi
        and domain.im_lo <= c.imag - f.radius
        and c.imag + f.radius <= domain.im_hi
    ):
        raise DomainError("test-function support exceeds the quadrature domain")

    h = grid_step
    xs = np.arange(domain.re_lo + h / 2.0, domain.re_hi, h)
    ys = np.arange(domain.im_lo + h / 2.0, domain.im_hi, h)
    zz = xs[None, :] + 1j * ys[:, None]

    lap = f.laplacian(zz)
    dist = np.min(np.abs(zz[..., None] - roots_arr[None, None, :]), axis=-1)
    keep = dist >= h / 2.0
    log_p = np.zeros_like(lap)
    log_p[keep] = np.sum(
        np.log(np.abs(zz[keep][:, None] - roots_arr[None, :])), axis=-1
    )
    rhs = float(np.sum(lap[keep] * log_p[keep]) * h * h / (2.0 * np.pi))
    lhs = float(np.sum(f.value(roots_arr)))
    return GreenIdentityResult(lhs=lhs, rhs=rhs, residual=abs(lhs - rhs))


@dataclass(frozen=True)
class LemmaSuiteReport:
    """Violation counts from the randomized exact-property trials."""

    trials: int
    weyl_violations: int
    ibp_identity_violations: int
    ibp_bound_violations: int
    rank_violations: int
    ks_oracle_mismatches: int

    @property
    def total_violations(self) -> int:
        return (
            self.weyl_violations
            + self.ibp_identity_violations
            + self.ibp_bound_violations
            + self.rank_violations
            + self.ks_oracle_mismatches
        )


def ks_distance_brute_force(
    mu: EmpiricalMeasure1D, nu: EmpiricalMeasure1D
) -> float:
    """Independent KS evaluation on a dense grid of atoms and midpoints."""
    grid = np.unique(np.concatenate([mu.atoms, nu.atoms]))
    if grid.size > 1:
        mids = 0.5 * (grid[1:] + grid[:-1])
        grid = np.concatenate([grid, mids, [grid[0] - 1.0, grid[-1] + 1.0]])
    best = 0.0
    for x in grid:
        f_mu = float(np.mean(mu.atoms <= x))
        f_nu = float(np.mean(nu.atoms <= x))
        best = max(best, abs(f_mu - f_nu))
    return best


def _random_measure(rng: np.random.Generator, max_atoms: int, lo: float, hi: float):
    n = int(rng.integers(1, max_atoms + 1))
    return EmpiricalMeasure1D(rng.uniform(lo, hi, n))


def _poly_pair(coeffs: np.ndarray, scale: float):
    """Polynomial sum(c_k (x/scale)^k) and its derivative as callables."""

    def f(x):
        x = np.asarray(x, dtype=np.float64)
        acc = np.zeros_like(x)
        for k, c in enumerate(coeffs):
            acc = acc + c * (x / scale) ** k
        return acc

    def fp(x):
        x = np.asarray(x, dtype=np.float64)
        acc = np.zeros_like(x)
        for k, c in enumerate(coeffs):
            if k >= 1:
                acc = acc + c * k * (x / scale) ** (k - 1) / scale
        return acc

    return f, fp


def run_lemma_trials(trials: int, seed: int) -> LemmaSuiteReport:
    """Randomized verification of the exact supporting inequalities.

    Per trial: Weyl's second-moment inequality on a random complex matrix,
    the integration-by-parts identity and its monotone bound on random atom
    sets, the rank bound with a planted low-rank difference, and agreement
    of the Kolmogorov distance with a brute-force grid evaluation.
    """
    if trials < 1:
        raise ValidationError(f"trials must be positive, got {trials}")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    weyl = ibp_identity = ibp_bound = rank_bad = ks_bad = 0

    for _ in range(trials):
        # Weyl: random complex Gaussian entries, n in 2..30.
        n = int(rng.integers(2, 31))
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        w = spectral.check_weyl(a)
        if not w.holds:
            weyl += 1

        # IBP identity with a random degree-<=4 polynomial on [1, 10].
        mu = _random_measure(rng, 40, 1.0, 10.0)
        nu = _random_measure(rng, 40, 1.0, 10.0)
        coeffs = rng.uniform(-1.0, 1.0, int(rng.integers(1, 6)))
        f, fp = _poly_pair(coeffs, 10.0)
        res = measures.ibp_difference(f, fp, mu, nu, (1.0, 10.0))
        if abs(res.lhs - res.rhs) > 1e-10 * (1.0 + abs(res.lhs)):
            ibp_identity += 1

        # Monotone bound with nonnegative coefficients (nondecreasing on [1, 10]).
        g, gp = _poly_pair(np.abs(coeffs), 10.0)
        res_mono = measures.ibp_difference(g, gp, mu, nu, (1.0, 10.0))
        if abs(res_mono.lhs) > res_mono.bound + 1e-10:
            ibp_bound += 1

        # Rank bound with a planted rank-k difference, k in 0..5.
        n = int(rng.integers(2, 41))
        k = int(rng.integers(0, min(5, n) + 1))
        base = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        bump_m = np.zeros((n, n), dtype=np.complex128)
        for _i in range(k):
            u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            bump_m += np.outer(u, v)
        check = verify_rank_inequality(base, base + bump_m)
        if not check.holds or check.bound > k / n + RANK_SLACK:
            rank_bad += 1

        # KS against the brute-force oracle, exact match required.
        mu2 = _random_measure(rng, 40, -5.0, 5.0)
        nu2 = _random_measure(rng, 40, -5.0, 5.0)
        if measures.kolmogorov_distance(mu2, nu2) != ks_distance_brute_force(mu2, nu2):
            ks_bad += 1

    return LemmaSuiteReport(
        trials=trials,
        weyl_violations=weyl,
        ibp_identity_violations=ibp_identity,
        ibp_bound_violations=ibp_bound,
        rank_violations=rank_bad,
        ks_oracle_mismatches=ks_bad,
    )
