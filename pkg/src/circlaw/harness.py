"""Experiment orchestration: config parsing, replicated runs, report files.

A run is a pure function of its configuration: per-(dim, replicate) sample
seeds are derived from the master seed, units may execute in any order or in
parallel, and the CSV/JSON outputs are byte-identical across repetitions and
worker counts. Floats are written in shortest round-trip decimal form.
"""

from __future__ import annotations

import dataclasses
import json
import math
import multiprocessing
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import diagnostics, measures, spectral
from .diagnostics import DeltaDiagnostics, ScalingReport, ZGrid
from .ensemble import (
    PERTURBATION_KINDS,
    EntryDistribution,
    PerturbationSpec,
)
from .errors import MeasureError, ValidationError

__all__ = [
    "DEFAULT_Z_GRID",
    "DEFAULT_REFERENCE_EXPONENT",
    "ExperimentConfig",
    "DiskRecord",
    "ConstantCaseRecord",
    "RunReport",
    "parse_config",
    "load_config",
    "serialize_config",
    "run_experiment",
    "disk_record",
    "write_report_files",
    "write_delta_csv",
    "write_disk_csv",
    "write_scaling_csv",
]

DEFAULT_REFERENCE_EXPONENT = 3.0

DELTA_CSV_HEADER = (
    "n,replicate,z_re,z_im,delta,ks,rank_bound,ibp_bound,"
    "s_min_a,s_min_b,s_max_a,s_max_b,singular_flag"
)
DISK_CSV_HEADER = "n,replicate,radial_ks,angular_ks,top_eigen_modulus"
SCALING_CSV_HEADER = "n,median_abs_delta,median_ks,min_smin,max_smax"


def _default_z_grid() -> ZGrid:
    return ZGrid(re_range=(-2.5, 2.5), im_range=(-2.5, 2.5), step=0.5)


DEFAULT_Z_GRID = _default_z_grid()


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated description of one replicated scan experiment."""

    name: str
    dims: tuple[int, ...]
    distribution: EntryDistribution
    perturbation: PerturbationSpec
    replicates: int
    master_seed: int
    output_dir: str
    z_grid: ZGrid = field(default_factory=_default_z_grid)
    reference_exponent_b0: float = DEFAULT_REFERENCE_EXPONENT

    def __post_init__(self) -> None:
        object.__setattr__(self, "dims", tuple(self.dims))
        problems: list[str] = []
        if not isinstance(self.name, str) or not self.name:
            problems.append("name must be a nonempty string")
        if not self.dims:
            problems.append("dims must be nonempty")
        elif not all(isinstance(d, int) and not isinstance(d, bool) and d >= 1
                     for d in self.dims):
            problems.append(f"dims must be positive integers, got {list(self.dims)}")
        elif any(b <= a for a, b in zip(self.dims, self.dims[1:])):
            problems.append(f"dims must be strictly increasing, got {list(self.dims)}")
        if not isinstance(self.replicates, int) or isinstance(self.replicates, bool) \
                or self.replicates < 1:
            problems.append(f"replicates must be a positive integer, got {self.replicates!r}")
        if not isinstance(self.master_seed, int) or isinstance(self.master_seed, bool):
            problems.append(f"master_seed must be an integer, got {self.master_seed!r}")
        if not isinstance(self.output_dir, str) or not self.output_dir:
            problems.append("output_dir must be a nonempty string")
        if not isinstance(self.distribution, EntryDistribution):
            problems.append("distribution must be an EntryDistribution")
        if not isinstance(self.perturbation, PerturbationSpec):
            problems.append("perturbation must be a PerturbationSpec")
        if not isinstance(self.z_grid, ZGrid):
            problems.append("z_grid must be a ZGrid")
        b0 = self.reference_exponent_b0
        if not isinstance(b0, (int, float)) or isinstance(b0, bool) \
                or not math.isfinite(float(b0)):
            problems.append(f"reference_exponent_b0 must be a finite real, got {b0!r}")
        else:
            object.__setattr__(self, "reference_exponent_b0", float(b0))
        if problems:
            raise ValidationError("invalid experiment config: " + "; ".join(problems))


_TOP_LEVEL_KEYS = {
    "name", "dims", "distribution", "perturbation", "z_grid",
    "replicates", "master_seed", "reference_exponent_b0", "output_dir",
}
_REQUIRED_KEYS = (
    "name", "dims", "distribution", "perturbation",
    "replicates", "master_seed", "output_dir",
)
_PERTURBATION_KEYS = {
    "kind", "scale", "k", "left_factors", "right_factors", "path",
    "rank_budget", "hs_budget_coefficient",
}
_PERTURBATION_KEYS_BY_KIND = {
    "zero": {"kind", "rank_budget", "hs_budget_coefficient"},
    "all-ones": {"kind", "scale", "rank_budget", "hs_budget_coefficient"},
    "low-rank": {"kind", "k", "left_factors", "right_factors",
                 "rank_budget", "hs_budget_coefficient"},
    "file": {"kind", "path", "rank_budget", "hs_budget_coefficient"},
}
_Z_GRID_KEYS = {"re_range", "im_range", "step"}


def _complex_vector(values, label: str) -> tuple[complex, ...]:
    """Accepts a list of reals or [re, im] pairs."""
    out = []
    for v in values:
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            out.append(complex(float(v), 0.0))
        elif isinstance(v, (list, tuple)) and len(v) == 2:
            out.append(complex(float(v[0]), float(v[1])))
        else:
            raise ValidationError(
                f"{label} entries must be reals or [re, im] pairs, got {v!r}"
            )
    return tuple(out)


def _parse_perturbation(obj) -> PerturbationSpec:
    if not isinstance(obj, dict):
        raise ValidationError("perturbation must be a JSON object")
    problems = [f"unknown perturbation key {key!r}" for key in obj
                if key not in _PERTURBATION_KEYS]
    kind = obj.get("kind")
    if kind not in PERTURBATION_KINDS:
        problems.append(
            f"perturbation kind must be one of {', '.join(PERTURBATION_KINDS)}, "
            f"got {kind!r}"
        )
    if problems:
        raise ValidationError("; ".join(problems))
    allowed = _PERTURBATION_KEYS_BY_KIND[kind]
    stray = [key for key in obj if key not in allowed]
    if stray:
        raise ValidationError(
            "; ".join(
                f"key {key!r} not applicable to perturbation kind {kind!r}"
                for key in stray
            )
        )
    if kind == "zero":
        spec = PerturbationSpec.zero()
    elif kind == "all-ones":
        spec = PerturbationSpec.all_ones(float(obj.get("scale", 1.0)))
    elif kind == "low-rank":
        left = [_complex_vector(v, "left_factors")
                for v in obj.get("left_factors", [])]
        right = [_complex_vector(v, "right_factors")
                 for v in obj.get("right_factors", [])]
        spec = PerturbationSpec.low_rank(left, right)
        if "k" in obj and obj["k"] != spec.k:
            raise ValidationError(
                f"perturbation k={obj['k']} does not match "
                f"{spec.k} factor pairs"
            )
    else:
        spec = PerturbationSpec.from_file(obj.get("path") or "")
    overrides = {}
    if "rank_budget" in obj:
        overrides["rank_budget"] = obj["rank_budget"]
    if "hs_budget_coefficient" in obj:
        overrides["hs_budget_coefficient"] = float(obj["hs_budget_coefficient"])
    if overrides:
        spec = dataclasses.replace(spec, **overrides)
    return spec


def _parse_z_grid(obj) -> ZGrid:
    if not isinstance(obj, dict):
        raise ValidationError("z_grid must be a JSON object")
    problems = [f"unknown z_grid key {key!r}" for key in obj
                if key not in _Z_GRID_KEYS]
    missing = [key for key in sorted(_Z_GRID_KEYS) if key not in obj]
    problems.extend(f"z_grid missing key {key!r}" for key in missing)
    if problems:
        raise ValidationError("; ".join(problems))

    def _pair(key: str) -> tuple[float, float]:
        v = obj[key]
        if not (isinstance(v, (list, tuple)) and len(v) == 2):
            raise ValidationError(f"z_grid {key} must be a [lo, hi] pair, got {v!r}")
        return float(v[0]), float(v[1])

    return ZGrid(re_range=_pair("re_range"), im_range=_pair("im_range"),
                 step=float(obj["step"]))


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment configuration.

    Unknown keys are rejected by name at the top level and inside the
    perturbation and z_grid objects; defaults are applied for z_grid and
    reference_exponent_b0. All schema-level problems are reported together.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("config document must be a JSON object")

    problems = [f"unknown key {key!r}" for key in doc if key not in _TOP_LEVEL_KEYS]
    problems.extend(
        f"missing required key {key!r}" for key in _REQUIRED_KEYS if key not in doc
    )

    distribution = perturbation = None
    z_grid = _default_z_grid()
    if "distribution" in doc:
        if isinstance(doc["distribution"], str):
            try:
                distribution = EntryDistribution.parse(doc["distribution"])
            except ValidationError as exc:
                problems.append(str(exc))
        else:
            problems.append("distribution must be a string")
    if "perturbation" in doc:
        try:
            perturbation = _parse_perturbation(doc["perturbation"])
        except ValidationError as exc:
            problems.append(str(exc))
    if "z_grid" in doc:
        try:
            z_grid = _parse_z_grid(doc["z_grid"])
        except (ValidationError, TypeError) as exc:
            problems.append(str(exc))
    if problems:
        raise ValidationError("invalid experiment config: " + "; ".join(problems))

    dims = doc["dims"]
    if not isinstance(dims, list):
        raise ValidationError("invalid experiment config: dims must be a list")
    return ExperimentConfig(
        name=doc["name"],
        dims=tuple(dims),
        distribution=distribution,
        perturbation=perturbation,
        replicates=doc["replicates"],
        master_seed=doc["master_seed"],
        output_dir=doc["output_dir"],
        z_grid=z_grid,
        reference_exponent_b0=doc.get(
            "reference_exponent_b0", DEFAULT_REFERENCE_EXPONENT
        ),
    )


def load_config(path) -> ExperimentConfig:
    """Read and parse a config file; missing files surface the path."""
    return parse_config(Path(path).read_text())


def _perturbation_to_obj(spec: PerturbationSpec) -> dict:
    obj: dict = {"kind": spec.kind}
    if spec.kind == "all-ones":
        obj["scale"] = spec.scale
    elif spec.kind == "low-rank":
        obj["k"] = spec.k
        obj["left_factors"] = [
            [[v.real, v.imag] for v in vec] for vec in spec.left_factors
        ]
        obj["right_factors"] = [
            [[v.real, v.imag] for v in vec] for vec in spec.right_factors
        ]
    elif spec.kind == "file":
        obj["path"] = spec.path
    if spec.rank_budget is not None:
        obj["rank_budget"] = spec.rank_budget
    if spec.hs_budget_coefficient is not None:
        obj["hs_budget_coefficient"] = spec.hs_budget_coefficient
    return obj


def config_to_obj(config: ExperimentConfig) -> dict:
    return {
        "name": config.name,
        "dims": list(config.dims),
        "distribution": str(config.distribution),
        "perturbation": _perturbation_to_obj(config.perturbation),
        "z_grid": {
            "re_range": list(config.z_grid.re_range),
            "im_range": list(config.z_grid.im_range),
            "step": config.z_grid.step,
        },
        "replicates": config.replicates,
        "master_seed": config.master_seed,
        "reference_exponent_b0": config.reference_exponent_b0,
        "output_dir": config.output_dir,
    }


def serialize_config(config: ExperimentConfig) -> str:
    """Inverse of parse_config: parse(serialize(c)) == c."""
    return json.dumps(config_to_obj(config), indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class DiskRecord:
    """Disc-law distances for one replicate; NaN top modulus when rank 0."""

    dim: int
    replicate: int
    radial_ks: float
    angular_ks: float
    top_eigen_modulus: float


@dataclass(frozen=True)
class ConstantCaseRecord:
    dim: int
    replicate: int
    lambda1: complex
    lambda2: complex
    s1_central: float


@dataclass(frozen=True)
class UnitResult:
    dim: int
    replicate: int
    diagnostics: tuple[DeltaDiagnostics, ...]
    disk: DiskRecord
    constant: ConstantCaseRecord | None


@dataclass(frozen=True)
class RunReport:
    """In-memory result of run_experiment; timings are not serialized."""

    config: ExperimentConfig
    delta_rows: tuple[tuple[int, int, DeltaDiagnostics], ...]
    disk_rows: tuple[DiskRecord, ...]
    constant_rows: tuple[ConstantCaseRecord, ...]
    scaling: ScalingReport
    timings: dict[str, float]

    @property
    def flagged_points(self) -> int:
        return sum(1 for _, _, d in self.delta_rows if d.singular_flag)

    @property
    def consistency_ok(self) -> bool:
        """All recorded inequalities hold on every non-flagged row."""
        return all(
            d.cross_check_ok and d.rank_inequality_ok and d.chain_bound_ok
            for _, _, d in self.delta_rows
        )


def disk_record(
    pair, dim: int, replicate: int, eigenvalues: np.ndarray | None = None
) -> DiskRecord:
    """Disc-law distances of the perturbed ESD for one assembled pair.

    When the perturbation has rank >= 1 the single largest-modulus eigenvalue
    is excluded from the distances and reported as top_eigen_modulus.
    """
    eig = spectral.eigenvalues(pair.b_matrix) if eigenvalues is None else eigenvalues
    if pair.perturbation_rank >= 1:
        top_modulus = float(np.abs(eig[0]))
        bulk = eig[1:]
    else:
        top_modulus = float("nan")
        bulk = eig
    if bulk.size == 0:
        radial = angular = float("nan")
    else:
        cloud = measures.EmpiricalMeasure2D(bulk)
        radial = measures.radial_disk_distance(cloud)
        try:
            angular = measures.angular_disk_distance(cloud)
        except MeasureError:
            angular = float("nan")
    return DiskRecord(
        dim=dim,
        replicate=replicate,
        radial_ks=radial,
        angular_ks=angular,
        top_eigen_modulus=top_modulus,
    )


def _run_unit(config: ExperimentConfig, dim: int, replicate: int) -> UnitResult:
    pair = diagnostics.build_pair(config, dim, replicate)
    diags = tuple(diagnostics.delta_scan(pair, config.z_grid))
    eig = spectral.eigenvalues(pair.b_matrix)
    disk = disk_record(pair, dim, replicate, eigenvalues=eig)

    constant = None
    if config.perturbation.kind == "all-ones" and dim >= 2:
        s1 = float(spectral.singular_values(pair.a_matrix)[0])
        constant = ConstantCaseRecord(
            dim=dim,
            replicate=replicate,
            lambda1=complex(eig[0]),
            lambda2=complex(eig[1]),
            s1_central=s1,
        )
    return UnitResult(
        dim=dim, replicate=replicate, diagnostics=diags, disk=disk,
        constant=constant,
    )


def run_experiment(config: ExperimentConfig, workers: int = 1) -> RunReport:
    """Execute the configured scan and write report files to output_dir.

    Units (one per (dim, replicate)) are independent; with workers > 1 they
    run in spawned processes. Outputs are identical for identical configs
    regardless of worker count.
    """
    if workers < 1:
        raise ValidationError(f"workers must be positive, got {workers}")
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    probe = out_dir / ".write-probe"
    probe.write_text("")
    probe.unlink()

    tasks = [(config, dim, replicate)
             for dim in config.dims for replicate in range(config.replicates)]
    t0 = time.perf_counter()
    if workers > 1:
        # fork avoids re-importing __main__ in the children; results do not
        # depend on the start method or the worker count.
        method = "fork" if "fork" in multiprocessing.get_all_start_methods() else "spawn"
        ctx = multiprocessing.get_context(method)
        with ctx.Pool(min(workers, len(tasks))) as pool:
            units = pool.starmap(_run_unit, tasks)
    else:
        units = [_run_unit(*task) for task in tasks]
    t_units = time.perf_counter() - t0

    seen = {(u.dim, u.replicate) for u in units}
    if len(units) != len(tasks) or len(seen) != len(tasks):
        raise RuntimeError("unit accounting mismatch: a (dim, replicate) was dropped")

    t0 = time.perf_counter()
    delta_rows = tuple(
        (u.dim, u.replicate, d) for u in units for d in u.diagnostics
    )
    scaling = diagnostics.aggregate_scaling(
        delta_rows, config.reference_exponent_b0, min_dims=0
    )
    report = RunReport(
        config=config,
        delta_rows=delta_rows,
        disk_rows=tuple(u.disk for u in units),
        constant_rows=tuple(u.constant for u in units if u.constant is not None),
        scaling=scaling,
        timings={},
    )
    t_aggregate = time.perf_counter() - t0

    t0 = time.perf_counter()
    write_report_files(report, out_dir)
    t_write = time.perf_counter() - t0
    report.timings.update(
        {"units_s": t_units, "aggregate_s": t_aggregate, "write_s": t_write}
    )
    return report


def _fmt(x: float) -> str:
    """Shortest round-trip decimal form."""
    return repr(float(x))


def write_delta_csv(path, rows: Sequence[tuple[int, int, DeltaDiagnostics]]) -> None:
    lines = [DELTA_CSV_HEADER]
    for dim, replicate, d in rows:
        lines.append(
            f"{dim},{replicate},{_fmt(d.z.real)},{_fmt(d.z.imag)},"
            f"{_fmt(d.delta)},{_fmt(d.ks)},{_fmt(d.rank_bound)},"
            f"{_fmt(d.ibp_bound)},{_fmt(d.s_min_a)},{_fmt(d.s_min_b)},"
            f"{_fmt(d.s_max_a)},{_fmt(d.s_max_b)},"
            f"{1 if d.singular_flag else 0}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_disk_csv(path, rows: Sequence[DiskRecord]) -> None:
    lines = [DISK_CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.dim},{r.replicate},{_fmt(r.radial_ks)},{_fmt(r.angular_ks)},"
            f"{_fmt(r.top_eigen_modulus)}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_scaling_csv(path, scaling: ScalingReport) -> None:
    lines = [SCALING_CSV_HEADER]
    for s in scaling.per_dim:
        lines.append(
            f"{s.dim},{_fmt(s.median_abs_delta)},{_fmt(s.median_ks)},"
            f"{_fmt(s.min_smin)},{_fmt(s.max_smax)}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def _jf(x: float):
    """Float for JSON; None for non-finite values."""
    x = float(x)
    return x if math.isfinite(x) else None


def _jc(z: complex) -> list:
    return [_jf(z.real), _jf(z.imag)]


def report_to_obj(report: RunReport) -> dict:
    cross_gaps = [
        abs(d.delta - d.delta_logdet)
        for _, _, d in report.delta_rows if not d.singular_flag
    ]
    scaling = report.scaling
    return {
        "config": config_to_obj(report.config),
        "consistency": {
            "cross_check_ok": all(
                d.cross_check_ok for _, _, d in report.delta_rows
            ),
            "chain_bound_ok": all(
                d.chain_bound_ok for _, _, d in report.delta_rows
            ),
            "rank_inequality_ok": all(
                d.rank_inequality_ok for _, _, d in report.delta_rows
            ),
            "flagged_points": report.flagged_points,
            "delta_rows": len(report.delta_rows),
            "max_cross_check_gap": _jf(max(cross_gaps)) if cross_gaps else None,
        },
        "disk": [
            {
                "n": r.dim,
                "replicate": r.replicate,
                "radial_ks": _jf(r.radial_ks),
                "angular_ks": _jf(r.angular_ks),
                "top_eigen_modulus": _jf(r.top_eigen_modulus),
            }
            for r in report.disk_rows
        ],
        "constant_case": [
            {
                "n": r.dim,
                "replicate": r.replicate,
                "lambda1": _jc(r.lambda1),
                "lambda2": _jc(r.lambda2),
                "s1_central": _jf(r.s1_central),
            }
            for r in report.constant_rows
        ],
        "scaling": {
            "dims": list(scaling.dims),
            "a_hat": _jf(scaling.a_hat),
            "b_hat": _jf(scaling.b_hat),
            "eps_hat": _jf(scaling.eps_hat),
            "reference_exponent_b0": _jf(scaling.reference_exponent_b0),
            "smin_violation_fraction": _jf(scaling.smin_violation_fraction),
            "per_dim": [
                {
                    "n": s.dim,
                    "median_abs_delta": _jf(s.median_abs_delta),
                    "median_ks": _jf(s.median_ks),
                    "min_smin": _jf(s.min_smin),
                    "max_smax": _jf(s.max_smax),
                    "rows": s.rows,
                    "flagged": s.flagged,
                }
                for s in scaling.per_dim
            ],
        },
    }


def write_report_files(report: RunReport, out_dir) -> dict[str, Path]:
    """Write delta.csv, disk.csv, scaling.csv, and report.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "delta": out_dir / "delta.csv",
        "disk": out_dir / "disk.csv",
        "scaling": out_dir / "scaling.csv",
        "report": out_dir / "report.json",
    }
    write_delta_csv(paths["delta"], report.delta_rows)
    write_disk_csv(paths["disk"], report.disk_rows)
    write_scaling_csv(paths["scaling"], report.scaling)
    paths["report"].write_text(
        json.dumps(report_to_obj(report), indent=2, sort_keys=True) + "\n"
    )
    return paths
