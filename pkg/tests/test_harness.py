"""Tests for experiment configs, report generation, and the CLI."""

import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circlaw import (
    DEFAULT_Z_GRID,
    EntryDistribution,
    ExperimentConfig,
    PerturbationSpec,
    ValidationError,
    ZGrid,
    load_config,
    parse_config,
    run_experiment,
    serialize_config,
    write_report_files,
)
from circlaw import cli

CG = EntryDistribution.parse("complex-gaussian")

MINIMAL = {
    "name": "demo",
    "dims": [10, 20],
    "distribution": "complex-gaussian",
    "perturbation": {"kind": "all-ones"},
    "replicates": 2,
    "master_seed": 7,
    "output_dir": "out",
}


def cfg_json(**overrides):
    obj = dict(MINIMAL)
    obj.update(overrides)
    return json.dumps(obj)


def small_config(tmp_path, **overrides):
    fields = dict(
        name="small",
        dims=(6, 8),
        distribution=CG,
        perturbation=PerturbationSpec.all_ones(),
        z_grid=ZGrid((0.0, 0.5), (0.0, 0.0), 0.5),
        replicates=2,
        master_seed=13,
        output_dir=str(tmp_path / "out"),
    )
    fields.update(overrides)
    return ExperimentConfig(**fields)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_parse_minimal_config_fills_defaults():
    c = parse_config(cfg_json())
    assert c.name == "demo"
    assert c.dims == (10, 20)
    assert c.distribution == CG
    assert c.perturbation.kind == "all-ones"
    assert c.z_grid == DEFAULT_Z_GRID
    assert c.reference_exponent_b0 == 3.0
    assert c.replicates == 2


def test_parse_rejects_unsorted_dims():
    with pytest.raises(ValidationError, match="increasing"):
        parse_config(cfg_json(dims=[200, 100]))
    with pytest.raises(ValidationError):
        parse_config(cfg_json(dims=[100, 100]))
    with pytest.raises(ValidationError):
        parse_config(cfg_json(dims=[]))
    with pytest.raises(ValidationError):
        parse_config(cfg_json(dims=[0, 10]))


def test_parse_rejects_unknown_keys_by_name():
    with pytest.raises(ValidationError, match="rankk"):
        parse_config(cfg_json(rankk=1))


def test_parse_reports_all_problems_at_once():
    bad = cfg_json(rankk=1, wibble=2)
    with pytest.raises(ValidationError, match="rankk") as exc:
        parse_config(bad)
    assert "wibble" in str(exc.value)


def test_parse_rejects_unknown_perturbation_key():
    with pytest.raises(ValidationError, match="strength"):
        parse_config(cfg_json(perturbation={"kind": "all-ones", "strength": 2}))


def test_parse_rejects_inapplicable_perturbation_key():
    # scale applies to all-ones, not to zero
    with pytest.raises(ValidationError, match="scale"):
        parse_config(cfg_json(perturbation={"kind": "zero", "scale": 2.0}))


def test_parse_rejects_unknown_z_grid_key():
    grid = {"re_range": [0, 1], "im_range": [0, 1], "step": 0.5, "shape": "x"}
    with pytest.raises(ValidationError, match="shape"):
        parse_config(cfg_json(z_grid=grid))


def test_parse_rejects_partial_z_grid():
    with pytest.raises(ValidationError, match="step"):
        parse_config(cfg_json(z_grid={"re_range": [0, 1], "im_range": [0, 1]}))


def test_parse_rejects_missing_keys_by_name():
    obj = dict(MINIMAL)
    del obj["master_seed"]
    del obj["output_dir"]
    with pytest.raises(ValidationError, match="master_seed") as exc:
        parse_config(json.dumps(obj))
    assert "output_dir" in str(exc.value)


def test_parse_rejects_malformed_json():
    with pytest.raises(ValidationError):
        parse_config("{not json")
    with pytest.raises(ValidationError):
        parse_config("[1, 2, 3]")


def test_parse_low_rank_factors():
    pert = {
        "kind": "low-rank",
        "left_factors": [[1.0, 0.0, 0.0], [[0.0, 1.0], 1.0, 0.0]],
        "right_factors": [[0.0, 0.0, 2.0], [0.0, 3.0, 0.0]],
    }
    c = parse_config(cfg_json(perturbation=pert, dims=[3]))
    assert c.perturbation.k == 2
    assert c.perturbation.left_factors[1][0] == 1.0j


def test_parse_low_rank_k_mismatch():
    pert = {
        "kind": "low-rank",
        "k": 3,
        "left_factors": [[1.0, 0.0]],
        "right_factors": [[0.0, 1.0]],
    }
    with pytest.raises(ValidationError, match="k"):
        parse_config(cfg_json(perturbation=pert))


def test_serialize_round_trip_handcrafted():
    specs = [
        PerturbationSpec.zero(),
        PerturbationSpec.all_ones(scale=0.5),
        PerturbationSpec.low_rank([(1.0, 2.0j)], [(0.0, 1.0)],
                                  hs_budget_coefficient=9.0),
        PerturbationSpec.from_file("/tmp/m.csv", rank_budget=3),
    ]
    for spec in specs:
        c = ExperimentConfig(
            name="rt", dims=(4, 8), distribution=CG, perturbation=spec,
            z_grid=ZGrid((-1.0, 1.0), (0.0, 0.5), 0.25),
            replicates=3, master_seed=99, output_dir="somewhere",
            reference_exponent_b0=2.5,
        )
        assert parse_config(serialize_config(c)) == c


def test_serialize_is_deterministic():
    c = parse_config(cfg_json())
    assert serialize_config(c) == serialize_config(parse_config(serialize_config(c)))


@given(
    name=st.text(st.characters(min_codepoint=97, max_codepoint=122),
                 min_size=1, max_size=8),
    dims=st.lists(st.integers(2, 64), min_size=1, max_size=4, unique=True),
    kind=st.sampled_from(["complex-gaussian", "rademacher", "centered-uniform"]),
    replicates=st.integers(1, 5),
    seed=st.integers(0, 2**63 - 1),
    scale=st.floats(0.25, 4.0, allow_nan=False),
)
@settings(max_examples=60, deadline=None)
def test_config_round_trip_property(name, dims, kind, replicates, seed, scale):
    c = ExperimentConfig(
        name=name,
        dims=tuple(sorted(dims)),
        distribution=EntryDistribution.parse(kind),
        perturbation=PerturbationSpec.all_ones(scale=scale),
        replicates=replicates,
        master_seed=seed,
        output_dir="out",
    )
    assert parse_config(serialize_config(c)) == c


def test_load_config_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "nope.json")


def test_load_config_reads_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(cfg_json())
    assert load_config(path) == parse_config(cfg_json())


def test_config_validation_collects_problems():
    with pytest.raises(ValidationError) as exc:
        ExperimentConfig(
            name="", dims=(), distribution=CG,
            perturbation=PerturbationSpec.zero(),
            replicates=0, master_seed=1, output_dir="out",
        )
    msg = str(exc.value)
    assert "name" in msg
    assert "dims" in msg
    assert "replicates" in msg


def test_run_experiment_zero_perturbation(tmp_path):
    cfg = small_config(tmp_path, perturbation=PerturbationSpec.zero())
    report = run_experiment(cfg)
    assert report.consistency_ok
    assert report.flagged_points == 0
    rows = read_csv(tmp_path / "out" / "delta.csv")
    # 2 dims * 2 replicates * 2 grid points
    assert len(rows) == 8
    assert all(float(r["delta"]) == 0.0 for r in rows)
    assert all(float(r["ks"]) == 0.0 for r in rows)
    assert all(r["singular_flag"] == "0" for r in rows)
    # zero perturbation produces no outlier records
    assert len(report.constant_rows) == 0
    disk = read_csv(tmp_path / "out" / "disk.csv")
    assert len(disk) == 4
    assert all(r["top_eigen_modulus"] == "nan" for r in disk)


def test_run_experiment_all_ones(tmp_path):
    cfg = small_config(tmp_path)
    report = run_experiment(cfg)
    assert report.consistency_ok
    rows = read_csv(tmp_path / "out" / "delta.csv")
    assert len(rows) == 8
    assert {r["n"] for r in rows} == {"6", "8"}
    disk = read_csv(tmp_path / "out" / "disk.csv")
    assert len(disk) == 4
    for r in disk:
        assert 0.0 <= float(r["radial_ks"]) <= 1.0
        assert 0.0 <= float(r["angular_ks"]) <= 1.0
        assert float(r["top_eigen_modulus"]) > 1.0
    assert len(report.constant_rows) == 4
    scaling = read_csv(tmp_path / "out" / "scaling.csv")
    assert [r["n"] for r in scaling] == ["6", "8"]
    report_obj = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report_obj["consistency"]["flagged_points"] == 0
    assert report_obj["config"]["name"] == "small"


def test_run_experiment_is_byte_deterministic(tmp_path):
    cfg = small_config(tmp_path)
    run_experiment(cfg)
    names = ["delta.csv", "disk.csv", "scaling.csv", "report.json"]
    first = {n: (tmp_path / "out" / n).read_bytes() for n in names}
    run_experiment(cfg)
    second = {n: (tmp_path / "out" / n).read_bytes() for n in names}
    assert first == second


def test_run_experiment_workers_match_serial(tmp_path):
    cfg = small_config(tmp_path)
    run_experiment(cfg, workers=1)
    names = ["delta.csv", "disk.csv", "scaling.csv", "report.json"]
    serial = {n: (tmp_path / "out" / n).read_bytes() for n in names}
    run_experiment(cfg, workers=3)
    parallel = {n: (tmp_path / "out" / n).read_bytes() for n in names}
    assert serial == parallel


def test_run_experiment_report_excludes_timings(tmp_path):
    cfg = small_config(tmp_path)
    report = run_experiment(cfg)
    assert report.timings  # measured in memory
    obj = json.loads((tmp_path / "out" / "report.json").read_text())
    text = (tmp_path / "out" / "report.json").read_text()
    assert "timings" not in obj
    assert "seconds" not in text


def test_run_experiment_output_dir_not_creatable(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("file, not a directory")
    cfg = small_config(tmp_path, output_dir=str(blocker / "out"))
    with pytest.raises(OSError):
        run_experiment(cfg)


def test_run_experiment_single_dim_has_nan_exponents(tmp_path):
    cfg = small_config(tmp_path, dims=(6,))
    report = run_experiment(cfg)
    assert math.isnan(report.scaling.a_hat)
    obj = json.loads((tmp_path / "out" / "report.json").read_text())
    assert obj["scaling"]["a_hat"] is None


def test_report_json_serializes_complex_and_nonfinite(tmp_path):
    cfg = small_config(tmp_path)
    report = run_experiment(cfg)
    obj = json.loads((tmp_path / "out" / "report.json").read_text())
    lam = obj["constant_case"][0]["lambda1"]
    assert isinstance(lam, list) and len(lam) == 2
    cons = obj["consistency"]
    assert cons["delta_rows"] == 8
    assert cons["cross_check_ok"] is True
    assert isinstance(cons["max_cross_check_gap"], float)


def test_write_report_files_returns_paths(tmp_path):
    cfg = small_config(tmp_path, dims=(6,))
    report = run_experiment(cfg)
    out = write_report_files(report, tmp_path / "elsewhere")
    assert sorted(p.name for p in out.values()) == [
        "delta.csv", "disk.csv", "report.json", "scaling.csv",
    ]
    assert all(p.exists() for p in out.values())


# ---- CLI ----


def write_config(tmp_path, **overrides):
    overrides.setdefault("dims", [6, 8])
    overrides.setdefault("output_dir", str(tmp_path / "out"))
    overrides.setdefault(
        "z_grid", {"re_range": [0.0, 0.5], "im_range": [0.0, 0.0], "step": 0.5})
    path = tmp_path / "config.json"
    path.write_text(cfg_json(**overrides))
    return path


def test_cli_run(tmp_path, capsys):
    path = write_config(tmp_path, replicates=1)
    code = cli.main(["run", "--config", str(path)])
    out = capsys.readouterr().out
    assert code == 0
    assert (tmp_path / "out" / "report.json").exists()
    assert "rows" in out


def test_cli_run_missing_config(tmp_path, capsys):
    code = cli.main(["run", "--config", str(tmp_path / "absent.json")])
    err = capsys.readouterr().err
    assert code == 1
    assert "absent.json" in err


def test_cli_run_invalid_config(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{")
    code = cli.main(["run", "--config", str(path)])
    assert code == 1


def test_cli_bad_flag_exits_one(capsys):
    code = cli.main(["run", "--no-such-flag"])
    assert code == 1


def test_cli_missing_subcommand_exits_one(capsys):
    assert cli.main([]) == 1


def test_cli_sample_and_spectrum(tmp_path, capsys):
    out = tmp_path / "m.csv"
    code = cli.main(["sample", "--n", "4", "--dist", "rademacher",
                     "--seed", "3", "--out", str(out)])
    assert code == 0
    assert out.exists()
    text = out.read_text()
    assert "np.float64" not in text

    code = cli.main(["spectrum", "--n", "6", "--seed", "2"])
    captured = capsys.readouterr().out
    assert code == 0
    assert "spectral radius" in captured
    assert "np.float64" not in captured


def test_cli_sample_rejects_bad_dist(capsys):
    code = cli.main(["sample", "--n", "4", "--dist", "bogus"])
    assert code == 1


def test_cli_delta_scan(tmp_path, capsys):
    path = write_config(tmp_path, replicates=1)
    out_dir = tmp_path / "scan"
    code = cli.main(["delta-scan", "--config", str(path), "--out", str(out_dir)])
    assert code == 0
    rows = read_csv(out_dir / "delta.csv")
    assert len(rows) == 4


def test_cli_circular_law(tmp_path, capsys):
    path = write_config(tmp_path, replicates=1)
    out_dir = tmp_path / "disk"
    code = cli.main(["circular-law", "--config", str(path), "--out", str(out_dir)])
    assert code == 0
    rows = read_csv(out_dir / "disk.csv")
    assert len(rows) == 2


def test_cli_constant_case(capsys):
    code = cli.main(["constant-case", "--n", "50", "--seed", "4"])
    out = capsys.readouterr().out
    assert code == 0
    assert "lambda1" in out


def test_cli_verify_lemmas(capsys):
    code = cli.main(["verify-lemmas", "--trials", "25", "--seed", "3"])
    out = capsys.readouterr().out
    assert code == 0
    assert "violations" in out
    assert "total" in out


def test_cli_run_worker_override(tmp_path, capsys):
    path = write_config(tmp_path, replicates=1)
    code = cli.main(["run", "--config", str(path), "--workers", "2"])
    assert code == 0


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v"]))
