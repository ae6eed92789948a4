import json
import os

import numpy as np
import pytest
from pydantic import ValidationError

from chronos_cv import cli
from chronos_cv.config import AxisSpec, RunConfig, load_config
from chronos_cv.serialization import (
    canonical_hash,
    matrix_from_json,
    matrix_to_json,
    read_csv,
    write_csv,
)

VACUUM_SCHEDULE = {"initial": {"kind": "vacuum"}, "events": [{"t": 0}, {"t": 1}], "channels": [{"kind": "identity"}]}


def write_config(tmp_path, obj, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


def run(tmp_path, obj, *extra, out="out"):
    cfg = write_config(tmp_path, obj)
    return cli.main([*extra, "--config", str(cfg), "--out", str(tmp_path / out)])


# serialization


@pytest.mark.parametrize("m", [np.arange(6.0).reshape(2, 3), np.array([[1 + 2j, -0.5j]])], ids=["real", "complex"])
def test_matrix_json_roundtrip(m):
    np.testing.assert_array_equal(matrix_from_json(matrix_to_json(m)), m)


def test_matrix_json_size_check():
    with pytest.raises(ValueError):
        matrix_from_json({"rows": 2, "cols": 2, "data": [1.0]})


def test_csv_roundtrip_is_exact(tmp_path):
    rows = np.random.default_rng(0).normal(size=(5, 3))
    write_csv(tmp_path / "a.csv", ["x", "y", "z"], rows)
    header, back = read_csv(tmp_path / "a.csv")
    assert header == ["x", "y", "z"]
    np.testing.assert_array_equal(back, rows)
    with pytest.raises(ValueError):
        write_csv(tmp_path / "b.csv", ["x"], rows)


def test_canonical_hash_ignores_key_order():
    assert canonical_hash({"a": 1, "b": [1, 2]}) == canonical_hash({"b": [1, 2], "a": 1})


# config


def test_defaults_fill_in():
    cfg = RunConfig.model_validate({"subcommand": "gaussian", "gaussian": {"schedule": VACUUM_SCHEDULE}})
    assert cfg.block.analytic_tol == 1e-9
    assert cfg.seed == 0
    assert cfg.block.schedule.build().n_events == 2


@pytest.mark.parametrize(
    "obj,loc",
    [
        ({"subcommand": "gaussian"}, None),
        ({"subcommand": "tomo", "tomo": {"schedule": VACUUM_SCHEDULE, "M": 10}}, "tomo.M"),
        ({"subcommand": "wigner-grid", "wigner_grid": {"initial": {"kind": "vacuum"}, "radiuss": 4}}, "wigner_grid.radiuss"),
        ({"subcommand": "trajectory", "trajectory": {"times": [1.0, 0.5]}}, "trajectory.times"),
        ({"subcommand": "pdm", "pdm": {"initial": {"kind": "product"}}}, "pdm.initial"),
        ({"subcommand": "launch"}, "subcommand"),
    ],
)
def test_invalid_configs(obj, loc):
    with pytest.raises(ValidationError) as exc:
        RunConfig.model_validate(obj)
    if loc:
        locs = [".".join(str(x) for x in e["loc"]) for e in exc.value.errors()]
        assert any(lc.startswith(loc) for lc in locs)


def test_axis_midpoints():
    np.testing.assert_allclose(AxisSpec(start=-1, stop=1, step=0.5).values(), [-0.75, -0.25, 0.25, 0.75])


def test_load_config(tmp_path):
    p = write_config(tmp_path, {"subcommand": "gaussian", "gaussian": {"schedule": VACUUM_SCHEDULE}})
    assert load_config(p).subcommand == "gaussian"


# command line


def test_gaussian_run_writes_artifacts(tmp_path):
    assert run(tmp_path, {"subcommand": "gaussian", "gaussian": {"schedule": VACUUM_SCHEDULE}}) == 0
    out = tmp_path / "out"
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["status"] == "ok"
    assert meta["residuals"]["max_dev_vs_analytic"] < 1e-3
    assert meta["residuals"]["min_eig_sigma_plus_i_omega"] < 0
    for key in ("config_hash", "seed", "versions", "tolerances", "outputs"):
        assert key in meta
    st = json.loads((out / "spacetime_gaussian.json").read_text())
    np.testing.assert_allclose(matrix_from_json(st["cov"]), [[1, 0, 1, 0], [0, 1, 0, 1], [1, 0, 1, 0], [0, 1, 0, 1]], atol=1e-3)


def test_properties_on_gaussian_config(tmp_path):
    obj = {"subcommand": "gaussian", "gaussian": {"schedule": VACUUM_SCHEDULE}}
    assert run(tmp_path, obj, "properties") == 0
    table = json.loads((tmp_path / "out" / "properties.json").read_text())
    assert {table[f"Criterion {k}"]["status"] for k in (1, 2, 3, 4, 5, 6)} == {"pass"}


def test_pdm_choi_run(tmp_path):
    obj = {
        "subcommand": "pdm",
        "pdm": {"initial": {"kind": "thermal", "params": [1.0]}, "dim": 20,
                "channels": [{"kind": "rotation", "params": [0.6]}], "n_probes": 5},
    }
    assert run(tmp_path, obj) == 0
    meta = json.loads((tmp_path / "out" / "metadata.json").read_text())
    assert meta["residuals"]["cross_check_max_dev"] < 1e-6
    header, rows = read_csv(tmp_path / "out" / "cross_check.csv")
    assert rows.shape == (5, 6) and header[-1] == "via_R"


def test_identity_channel_field_refused_with_exit_3(tmp_path, capsys):
    obj = {"subcommand": "wigner-grid",
           "wigner_grid": {"initial": {"kind": "vacuum"}, "dim": 12, "radius": 2.0, "channels": [{"kind": "identity"}]}}
    assert run(tmp_path, obj) == 3
    assert "BoundaryDecayError" in capsys.readouterr().err
    assert json.loads((tmp_path / "out" / "metadata.json").read_text())["status"] == "refused"


def test_unknown_key_exit_2(tmp_path, capsys):
    obj = {"subcommand": "wigner-grid", "wigner_grid": {"initial": {"kind": "vacuum"}, "radiuss": 4}}
    assert run(tmp_path, obj) == 2
    assert "wigner_grid.radiuss" in capsys.readouterr().err


def test_bad_json_and_missing_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["--config", str(bad)]) == 2
    assert cli.main(["--config", str(tmp_path / "nope.json")]) == 2
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    assert cli.main(["--config", str(arr)]) == 2


def test_subcommand_mismatch(tmp_path):
    assert run(tmp_path, {"subcommand": "gaussian", "gaussian": {"schedule": VACUUM_SCHEDULE}}, "tomo") == 2


def test_physically_invalid_input_exit_2(tmp_path):
    obj = {"subcommand": "pdm", "pdm": {"initial": {"kind": "fock", "params": [50]}, "dim": 10}}
    assert run(tmp_path, obj) == 2


def test_trajectory_run(tmp_path):
    obj = {"subcommand": "trajectory",
           "trajectory": {"weak": {"dim": 16, "probe_axis": {"start": -6, "stop": 6, "step": 1.0}}}}
    assert run(tmp_path, obj) == 0
    meta = json.loads((tmp_path / "out" / "metadata.json").read_text())
    assert abs(meta["residuals"]["normalization"] - 1) < 1e-3
    assert meta["residuals"]["lattice_rel_dev"] < 0.01
    header, rows = read_csv(tmp_path / "out" / "density.csv")
    assert header == ["x1", "x2", "p"]
    assert (tmp_path / "out" / "weak_density.csv").exists()


def test_tomo_deterministic_outputs_are_identical(tmp_path):
    obj = {"subcommand": "tomo", "seed": 9, "tomo": {"schedule": VACUUM_SCHEDULE, "M": 2000}}
    assert run(tmp_path, obj, "--deterministic", out="a") == 0
    assert run(tmp_path, obj, "--deterministic", out="b") == 0
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.csv"))
    assert len(files) == 5
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    ea = json.loads((tmp_path / "a" / "estimate.json").read_text())
    eb = json.loads((tmp_path / "b" / "estimate.json").read_text())
    assert ea == eb
    meta = json.loads((tmp_path / "a" / "metadata.json").read_text())
    assert meta["deterministic"] and meta["threads"] == "1"


def test_seed_override_changes_records(tmp_path):
    obj = {"subcommand": "tomo", "tomo": {"schedule": VACUUM_SCHEDULE, "M": 500}}
    run(tmp_path, obj, "--seed", "1", out="a")
    run(tmp_path, obj, "--seed", "2", out="b")
    a = (tmp_path / "a" / "records" / "record_00_ideal.csv").read_bytes()
    b = (tmp_path / "b" / "records" / "record_00_ideal.csv").read_bytes()
    assert a != b


def test_thread_cap_sets_blas_env(monkeypatch):
    monkeypatch.setenv(cli.THREAD_ENV, "3")
    # register every variable so monkeypatch restores it afterwards
    for var in cli._BLAS_VARS:
        monkeypatch.setenv(var, "0")

    assert cli._limit_threads(False) == "3"
    assert os.environ["OMP_NUM_THREADS"] == "3"
    assert cli._limit_threads(True) == "1"
    assert os.environ["OPENBLAS_NUM_THREADS"] == "1"
