#!/usr/bin/env python3
"""
Tests for the command-line runner: modes, artifacts and exit codes
"""

import json
import logging
import os
import sys

import numpy as np
import pytest

from filamentlab.errors import ValidationError
from filamentlab.runner import FilamentLab, RunConfig, load_run_config, set_dotted
from filamentlab.storage import read_field_csv
from main import main as cli


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)
    return str(path)


def _run(mode, **data):
    return FilamentLab().run(RunConfig.from_dict({"mode": mode, **data}))


def _datum_csv(path, n=32):
    s = np.linspace(0.0, 1.0, n + 1)
    rows = ["s,v1,v2,v3"] + [f"{float(x)!r},{float(np.cos(np.pi * x / 2))!r},0.0,{float(np.sin(np.pi * x / 2))!r}" for x in s]
    return _write(path, "\n".join(rows) + "\n")


def test_check_compat_of_straight_filament(output_dir, capsys):
    code = cli(["check-compat", "--set", 'datum={"name": "constant-e3"}', "--set", "a=[0, 0, 1]"])
    assert code == 0
    out = capsys.readouterr().out
    report = json.loads(out.strip().splitlines()[-1])
    assert report["all_passed"] is True
    assert os.path.exists(os.path.join(output_dir, "check-compat", "compat.json"))


def test_simulate_steady_arc(output_dir):
    outcome = _run("simulate", solver={"eps": 0.05}, T=0.01, snapshot_stride=25, run_name="arc")
    assert outcome.exit_code == 0
    assert outcome.report["max_displacement"] <= 1e-6
    assert outcome.report["steps"] == 100
    index = json.load(open(os.path.join(output_dir, "arc", "index.json")))
    assert index["times"][0] == 0.0 and index["times"][-1] == pytest.approx(0.01)
    assert len(index["files"]) == 5
    assert os.path.exists(os.path.join(output_dir, "arc", "invariants.csv"))


def test_simulate_is_deterministic(output_dir):
    for name in ("first", "second"):
        outcome = _run("simulate", datum={"name": "perturbed-quarter-circle"}, seed=3, n_cells=32,
                       T=0.005, snapshot_stride=10, run_name=name)
        assert outcome.exit_code == 0
    for fname in sorted(os.listdir(os.path.join(output_dir, "first"))):
        if fname.endswith(".csv"):
            with open(os.path.join(output_dir, "first", fname), "rb") as a, \
                    open(os.path.join(output_dir, "second", fname), "rb") as b:
                assert a.read() == b.read()


def test_simulate_with_position_reconstruction(output_dir):
    outcome = _run("simulate", datum={"name": "constant-e3"}, a=[0, 0, 1], solver={"eps": 0.1},
                   T=1e-3, n_cells=16, reconstruct=True, run_name="straight")
    assert outcome.exit_code == 0
    v, x = read_field_csv(os.path.join(output_dir, "straight", "snapshot_00001.csv"))
    assert x is not None
    assert np.allclose(x.data[:, 2], v.grid.nodes)


def test_unknown_datum_is_a_validation_failure(output_dir, capsys):
    code = cli(["simulate", "--set", "datum.name=spiral"])
    assert code == 2
    assert "error=validation" in capsys.readouterr().err


def test_malformed_csv_datum(output_dir, tmp_path):
    path = _write(tmp_path / "bad.csv", "s,v1,v2,v3\n0.0,1.0,0.0\n")
    outcome = _run("check-compat", datum={"csv": path})
    assert outcome.exit_code == 2
    assert outcome.report["kind"] == "validation"


def test_incompatible_grid(output_dir, tmp_path):
    path = _datum_csv(tmp_path / "arc.csv", 32)
    outcome = _run("check-compat", datum={"csv": path}, n_cells=64)
    assert outcome.exit_code == 2
    assert "incompatible grid" in outcome.report["reason"]


def test_csv_datum_check_compat(output_dir, tmp_path):
    path = _datum_csv(tmp_path / "arc.csv", 32)
    outcome = _run("check-compat", datum={"csv": path})
    assert outcome.exit_code == 0
    assert outcome.report["all_passed"] is True
    assert "continuum_reports" not in outcome.report


@pytest.mark.parametrize("a, expected", [([2.0, 0.0, 0.0], 2), ([1.0 + 1e-8, 0.0, 0.0], 0)])
def test_boundary_vector_normalization(output_dir, a, expected):
    outcome = _run("check-compat", a=a)
    assert outcome.exit_code == expected


def test_malformed_config_file(output_dir, tmp_path, capsys):
    path = _write(tmp_path / "run.json", "{not json")
    assert cli(["simulate", "--config", path]) == 2
    assert "malformed config" in capsys.readouterr().err
    assert cli(["simulate", "--config", str(tmp_path / "missing.json")]) == 2


def test_unknown_configuration_keys():
    with pytest.raises(ValidationError):
        RunConfig.from_dict({"mode": "simulate", "steps": 10})
    with pytest.raises(ValidationError):
        RunConfig.from_dict({"mode": "simulate", "solver": {"order": 2}})
    with pytest.raises(ValidationError):
        RunConfig.from_dict({"mode": "diagnose"})


def test_correct_datum_rejects_large_eps(output_dir):
    outcome = _run("correct-datum", solver={"eps": 0.5})
    assert outcome.exit_code == 2


def test_correct_datum_writes_jets(output_dir):
    outcome = _run("correct-datum", solver={"eps": 0.05}, n_cells=32, run_name="corr")
    assert outcome.exit_code == 0
    jets = json.load(open(os.path.join(output_dir, "corr", "jets.json")))
    assert jets["eps"] == 0.05
    assert all(r["passed"] for r in jets["continuum_reports"])
    v, _ = read_field_csv(os.path.join(output_dir, "corr", "corrected_datum.csv"))
    assert v.grid.n_cells == 32


def test_midpoint_failure_is_numerical(output_dir, capsys):
    code = cli(["simulate", "--set", "datum.name=perturbed-quarter-circle", "--set", "n_cells=32",
                "--set", "solver.max_iters=1", "--set", "solver.newton_tol=0.0"])
    assert code == 3
    err = capsys.readouterr().err
    assert "error=numerical" in err


def test_unknown_mode_exits_through_argparse():
    with pytest.raises(SystemExit) as exc:
        cli(["fly"])
    assert exc.value.code == 2


def test_sweep_of_straight_filament(output_dir):
    outcome = _run("sweep-eps", datum={"name": "constant-e3"}, a=[0, 0, 1], n_cells=16, T=1e-3,
                   eps_list=[0.1, 0.05], run_name="sweep")
    assert outcome.exit_code == 0
    assert outcome.report["differences_h1"] == [0.0]
    for fname in ("final_00.csv", "final_01.csv", "extrapolated.csv", "sweep.json"):
        assert os.path.exists(os.path.join(output_dir, "sweep", fname))


def test_diagnose_simulated_trajectory(output_dir):
    sim = _run("simulate", solver={"eps": 0.05}, n_cells=32, T=1e-3, snapshot_stride=2, run_name="traj")
    assert sim.exit_code == 0
    index = os.path.join(output_dir, "traj", "index.json")
    outcome = _run("diagnose", trajectory=index, solver={"eps": 0.05}, run_name="diag")
    assert outcome.exit_code == 0
    assert outcome.report["hasimoto"]["best_residual"] >= 0
    assert outcome.report["relative_drift"]["I1"] <= 1e-3
    assert os.path.exists(os.path.join(output_dir, "diag", "hasimoto_00000.csv"))
    assert os.path.exists(os.path.join(output_dir, "diag", "diagnostics.json"))


def test_diagnose_straight_filament_records_undefined_transform(output_dir):
    sim = _run("simulate", datum={"name": "constant-e3"}, a=[0, 0, 1], solver={"eps": 0.1},
               n_cells=16, T=1e-3, snapshot_stride=5, run_name="flat")
    assert sim.exit_code == 0
    outcome = _run("diagnose", trajectory=os.path.join(output_dir, "flat", "index.json"), run_name="flat-diag")
    assert outcome.exit_code == 0
    assert outcome.report["hasimoto"]["error"] == "transform undefined"


def test_set_dotted_overrides():
    data = set_dotted({}, "solver.eps=0.05")
    set_dotted(data, "run_name=plain text")
    set_dotted(data, "solver.scheme=implicit_midpoint_sphere")
    assert data == {"solver": {"eps": 0.05, "scheme": "implicit_midpoint_sphere"}, "run_name": "plain text"}
    with pytest.raises(ValidationError):
        set_dotted(data, "no-equals-sign")
    with pytest.raises(ValidationError):
        set_dotted(data, "run_name.inner=1")


def test_load_run_config_merges_file_and_overrides(tmp_path):
    path = _write(tmp_path / "run.json", json.dumps({"T": 0.5, "solver": {"eps": 0.1}}))
    rc = load_run_config("simulate", path, ["solver.dt=0.001"])
    assert rc.mode == "simulate"
    assert rc.T == 0.5
    assert rc.solver_config().dt == 0.001 and rc.solver_config().eps == 0.1


@pytest.mark.parametrize("override", [
    "n_cells=abc",
    "n_cells=12.5",
    "max_workers=x",
    "max_workers=0",
    "tol=x",
    "tol=-1",
    "run_name=5",
    "run_name=../escape",
    "reconstruct=yes",
    "solver.picard_iters=x",
    "solver.newton_tol=x",
    "solver.eps=[0.1]",
    "datum.name=7",
])
def test_malformed_values_are_validation_failures(output_dir, capsys, override):
    code = cli(["simulate", "--set", override])
    assert code == 2
    assert "error=validation" in capsys.readouterr().err


def test_debug_flag_lowers_the_root_level(output_dir, monkeypatch):
    from config import config

    root = logging.getLogger()
    previous = root.level
    monkeypatch.setattr(config, "DEBUG", True)
    try:
        assert cli(["check-compat", "--set", 'datum={"name": "constant-e3"}', "--set", "a=[0, 0, 1]"]) == 0
        assert root.level == logging.DEBUG
        assert logging.getLogger("filamentlab.compat").isEnabledFor(logging.DEBUG)
    finally:
        root.setLevel(previous)


def main():
    """Run this module's tests"""
    return pytest.main([__file__, "-q"])


if __name__ == "__main__":
    sys.exit(main())
