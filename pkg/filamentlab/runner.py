import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional

import numpy as np

from config import config
from .compat import check_compat, check_compat_jets, correct_datum
from .datums import ClosedFormDatum, Datum, datum_from_samples, make_datum
from .diagnostics import boundary_identity_check, hasimoto, invariant_series, parity_identities
from .dynamics import (
    FilamentState, SolverConfig, epsilon_sweep, integrate_tangent, max_displacement,
    reconstruct_position, simulate,
)
from .errors import FilamentLabError, TransformUndefinedError, ValidationError
from .grid import GridSpec
from .storage import SnapshotStore, read_field_csv, write_json

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


def _unit_a(a) -> List[float]:
    """|a| = 1 exactly, normalized with a warning when off by at most 1e-6"""
    try:
        vec = np.asarray(a, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(f"a must be a 3-vector, got {a!r}")
    if vec.shape != (3,) or not np.all(np.isfinite(vec)):
        raise ValidationError(f"a must be a finite 3-vector, got {a!r}")
    off = abs(np.linalg.norm(vec) - 1.0)
    if off > 1e-6:
        raise ValidationError(f"a is not a unit vector (| |a| - 1 | = {off:.3e})")
    if off > 1e-12:
        logger.warning(f"⚠️ Normalizing a (| |a| - 1 | = {off:.3e})")
    return (vec / np.linalg.norm(vec)).tolist()


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and bool(np.isfinite(value))


def _expect(name: str, value, ok: bool, what: str):
    if not ok:
        raise ValidationError(f"{name} must be {what}, got {value!r}")


SOLVER_NUMBERS = ("eps", "dt", "newton_tol", "unit_tol")
SOLVER_INTEGERS = ("picard_iters", "max_iters")
SOLVER_STRINGS = ("scheme", "renormalize", "picard_start")


@dataclass
class RunConfig:
    mode: str
    datum: Dict[str, Any] = field(default_factory=lambda: {"name": "quarter-circle"})
    a: List[float] = field(default_factory=lambda: [1.0, 0.0, 0.0])
    n_cells: Optional[int] = None
    solver: Dict[str, Any] = field(default_factory=dict)
    T: float = 0.01
    output_dir: Optional[str] = None
    run_name: Optional[str] = None
    snapshot_stride: int = 1
    seed: int = 0
    up_to: int = 1
    tol: Optional[float] = None
    target_order: int = 1
    correct: bool = True
    reconstruct: bool = False
    eps_list: List[float] = field(default_factory=lambda: [0.1, 0.05, 0.025, 0.0125])
    max_workers: Optional[int] = None
    trajectory: Optional[str] = None

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        if not isinstance(data, dict):
            raise ValidationError("run configuration must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValidationError(f"unknown configuration keys: {unknown}")
        if "mode" not in data:
            raise ValidationError("configuration is missing 'mode'")
        rc = cls(**data)
        rc.validate()
        return rc

    def validate(self):
        if self.mode not in config.MODES:
            raise ValidationError(f"unknown mode '{self.mode}', expected one of {list(config.MODES)}")
        if not isinstance(self.datum, dict) or not ({"name", "csv"} & set(self.datum)):
            raise ValidationError("datum must be an object with 'name' (and 'params') or 'csv'")
        for key in ("name", "csv"):
            if key in self.datum:
                _expect(f"datum.{key}", self.datum[key], isinstance(self.datum[key], str), "a string")
        _expect("datum.params", self.datum.get("params"), isinstance(self.datum.get("params", {}), dict), "an object")
        if not isinstance(self.solver, dict):
            raise ValidationError("solver must be an object")
        self.a = _unit_a(self.a)
        if self.n_cells is not None:
            _expect("n_cells", self.n_cells, _is_int(self.n_cells), "an integer")
            GridSpec(self.n_cells)
        if self.max_workers is not None:
            _expect("max_workers", self.max_workers, _is_int(self.max_workers) and self.max_workers >= 1,
                    "an integer >= 1")
        if self.tol is not None:
            _expect("tol", self.tol, _is_number(self.tol) and self.tol > 0, "a finite number > 0")
        for name in ("run_name", "output_dir", "trajectory"):
            value = getattr(self, name)
            _expect(name, value, value is None or (isinstance(value, str) and value != ""), "a non-empty string")
        if self.run_name is not None:
            _expect("run_name", self.run_name, os.sep not in self.run_name and self.run_name not in (".", ".."),
                    "a plain directory name")
        for name in ("correct", "reconstruct"):
            _expect(name, getattr(self, name), isinstance(getattr(self, name), bool), "true or false")
        for name in ("snapshot_stride", "up_to", "target_order", "seed"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ValidationError(f"{name} must be a non-negative integer, got {value!r}")
        if self.snapshot_stride < 1:
            raise ValidationError("snapshot_stride must be >= 1")
        if not isinstance(self.T, (int, float)) or not np.isfinite(self.T) or self.T < 0:
            raise ValidationError(f"T must be a finite number >= 0, got {self.T!r}")
        if self.mode == "diagnose" and not self.trajectory:
            raise ValidationError("diagnose mode needs 'trajectory' (path to an index.json)")
        if self.mode == "sweep-eps" and (not isinstance(self.eps_list, list) or not self.eps_list):
            raise ValidationError("sweep-eps mode needs a non-empty 'eps_list'")
        if self.mode == "sweep-eps" and not all(isinstance(e, (int, float)) and not isinstance(e, bool) for e in self.eps_list):
            raise ValidationError(f"eps_list must contain numbers, got {self.eps_list!r}")
        self.solver_config()

    def solver_config(self) -> SolverConfig:
        known = {f.name for f in fields(SolverConfig)} - {"a"}
        unknown = sorted(set(self.solver) - known)
        if unknown:
            raise ValidationError(f"unknown solver keys: {unknown}")
        for key, value in self.solver.items():
            if key in SOLVER_NUMBERS:
                _expect(f"solver.{key}", value, _is_number(value), "a finite number")
            elif key in SOLVER_INTEGERS:
                _expect(f"solver.{key}", value, _is_int(value), "an integer")
            elif key in SOLVER_STRINGS:
                _expect(f"solver.{key}", value, value is None or isinstance(value, str), "a string")
        try:
            return SolverConfig(a=tuple(self.a), **self.solver)
        except (TypeError, ValueError) as e:
            if isinstance(e, ValidationError):
                raise
            raise ValidationError(f"invalid solver configuration: {str(e)}") from e

    @property
    def resolved_output_dir(self) -> str:
        if config.OUTPUT_DIR_FROM_ENV or not self.output_dir:
            return config.OUTPUT_DIR
        return self.output_dir

    def to_dict(self) -> Dict[str, Any]:
        echo = asdict(self)
        echo["output_dir"] = self.resolved_output_dir
        return echo


@dataclass
class RunOutcome:
    exit_code: int
    report: Dict[str, Any]
    artifacts: List[str] = field(default_factory=list)


class FilamentLab:
    """Runs one study per RunConfig and writes its artifacts"""

    def __init__(self, store: Optional[SnapshotStore] = None):
        self.store = store

    # Inputs

    def load_datum(self, rc: RunConfig) -> Datum:
        if "csv" in rc.datum:
            v, _ = read_field_csv(rc.datum["csv"])
            if rc.n_cells is not None and rc.n_cells != v.grid.n_cells:
                raise ValidationError(
                    f"incompatible grid: datum has {v.grid.n_cells} cells, configuration asks for {rc.n_cells}"
                )
            return datum_from_samples(os.path.basename(rc.datum["csv"]), v.data)
        params = dict(rc.datum.get("params", {}))
        params.setdefault("a", rc.a)
        params.setdefault("seed", rc.seed)
        try:
            return make_datum(rc.datum["name"], **params)
        except FilamentLabError:
            raise
        except (TypeError, ValueError) as e:
            raise ValidationError(f"invalid parameters for datum '{rc.datum['name']}': {str(e)}") from e

    def initial_field(self, rc: RunConfig, datum: Datum):
        n_cells = rc.n_cells or datum.params.get("n_cells") or 64
        grid = GridSpec(n_cells)
        return grid, datum.sample(grid)

    @staticmethod
    def analytic(datum: Datum) -> Optional[Datum]:
        return datum if isinstance(datum, ClosedFormDatum) else None

    # Modes

    def run(self, rc: RunConfig) -> RunOutcome:
        self.store = self.store or SnapshotStore(rc.resolved_output_dir)
        run_name = rc.run_name or rc.mode
        logger.info(f"🚀 Running mode '{rc.mode}' as '{run_name}'")
        try:
            handler = {
                "simulate": self.simulate,
                "sweep-eps": self.sweep_eps,
                "check-compat": self.check_compat,
                "correct-datum": self.correct_datum,
                "diagnose": self.diagnose,
            }[rc.mode]
            report, artifacts = handler(rc, run_name)
        except FilamentLabError as e:
            code = EXIT_VALIDATION if e.kind == "validation" else EXIT_NUMERICAL
            report = {"status": "error", "kind": e.kind, "reason": str(e), "mode": rc.mode}
            if getattr(e, "residual", None) is not None:
                report["residual"] = e.residual
            logger.error(f"❌ Run failed ({e.kind}): {str(e)}")
            return RunOutcome(code, report)
        report = {"status": "ok", "mode": rc.mode, **report}
        logger.info(f"✅ Run '{run_name}' finished with {len(artifacts)} artifacts")
        return RunOutcome(EXIT_OK, report, artifacts)

    def simulate(self, rc: RunConfig, run_name: str):
        datum = self.load_datum(rc)
        grid, v0 = self.initial_field(rc, datum)
        cfg = rc.solver_config()
        report: Dict[str, Any] = {}
        if cfg.eps > 0 and rc.correct:
            corrected = correct_datum(v0, rc.a, cfg.eps, rc.target_order, datum=self.analytic(datum))
            v0 = corrected.field
            report["correction"] = corrected.to_dict()

        x0 = integrate_tangent(v0) if rc.reconstruct else None
        history = simulate(FilamentState(0.0, v0, x0), cfg, rc.T, rc.snapshot_stride)
        if rc.reconstruct and len(history) > 1:
            positions = reconstruct_position(history, x0)
            history = [FilamentState(s.t, s.v, x, s.step_count, s.metadata) for s, x in zip(history, positions)]

        series = invariant_series(history)
        report.update({
            "steps": history[-1].step_count,
            "final_time": history[-1].t,
            "max_displacement": max_displacement(history[-1].v, history[0].v),
            "final_unit_drift": history[-1].unit_drift,
            "I1_relative_drift": series.relative_drift("I1"),
            "dissipative": series.is_dissipative() if cfg.eps > 0 else None,
        })
        saved = self.store.save_trajectory(run_name, history, rc.to_dict(), series, extra={"report": report})
        inv_path = self.store.save_invariants(os.path.join(self.store.run_dir(run_name), "invariants.csv"), series)
        return report, [saved["index"], *saved["files"], inv_path]

    def sweep_eps(self, rc: RunConfig, run_name: str):
        datum = self.load_datum(rc)
        grid, v0 = self.initial_field(rc, datum)
        sweep = epsilon_sweep(v0, rc.a, rc.eps_list, rc.T, rc.solver_config(), datum=self.analytic(datum),
                              target_order=rc.target_order, max_workers=rc.max_workers)
        out_dir = self.store.run_dir(run_name)
        artifacts = [
            self.store.save_field(os.path.join(out_dir, f"final_{i:02d}.csv"), sweep.finals[eps])
            for i, eps in enumerate(sweep.eps_list)
        ]
        artifacts.append(self.store.save_field(os.path.join(out_dir, "extrapolated.csv"), sweep.extrapolated))
        report = sweep.to_dict()
        artifacts.append(write_json(os.path.join(out_dir, "sweep.json"), {**report, "config": rc.to_dict()}))
        return report, artifacts

    def check_compat(self, rc: RunConfig, run_name: str):
        datum = self.load_datum(rc)
        grid, v0 = self.initial_field(rc, datum)
        eps = rc.solver_config().eps
        reports = check_compat(v0, rc.a, eps, rc.up_to, rc.tol)
        report = {"reports": [r.to_dict() for r in reports], "all_passed": all(r.passed for r in reports)}
        analytic = self.analytic(datum)
        if analytic is not None:
            order = 2 * rc.up_to
            exact = check_compat_jets(analytic.jet("left", order), analytic.jet("right", order), rc.a, eps, rc.up_to)
            report["continuum_reports"] = [r.to_dict() for r in exact]
        path = write_json(os.path.join(self.store.run_dir(run_name), "compat.json"), {**report, "config": rc.to_dict()})
        return report, [path]

    def correct_datum(self, rc: RunConfig, run_name: str):
        datum = self.load_datum(rc)
        grid, v0 = self.initial_field(rc, datum)
        eps = rc.solver_config().eps
        result = correct_datum(v0, rc.a, eps, rc.target_order, datum=self.analytic(datum))
        out_dir = self.store.run_dir(run_name)
        csv_path = self.store.save_field(os.path.join(out_dir, "corrected_datum.csv"), result.field)
        report = {**result.to_dict(), "eps": eps, "target_order": rc.target_order}
        json_path = write_json(os.path.join(out_dir, "jets.json"), {**report, "config": rc.to_dict()})
        return report, [csv_path, json_path]

    def diagnose(self, rc: RunConfig, run_name: str):
        states = self.store.load_trajectory(rc.trajectory)
        eps = rc.solver_config().eps
        series = invariant_series(states)
        out_dir = self.store.run_dir(run_name)
        artifacts = [self.store.save_invariants(os.path.join(out_dir, "invariants.csv"), series)]
        report: Dict[str, Any] = {
            "relative_drift": {k: series.relative_drift(k) for k in ("I1", "I2", "I3")},
            "dissipative": series.is_dissipative(),
            "boundary_identities": boundary_identity_check(states[-1], eps).to_dict(),
            "parity": parity_identities(states[-1], 1),
        }
        if len(states) >= 3:
            try:
                result = hasimoto(states)
                report["hasimoto"] = result.to_dict()
                artifacts.extend(self.store.save_hasimoto(run_name, result.profiles))
            except TransformUndefinedError as e:
                report["hasimoto"] = {"error": "transform undefined", "reason": str(e)}
        artifacts.append(write_json(os.path.join(out_dir, "diagnostics.json"), {**report, "config": rc.to_dict()}))
        return report, artifacts


def set_dotted(data: Dict[str, Any], assignment: str) -> Dict[str, Any]:
    """Apply one 'dotted.key=value' override; the value is parsed as JSON when possible"""
    if "=" not in assignment:
        raise ValidationError(f"override must look like key=value, got '{assignment}'")
    key, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except ValueError:
        value = raw
    parts = key.strip().split(".")
    if not all(parts):
        raise ValidationError(f"invalid override key '{key}'")
    node = data
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ValidationError(f"override '{key}' descends into a non-object value")
        node = child
    node[parts[-1]] = value
    return data


def load_run_config(mode: str, path: Optional[str] = None, overrides: Optional[List[str]] = None) -> RunConfig:
    data: Dict[str, Any] = {}
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as e:
            raise ValidationError(f"cannot read config '{path}': {e.strerror}") from e
        except ValueError as e:
            raise ValidationError(f"malformed config '{path}': {str(e)}") from e
        if not isinstance(data, dict):
            raise ValidationError(f"malformed config '{path}': top level must be an object")
    for assignment in overrides or []:
        set_dotted(data, assignment)
    data["mode"] = mode
    return RunConfig.from_dict(data)
