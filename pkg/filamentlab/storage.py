import csv
import json
import logging
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import config
from .diagnostics import INVARIANT_COLUMNS, HasimotoProfile, InvariantSeries
from .dynamics import FilamentState
from .errors import ValidationError
from .grid import GridSpec, UnitVecField, VecField, unit_drift

logger = logging.getLogger(__name__)

FIELD_COLUMNS = ("s", "v1", "v2", "v3")
POSITION_COLUMNS = ("x1", "x2", "x3")
HASIMOTO_COLUMNS = ("s", "kappa", "tau", "psi_re", "psi_im")


def _fmt(x: float) -> str:
    """Shortest round-trip decimal"""
    return repr(float(x))


def write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence[float]]) -> str:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])
    return path


def write_json(path: str, payload: Dict[str, Any]) -> str:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def read_field_csv(path: str) -> Tuple[VecField, Optional[VecField]]:
    """Tangent field (and position when present) from a snapshot or datum CSV"""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as e:
        raise ValidationError(f"cannot read CSV '{path}': {e.strerror}") from e
    if not rows:
        raise ValidationError(f"malformed CSV '{path}': empty file")
    header = [h.strip() for h in rows[0]]
    if tuple(header[:4]) != FIELD_COLUMNS or len(header) not in (4, 7):
        raise ValidationError(f"malformed CSV '{path}': header must be s,v1,v2,v3[,x1,x2,x3], got {','.join(header)}")
    try:
        values = np.array([[float(x) for x in row] for row in rows[1:] if row], dtype=float)
    except ValueError as e:
        raise ValidationError(f"malformed CSV '{path}': {str(e)}") from e
    if values.ndim != 2 or values.shape[1] != len(header) or len(values) < config.MIN_CELLS + 1:
        raise ValidationError(f"malformed CSV '{path}': expected at least {config.MIN_CELLS + 1} rows of {len(header)} numbers")

    grid = GridSpec(len(values) - 1)
    if np.max(np.abs(values[:, 0] - grid.nodes)) > 1e-9:
        raise ValidationError(f"malformed CSV '{path}': s column is not the uniform grid on [0, 1]")
    v = VecField(grid, values[:, 1:4])
    x = VecField(grid, values[:, 4:7]) if len(header) == 7 else None
    return v, x


class SnapshotStore:
    """Writes and reads run artifacts below one output directory"""

    def __init__(self, output_dir: Optional[str] = None):
        self.output_dir = output_dir or config.OUTPUT_DIR

    def run_dir(self, run_name: str) -> str:
        path = os.path.join(self.output_dir, run_name)
        os.makedirs(path, exist_ok=True)
        return path

    def save_field(self, path: str, v: VecField, x: Optional[VecField] = None) -> str:
        header = FIELD_COLUMNS + (POSITION_COLUMNS if x is not None else ())
        cols = [v.grid.nodes[:, None], v.data] + ([x.data] if x is not None else [])
        return write_csv(path, header, np.hstack(cols))

    def save_trajectory(self, run_name: str, states: Sequence[FilamentState], config_echo: Dict[str, Any],
                        series: Optional[InvariantSeries] = None, extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        """
        Save one snapshot CSV per stored state plus an index JSON

        Returns:
            {"index": index path, "files": snapshot paths}
        """
        out_dir = self.run_dir(run_name)
        files = []
        for i, state in enumerate(states):
            path = os.path.join(out_dir, f"snapshot_{i:05d}.csv")
            self.save_field(path, state.v, state.x)
            files.append(path)

        index = {
            "times": [s.t for s in states],
            "files": [os.path.basename(f) for f in files],
            "n_cells": states[0].grid.n_cells if states else None,
            "config": config_echo,
        }
        if series is not None:
            index["invariants"] = series.to_dict()
        if extra:
            index.update(extra)
        index_path = write_json(os.path.join(out_dir, "index.json"), index)
        logger.info(f"💾 Saved {len(files)} snapshots to {out_dir}")
        return {"index": index_path, "files": files}

    def save_invariants(self, path: str, series: InvariantSeries) -> str:
        return write_csv(path, INVARIANT_COLUMNS, series.rows())

    def save_hasimoto(self, run_name: str, profiles: Sequence[HasimotoProfile]) -> List[str]:
        out_dir = self.run_dir(run_name)
        return [
            write_csv(os.path.join(out_dir, f"hasimoto_{i:05d}.csv"), HASIMOTO_COLUMNS, p.rows())
            for i, p in enumerate(profiles)
        ]

    def load_trajectory(self, index_path: str) -> List[FilamentState]:
        try:
            with open(index_path) as fh:
                index = json.load(fh)
            times, files = index["times"], index["files"]
        except (OSError, ValueError, KeyError, TypeError) as e:
            raise ValidationError(f"malformed trajectory index '{index_path}': {str(e)}") from e
        if len(times) != len(files):
            raise ValidationError(f"malformed trajectory index '{index_path}': times and files differ in length")

        base = os.path.dirname(index_path)
        states = []
        for k, (t, name) in enumerate(zip(times, files)):
            v, x = read_field_csv(os.path.join(base, name))
            if unit_drift(v) <= config.UNIT_TOL:
                v = UnitVecField(v.grid, v.data)
            states.append(FilamentState(float(t), v, x, k))
        return states
