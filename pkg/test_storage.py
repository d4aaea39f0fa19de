#!/usr/bin/env python3
"""
Tests for snapshot CSV/JSON artifacts
"""

import json
import sys

import numpy as np
import pytest

from filamentlab.diagnostics import invariant_series
from filamentlab.dynamics import FilamentState, integrate_tangent
from filamentlab.errors import ValidationError
from filamentlab.grid import GridSpec, UnitVecField
from filamentlab.storage import SnapshotStore, read_field_csv, write_json


def test_field_csv_is_exact(tmp_path, arc):
    store = SnapshotStore(str(tmp_path))
    v = arc(GridSpec(16))
    x = integrate_tangent(v)
    path = store.save_field(str(tmp_path / "field.csv"), v, x)
    with open(path) as fh:
        assert fh.readline().strip() == "s,v1,v2,v3,x1,x2,x3"
    v2, x2 = read_field_csv(path)
    assert np.array_equal(v2.data, v.data)
    assert np.array_equal(x2.data, x.data)


@pytest.mark.parametrize("text", [
    "",
    "a,b,c,d\n",
    "s,v1,v2,v3\n0,1,0,0\n",
    "s,v1,v2,v3\n" + "".join(f"{k / 8},1,0,zero\n" for k in range(9)),
    "s,v1,v2,v3\n" + "".join(f"{(k / 8) ** 2},1,0,0\n" for k in range(9)),
])
def test_malformed_csv_is_rejected(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(ValidationError):
        read_field_csv(str(path))


def test_missing_csv_is_rejected(tmp_path):
    with pytest.raises(ValidationError):
        read_field_csv(str(tmp_path / "nope.csv"))


def test_trajectory_round_trip(tmp_path, arc):
    store = SnapshotStore(str(tmp_path))
    v = arc(GridSpec(16))
    states = [FilamentState(k * 0.5, v, step_count=k) for k in range(3)]
    saved = store.save_trajectory("run", states, {"mode": "simulate"}, invariant_series(states))
    with open(saved["index"]) as fh:
        index = json.load(fh)
    assert index["times"] == [0.0, 0.5, 1.0]
    assert index["files"] == ["snapshot_00000.csv", "snapshot_00001.csv", "snapshot_00002.csv"]
    assert index["n_cells"] == 16
    assert len(index["invariants"]["I1"]) == 3

    loaded = store.load_trajectory(saved["index"])
    assert [s.t for s in loaded] == [0.0, 0.5, 1.0]
    assert all(isinstance(s.v, UnitVecField) for s in loaded)
    assert np.array_equal(loaded[2].v.data, v.data)


def test_malformed_index_is_rejected(tmp_path):
    path = write_json(str(tmp_path / "index.json"), {"times": [0.0, 1.0], "files": ["a.csv"]})
    with pytest.raises(ValidationError):
        SnapshotStore(str(tmp_path)).load_trajectory(path)
    with pytest.raises(ValidationError):
        SnapshotStore(str(tmp_path)).load_trajectory(str(tmp_path / "missing.json"))


def test_write_json_handles_numpy(tmp_path):
    path = write_json(str(tmp_path / "out.json"), {"b": np.float64(1.5), "a": np.arange(3)})
    with open(path) as fh:
        text = fh.read()
    assert json.loads(text) == {"a": [0, 1, 2], "b": 1.5}
    assert text.index('"a"') < text.index('"b"')


def main():
    """Run this module's tests"""
    return pytest.main([__file__, "-q"])


if __name__ == "__main__":
    sys.exit(main())
