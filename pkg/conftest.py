import numpy as np
import pytest

from config import config
from filamentlab.grid import GridSpec, UnitVecField


def arc_field(grid: GridSpec) -> UnitVecField:
    """(cos(pi s/2), 0, sin(pi s/2))"""
    s = grid.nodes
    return UnitVecField(grid, np.column_stack([np.cos(np.pi * s / 2), np.zeros_like(s), np.sin(np.pi * s / 2)]))


def smooth_unit_field(grid: GridSpec, rng: np.random.Generator, scale: float = 0.5) -> UnitVecField:
    """Unit field with polar/azimuthal angles quadratic in s"""
    a0, a1, a2, b0, b1, b2 = rng.uniform(-scale, scale, size=6)
    s = grid.nodes
    theta = 1.0 + a0 + a1 * s + a2 * s ** 2
    phi = b0 + b1 * s + b2 * s ** 2
    data = np.column_stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
    return UnitVecField(grid, data / np.linalg.norm(data, axis=1)[:, None])


@pytest.fixture
def arc():
    return arc_field


@pytest.fixture
def smooth_fields():
    def make(grid: GridSpec, count: int = 5, seed: int = 1234):
        rng = np.random.default_rng(seed)
        return [smooth_unit_field(grid, rng) for _ in range(count)]
    return make


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    """Run artifacts go to a temporary directory regardless of FILAMENTLAB_OUT"""
    monkeypatch.setattr(config, "OUTPUT_DIR", str(tmp_path))
    monkeypatch.setattr(config, "OUTPUT_DIR_FROM_ENV", False)
    return tmp_path
