"""
Uniform mesh of the unit interval, finite-difference operators with one-sided
boundary stencils, quadrature and discrete Sobolev norms.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial
from typing import Tuple

import numpy as np
import scipy.integrate as spi
import scipy.sparse as sp

from config import config
from .errors import ResolutionError, ValidationError

MAX_DERIVATIVE = 4
BOUNDARY_ACCURACY = 4
QUADRATURE_RULES = ("trapezoid", "simpson")


def fd_weights(offsets: np.ndarray, k: int) -> np.ndarray:
    """Weights w with sum_j w_j f(s + o_j h) ~ h^k f^(k)(s) on the given offsets"""
    offsets = np.asarray(offsets, dtype=float)
    n = len(offsets)
    vander = np.array([offsets ** p / factorial(p) for p in range(n)])
    rhs = np.zeros(n)
    rhs[k] = 1.0
    return np.linalg.solve(vander, rhs)


@lru_cache(maxsize=64)
def _diff_matrix(n_cells: int, k: int) -> sp.csr_matrix:
    n_nodes = n_cells + 1
    h = 1.0 / n_cells
    if k == 0:
        return sp.identity(n_nodes, format="csr")

    half = 1 if k <= 2 else 2
    width = k + 2
    central = fd_weights(np.arange(-half, half + 1), k)
    rows, cols, vals = [], [], []
    for i in range(n_nodes):
        if i - half >= 0 and i + half <= n_cells:
            idx = np.arange(i - half, i + half + 1)
            w = central
        elif i - half < 0:
            idx = np.arange(0, width)
            w = fd_weights(idx - i, k)
        else:
            idx = np.arange(n_cells - width + 1, n_nodes)
            w = fd_weights(idx - i, k)
        rows.extend([i] * len(idx))
        cols.extend(idx.tolist())
        vals.extend((w / h ** k).tolist())
    return sp.csr_matrix((vals, (rows, cols)), shape=(n_nodes, n_nodes))


@dataclass(frozen=True)
class GridSpec:
    """Uniform mesh s_i = i*h, i = 0..n_cells, of the unit interval"""

    n_cells: int

    def __post_init__(self):
        valid = isinstance(self.n_cells, (int, float, np.integer)) and not isinstance(self.n_cells, bool)
        if not valid or int(self.n_cells) != self.n_cells or self.n_cells < config.MIN_CELLS:
            raise ValidationError(f"n_cells must be an integer >= {config.MIN_CELLS}, got {self.n_cells}")

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_nodes) * self.h

    def diff_matrix(self, k: int) -> sp.csr_matrix:
        """Sparse matrix of the order-2 discretization of d^k/ds^k"""
        if k < 0 or k > MAX_DERIVATIVE:
            raise ValidationError(f"derivative order must be in 0..{MAX_DERIVATIVE}, got {k}")
        if k > 0 and self.n_cells < k + 4:
            raise ResolutionError()
        return _diff_matrix(self.n_cells, k)

    def apply(self, values: np.ndarray, k: int) -> np.ndarray:
        """Differentiate nodal values (real or complex, any trailing shape)"""
        values = np.asarray(values)
        if values.shape[0] != self.n_nodes:
            raise ValidationError(f"expected {self.n_nodes} samples, got {values.shape[0]}")
        mat = self.diff_matrix(k)
        if np.iscomplexobj(values):
            return mat @ values.real + 1j * (mat @ values.imag)
        return mat @ values

    def boundary_derivatives(self, values: np.ndarray, right: bool, order: int,
                             accuracy: int = BOUNDARY_ACCURACY) -> np.ndarray:
        """
        d^k/ds^k at s = 0 (or s = 1 when `right`), k = 0..order, from one-sided
        stencils of the given accuracy, narrowed to the available nodes.
        """
        values = np.asarray(values)
        if values.shape[0] != self.n_nodes:
            raise ValidationError(f"expected {self.n_nodes} samples, got {values.shape[0]}")
        if order < 0 or order > MAX_DERIVATIVE:
            raise ValidationError(f"derivative order must be in 0..{MAX_DERIVATIVE}, got {order}")
        out = [values[-1] if right else values[0]]
        for k in range(1, order + 1):
            width = min(k + accuracy, self.n_nodes)
            if width < k + 2:
                raise ResolutionError()
            offsets = np.arange(width)
            w = fd_weights(-offsets if right else offsets, k) / self.h ** k
            idx = self.n_cells - offsets if right else offsets
            out.append(np.tensordot(w, values[idx], axes=1))
        return np.array(out)

    def integrate(self, values: np.ndarray, rule: str = "trapezoid") -> float:
        values = np.asarray(values, dtype=float)
        if rule == "trapezoid":
            return float(spi.trapezoid(values, dx=self.h))
        if rule == "simpson":
            return float(spi.simpson(values, dx=self.h))
        raise ValidationError(f"unknown quadrature rule '{rule}', expected one of {QUADRATURE_RULES}")

    def check_same(self, other: "GridSpec"):
        if self.n_cells != other.n_cells:
            raise ValidationError(f"grid mismatch: {self.n_cells} vs {other.n_cells} cells")


@dataclass(frozen=True, eq=False)
class VecField:
    """3-component field sampled at the grid nodes"""

    grid: GridSpec
    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        if data.shape != (self.grid.n_nodes, 3):
            raise ValidationError(
                f"field must have shape ({self.grid.n_nodes}, 3), got {data.shape}"
            )
        if not np.all(np.isfinite(data)):
            raise ValidationError("field contains non-finite entries")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_function(cls, grid: GridSpec, func) -> "VecField":
        return cls(grid, np.asarray(func(grid.nodes), dtype=float))

    @classmethod
    def constant(cls, grid: GridSpec, vector) -> "VecField":
        return cls(grid, np.tile(np.asarray(vector, dtype=float), (grid.n_nodes, 1)))

    def _wrap(self, data: np.ndarray) -> "VecField":
        return VecField(self.grid, data)

    def __add__(self, other: "VecField") -> "VecField":
        self.grid.check_same(other.grid)
        return self._wrap(self.data + other.data)

    def __sub__(self, other: "VecField") -> "VecField":
        self.grid.check_same(other.grid)
        return self._wrap(self.data - other.data)

    def __mul__(self, scalar: float) -> "VecField":
        return self._wrap(self.data * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "VecField":
        return self._wrap(-self.data)

    def cross(self, other: "VecField") -> "VecField":
        self.grid.check_same(other.grid)
        return self._wrap(np.cross(self.data, other.data))

    def dot(self, other: "VecField") -> np.ndarray:
        self.grid.check_same(other.grid)
        return np.einsum("ij,ij->i", self.data, other.data)

    def scale(self, weights: np.ndarray) -> "VecField":
        return self._wrap(self.data * np.asarray(weights)[:, None])

    def d(self, k: int = 1) -> "VecField":
        return derivative(self, k)

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.data, axis=1)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.data)))

    def normalized(self, unit_tol: float = None) -> "UnitVecField":
        n = self.norms()
        if np.any(n == 0.0):
            raise ValidationError("cannot normalize a field with zero samples")
        return UnitVecField(self.grid, self.data / n[:, None], unit_tol=unit_tol or config.UNIT_TOL)

    def with_boundary(self, left, right) -> "VecField":
        data = np.array(self.data)
        data[0] = left
        data[-1] = right
        return self._wrap(data)

    def boundary_values(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.data[0].copy(), self.data[-1].copy()


@dataclass(frozen=True, eq=False)
class UnitVecField(VecField):
    """VecField whose samples all lie on the unit sphere"""

    unit_tol: float = field(default=config.UNIT_TOL)

    def __post_init__(self):
        super().__post_init__()
        drift = unit_drift(self)
        if drift > self.unit_tol:
            raise ValidationError(f"field is not unit-norm: max | |v| - 1 | = {drift:.3e} > {self.unit_tol:.1e}")

    def as_vec(self) -> VecField:
        return VecField(self.grid, self.data)


def unit_drift(f: VecField) -> float:
    return float(np.max(np.abs(f.norms() - 1.0)))


def derivative(f: VecField, order: int) -> VecField:
    """k-th s-derivative, central in the interior and one-sided at the ends"""
    return VecField(f.grid, f.grid.apply(f.data, order))


def l2_inner(f: VecField, g: VecField, rule: str = "trapezoid") -> float:
    f.grid.check_same(g.grid)
    return f.grid.integrate(f.dot(g), rule)


def l2_norm(f: VecField, rule: str = "trapezoid") -> float:
    return float(np.sqrt(max(l2_inner(f, f, rule), 0.0)))


def sobolev_norm(f: VecField, m: int, rule: str = "trapezoid") -> float:
    """Discrete H^m norm: sqrt(sum_{j<=m} ||d^j f||^2)"""
    if m < 0:
        raise ValidationError(f"Sobolev index must be >= 0, got {m}")
    total = 0.0
    for j in range(m + 1):
        dj = f if j == 0 else derivative(f, j)
        total += l2_inner(dj, dj, rule)
    return float(np.sqrt(total))
