"""
Initial tangent fields: built-in closed forms and grid samples loaded from CSV.

Every datum samples onto a grid and yields boundary jets. Closed-form data
carry a sympy expression of their boundary germ (the form valid near s = 0
and s = 1), so jets are exact.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import sympy

from .compat import E3, BlendedCorrection, enforce_compat
from .errors import ValidationError
from .grid import GridSpec, UnitVecField, VecField
from .jets import Jet

logger = logging.getLogger(__name__)

S = sympy.Symbol("s", real=True)


@dataclass(frozen=True, eq=False)
class Datum:
    name: str
    params: Dict[str, object] = field(default_factory=dict)
    corrections: Tuple[BlendedCorrection, ...] = ()

    def raw_samples(self, grid: GridSpec) -> np.ndarray:
        """Samples before the final normalization; each correction acts on the normalized previous stage"""
        data = self._base_samples(grid)
        for corr in self.corrections:
            data = data / np.linalg.norm(data, axis=1)[:, None] + corr.evaluate(grid.nodes)
        return data

    def sample(self, grid: GridSpec, unit_tol: float = None) -> UnitVecField:
        return VecField(grid, self.raw_samples(grid)).normalized(unit_tol)

    def jet(self, side: str, order: int) -> Jet:
        """Normalized boundary jet"""
        raw = self._base_jet(side, order)
        for corr in self.corrections:
            raw = raw.normalized() + corr.jet(side, order)
        return raw.normalized()

    def with_correction(self, correction: BlendedCorrection) -> "Datum":
        return replace(self, corrections=self.corrections + (correction,))

    def _base_samples(self, grid: GridSpec) -> np.ndarray:
        raise NotImplementedError

    def _base_jet(self, side: str, order: int) -> Jet:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class ClosedFormDatum(Datum):
    numeric: Optional[Callable[[np.ndarray], np.ndarray]] = None
    germ: Tuple[sympy.Expr, ...] = ()

    def _base_samples(self, grid: GridSpec) -> np.ndarray:
        return np.asarray(self.numeric(grid.nodes), dtype=float)

    def _base_jet(self, side: str, order: int) -> Jet:
        return Jet.from_expression(self.germ, S, side, order)


@dataclass(frozen=True, eq=False)
class GridDatum(Datum):
    """Datum known only through its samples; jets come from one-sided stencils"""

    samples: Optional[VecField] = None

    def _base_samples(self, grid: GridSpec) -> np.ndarray:
        if grid.n_cells != self.samples.grid.n_cells:
            raise ValidationError(
                f"incompatible grid: datum '{self.name}' has {self.samples.grid.n_cells} cells, run uses {grid.n_cells}"
            )
        return np.array(self.samples.data)

    def _base_jet(self, side: str, order: int) -> Jet:
        return Jet.from_grid(self.samples, side, order)


# Built-ins


def _arc_angle(a: np.ndarray) -> float:
    theta = float(np.arccos(np.clip(a @ E3, -1.0, 1.0)))
    if np.pi - theta < 1e-9:
        raise ValidationError("no unique great-circle arc from a = -e3 to e3")
    return theta


def _arc_numeric(a: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    theta = _arc_angle(a)
    if theta < 1e-12:
        return lambda s: np.tile(E3, (len(s), 1))

    def arc(s):
        s = np.asarray(s, dtype=float)[:, None]
        return (np.sin((1.0 - s) * theta) * a + np.sin(s * theta) * E3) / np.sin(theta)

    return arc


def _arc_germ(a: np.ndarray) -> Tuple[sympy.Expr, ...]:
    theta = _arc_angle(a)
    if theta < 1e-12:
        return (sympy.Integer(0), sympy.Integer(0), sympy.Integer(1))
    th = sympy.Float(theta)
    w0, w1 = sympy.sin((1 - S) * th) / sympy.sin(th), sympy.sin(S * th) / sympy.sin(th)
    return tuple(w0 * float(a[i]) + w1 * float(E3[i]) for i in range(3))


def constant_e3(a=None, **_) -> Datum:
    return ClosedFormDatum(
        "constant-e3",
        {},
        numeric=lambda s: np.tile(E3, (len(np.asarray(s)), 1)),
        germ=(sympy.Integer(0), sympy.Integer(0), sympy.Integer(1)),
    )


def quarter_circle(a=(1.0, 0.0, 0.0), **_) -> Datum:
    """Great-circle arc from a to e3 at constant speed; a = e1 gives (cos(pi s/2), 0, sin(pi s/2))"""
    a = np.asarray(a, dtype=float)
    return ClosedFormDatum("quarter-circle", {"a": a.tolist()}, numeric=_arc_numeric(a), germ=_arc_germ(a))


def helix_tangent(alpha: float = np.pi / 6, k: float = np.pi, **_) -> Datum:
    alpha, k = float(alpha), float(k)
    ca, sa = np.cos(alpha), np.sin(alpha)

    def numeric(s):
        s = np.asarray(s, dtype=float)
        return np.column_stack([ca * np.cos(k * s), ca * np.sin(k * s), np.full_like(s, sa)])

    germ = (ca * sympy.cos(k * S), ca * sympy.sin(k * S), sympy.Float(sa))
    return ClosedFormDatum("helix-tangent", {"alpha": alpha, "k": k}, numeric=numeric, germ=germ)


def smooth_bump(s, lo: float = 0.2, hi: float = 0.8) -> np.ndarray:
    """exp(1 - 1/(1 - r^2)) on (lo, hi), zero outside; peak 1"""
    s = np.asarray(s, dtype=float)
    r = (2.0 * s - (lo + hi)) / (hi - lo)
    out = np.zeros_like(s)
    inside = np.abs(r) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out


def perturbed_quarter_circle(a=(1.0, 0.0, 0.0), seed: int = 0, delta: float = 0.05, **_) -> Datum:
    """Arc plus a seeded bump supported in the interior; compatible to every order"""
    a = np.asarray(a, dtype=float)
    rng = np.random.default_rng(seed)
    c0, c1 = rng.uniform(-1.0, 1.0, size=(2, 3))
    arc = _arc_numeric(a)

    def numeric(s):
        s = np.asarray(s, dtype=float)
        bump = smooth_bump(s)[:, None]
        return arc(s) + delta * bump * (c0 + c1 * np.sin(2.0 * np.pi * s)[:, None])

    params = {"a": a.tolist(), "seed": int(seed), "delta": float(delta)}
    return ClosedFormDatum("perturbed-quarter-circle", params, numeric=numeric, germ=_arc_germ(a))


def twisted_quarter_circle(a=(1.0, 0.0, 0.0), delta: float = 0.2, order: int = 2, **_) -> Datum:
    """
    Arc plus an out-of-plane twist reaching both ends, made compatible with
    the unregularized conditions up to `order`. Its regularized conditions fail
    at O(eps), so the corrector has real work to do.
    """
    a = np.asarray(a, dtype=float)
    twist = np.array([0.3, 1.0, -0.2])
    arc = _arc_numeric(a)

    def numeric(s):
        s = np.asarray(s, dtype=float)
        return arc(s) + delta * (s * (1.0 - s))[:, None] * twist

    germ = tuple(g + float(delta * twist[i]) * S * (1 - S) for i, g in enumerate(_arc_germ(a)))
    raw = ClosedFormDatum(
        "twisted-quarter-circle",
        {"a": a.tolist(), "delta": float(delta), "order": int(order)},
        numeric=numeric,
        germ=germ,
    )
    return enforce_compat(raw, a, order)


BUILTIN_DATA: Dict[str, Callable[..., Datum]] = {
    "constant-e3": constant_e3,
    "quarter-circle": quarter_circle,
    "helix-tangent": helix_tangent,
    "perturbed-quarter-circle": perturbed_quarter_circle,
    "twisted-quarter-circle": twisted_quarter_circle,
}


def make_datum(name: str, **params) -> Datum:
    try:
        builder = BUILTIN_DATA[name]
    except KeyError:
        raise ValidationError(f"unknown datum '{name}', expected one of {sorted(BUILTIN_DATA)}")
    logger.info(f"🧵 Building datum '{name}' {params or ''}")
    return builder(**params)


def datum_from_samples(name: str, data: np.ndarray) -> Datum:
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] != 3:
        raise ValidationError(f"datum samples must have shape (n+1, 3), got {data.shape}")
    grid = GridSpec(len(data) - 1)
    return GridDatum(name, {"n_cells": grid.n_cells}, samples=VecField(grid, data))
