"""
Verification layer: conserved functionals, boundary identities of solutions,
curvature/torsion and the Hasimoto transform with its NLS residual.
"""

import logging
from dataclasses import asdict, dataclass, field
from math import comb
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import scipy.integrate as spi

from config import config
from .dynamics import FilamentState
from .errors import TransformUndefinedError, ValidationError
from .grid import GridSpec, VecField, unit_drift

logger = logging.getLogger(__name__)

SAMPLE_FRACTIONS = (1 / 6, 1 / 3, 1 / 2, 2 / 3, 5 / 6)
INVARIANT_COLUMNS = ("t", "I1", "I2", "I3", "unit_drift", "bres_left", "bres_right")


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", a, b)


def _derivs(v: VecField, up_to: int) -> List[np.ndarray]:
    return [v.data] + [v.grid.apply(v.data, k) for k in range(1, up_to + 1)]


# Conserved functionals


@dataclass
class InvariantEntry:
    t: float
    I1: float
    I2: float
    I3: float
    unit_drift: float
    bres_left: float
    bres_right: float


@dataclass
class InvariantSeries:
    times: List[float] = field(default_factory=list)
    I1: List[float] = field(default_factory=list)
    I2: List[float] = field(default_factory=list)
    I3: List[float] = field(default_factory=list)
    unit_drift: List[float] = field(default_factory=list)
    bres_left: List[float] = field(default_factory=list)
    bres_right: List[float] = field(default_factory=list)

    def append(self, entry: InvariantEntry):
        values = asdict(entry)
        if not all(np.isfinite(x) for x in values.values()):
            raise ValidationError(f"non-finite invariant entry at t={entry.t}")
        self.times.append(entry.t)
        for name in INVARIANT_COLUMNS[1:]:
            getattr(self, name).append(values[name])

    def __len__(self) -> int:
        return len(self.times)

    def rows(self) -> List[List[float]]:
        return [list(r) for r in zip(self.times, self.I1, self.I2, self.I3,
                                     self.unit_drift, self.bres_left, self.bres_right)]

    def relative_drift(self, name: str) -> float:
        """max_t |I(t) - I(0)| / max(|I(0)|, 1e-300)"""
        values = np.asarray(getattr(self, name))
        return float(np.max(np.abs(values - values[0])) / max(abs(values[0]), 1e-300))

    def is_dissipative(self, tol: float = 1e-12) -> bool:
        """I1 non-increasing up to tol"""
        return bool(np.all(np.diff(self.I1) <= tol))

    def to_dict(self) -> dict:
        return {"times": self.times, "I1": self.I1, "I2": self.I2, "I3": self.I3,
                "unit_drift": self.unit_drift, "bres_left": self.bres_left, "bres_right": self.bres_right}


def invariants(state: FilamentState, rule: str = "trapezoid") -> InvariantEntry:
    grid = state.grid
    v, vs, vss, vsss = _derivs(state.v, 3)
    s2 = _dot(vs, vs)
    ss2 = _dot(vss, vss)
    mixed = _dot(vs, vss)
    I1 = grid.integrate(s2, rule)
    I2 = grid.integrate(ss2, rule) - 1.25 * grid.integrate(s2 ** 2, rule)
    I3 = (grid.integrate(_dot(vsss, vsss), rule) - 3.5 * grid.integrate(s2 * ss2, rule)
          - 14.0 * grid.integrate(mixed ** 2, rule) + 2.625 * grid.integrate(s2 ** 3, rule))
    bres = np.linalg.norm(np.cross(v[[0, -1]], vss[[0, -1]]), axis=1)
    return InvariantEntry(state.t, I1, I2, I3, unit_drift(state.v), float(bres[0]), float(bres[1]))


def invariant_series(states: Sequence[FilamentState], rule: str = "trapezoid") -> InvariantSeries:
    series = InvariantSeries()
    for s in states:
        series.append(invariants(s, rule))
    return series


def is_dissipative(series: InvariantSeries, tol: float = 1e-12) -> bool:
    return series.is_dissipative(tol)


# Boundary identities


def sample_nodes(grid: GridSpec, fractions: Sequence[float] = SAMPLE_FRACTIONS) -> np.ndarray:
    return np.array([int(round(f * grid.n_cells)) for f in fractions])


@dataclass
class BoundaryIdentityReport:
    bv2_left: float
    bv2_right: float
    one_identity: Dict[int, float]
    decomposition: Dict[int, float]

    @property
    def max_discrepancy(self) -> float:
        return max([self.bv2_left, self.bv2_right, *self.one_identity.values(), *self.decomposition.values()])

    def to_dict(self) -> dict:
        return {"bv2_left": self.bv2_left, "bv2_right": self.bv2_right,
                "one_identity": {str(k): x for k, x in self.one_identity.items()},
                "decomposition": {str(k): x for k, x in self.decomposition.items()},
                "max_discrepancy": self.max_discrepancy}


def decomposition_check(state: FilamentState, n: int, nodes: Optional[np.ndarray] = None) -> float:
    """
    Max over nodes of |v_s x d^n v - ( -(v . d^n v) v x v_s + ((v x v_s) . d^n v) v )|,
    the expansion of v_s x w in the frame v, v_s, v x v_s (exact when |v| = 1, v . v_s = 0).
    """
    d = _derivs(state.v, n)
    nodes = sample_nodes(state.grid) if nodes is None else nodes
    v, vs, dn = d[0][nodes], d[1][nodes], d[n][nodes]
    b = np.cross(v, vs)
    lhs = np.cross(vs, dn)
    rhs = -_dot(v, dn)[:, None] * b + _dot(b, dn)[:, None] * v
    return float(np.max(np.linalg.norm(lhs - rhs, axis=1)))


def one_identity(state: FilamentState, n: int, nodes: Optional[np.ndarray] = None) -> float:
    """Max over nodes of |v . d^n v + 1/2 sum_{j=1}^{n-1} C(n,j) d^j v . d^{n-j} v|"""
    d = _derivs(state.v, n)
    nodes = sample_nodes(state.grid) if nodes is None else nodes
    total = _dot(d[0][nodes], d[n][nodes])
    for j in range(1, n):
        total = total + 0.5 * comb(n, j) * _dot(d[j][nodes], d[n - j][nodes])
    return float(np.max(np.abs(total)))


def boundary_identity_check(state: FilamentState, eps: float) -> BoundaryIdentityReport:
    """v_ss = -eps v x v_ss - |v_s|^2 v at both ends, plus interior frame identities"""
    v, vs, vss = _derivs(state.v, 2)
    ends = [0, -1]
    predicted = -eps * np.cross(v[ends], vss[ends]) - _dot(vs[ends], vs[ends])[:, None] * v[ends]
    bv2 = np.linalg.norm(vss[ends] - predicted, axis=1)
    return BoundaryIdentityReport(
        float(bv2[0]), float(bv2[1]),
        {n: one_identity(state, n) for n in (2, 3)},
        {n: decomposition_check(state, n) for n in (2, 3)},
    )


def parity_identities(state: FilamentState, m: int = 1) -> Dict[str, Dict[str, float]]:
    """
    At s = 0, 1: |v x d^{2m} v| and max |d^i v . d^n v| over i + n = 2m + 1.
    Derivatives are limited to order 4 on the grid, so m = 2 skips the pair (0, 5).
    """
    if m not in (1, 2):
        raise ValidationError(f"parity identities are available for m = 1, 2, got {m}")
    d = _derivs(state.v, min(2 * m + 1, 4))
    out = {}
    for side, idx in (("left", 0), ("right", -1)):
        cross = float(np.linalg.norm(np.cross(d[0][idx], d[2 * m][idx])))
        pairs = [(i, 2 * m + 1 - i) for i in range(m + 1) if 2 * m + 1 - i < len(d)]
        dots = [abs(float(d[i][idx] @ d[n][idx])) for i, n in pairs]
        out[side] = {"cross": cross, "dot": max(dots)}
    return out


# Hasimoto transform


@dataclass
class HasimotoProfile:
    t: float
    s: np.ndarray
    kappa: np.ndarray
    tau: np.ndarray
    psi: np.ndarray
    defined: np.ndarray

    def rows(self) -> List[List[float]]:
        return [[float(a), float(k), float(tt), float(p.real), float(p.imag)]
                for a, k, tt, p in zip(self.s, self.kappa, self.tau, self.psi)]


@dataclass
class HasimotoResult:
    profiles: List[HasimotoProfile]
    nls_residual: float
    nls_residual_opposite: float
    residual_before_gauge: float

    @property
    def best_residual(self) -> float:
        return min(self.nls_residual, self.nls_residual_opposite)

    def to_dict(self) -> dict:
        return {"nls_residual": self.nls_residual,
                "nls_residual_opposite": self.nls_residual_opposite,
                "residual_before_gauge": self.residual_before_gauge,
                "best_residual": self.best_residual}


def hasimoto_profile(v: VecField, t: float = 0.0, kappa_floor: float = None) -> HasimotoProfile:
    """kappa = |v_s|, tau = (v x v_s) . v_ss / kappa^2, psi = kappa exp(i int_0^s tau)"""
    kappa_floor = config.KAPPA_FLOOR if kappa_floor is None else kappa_floor
    grid = v.grid
    d = _derivs(v, 2)
    kappa = np.linalg.norm(d[1], axis=1)
    defined = kappa >= kappa_floor
    if not np.any(defined):
        raise TransformUndefinedError(f"curvature below {kappa_floor:g} everywhere at t={t:g}")
    tau = np.zeros_like(kappa)
    tau[defined] = _dot(np.cross(d[0], d[1]), d[2])[defined] / kappa[defined] ** 2
    phase = spi.cumulative_trapezoid(tau, dx=grid.h, initial=0.0)
    return HasimotoProfile(t, grid.nodes, kappa, tau, kappa * np.exp(1j * phase), defined)


def _gauge_fit(psi: np.ndarray, residual: np.ndarray) -> np.ndarray:
    """Remove the real multiple of psi (a time-dependent global phase) closest in L2"""
    denom = np.vdot(psi, psi).real
    if denom == 0:
        return residual
    return residual - (np.vdot(psi, residual).real / denom) * psi


def hasimoto(states: Sequence[Union[FilamentState, VecField]], dt: Optional[float] = None,
             kappa_floor: float = None, window=(0.1, 0.9)) -> HasimotoResult:
    """
    Profiles for every time level and the NLS residual

        i psi_t = psi_ss + 1/2 |psi|^2 psi

    (and of the opposite convention i psi_t + psi_ss + 1/2 |psi|^2 psi = 0) at
    interior time levels and the nodes of the window, after the gauge fit.

    Items may be FilamentStates or raw position fields (then `dt` is required
    and v = x_s).
    """
    if len(states) < 3:
        raise ValidationError("the NLS residual needs at least 3 time levels")
    fields, times = [], []
    for k, item in enumerate(states):
        if isinstance(item, FilamentState):
            fields.append(item.v)
            times.append(item.t)
        else:
            if dt is None:
                raise ValidationError("dt is required when position fields are given")
            fields.append(item.d(1))
            times.append(k * dt)
    times = np.asarray(times)
    steps = np.diff(times)
    if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-14):
        raise ValidationError("time levels must be uniformly spaced")
    step = steps[0]

    profiles = [hasimoto_profile(f, t, kappa_floor) for f, t in zip(fields, times)]
    grid = fields[0].grid
    in_window = (grid.nodes >= window[0]) & (grid.nodes <= window[1])

    worst = {"primary": 0.0, "opposite": 0.0, "raw": 0.0}
    for k in range(1, len(profiles) - 1):
        psi = profiles[k].psi
        mask = in_window & profiles[k].defined & profiles[k - 1].defined & profiles[k + 1].defined
        if not np.any(mask):
            continue
        psi_t = (profiles[k + 1].psi - profiles[k - 1].psi) / (2.0 * step)
        psi_ss = grid.apply(psi, 2)
        cubic = 0.5 * np.abs(psi) ** 2 * psi
        primary = 1j * psi_t - psi_ss - cubic
        opposite = 1j * psi_t + psi_ss + cubic
        worst["raw"] = max(worst["raw"], float(np.max(np.abs(primary[mask]))))
        for name, res in (("primary", primary), ("opposite", opposite)):
            fitted = _gauge_fit(psi[mask], res[mask])
            worst[name] = max(worst[name], float(np.max(np.abs(fitted))))

    logger.info(f"📊 NLS residual {worst['primary']:.3e} (opposite convention {worst['opposite']:.3e})")
    return HasimotoResult(profiles, worst["primary"], worst["opposite"], worst["raw"])
