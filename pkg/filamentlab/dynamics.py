"""
Time evolution of the tangent field v = x_s.

    v_t = v x v_ss                                   (eps = 0)
    v_t = v x v_ss + eps v_ss + eps |v_s|^2 v        (eps > 0)
    v(0, t) = a,  v(1, t) = e3

Two steppers: an implicit-Euler frozen-coefficient scheme with Picard passes
for eps > 0, and an implicit midpoint scheme for eps = 0 whose update is a
node-wise rotation. Both solve a block-tridiagonal system with 3x3 blocks by
banded LU.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, ClassVar, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.integrate as spi
import scipy.linalg as sla

from config import config
from .compat import E3, correct_datum, cross_matrix, jet_sequence
from .errors import NumericalError, ValidationError
from .grid import GridSpec, UnitVecField, VecField, sobolev_norm, unit_drift
from .sweep_manager import SweepManager

logger = logging.getLogger(__name__)

SEMI_IMPLICIT = "semi_implicit_linearized"
MIDPOINT = "implicit_midpoint_sphere"
SCHEMES = (SEMI_IMPLICIT, MIDPOINT)
RENORMALIZE = ("off", "project_each_step")
PICARD_STARTS = ("previous", "taylor")
RATE_WINDOW = (0.3, 0.7)


@dataclass(frozen=True)
class SolverConfig:
    eps: float = 0.0
    dt: float = 1e-4
    scheme: Optional[str] = None
    a: Tuple[float, float, float] = (1.0, 0.0, 0.0)
    renormalize: Optional[str] = None
    picard_iters: int = 2
    picard_start: str = "previous"
    newton_tol: float = config.NEWTON_TOL
    unit_tol: float = config.UNIT_TOL
    max_iters: int = config.NEWTON_MAX_ITERS

    def __post_init__(self):
        if not np.isfinite(self.eps) or self.eps < 0:
            raise ValidationError(f"eps must be finite and >= 0, got {self.eps}")
        if not np.isfinite(self.dt) or self.dt <= 0:
            raise ValidationError(f"dt must be finite and > 0, got {self.dt}")
        a = np.asarray(self.a, dtype=float)
        if a.shape != (3,) or abs(np.linalg.norm(a) - 1.0) > 1e-12:
            raise ValidationError(f"a must be a unit 3-vector, got {list(self.a)}")
        object.__setattr__(self, "a", tuple(float(x) for x in a))

        scheme = self.scheme or (SEMI_IMPLICIT if self.eps > 0 else MIDPOINT)
        if scheme not in SCHEMES:
            raise ValidationError(f"unknown scheme '{scheme}', expected one of {SCHEMES}")
        object.__setattr__(self, "scheme", scheme)

        renormalize = self.renormalize or ("project_each_step" if scheme == SEMI_IMPLICIT else "off")
        if renormalize not in RENORMALIZE:
            raise ValidationError(f"unknown renormalize option '{renormalize}', expected one of {RENORMALIZE}")
        object.__setattr__(self, "renormalize", renormalize)

        if int(self.picard_iters) != self.picard_iters or self.picard_iters < 1:
            raise ValidationError(f"picard_iters must be an integer >= 1, got {self.picard_iters}")
        if self.picard_start not in PICARD_STARTS:
            raise ValidationError(f"unknown picard_start '{self.picard_start}', expected one of {PICARD_STARTS}")

    @property
    def a_vec(self) -> np.ndarray:
        return np.array(self.a)

    @property
    def projection(self) -> bool:
        return self.renormalize == "project_each_step"

    def effective_dt(self, grid: GridSpec) -> float:
        """min(0.25 h^2 / max(eps, h), dt)"""
        return min(0.25 * grid.h ** 2 / max(self.eps, grid.h), self.dt)

    def replace(self, **changes) -> "SolverConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "eps": self.eps, "dt": self.dt, "scheme": self.scheme, "a": list(self.a),
            "renormalize": self.renormalize, "picard_iters": self.picard_iters,
            "picard_start": self.picard_start, "newton_tol": self.newton_tol,
            "unit_tol": self.unit_tol, "max_iters": self.max_iters,
        }


@dataclass(frozen=True, eq=False)
class FilamentState:
    t: float
    v: VecField
    x: Optional[VecField] = None
    step_count: int = 0
    metadata: Dict[str, object] = field(default_factory=dict)

    @property
    def grid(self) -> GridSpec:
        return self.v.grid

    @property
    def unit_drift(self) -> float:
        return unit_drift(self.v)


@dataclass
class BlockTridiagonal:
    """Block-tridiagonal matrix with 3x3 blocks; row i couples nodes i-1, i, i+1"""

    lower: np.ndarray  # lower[i] is block (i+1, i)
    diag: np.ndarray
    upper: np.ndarray  # upper[i] is block (i, i+1)

    bandwidth: ClassVar[Tuple[int, int]] = (5, 5)

    @property
    def n_blocks(self) -> int:
        return len(self.diag)

    def to_banded(self) -> np.ndarray:
        """Diagonal-ordered storage for scipy.linalg.solve_banded"""
        lo, up = self.bandwidth
        n = 3 * self.n_blocks
        ab = np.zeros((lo + up + 1, n), dtype=self.diag.dtype)
        idx = np.arange(self.n_blocks)
        for blocks, rows, cols in (
            (self.diag, idx, idx),
            (self.upper, idx[:-1], idx[1:]),
            (self.lower, idx[1:], idx[:-1]),
        ):
            for p in range(3):
                for q in range(3):
                    r, c = 3 * rows + p, 3 * cols + q
                    ab[up + r - c, c] = blocks[:, p, q]
        return ab

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = np.einsum("nij,nj->ni", self.diag, x)
        y[:-1] += np.einsum("nij,nj->ni", self.upper, x[1:])
        y[1:] += np.einsum("nij,nj->ni", self.lower, x[:-1])
        return y

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        try:
            sol = sla.solve_banded(self.bandwidth, self.to_banded(), np.asarray(rhs).ravel())
        except (np.linalg.LinAlgError, ValueError) as e:
            raise NumericalError(f"Error in banded solve: {str(e)}") from e
        if not np.all(np.isfinite(sol)):
            raise NumericalError("banded solve produced non-finite values")
        return sol.reshape(-1, 3)


def dirichlet_system(coeff: np.ndarray, c: float) -> BlockTridiagonal:
    """
    I - c K_i (u_{i-1} - 2 u_i + u_{i+1}) on interior rows, identity on rows 0 and n.
    `coeff` holds one 3x3 block K_i per node.
    """
    n1 = len(coeff)
    eye = np.eye(3)
    diag = np.tile(eye, (n1, 1, 1)).astype(coeff.dtype)
    lower = np.zeros((n1 - 1, 3, 3), dtype=coeff.dtype)
    upper = np.zeros((n1 - 1, 3, 3), dtype=coeff.dtype)
    inner = coeff[1:-1]
    diag[1:-1] = eye + 2.0 * c * inner
    lower[:-1] = -c * inner
    upper[1:] = -c * inner
    return BlockTridiagonal(lower, diag, upper)


# Right-hand sides


def rhs_lie(v: VecField) -> VecField:
    return v.cross(v.d(2))


def rhs_regularized(v: VecField, eps: float) -> VecField:
    if not np.isfinite(eps) or eps < 0:
        raise ValidationError(f"eps must be finite and >= 0, got {eps}")
    vss = v.d(2)
    out = v.cross(vss)
    if eps > 0:
        vs = v.d(1)
        out = out + (vss + v.scale(vs.dot(vs))) * eps
    return out


# Steppers


def _as_state_field(data: np.ndarray, grid: GridSpec, cfg: SolverConfig, metadata: dict) -> VecField:
    f = VecField(grid, data)
    drift = unit_drift(f)
    if drift <= cfg.unit_tol:
        return UnitVecField(grid, data, unit_tol=cfg.unit_tol)
    metadata["unit_drift"] = drift
    return f


def _project(data: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    data = data / np.linalg.norm(data, axis=1)[:, None]
    data[0], data[-1] = cfg.a_vec, E3
    return data


def _picard_start(v: VecField, cfg: SolverConfig, dt: float) -> np.ndarray:
    if cfg.picard_start == "previous":
        return np.array(v.data)
    seq = jet_sequence(v, cfg.eps, 2)
    u = v.data + sum(dt ** j / math.factorial(j) * seq[j].data for j in (1, 2))
    u[0], u[-1] = cfg.a_vec, E3
    return u


def step_semi_implicit(state: FilamentState, cfg: SolverConfig) -> FilamentState:
    """
    One implicit-Euler step of the frozen-coefficient problem

        (I - dt (eps D2 + [b]x D2)) u = v_old + dt eps |D1 b|^2 b,   b = previous Picard iterate

    with Dirichlet rows u_0 = a, u_n = e3.
    """
    if cfg.eps <= 0:
        raise ValidationError("semi-implicit scheme requires eps > 0")
    grid = state.grid
    dt = cfg.effective_dt(grid)
    c = dt / grid.h ** 2
    v_old = state.v.data
    u_prev = _picard_start(state.v, cfg, dt)

    eye = np.eye(3)
    metadata: Dict[str, object] = {}
    residuals: List[float] = []
    for _ in range(cfg.picard_iters):
        vs = grid.apply(u_prev, 1)
        rhs = v_old + dt * cfg.eps * np.einsum("ij,ij->i", vs, vs)[:, None] * u_prev
        rhs[0], rhs[-1] = cfg.a_vec, E3
        system = dirichlet_system(cfg.eps * eye + cross_matrix(u_prev), c)
        u_new = system.solve(rhs)
        residuals.append(float(np.max(np.abs(u_new - u_prev))))
        u_prev = u_new

    metadata["picard_residuals"] = residuals
    if any(later > earlier for earlier, later in zip(residuals[1:], residuals[2:])):
        logger.warning(f"⚠️ Picard residual not decreasing at t={state.t + dt:.6g}: {residuals}")
        metadata["warning"] = "picard residual not decreasing"

    if cfg.projection:
        u_prev = _project(u_prev, cfg)
    v_new = _as_state_field(u_prev, grid, cfg, metadata)
    return FilamentState(state.t + dt, v_new, state.x, state.step_count + 1, metadata)


def step_midpoint_sphere(state: FilamentState, cfg: SolverConfig) -> FilamentState:
    """
    Implicit midpoint for v_t = v x v_ss:

        v_new - v_old = dt/2 [b]x D2 (v_new + v_old),   b = (v_new + v_old) / 2

    iterated on b until successive iterates agree to newton_tol.
    """
    if cfg.eps != 0:
        raise ValidationError("implicit midpoint scheme requires eps = 0")
    grid = state.grid
    dt = cfg.effective_dt(grid)
    c = 0.5 * dt / grid.h ** 2
    v_old = np.array(state.v.data)
    d2_old = grid.apply(v_old, 2)
    v_new = v_old.copy()

    change = np.inf
    for it in range(1, cfg.max_iters + 1):
        cross = cross_matrix(0.5 * (v_new + v_old))
        rhs = v_old + 0.5 * dt * np.einsum("nij,nj->ni", cross, d2_old)
        rhs[0], rhs[-1] = cfg.a_vec, E3
        new = dirichlet_system(cross, c).solve(rhs)
        change = float(np.max(np.abs(new - v_new)))
        v_new = new
        if change <= cfg.newton_tol:
            break
    else:
        raise NumericalError(
            f"midpoint iteration did not converge in {cfg.max_iters} iterations at t={state.t:.6g}",
            residual=change,
        )

    metadata: Dict[str, object] = {"iterations": it}
    if cfg.projection:
        v_new = _project(v_new, cfg)
    field_new = _as_state_field(v_new, grid, cfg, metadata)
    return FilamentState(state.t + dt, field_new, state.x, state.step_count + 1, metadata)


def step(state: FilamentState, cfg: SolverConfig) -> FilamentState:
    if cfg.scheme == SEMI_IMPLICIT:
        return step_semi_implicit(state, cfg)
    return step_midpoint_sphere(state, cfg)


def simulate(state0: FilamentState, cfg: SolverConfig, T: float, stride: int = 1,
             on_step: Optional[Callable[[FilamentState], None]] = None) -> List[FilamentState]:
    """
    Advance to time T with a uniform step (the effective dt, shrunk to divide T).
    Returns state0, every `stride`-th state and the final state.
    """
    if not np.isfinite(T) or T < 0:
        raise ValidationError(f"T must be finite and >= 0, got {T}")
    if int(stride) != stride or stride < 1:
        raise ValidationError(f"snapshot stride must be an integer >= 1, got {stride}")
    history = [state0]
    if T == 0:
        return history

    n_steps = max(1, math.ceil(T / cfg.effective_dt(state0.grid) - 1e-9))
    run_cfg = cfg.replace(dt=T / n_steps)
    logger.info(f"🚀 Simulating to T={T} in {n_steps} steps (dt={run_cfg.dt:.3e}, scheme={run_cfg.scheme}, eps={run_cfg.eps})")

    state = state0
    for k in range(1, n_steps + 1):
        state = step(state, run_cfg)
        if on_step is not None:
            on_step(state)
        if k % stride == 0 or k == n_steps:
            history.append(state)
    return history


def max_displacement(a: VecField, b: VecField) -> float:
    a.grid.check_same(b.grid)
    return float(np.max(np.linalg.norm(a.data - b.data, axis=1)))


# Position


def integrate_tangent(v: VecField, origin=(0.0, 0.0, 0.0)) -> VecField:
    """x(s) = origin + int_0^s v"""
    x = spi.cumulative_trapezoid(v.data, dx=v.grid.h, axis=0, initial=0.0)
    return VecField(v.grid, x + np.asarray(origin, dtype=float))


def reconstruct_position(history: Sequence[FilamentState], x0: VecField) -> List[VecField]:
    """x(t_k) = x0 + int_0^{t_k} x_s x x_ss = x0 + int_0^{t_k} v x v_s, trapezoid in time over the stored history"""
    if len(history) < 2:
        raise ValidationError("position reconstruction needs at least 2 states")
    times = np.array([s.t for s in history])
    dts = np.diff(times)
    if np.any(dts <= 0) or not np.allclose(dts, dts[0], rtol=1e-9, atol=1e-14):
        raise ValidationError("states must be uniformly spaced in time")

    rates = [s.v.cross(s.v.d(1)).data for s in history]
    x = np.array(x0.data)
    positions = [VecField(x0.grid, x)]
    for k in range(1, len(history)):
        x = x + 0.5 * dts[k - 1] * (rates[k - 1] + rates[k])
        positions.append(VecField(x0.grid, x))
    return positions


# Vanishing-regularization sweep


@dataclass
class SweepReport:
    eps_list: List[float]
    differences: List[float]
    differences_h2: List[float]
    slope: Optional[float]
    extrapolated: VecField
    finals: Dict[float, VecField]
    jet_constants: Dict[float, float]
    stats: Dict[str, int]
    dt: Optional[float] = None

    @property
    def rate_in_window(self) -> bool:
        return self.slope is not None and RATE_WINDOW[0] <= self.slope <= RATE_WINDOW[1]

    def to_dict(self) -> dict:
        return {
            "eps_list": self.eps_list,
            "differences_h1": self.differences,
            "differences_h2": self.differences_h2,
            "slope_h1": self.slope,
            "rate_in_window": self.rate_in_window,
            "rate_window": list(RATE_WINDOW),
            "jet_constants": {repr(e): c for e, c in self.jet_constants.items()},
            "stats": self.stats,
            "dt": self.dt,
        }


def fit_slope(xs: Sequence[float], ys: Sequence[float]) -> Optional[float]:
    """Least-squares slope of log y against log x; None when undefined"""
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if len(xs) < 2 or np.any(ys <= 0) or not np.all(np.isfinite(ys)):
        return None
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def _extrapolate(eps_list: List[float], finals: Dict[float, VecField], slope: Optional[float],
                 cfg: SolverConfig) -> VecField:
    last = finals[eps_list[-1]]
    if slope is None or slope <= 0 or len(eps_list) < 2:
        return last
    e1, e2 = eps_list[-2] ** slope, eps_list[-1] ** slope
    data = (e1 * finals[eps_list[-1]].data - e2 * finals[eps_list[-2]].data) / (e1 - e2)
    return UnitVecField(last.grid, _project(data, cfg), unit_tol=cfg.unit_tol)


def epsilon_sweep(v0: UnitVecField, a, eps_list: Sequence[float], T: float, cfg: SolverConfig,
                  datum=None, target_order: int = 1, max_workers: Optional[int] = None,
                  eps_star: Optional[float] = None) -> SweepReport:
    """
    For each eps: correct the datum, evolve the regularized problem to T and
    keep v^eps(T). Consecutive differences in H^1 give the fitted rate; a
    Richardson step with the fitted exponent gives the eps -> 0 candidate.
    """
    eps_list = [float(e) for e in eps_list]
    eps_star = config.EPS_STAR if eps_star is None else eps_star
    if not eps_list:
        raise ValidationError("eps_list is empty")
    if any(b >= a_ for a_, b in zip(eps_list, eps_list[1:])):
        raise ValidationError(f"eps_list must be strictly descending, got {eps_list}")
    if eps_list[-1] <= 0 or eps_list[0] > eps_star:
        raise ValidationError(f"eps values must lie in (0, {eps_star}], got {eps_list}")
    a = np.asarray(a, dtype=float)
    base_cfg = cfg.replace(a=tuple(a), scheme=SEMI_IMPLICIT, renormalize=None)
    if cfg.scheme == SEMI_IMPLICIT:
        base_cfg = base_cfg.replace(renormalize=cfg.renormalize)
    # common step for every entry
    base_cfg = base_cfg.replace(dt=min(base_cfg.replace(eps=eps).effective_dt(v0.grid) for eps in eps_list))

    def run_one(eps: float):
        def task():
            corrected = correct_datum(v0, a, eps, target_order, datum=datum, eps_star=eps_star)
            run_cfg = base_cfg.replace(eps=eps)
            history = simulate(FilamentState(0.0, corrected.field), run_cfg, T, stride=10 ** 9)
            return history[-1].v, corrected.jet_constant
        return task

    manager = SweepManager(max_workers)
    logger.info(f"🚀 Epsilon sweep over {eps_list} to T={T} (dt={base_cfg.dt:.3e})")
    try:
        results = manager.run({eps: run_one(eps) for eps in eps_list})
    except NumericalError as e:
        failed = [eps for eps in eps_list if manager.get_status(eps) == "failed"]
        raise NumericalError(f"Error in epsilon sweep (failed eps {failed}): {str(e)}", residual=e.residual) from e

    finals = {eps: res[0] for eps, res in results.items()}
    jet_constants = {eps: res[1] for eps, res in results.items()}
    differences, differences_h2 = [], []
    for e1, e2 in zip(eps_list, eps_list[1:]):
        diff = finals[e1] - finals[e2]
        differences.append(sobolev_norm(diff, 1))
        differences_h2.append(sobolev_norm(diff, 2))

    slope = fit_slope(eps_list[:-1], differences)
    extrapolated = _extrapolate(eps_list, finals, slope, base_cfg)
    report = SweepReport(eps_list, differences, differences_h2, slope, extrapolated, finals,
                         jet_constants, manager.get_stats(), base_cfg.dt)
    logger.info(f"📊 Sweep H1 differences {differences}, fitted slope {slope}")
    return report
