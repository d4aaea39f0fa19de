"""
Compatibility conditions at the corners s = 0, 1 of the initial-boundary value
problem, and construction of the corrected initial datum for the regularized
equation.

P_m(v) and Q_m(v) express the m-th time derivative of the solution through
s-derivatives of v alone. The recursions accept either a grid VecField or a
boundary Jet.
"""

import logging
from dataclasses import dataclass
from math import comb
from typing import Iterator, List, Optional, Tuple

import numpy as np

from config import config
from .errors import NumericalError, ResolutionError, UnsupportedOrderError, ValidationError
from .grid import MAX_DERIVATIVE, GridSpec, UnitVecField, VecField
from .jets import BoundaryJet, FieldLike, Jet

logger = logging.getLogger(__name__)

E3 = np.array([0.0, 0.0, 1.0])
COMPLEX_STEP = 1e-30


@dataclass(frozen=True)
class CompatOrder:
    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 0:
            raise ValidationError(f"compatibility order must be an integer >= 0, got {self.m}")
        if self.m > config.M_MAX:
            raise UnsupportedOrderError(f"compatibility order {self.m} exceeds the cap M_max={config.M_MAX}")


@dataclass
class CompatReport:
    order: int
    residual_left: List[float]
    residual_right: List[float]
    norm_left: float
    norm_right: float
    passed: bool
    tol: float

    @classmethod
    def from_residuals(cls, order: int, left, right, tol: float) -> "CompatReport":
        left = np.real(np.asarray(left, dtype=complex)).astype(float)
        right = np.real(np.asarray(right, dtype=complex)).astype(float)
        nl, nr = float(np.linalg.norm(left)), float(np.linalg.norm(right))
        return cls(order, left.tolist(), right.tolist(), nl, nr, max(nl, nr) <= tol, float(tol))

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "residual_left": self.residual_left,
            "residual_right": self.residual_right,
            "norm_left": self.norm_left,
            "norm_right": self.norm_right,
            "passed": self.passed,
            "tol": self.tol,
        }


# Recursions


def _require_support(v: FieldLike, m: int):
    CompatOrder(m)
    if isinstance(v, Jet):
        if v.order < 2 * m:
            raise ValidationError(f"jet of order {v.order} cannot resolve order-{m} conditions")
    elif m > 0 and v.grid.n_cells < 2 * m + 4:
        raise ResolutionError()


def jet_sequence(v: FieldLike, eps: float, m: int) -> List[FieldLike]:
    """[Q_0, ..., Q_m]; with eps = 0 this is [P_0, ..., P_m]"""
    _require_support(v, m)
    if eps < 0 or not np.isfinite(eps):
        raise ValidationError(f"eps must be finite and >= 0, got {eps}")
    seq = [v]
    for n in range(1, m + 1):
        q = None
        for j in range(n):
            term = seq[j].cross(seq[n - 1 - j].d(2)) * comb(n - 1, j)
            q = term if q is None else q + term
        if eps > 0:
            diffusion = seq[n - 1].d(2)
            for j in range(n):
                for k in range(n - j):
                    w = seq[j].d(1).dot(seq[k].d(1)) * (comb(n - 1, j) * comb(n - 1 - j, k))
                    diffusion = diffusion + seq[n - 1 - j - k].scale(w)
            q = q + diffusion * eps
        seq.append(q)
    return seq


def eval_P(v: FieldLike, m: int) -> FieldLike:
    return jet_sequence(v, 0.0, m)[m]


def eval_Q(v: FieldLike, eps: float, m: int) -> FieldLike:
    return jet_sequence(v, eps, m)[m]


def orthogonality_defect(v: FieldLike, eps: float, m: int):
    """sum_k C(m,k) Q_k . Q_{m-k}; vanishes identically for unit-norm v"""
    seq = jet_sequence(v, eps, m)
    total = None
    for k in range(m + 1):
        term = seq[k].dot(seq[m - k]) * comb(m, k)
        total = term if total is None else total + term
    return total


def cross_matrix(b) -> np.ndarray:
    """Matrix [b]x with [b]x w = b x w; accepts (3,) or (n, 3)"""
    b = np.asarray(b)
    out = np.zeros(b.shape[:-1] + (3, 3), dtype=b.dtype)
    out[..., 0, 1], out[..., 0, 2] = -b[..., 2], b[..., 1]
    out[..., 1, 0], out[..., 1, 2] = b[..., 2], -b[..., 0]
    out[..., 2, 0], out[..., 2, 1] = -b[..., 1], b[..., 0]
    return out


def leading_operator(v: np.ndarray, eps: float, m: int) -> np.ndarray:
    """Coefficient of d^{2m} v in Q_m: ([v]x + eps I)^m"""
    return np.linalg.matrix_power(cross_matrix(np.asarray(v, dtype=float)) + eps * np.eye(3), m)


# Checks


def default_tolerance(grid: GridSpec) -> float:
    return max(1e-8, 10.0 * grid.h ** 2)


def _check_unit(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape != (3,) or abs(np.linalg.norm(a) - 1.0) > 1e-12:
        raise ValidationError(f"boundary vector a must be a unit 3-vector, got {a.tolist()}")
    return a


def check_compat(v0: VecField, a, eps: float = 0.0, up_to: int = 1, tol: float = None) -> List[CompatReport]:
    """
    Order-0 boundary values and P_k (eps = 0) or Q_k (eps > 0) at the boundary nodes.

    Orders resolvable from grid jets run the recursion on Jet.from_grid; the
    remaining orders nest grid stencils, which loses accuracy with each level.
    """
    a = _check_unit(a)
    tol = default_tolerance(v0.grid) if tol is None else tol
    reports = [CompatReport.from_residuals(0, v0.data[0] - a, v0.data[-1] - E3, tol)]
    if up_to < 1:
        return reports
    _require_support(v0, up_to)
    jet_orders = min(up_to, MAX_DERIVATIVE // 2)
    seq_l = jet_sequence(Jet.from_grid(v0, "left", 2 * jet_orders), eps, jet_orders)
    seq_r = jet_sequence(Jet.from_grid(v0, "right", 2 * jet_orders), eps, jet_orders)
    for k in range(1, jet_orders + 1):
        reports.append(CompatReport.from_residuals(k, seq_l[k].value, seq_r[k].value, tol))
    if up_to > jet_orders:
        seq = jet_sequence(v0, eps, up_to)
        for k in range(jet_orders + 1, up_to + 1):
            reports.append(CompatReport.from_residuals(k, seq[k].data[0], seq[k].data[-1], tol))
    return reports


def check_compat_jets(left: Jet, right: Jet, a, eps: float = 0.0, up_to: int = 1, tol: float = 1e-8) -> List[CompatReport]:
    """Same checks evaluated exactly on boundary jets"""
    a = _check_unit(a)
    reports = [CompatReport.from_residuals(0, left.value - a, right.value - E3, tol)]
    if up_to >= 1:
        seq_l = jet_sequence(left, eps, up_to)
        seq_r = jet_sequence(right, eps, up_to)
        for k in range(1, up_to + 1):
            reports.append(CompatReport.from_residuals(k, seq_l[k].value, seq_r[k].value, tol))
    return reports


# Cut-offs and the blended correction


def _smoothstep(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)

    def f(t):
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = np.exp(-1.0 / t[pos])
        return out

    a, b = f(x), f(1.0 - x)
    return a / (a + b)


def psi0(s) -> np.ndarray:
    """Equals 1 on [0, 1/3], 0 on [2/3, 1]"""
    return 1.0 - _smoothstep(3.0 * np.asarray(s, dtype=float) - 1.0)


def psi1(s) -> np.ndarray:
    return _smoothstep(3.0 * np.asarray(s, dtype=float) - 1.0)


@dataclass(frozen=True)
class BlendedCorrection:
    """h(s) = psi0(s) sum_j c_j s^j/j! + psi1(s) sum_j d_j (s-1)^j/j!"""

    left: BoundaryJet
    right: BoundaryJet

    @staticmethod
    def _taylor(coeffs: np.ndarray, r: np.ndarray) -> np.ndarray:
        return Jet.from_derivatives(coeffs).coeffs.T @ np.vstack([r ** j for j in range(len(coeffs))])

    def evaluate(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        left = self._taylor(self.left.array, s).T * psi0(s)[:, None]
        right = self._taylor(self.right.array, s - 1.0).T * psi1(s)[:, None]
        return left + right

    def jet(self, side: str, order: int) -> Jet:
        return (self.left if side == "left" else self.right).as_jet(order)

    @property
    def max_coefficient(self) -> float:
        return max(self.left.max_magnitude, self.right.max_magnitude)

    def to_dict(self) -> dict:
        return {"left": self.left.to_dict(), "right": self.right.to_dict()}


# Jet solve


def _correction_jet(coeffs: np.ndarray, order: int) -> Jet:
    derivs = np.zeros((order + 1, 3), dtype=coeffs.dtype)
    derivs[2 : 2 * len(coeffs) + 1 : 2] = coeffs
    return Jet.from_derivatives(derivs)


def solve_boundary_jet(base: Jet, side: str, eps: float, target_order: int,
                       newton_tol: float = None, max_iters: int = None) -> BoundaryJet:
    """
    Even derivative values c_k = d^{2k} h at one end, k = 1..target_order,
    such that Q_k(normalize(base + h)) vanishes at the boundary for every k.

    Order by order, c_k is the root of a 3-vector equation solved by damped
    Newton iteration; the Jacobian is taken by complex step on the jet and
    inverted in the least-squares sense (its rank is 2, residuals stay
    orthogonal to the boundary value).
    """
    newton_tol = config.NEWTON_TOL if newton_tol is None else newton_tol
    max_iters = config.NEWTON_MAX_ITERS if max_iters is None else max_iters
    order = 2 * target_order
    base = base.truncate(order)
    coeffs = np.zeros((target_order, 3))

    for k in range(1, target_order + 1):

        def residual(c_k: np.ndarray) -> np.ndarray:
            trial = coeffs.astype(c_k.dtype)
            trial[k - 1] = c_k
            v = (base + _correction_jet(trial, order)).normalized()
            return eval_Q(v, eps, k).value

        c = coeffs[k - 1].copy()
        r = residual(c).real
        iters = 0
        while np.linalg.norm(r) > newton_tol:
            if iters >= max_iters:
                raise NumericalError(
                    f"jet solve at order {k} ({side}) did not converge in {max_iters} iterations",
                    residual=float(np.linalg.norm(r)),
                )
            jac = np.column_stack([
                residual(c + 1j * COMPLEX_STEP * e).imag / COMPLEX_STEP for e in np.eye(3)
            ])
            step = np.linalg.lstsq(jac, -r, rcond=None)[0]
            lam = 1.0
            while True:
                trial_r = residual(c + lam * step).real
                if np.linalg.norm(trial_r) < np.linalg.norm(r) or lam < 1e-3:
                    break
                lam *= 0.5
            c, r = c + lam * step, trial_r
            iters += 1
        logger.debug(f"jet solve order {k} ({side}): {iters} Newton iterations, residual {np.linalg.norm(r):.2e}")
        coeffs[k - 1] = c

    derivs = np.zeros((order + 1, 3))
    derivs[2::2] = coeffs
    return BoundaryJet(side, derivs.tolist())


@dataclass
class CorrectionResult:
    field: UnitVecField
    jets: Tuple[BoundaryJet, BoundaryJet]
    reports: List[CompatReport]
    correction: BlendedCorrection
    jet_constant: float
    continuum_reports: Optional[List[CompatReport]] = None
    datum: Optional[object] = None

    def __iter__(self) -> Iterator:
        return iter((self.field, self.jets, self.reports))

    def to_dict(self) -> dict:
        return {
            "jets": [j.to_dict() for j in self.jets],
            "jet_constant": self.jet_constant,
            "reports": [r.to_dict() for r in self.reports],
            "continuum_reports": [r.to_dict() for r in self.continuum_reports or []],
        }


def _boundary_jets(v0: VecField, datum, order: int) -> Tuple[Jet, Jet]:
    if datum is not None:
        return datum.jet("left", order), datum.jet("right", order)
    return Jet.from_grid(v0, "left", order), Jet.from_grid(v0, "right", order)


def correct_datum(v0: UnitVecField, a, eps: float, target_order: int, datum=None,
                  tol_in: float = None, tol_out: float = None, eps_star: float = None,
                  newton_tol: float = None) -> CorrectionResult:
    """
    Corrected datum (v0 + h) / |v0 + h| compatible with the regularized problem.

    When `datum` is given its exact boundary jets drive the solve and the
    corrected field is sampled from the corrected closed form; otherwise the
    jets come from one-sided stencils on v0.
    """
    a = _check_unit(a)
    CompatOrder(target_order)
    eps_star = config.EPS_STAR if eps_star is None else eps_star
    if not (0.0 < eps <= eps_star):
        raise ValidationError(f"eps must lie in (0, eps_star={eps_star}], got {eps}")
    grid = v0.grid
    tol_in = default_tolerance(grid) if tol_in is None else tol_in
    tol_out = default_tolerance(grid) if tol_out is None else tol_out

    order = 2 * target_order
    left, right = _boundary_jets(v0, datum, order)
    if datum is not None:
        incoming = check_compat_jets(left, right, a, 0.0, target_order, tol=max(1e-8, tol_in))
    else:
        incoming = check_compat(v0, a, 0.0, target_order, tol_in)
    failed = [r.order for r in incoming if not r.passed]
    if failed:
        raise ValidationError(f"datum is not compatible for the unregularized problem at orders {failed}")

    try:
        jets = (
            solve_boundary_jet(left, "left", eps, target_order, newton_tol),
            solve_boundary_jet(right, "right", eps, target_order, newton_tol),
        )
    except NumericalError as e:
        raise NumericalError(f"Error correcting datum at eps={eps}: {e}", residual=e.residual) from e
    correction = BlendedCorrection(*jets)

    corrected_datum = None
    continuum = None
    if datum is not None:
        corrected_datum = datum.with_correction(correction)
        raw = corrected_datum.raw_samples(grid)
        continuum = check_compat_jets(
            corrected_datum.jet("left", order), corrected_datum.jet("right", order), a, eps, target_order
        )
    else:
        raw = v0.data + correction.evaluate(grid.nodes)
    data = raw / np.linalg.norm(raw, axis=1)[:, None]
    data[0], data[-1] = a, E3
    field_out = UnitVecField(grid, data)

    reports = check_compat(field_out, a, eps, target_order, tol_out)
    failed = [r for r in reports if not r.passed]
    if failed:
        worst = max(max(r.norm_left, r.norm_right) for r in failed)
        raise NumericalError(
            f"corrected datum at eps={eps} fails compatibility at orders {[r.order for r in failed]} "
            f"(residual {worst:.3e} > tol {tol_out:.3e})",
            residual=worst,
        )
    jet_constant = correction.max_coefficient / eps
    logger.info(f"✅ Corrected datum for eps={eps} (order {target_order}, |h jets| <= {jet_constant:.3g} * eps)")
    return CorrectionResult(field_out, jets, reports, correction, jet_constant, continuum, corrected_datum)


def enforce_compat(datum, a, order: int, newton_tol: float = None):
    """Unregularized jet solve: returns the datum made compatible with P_1..P_order"""
    a = _check_unit(a)
    CompatOrder(order)
    left, right = datum.jet("left", 2 * order), datum.jet("right", 2 * order)
    zero_order = check_compat_jets(left, right, a, 0.0, 0)[0]
    if not zero_order.passed:
        raise ValidationError("datum does not match the boundary values a and e3")
    correction = BlendedCorrection(
        solve_boundary_jet(left, "left", 0.0, order, newton_tol),
        solve_boundary_jet(right, "right", 0.0, order, newton_tol),
    )
    return datum.with_correction(correction)
