"""
Truncated Taylor expansions of fields at a boundary point.

A Jet stores normalized Taylor coefficients c_k (f(s0 + r) = sum_k c_k r^k)
up to a finite order, for a 3-vector field (coefficients shape (N+1, 3)) or a
scalar field (shape (N+1,)). Arithmetic mirrors VecField, so the compatibility
recursions evaluate unchanged on either representation.
"""

from dataclasses import dataclass
from math import factorial
from typing import List, Sequence, Union

import numpy as np
import sympy

from .errors import ValidationError
from .grid import MAX_DERIVATIVE, VecField

SIDES = ("left", "right")


def side_point(side: str) -> float:
    if side not in SIDES:
        raise ValidationError(f"side must be one of {SIDES}, got '{side}'")
    return 0.0 if side == "left" else 1.0


def _factorials(n: int) -> np.ndarray:
    return np.array([float(factorial(k)) for k in range(n)])


@dataclass(frozen=True, eq=False)
class Jet:
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.ndim not in (1, 2) or (c.ndim == 2 and c.shape[1] != 3) or len(c) == 0:
            raise ValidationError(f"jet coefficients must have shape (N+1,) or (N+1, 3), got {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_vector(self) -> bool:
        return self.coeffs.ndim == 2

    @property
    def value(self) -> np.ndarray:
        return self.coeffs[0]

    # Construction

    @classmethod
    def from_derivatives(cls, derivs) -> "Jet":
        derivs = np.asarray(derivs)
        fact = _factorials(len(derivs))
        if derivs.ndim == 2:
            fact = fact[:, None]
        return cls(derivs / fact)

    @classmethod
    def from_expression(cls, expr: Sequence, symbol: sympy.Symbol, side: str, order: int) -> "Jet":
        """Exact jet of a closed-form vector field given as three sympy expressions"""
        s0 = side_point(side)
        comps = [sympy.sympify(e) for e in expr]
        derivs = np.zeros((order + 1, 3))
        for j, comp in enumerate(comps):
            current = comp
            for k in range(order + 1):
                derivs[k, j] = float(current.subs(symbol, s0).evalf())
                current = sympy.diff(current, symbol)
        return cls.from_derivatives(derivs)

    @classmethod
    def from_grid(cls, f: VecField, side: str, order: int) -> "Jet":
        """Jet from one-sided boundary stencils (see GridSpec.boundary_derivatives)"""
        if order > MAX_DERIVATIVE:
            raise ValidationError(
                f"grid data supports boundary jets up to order {MAX_DERIVATIVE} "
                f"(compatibility order {MAX_DERIVATIVE // 2}), requested {order}; "
                f"higher orders need a closed-form datum"
            )
        right = side_point(side) == 1.0
        return cls.from_derivatives(f.grid.boundary_derivatives(f.data, right, order))

    @classmethod
    def zeros(cls, order: int, vector: bool = True) -> "Jet":
        return cls(np.zeros((order + 1, 3)) if vector else np.zeros(order + 1))

    def derivatives(self) -> np.ndarray:
        fact = _factorials(len(self.coeffs))
        return self.coeffs * (fact[:, None] if self.is_vector else fact)

    # Arithmetic

    def truncate(self, order: int) -> "Jet":
        if order < 0:
            raise ValidationError("jet order exhausted")
        return Jet(self.coeffs[: order + 1])

    def _pair(self, other: "Jet"):
        n = min(self.order, other.order)
        return self.coeffs[: n + 1], other.coeffs[: n + 1], n

    def __add__(self, other: "Jet") -> "Jet":
        a, b, _ = self._pair(other)
        return Jet(a + b)

    def __sub__(self, other: "Jet") -> "Jet":
        a, b, _ = self._pair(other)
        return Jet(a - b)

    def __mul__(self, scalar: float) -> "Jet":
        return Jet(self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "Jet":
        return Jet(-self.coeffs)

    def d(self, k: int = 1) -> "Jet":
        """k-th derivative; drops k orders"""
        if k > self.order:
            raise ValidationError(f"cannot differentiate a jet of order {self.order} {k} times")
        n = self.order
        idx = np.arange(k, n + 1)
        factor = np.array([float(np.prod(np.arange(j - k + 1, j + 1))) for j in idx])
        c = self.coeffs[k:]
        return Jet(c * (factor[:, None] if self.is_vector else factor))

    def cross(self, other: "Jet") -> "Jet":
        a, b, n = self._pair(other)
        out = np.stack([np.cross(a[: k + 1], b[k::-1]).sum(axis=0) for k in range(n + 1)])
        return Jet(out)

    def dot(self, other: "Jet") -> "Jet":
        a, b, n = self._pair(other)
        return Jet(np.array([np.sum(a[: k + 1] * b[k::-1]) for k in range(n + 1)]))

    def scale(self, scalar: "Jet") -> "Jet":
        """Product of this vector jet with a scalar jet"""
        a, w, n = self._pair(scalar)
        return Jet(np.stack([(w[k::-1, None] * a[: k + 1]).sum(axis=0) for k in range(n + 1)]))

    def power(self, alpha: float) -> "Jet":
        """Scalar jet raised to a real power (requires a nonzero value)"""
        f = self.coeffs
        if f[0] == 0:
            raise ValidationError("power of a jet with zero value")
        g = np.zeros_like(f, dtype=np.result_type(f, float))
        g[0] = f[0] ** alpha
        for k in range(1, len(f)):
            j = np.arange(1, k + 1)
            g[k] = np.sum(((alpha + 1) * j - k) * f[j] * g[k - j]) / (k * f[0])
        return Jet(g)

    def normalized(self) -> "Jet":
        return self.scale(self.dot(self).power(-0.5))


@dataclass(frozen=True)
class BoundaryJet:
    """Derivative values d^j h / ds^j at one end, j = 0..2m"""

    side: str
    coefficients: List[List[float]]

    def __post_init__(self):
        side_point(self.side)
        coeffs = np.asarray(self.coefficients, dtype=float).reshape(-1, 3)
        if np.any(coeffs[0] != 0.0):
            raise ValidationError("boundary jet must vanish at the boundary (coefficient 0)")
        if np.any(coeffs[1::2] != 0.0):
            raise ValidationError("odd boundary-jet coefficients must be zero")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.coefficients, dtype=float).reshape(-1, 3)

    @property
    def max_magnitude(self) -> float:
        return float(np.max(np.linalg.norm(self.array, axis=1)))

    def as_jet(self, order: int) -> Jet:
        derivs = np.zeros((order + 1, 3))
        n = min(order + 1, len(self.array))
        derivs[:n] = self.array[:n]
        return Jet.from_derivatives(derivs)

    def to_dict(self) -> dict:
        return {"side": self.side, "coefficients": self.array.tolist()}


FieldLike = Union[VecField, Jet]
