"""Third-order forward-mode jets in two variables (u, v).

A :class:`Jet3` carries a value together with every partial derivative
through order three.  Coefficients may be Python floats or numpy arrays of a
common shape, so a whole grid can be pushed through an expression in one pass.

Derivatives of a jet (:meth:`Jet3.du`, :meth:`Jet3.dv`) lose one order of
validity; the ``order`` field tracks how many orders are trustworthy and
coefficients above it are held at zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

Scalar = Union[float, np.ndarray]

COEFFICIENT_NAMES = (
    "f", "fu", "fv", "fuu", "fuv", "fvv", "fuuu", "fuuv", "fuvv", "fvvv",
)
_ORDER_OF = dict(zip(COEFFICIENT_NAMES, (0, 1, 1, 2, 2, 2, 3, 3, 3, 3)))


class DomainError(ValueError):
    """An elementary operation was applied outside its domain.

    ``index`` is the flat index of the first offending entry when the jet is
    array valued; ``point`` is filled in by callers that know the (u, v)
    coordinates.
    """

    def __init__(self, message, index=None, point=None):
        self.message = message
        self.index = index
        self.point = point
        super().__init__(self._render())

    def _render(self):
        if self.point is not None:
            return f"{self.message} at (u, v) = ({self.point[0]:.17g}, {self.point[1]:.17g})"
        return self.message

    def with_point(self, point):
        return DomainError(self.message, index=self.index, point=point)


def _first_bad(mask) -> int | None:
    mask = np.asarray(mask)
    if not mask.any():
        return None
    return int(np.flatnonzero(mask.ravel())[0])


@dataclass(frozen=True, eq=False)
class Jet3:
    f: Scalar = 0.0
    fu: Scalar = 0.0
    fv: Scalar = 0.0
    fuu: Scalar = 0.0
    fuv: Scalar = 0.0
    fvv: Scalar = 0.0
    fuuu: Scalar = 0.0
    fuuv: Scalar = 0.0
    fuvv: Scalar = 0.0
    fvvv: Scalar = 0.0
    order: int = 3

    @classmethod
    def constant(cls, value: Scalar) -> "Jet3":
        return cls(f=value)

    @classmethod
    def from_coefficients(cls, coeffs, order: int = 3) -> "Jet3":
        coeffs = list(coeffs)
        for k, name in enumerate(COEFFICIENT_NAMES):
            if _ORDER_OF[name] > order:
                coeffs[k] = 0.0 * coeffs[k]
        return cls(*coeffs, order=order)

    def coefficients(self) -> np.ndarray:
        """Stack the ten coefficients along a new leading axis."""
        return np.array(np.broadcast_arrays(*(getattr(self, n) for n in COEFFICIENT_NAMES)),
                        dtype=float)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.coefficients())))

    def broadcast_to(self, shape) -> "Jet3":
        return Jet3(*(np.broadcast_to(np.asarray(getattr(self, n), dtype=float), shape).copy()
                      for n in COEFFICIENT_NAMES), order=self.order)

    def __getitem__(self, idx) -> "Jet3":
        return Jet3(*(np.asarray(getattr(self, n))[idx] for n in COEFFICIENT_NAMES),
                    order=self.order)

    @property
    def grad(self):
        return self.fu, self.fv

    @property
    def grad_sq(self) -> Scalar:
        return self.fu * self.fu + self.fv * self.fv

    @property
    def laplacian(self) -> Scalar:
        return self.fuu + self.fvv

    def du(self) -> "Jet3":
        """Partial derivative in u, valid to one order less."""
        if self.order < 1:
            raise ValueError("cannot differentiate an order-0 jet")
        return Jet3.from_coefficients(
            (self.fu, self.fuu, self.fuv, self.fuuu, self.fuuv, self.fuvv, 0.0, 0.0, 0.0, 0.0),
            order=self.order - 1,
        )

    def dv(self) -> "Jet3":
        if self.order < 1:
            raise ValueError("cannot differentiate an order-0 jet")
        return Jet3.from_coefficients(
            (self.fv, self.fuv, self.fvv, self.fuuv, self.fuvv, self.fvvv, 0.0, 0.0, 0.0, 0.0),
            order=self.order - 1,
        )

    def __neg__(self):
        return Jet3.from_coefficients((-c for c in self._coeffs()), self.order)

    def __add__(self, other):
        return combine("add", self, other)

    def __radd__(self, other):
        return combine("add", other, self)

    def __sub__(self, other):
        return combine("sub", self, other)

    def __rsub__(self, other):
        return combine("sub", other, self)

    def __mul__(self, other):
        return combine("mul", self, other)

    def __rmul__(self, other):
        return combine("mul", other, self)

    def __truediv__(self, other):
        return combine("div", self, other)

    def __rtruediv__(self, other):
        return combine("div", other, self)

    def __pow__(self, n):
        return combine("int_pow", self, n)

    def _coeffs(self):
        return tuple(getattr(self, n) for n in COEFFICIENT_NAMES)

    def __repr__(self):
        body = ", ".join(f"{n}={getattr(self, n)!r}" for n in COEFFICIENT_NAMES)
        return f"Jet3({body}, order={self.order})"


@dataclass(frozen=True, eq=False)
class JetVec3:
    """A point of 3-space with full derivative data in (u, v)."""

    x: Jet3
    y: Jet3
    z: Jet3

    def du(self) -> "JetVec3":
        return JetVec3(self.x.du(), self.y.du(), self.z.du())

    def dv(self) -> "JetVec3":
        return JetVec3(self.x.dv(), self.y.dv(), self.z.dv())

    def dot(self, other: "JetVec3") -> Jet3:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def cross(self, other: "JetVec3") -> "JetVec3":
        return JetVec3(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )

    def scale(self, s: Jet3) -> "JetVec3":
        return JetVec3(self.x * s, self.y * s, self.z * s)

    def values(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(self.x.f, self.y.f, self.z.f), axis=-1)

    def __getitem__(self, idx) -> "JetVec3":
        return JetVec3(self.x[idx], self.y[idx], self.z[idx])


def seed_coordinates(u0: Scalar, v0: Scalar) -> tuple[Jet3, Jet3]:
    """Return the coordinate jets u and v at (u0, v0)."""
    one = np.ones_like(u0, dtype=float) if np.ndim(u0) else 1.0
    one_v = np.ones_like(v0, dtype=float) if np.ndim(v0) else 1.0
    return Jet3(f=u0, fu=one), Jet3(f=v0, fv=one_v)


def _as_jet(x) -> Jet3:
    if isinstance(x, Jet3):
        return x
    return Jet3.constant(x)


def _mul(a: Jet3, b: Jet3) -> Jet3:
    # Leibniz rule through order three
    return Jet3(
        f=a.f * b.f,
        fu=a.fu * b.f + a.f * b.fu,
        fv=a.fv * b.f + a.f * b.fv,
        fuu=a.fuu * b.f + 2 * a.fu * b.fu + a.f * b.fuu,
        fuv=a.fuv * b.f + a.fu * b.fv + a.fv * b.fu + a.f * b.fuv,
        fvv=a.fvv * b.f + 2 * a.fv * b.fv + a.f * b.fvv,
        fuuu=a.fuuu * b.f + 3 * a.fuu * b.fu + 3 * a.fu * b.fuu + a.f * b.fuuu,
        fuuv=(a.fuuv * b.f + a.fuu * b.fv + 2 * a.fuv * b.fu
              + 2 * a.fu * b.fuv + a.fv * b.fuu + a.f * b.fuuv),
        fuvv=(a.fuvv * b.f + a.fvv * b.fu + 2 * a.fuv * b.fv
              + 2 * a.fv * b.fuv + a.fu * b.fvv + a.f * b.fuvv),
        fvvv=a.fvvv * b.f + 3 * a.fvv * b.fv + 3 * a.fv * b.fvv + a.f * b.fvvv,
        order=min(a.order, b.order),
    )


def compose(a: Jet3, d0, d1, d2, d3) -> Jet3:
    """Chain a univariate function with derivatives d0..d3 at ``a.f`` onto ``a``.

    This is Faa di Bruno's formula truncated at order three.
    """
    ux, vx = a.fu, a.fv
    return Jet3(
        f=d0,
        fu=d1 * ux,
        fv=d1 * vx,
        fuu=d2 * ux * ux + d1 * a.fuu,
        fuv=d2 * ux * vx + d1 * a.fuv,
        fvv=d2 * vx * vx + d1 * a.fvv,
        fuuu=d3 * ux ** 3 + 3 * d2 * ux * a.fuu + d1 * a.fuuu,
        fuuv=d3 * ux * ux * vx + d2 * (2 * ux * a.fuv + vx * a.fuu) + d1 * a.fuuv,
        fuvv=d3 * ux * vx * vx + d2 * (2 * vx * a.fuv + ux * a.fvv) + d1 * a.fuvv,
        fvvv=d3 * vx ** 3 + 3 * d2 * vx * a.fvv + d1 * a.fvvv,
        order=a.order,
    )


def _reciprocal(b: Jet3) -> Jet3:
    bad = _first_bad(np.asarray(b.f) == 0)
    if bad is not None:
        raise DomainError("division by a jet with zero value", index=bad)
    x = b.f
    r = 1.0 / x
    return compose(b, r, -r * r, 2 * r ** 3, -6 * r ** 4)


def _int_pow(a: Jet3, n: int) -> Jet3:
    if isinstance(n, bool) or int(n) != n:
        raise TypeError(f"int_pow needs an integer exponent, got {n!r}")
    n = int(n)
    if n == 0:
        return Jet3.constant(np.ones_like(a.f, dtype=float) if np.ndim(a.f) else 1.0)
    if n < 0:
        return _reciprocal(_int_pow(a, -n))
    x = a.f
    ds = []
    falling = 1.0
    for k in range(4):
        ds.append(falling * x ** (n - k) if k <= n else 0.0 * x)
        falling *= n - k
    return compose(a, *ds)


def combine(op: str, a, b) -> Jet3:
    """Binary jet arithmetic: ``add``, ``sub``, ``mul``, ``div`` or ``int_pow``.

    ``a`` and ``b`` may be jets or plain numbers (promoted to constants); for
    ``int_pow`` ``b`` must be an integer.
    """
    if op == "int_pow":
        return _int_pow(_as_jet(a), b)
    a, b = _as_jet(a), _as_jet(b)
    if op == "add":
        return Jet3(*(x + y for x, y in zip(a._coeffs(), b._coeffs())),
                    order=min(a.order, b.order))
    if op == "sub":
        return Jet3(*(x - y for x, y in zip(a._coeffs(), b._coeffs())),
                    order=min(a.order, b.order))
    if op == "mul":
        return _mul(a, b)
    if op == "div":
        return _mul(a, _reciprocal(b))
    raise ValueError(f"unknown jet operation {op!r}")


def _require_positive(a: Jet3, name: str):
    bad = _first_bad(~(np.asarray(a.f) > 0))
    if bad is not None:
        raise DomainError(f"{name} of a nonpositive value", index=bad)


def elementary(func: str, a: Jet3) -> Jet3:
    """Apply sin, cos, sinh, cosh, exp, ln or sqrt to a jet."""
    x = a.f
    if func == "sin":
        s, c = np.sin(x), np.cos(x)
        return compose(a, s, c, -s, -c)
    if func == "cos":
        s, c = np.sin(x), np.cos(x)
        return compose(a, c, -s, -c, s)
    if func == "sinh":
        s, c = np.sinh(x), np.cosh(x)
        return compose(a, s, c, s, c)
    if func == "cosh":
        s, c = np.sinh(x), np.cosh(x)
        return compose(a, c, s, c, s)
    if func == "exp":
        e = np.exp(x)
        return compose(a, e, e, e, e)
    if func == "ln":
        _require_positive(a, "ln")
        r = 1.0 / x
        return compose(a, np.log(x), r, -r * r, 2 * r ** 3)
    if func == "sqrt":
        _require_positive(a, "sqrt")
        s = np.sqrt(x)
        return compose(a, s, 0.5 / s, -0.25 / s ** 3, 0.375 / s ** 5)
    raise ValueError(f"unknown elementary function {func!r}")


def sin(a): return elementary("sin", a)
def cos(a): return elementary("cos", a)
def sinh(a): return elementary("sinh", a)
def cosh(a): return elementary("cosh", a)
def exp(a): return elementary("exp", a)
def ln(a): return elementary("ln", a)
def sqrt(a): return elementary("sqrt", a)


def finite_difference_oracle(field: Callable, point, h: float = 1e-3) -> Jet3:
    """Central-difference estimate of every partial through order three.

    ``field(u, v)`` must accept floats (or arrays, in which case ``point`` may
    hold arrays too).  All formulas have truncation error O(h**2); the
    stencil reaches at most two steps out along each axis.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    u0, v0 = point

    def F(i, j):
        return field(u0 + i * h, v0 + j * h)

    f00 = F(0, 0)
    fp0, fm0 = F(1, 0), F(-1, 0)
    f0p, f0m = F(0, 1), F(0, -1)
    fpp, fpm, fmp, fmm = F(1, 1), F(1, -1), F(-1, 1), F(-1, -1)
    f20, fm20 = F(2, 0), F(-2, 0)
    f02, f0m2 = F(0, 2), F(0, -2)
    h2, h3 = h * h, h ** 3
    return Jet3(
        f=f00,
        fu=(fp0 - fm0) / (2 * h),
        fv=(f0p - f0m) / (2 * h),
        fuu=(fp0 - 2 * f00 + fm0) / h2,
        fuv=(fpp - fpm - fmp + fmm) / (4 * h2),
        fvv=(f0p - 2 * f00 + f0m) / h2,
        fuuu=(f20 - 2 * fp0 + 2 * fm0 - fm20) / (2 * h3),
        fuuv=((fpp - 2 * f0p + fmp) - (fpm - 2 * f0m + fmm)) / (2 * h3),
        fuvv=((fpp - 2 * fp0 + fpm) - (fmp - 2 * fm0 + fmm)) / (2 * h3),
        fvvv=(f02 - 2 * f0p + 2 * f0m - f0m2) / (2 * h3),
    )
