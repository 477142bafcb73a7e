"""Residual evaluators for the umbilic/harmonic no-go chain and its certifier.

Identities that hold exactly in the derivation are evaluated here as residual
fields on a grid; "vanishes identically" means ``linf <= tol``.

Normalizations that differ from the textbook form of an equation:

* the third umbilic residual is ``e^2/E^2 - |grad E|^2 / (2 E^3)``, i.e. the
  Gauss equation with ``l = e delta`` divided by ``E^2``, so all three reduced
  residuals share units;
* points with ``|grad E| <= 1e-9`` are excluded (NaN) from the constrained
  Hessian and from the normalized compatibility bracket.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import forms as _forms
from .jets import Jet3
from .surfaces import POSITIVITY_MARGIN, GridSample, GridSpec, SurfaceDef, sample

SYNTHETIC_TOL = 1e-9
IMMERSION_TOL = 1e-7
GRADIENT_FLOOR = 1e-9
GOLDEN_ITERATIONS = 200
SCAN_POINTS = 10_000

R6C_NORMALIZATION = "third reduced residual divided by E^2: e^2/E^2 - |grad E|^2/(2 E^3)"


class AlignmentError(ValueError):
    pass


class VanishingGradientError(ValueError):
    def __init__(self, point=None):
        self.point = point
        where = "" if point is None else f" at (u, v) = ({point[0]:.17g}, {point[1]:.17g})"
        super().__init__(f"|grad E|^2 <= 1e-18{where}; constrained Hessian undefined")


@dataclass(frozen=True, eq=False)
class JetField:
    """A jet-valued field on a grid (arrays of shape ``u.shape``)."""

    name: str
    u: np.ndarray
    v: np.ndarray
    jet: Jet3
    domain: Optional[tuple] = None

    @property
    def shape(self):
        return self.u.shape


class MetricField(JetField):
    """Conformal factor E on a grid; E is kept above the positivity margin."""

    def __init__(self, name, u, v, jet, domain=None):
        jet = jet.broadcast_to(np.shape(u))
        super().__init__(name, np.asarray(u), np.asarray(v), jet, domain)
        k = int(np.argmin(jet.f))
        if not jet.f.ravel()[k] > POSITIVITY_MARGIN:
            raise ValueError(
                f"E = {jet.f.ravel()[k]:.17g} at ({self.u.ravel()[k]:.17g}, {self.v.ravel()[k]:.17g}) "
                "is not strictly positive"
            )


@dataclass(frozen=True, eq=False)
class SecondFormField:
    u: np.ndarray
    v: np.ndarray
    l11: Jet3
    l12: Jet3
    l22: Jet3


@dataclass(frozen=True, eq=False)
class ResidualField:
    name: str
    values: np.ndarray
    u: np.ndarray
    v: np.ndarray
    linf: float
    l2: float
    argmax: Optional[tuple]
    excluded: int = 0

    @classmethod
    def from_values(cls, name, values, u, v) -> "ResidualField":
        values = np.broadcast_to(np.asarray(values, dtype=float), np.shape(u)).copy()
        finite = np.isfinite(values)
        excluded = int(values.size - finite.sum())
        if not finite.any():
            return cls(name, values, u, v, 0.0, 0.0, None, excluded)
        mag = np.where(finite, np.abs(values), -np.inf)
        k = int(np.argmax(mag))
        linf = float(mag.ravel()[k])
        l2 = float(np.sqrt(np.mean(values[finite] ** 2)))
        return cls(name, values, u, v, linf, l2,
                   (float(u.ravel()[k]), float(v.ravel()[k])), excluded)

    def summary(self) -> dict:
        return {"linf": self.linf, "l2": self.l2,
                "argmax": None if self.argmax is None else list(self.argmax)}

    def at(self, u0, v0) -> float:
        """Value at the grid node nearest to (u0, v0)."""
        k = int(np.argmin((self.u - u0) ** 2 + (self.v - v0) ** 2))
        return float(self.values.ravel()[k])


@dataclass(frozen=True)
class Verdict:
    outcome: str  # flat_consistent | no_go | hypothesis_violated
    violated: Optional[str]  # harmonicity | positivity | eq8 | compatibility
    margin: float
    witness: Optional[tuple]
    best_c: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "violated": self.violated,
            "margin": self.margin,
            "witness": None if self.witness is None else list(self.witness),
            "best_c": self.best_c,
        }


def _jet(x) -> Jet3:
    return x.jet if isinstance(x, JetField) else x


def _check_aligned(a, b):
    if np.shape(a.u) != np.shape(b.u):
        raise AlignmentError(f"grid shapes differ: {np.shape(a.u)} vs {np.shape(b.u)}")
    if not (np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)):
        raise AlignmentError("grids have the same shape but different nodes")


def metric_field(source: GridSample) -> MetricField:
    """Conformal factor of a sample: E itself, or g11 of an immersion."""
    if source.metric is not None:
        jet = source.metric
    else:
        jet = _forms.fundamental_forms(source.position, point=(source.u, source.v)).g11_jet
    return MetricField(source.surface.name, source.u, source.v, jet, source.surface.domain)


def second_form_field(source: GridSample) -> SecondFormField:
    f = _forms.fundamental_forms(source.position, point=(source.u, source.v))
    return SecondFormField(source.u, source.v, *f.second)


def umbilic_second_form(E: MetricField, c: float) -> SecondFormField:
    """The umbilic second form ``l = c E delta`` on E's grid."""
    e = E.jet * float(c)
    zero = Jet3.constant(np.zeros(E.shape)).broadcast_to(E.shape)
    return SecondFormField(E.u, E.v, e, zero, e)


def codazzi_residuals(E: MetricField, L: SecondFormField):
    """The two Codazzi-Mainardi residuals for an isothermal metric."""
    _check_aligned(E, L)
    g = E.jet
    trace = L.l11.f + L.l22.f
    r5a = L.l22.fu - L.l12.fv - g.fu / (2 * g.f) * trace
    r5b = L.l11.fv - L.l12.fu - g.fv / (2 * g.f) * trace
    return (ResidualField.from_values("r5a", r5a, E.u, E.v),
            ResidualField.from_values("r5b", r5b, E.u, E.v))


def gauss_residual_reduced(E: MetricField, L: SecondFormField) -> ResidualField:
    """``det l - |grad E|^2 / (2E)``.

    This is Gauss's equation only when E is harmonic; it is evaluated verbatim
    regardless and must be read together with the harmonicity residual.
    """
    _check_aligned(E, L)
    g = E.jet
    r = L.l11.f * L.l22.f - L.l12.f ** 2 - g.grad_sq / (2 * g.f)
    return ResidualField.from_values("r5c", r, E.u, E.v)


def reduced_umbilic_residuals(E: MetricField, e):
    """Residuals of the system obtained by putting ``l = e delta``."""
    g, ej = E.jet, _jet(e)
    if isinstance(e, JetField):
        _check_aligned(E, e)
    r6a = ej.fu - g.fu / g.f * ej.f
    r6b = ej.fv - g.fv / g.f * ej.f
    r6c = ej.f ** 2 / g.f ** 2 - g.grad_sq / (2 * g.f ** 3)
    return tuple(ResidualField.from_values(n, r, E.u, E.v)
                 for n, r in (("r6a", r6a), ("r6b", r6b), ("r6c", r6c)))


def fit_c(E: MetricField, l11):
    """Least-squares constant c with ``l11 ~ c E``; returns (c, residual field)."""
    Ev = np.asarray(E.jet.f, dtype=float)
    lv = np.broadcast_to(np.asarray(_jet(l11).f if not isinstance(l11, np.ndarray) else l11,
                                    dtype=float), Ev.shape)
    c = float(np.sum(lv * Ev) / np.sum(Ev * Ev))
    return c, ResidualField.from_values("l11 - cE", lv - c * Ev, E.u, E.v)


def r8_residual(E: MetricField, c: float) -> ResidualField:
    """``2 c^2 E^3 - |grad E|^2``."""
    g = E.jet
    return ResidualField.from_values("r8", 2 * c * c * g.f ** 3 - g.grad_sq, E.u, E.v)


def constrained_hessian(E_value, grad, c):
    """The Hessian forced by differentiating ``2c^2E^3 = |grad E|^2`` plus harmonicity.

    Returns ``(Huu, Huv, Hvv)`` with ``Hvv = -Huu``.  Scalar inputs raise
    :class:`VanishingGradientError` when ``|grad|^2 <= 1e-18``; array inputs
    give NaN at such points instead.
    """
    gu, gv = grad
    gsq = np.asarray(gu) ** 2 + np.asarray(gv) ** 2
    if np.ndim(gsq) == 0:
        if not gsq > 1e-18:
            raise VanishingGradientError()
    else:
        gsq = np.where(gsq > 1e-18, gsq, np.nan)
    k = c * c * np.asarray(E_value) ** 2
    huu = 3 * k * (gu * gu - gv * gv) / gsq
    huv = 6 * k * gu * gv / gsq
    return huu, huv, -huu


def hessian_mismatch(E: MetricField, c: float) -> ResidualField:
    """Largest entrywise gap between the true and the constrained Hessian."""
    g = E.jet
    small = np.sqrt(g.grad_sq) <= GRADIENT_FLOOR
    gu = np.where(small, np.nan, g.fu)
    huu, huv, hvv = constrained_hessian(g.f, (gu, g.fv), c)
    gap = np.maximum(np.maximum(np.abs(g.fuu - huu), np.abs(g.fuv - huv)), np.abs(g.fvv - hvv))
    return ResidualField.from_values("hessian_mismatch", gap, E.u, E.v)


def compatibility_bracket(E: MetricField, c: float):
    g = E.jet
    return 3 * c * c * g.f ** 3 - g.grad_sq


def compatibility_residuals(E: MetricField, c: float):
    """``(r10, r11) = (E E_v B, E E_u B)`` with bracket ``B = 3c^2E^3 - |grad E|^2``."""
    g = E.jet
    b = compatibility_bracket(E, c)
    return (ResidualField.from_values("r10", g.f * g.fv * b, E.u, E.v),
            ResidualField.from_values("r11", g.f * g.fu * b, E.u, E.v))


def harmonicity_residual(E: MetricField) -> ResidualField:
    return ResidualField.from_values("laplacian_E", E.jet.laplacian, E.u, E.v)


def curvature_sign_census(E: MetricField, tol: float = SYNTHETIC_TOL, k_tol: float = 1e-10):
    """Gaussian curvature of the conformal metric and a sign census.

    The summary's ``contract_ok`` is false only if E is harmonic to ``tol``
    and some curvature falls below ``-k_tol``.
    """
    K = _forms.conformal_gaussian_curvature(E.jet)
    field_ = ResidualField.from_values("gauss_curvature", K, E.u, E.v)
    harmonic = harmonicity_residual(E).linf <= tol
    summary = {
        "negative": int(np.sum(K < -k_tol)),
        "zero": int(np.sum(np.abs(K) <= k_tol)),
        "positive": int(np.sum(K > k_tol)),
        "k_min": float(np.min(K)),
        "k_max": float(np.max(K)),
        "harmonic": bool(harmonic),
        "contract_ok": bool(not harmonic or np.min(K) >= -k_tol),
    }
    return field_, summary


def _golden_min(fun, lo, hi, iterations=GOLDEN_ITERATIONS):
    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = fun(x1), fun(x2)
    for _ in range(iterations):
        if b - a <= 1e-16 * max(1.0, abs(b)):
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = fun(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = fun(x2)
    cands = [(fun(a), a), (f1, x1), (f2, x2), (fun(b), b)]
    return min(cands)[::-1]


def minimax_c_squared(E: MetricField):
    """Minimize ``max_p |2 s E_p^3 - |grad E_p|^2|`` over ``s = c^2 >= 0``.

    The objective is convex in s (a max of absolute affine functions), so a
    golden-section search is exact up to bracketing resolution.  Returns
    ``(s_star, value, scan_value)`` where ``scan_value`` is the best of a
    uniform 10^4-point scan over the same bracket.
    """
    g = E.jet
    e3 = (g.f ** 3).ravel()
    gsq = g.grad_sq.ravel()
    c_max = math.sqrt(float(np.max(gsq)) / (2 * float(np.min(e3)))) + 1.0
    hi = c_max * c_max

    def phi(s):
        return float(np.max(np.abs(2 * s * e3 - gsq)))

    s_star, value = _golden_min(phi, 0.0, hi)
    grid = np.linspace(0.0, hi, SCAN_POINTS)
    scan = np.max(np.abs(2 * grid[:, None] * e3[None, :] - gsq[None, :]), axis=1)
    return s_star, value, float(np.min(scan))


def certify_no_go(E: MetricField, tol: float = SYNTHETIC_TOL) -> Verdict:
    """Decide which hypothesis or constraint defeats the candidate metric E.

    1. ``linf(Laplacian E) > tol`` -> hypothesis_violated(harmonicity).
    2. ``min E`` below the positivity margin -> hypothesis_violated(positivity).
    3. ``max |grad E| <= tol`` -> flat_consistent with c = 0.
    4. Otherwise the minimax over c of ``linf(2c^2E^3 - |grad E|^2)`` is the
       no-go margin (eq8).  If that is within tol, the normalized
       compatibility bracket ``|3c^2E^3 - |grad E|^2| / (3c^2E^3 + |grad E|^2)``
       at the best c must fail instead (compatibility).
    """
    g = E.jet
    lap = harmonicity_residual(E)
    if lap.linf > tol:
        return Verdict("hypothesis_violated", "harmonicity", lap.linf, lap.argmax, 0.0,
                       {"laplacian_linf": lap.linf})
    k = int(np.argmin(g.f))
    min_e = float(g.f.ravel()[k])
    if min_e < POSITIVITY_MARGIN:
        return Verdict("hypothesis_violated", "positivity", POSITIVITY_MARGIN - min_e,
                       (float(E.u.ravel()[k]), float(E.v.ravel()[k])), 0.0, {"min_E": min_e})
    grad_norm = np.sqrt(g.grad_sq)
    if float(np.max(grad_norm)) <= tol:
        return Verdict("flat_consistent", None, 0.0, None, 0.0,
                       {"grad_linf": float(np.max(grad_norm))})

    s_star, m8, scan = minimax_c_squared(E)
    c_star = math.sqrt(s_star)
    r8 = r8_residual(E, c_star)
    excluded = grad_norm <= GRADIENT_FLOOR
    bracket = compatibility_bracket(E, c_star)
    norm = 3 * c_star ** 2 * g.f ** 3 + g.grad_sq
    nb = np.where(excluded, np.nan, np.abs(bracket) / np.where(norm > 0, norm, 1.0))
    compat = ResidualField.from_values("compatibility_bracket", nb, E.u, E.v)
    details = {
        "r8_minimax": m8,
        "c_squared": s_star,
        "scan_minimax": scan,
        "compatibility_margin": compat.linf,
        "compatibility_witness": compat.argmax,
        "excluded_points": int(excluded.sum()),
        "normalization": R6C_NORMALIZATION,
    }
    if m8 > tol:
        return Verdict("no_go", "eq8", m8, r8.argmax, c_star, details)
    if compat.linf > tol:
        return Verdict("no_go", "compatibility", compat.linf, compat.argmax, c_star, details)
    forced = c_star ** 2 * float(np.max(g.f ** 3))
    if forced <= tol:
        return Verdict("flat_consistent", None, 0.0, None, 0.0, details)
    return Verdict("no_go", "compatibility", forced, compat.argmax, c_star, details)


def certify_residuals(E: MetricField, c: float) -> dict:
    """The residual table reported alongside a verdict."""
    r10, r11 = compatibility_residuals(E, c)
    fields = [r8_residual(E, c), r10, r11, harmonicity_residual(E), hessian_mismatch(E, c)]
    return {f.name: f for f in fields}


def flatness_forced(E: MetricField, c: float, tol: float) -> bool:
    """Pointwise: r8 = r10 = r11 = 0 with |grad E| > tol forces c^2 E^3 to be small.

    Since ``B - r8 = c^2 E^3`` and ``|B| <= tol / (E max(|E_u|, |E_v|))`` under
    the premise, the bound checked is ``c^2 E^3 <= tol + tol / (E max|E_*|)``.
    """
    g = E.jet
    r8 = r8_residual(E, c).values
    r10, r11 = compatibility_residuals(E, c)
    premise = ((np.abs(r8) <= tol) & (np.abs(r10.values) <= tol) & (np.abs(r11.values) <= tol)
               & (np.sqrt(g.grad_sq) > tol))
    big = np.maximum(np.abs(g.fu), np.abs(g.fv))[premise]
    forced = c * c * g.f[premise] ** 3
    return bool(np.all(forced <= tol + tol / (g.f[premise] * big)))


def metric_from_surface(surface: SurfaceDef, grid: GridSpec = GridSpec()) -> MetricField:
    return metric_field(sample(surface, grid))
