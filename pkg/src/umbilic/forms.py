"""Pointwise classical invariants of an immersed surface.

Everything here is vectorized: a :class:`~umbilic.jets.JetVec3` whose
coefficients are arrays yields arrays of the same shape.

The unit normal is always ``(i_u x i_v) / |i_u x i_v|``.  Second-form
coefficients, the Weingarten matrix and the principal curvatures all change
sign with that choice; Gaussian curvature and the umbilicity defect do not.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .jets import Jet3, JetVec3, sqrt

ISOTHERMAL_TOL = 1e-8
REGULARITY_TOL = 1e-12


class RegularityError(ValueError):
    def __init__(self, message, index=None, point=None):
        self.index = index
        self.point = point
        if point is not None:
            message = f"{message} at (u, v) = ({point[0]:.17g}, {point[1]:.17g})"
        super().__init__(message)


class NotIsothermalError(ValueError):
    """An isothermal-only formula was applied to a non-isothermal input."""

    def __init__(self, residual):
        self.residual = residual
        super().__init__(
            f"isothermal residual {residual:.3e} exceeds gate {ISOTHERMAL_TOL:g}; "
            "coordinates are not isothermal"
        )


@dataclass(frozen=True, eq=False)
class FundamentalForms:
    """First and second fundamental forms as jets.

    ``first`` holds (g11, g12, g22) valid to order two, ``second`` holds
    (l11, l12, l22) valid to order one when built from an order-three
    immersion.  Plain values are exposed as properties.
    """

    first: tuple
    second: tuple
    normal: np.ndarray

    g11 = property(lambda self: self.first[0].f)
    g12 = property(lambda self: self.first[1].f)
    g22 = property(lambda self: self.first[2].f)
    l11 = property(lambda self: self.second[0].f)
    l12 = property(lambda self: self.second[1].f)
    l22 = property(lambda self: self.second[2].f)

    @property
    def g11_jet(self) -> Jet3:
        return self.first[0]

    def __getitem__(self, idx) -> "FundamentalForms":
        return FundamentalForms(tuple(j[idx] for j in self.first),
                                tuple(j[idx] for j in self.second),
                                self.normal[idx])


@dataclass(frozen=True)
class CurvatureData:
    lambda1: object
    lambda2: object
    mean: object
    gauss_extrinsic: object
    gauss_conformal: Optional[object]


@dataclass(frozen=True)
class Christoffels:
    """Connection coefficients ``gamma{k}_{ij}`` and the isothermal identity residual."""

    gamma1_11: object
    gamma1_12: object
    gamma1_22: object
    gamma2_11: object
    gamma2_12: object
    gamma2_22: object

    @property
    def identity_terms(self):
        return (
            np.abs(self.gamma1_11 - self.gamma2_12),
            np.abs(self.gamma1_11 + self.gamma1_22),
            np.abs(self.gamma2_22 - self.gamma1_12),
            np.abs(self.gamma2_22 + self.gamma2_11),
        )

    @property
    def identity_residual(self):
        a, b, c, d = self.identity_terms
        return a + b + c + d


def fundamental_forms(p: JetVec3, point=None) -> FundamentalForms:
    """Compute g_ij, l_ij and the unit normal from an immersion jet.

    Raises :class:`RegularityError` if ``|i_u x i_v| < 1e-12`` anywhere;
    ``point`` (or a grid of points ``(u, v)``) only decorates the message.
    """
    iu, iv = p.du(), p.dv()
    iuu, iuv, ivv = iu.du(), iu.dv(), iv.dv()
    cross = iu.cross(iv)
    norm_sq = cross.dot(cross)
    norm_val = np.sqrt(np.asarray(norm_sq.f))
    bad = norm_val < REGULARITY_TOL
    if np.any(bad):
        k = int(np.flatnonzero(bad.ravel())[0])
        where = None
        if point is not None:
            pu, pv = point
            where = (float(np.asarray(pu).ravel()[k]), float(np.asarray(pv).ravel()[k]))
        raise RegularityError("degenerate immersion: i_u x i_v vanishes", index=k, point=where)
    n = cross.scale(1.0 / sqrt(norm_sq))
    first = (iu.dot(iu), iu.dot(iv), iv.dot(iv))
    second = (iuu.dot(n), iuv.dot(n), ivv.dot(n))
    return FundamentalForms(first, second, n.values())


def flip_normal(f: FundamentalForms) -> FundamentalForms:
    return FundamentalForms(f.first, tuple(-j for j in f.second), -f.normal)


def isothermal_residual(f: FundamentalForms):
    """Scale-free departure from g11 = g22, g12 = 0."""
    return (np.abs(f.g11 - f.g22) + 2 * np.abs(f.g12)) / (f.g11 + f.g22)


def umbilic_defect(f: FundamentalForms):
    """``(l11 - l22)^2 + 4 l12^2``; zero exactly at umbilic points."""
    return (f.l11 - f.l22) ** 2 + 4 * f.l12 ** 2


def _require_isothermal(f: FundamentalForms):
    r = float(np.max(isothermal_residual(f)))
    if not r <= ISOTHERMAL_TOL:
        raise NotIsothermalError(r)


def weingarten(f: FundamentalForms) -> np.ndarray:
    """Weingarten matrix in isothermal coordinates, shape ``(..., 2, 2)``."""
    _require_isothermal(f)
    g = f.g11
    w = np.empty(np.shape(g) + (2, 2))
    w[..., 0, 0] = -f.l11 / g
    w[..., 0, 1] = -f.l12 / g
    w[..., 1, 0] = -f.l12 / g
    w[..., 1, 1] = -f.l22 / g
    return w


def conformal_gaussian_curvature(E: Jet3):
    """Gaussian curvature of E (du^2 + dv^2) from E and its first two derivatives."""
    return (E.grad_sq - E.f * E.laplacian) / (2 * E.f ** 3)


def principal_curvatures(f: FundamentalForms) -> CurvatureData:
    """Sorted roots of the characteristic polynomial of the Weingarten matrix.

    For the symmetric matrix ``-l/g11`` the discriminant is the umbilicity
    defect, so the roots are ``(-(l11 + l22) -+ sqrt(defect)) / (2 g11)``.
    """
    _require_isothermal(f)
    g = f.g11
    root = np.sqrt(umbilic_defect(f))
    trace = f.l11 + f.l22
    lam1 = (-trace - root) / (2 * g)
    lam2 = (-trace + root) / (2 * g)
    k_ext, k_conf = gaussian_curvature_two_ways(f)
    return CurvatureData(lam1, lam2, (lam1 + lam2) / 2, k_ext, k_conf)


def gaussian_curvature_two_ways(f: FundamentalForms):
    """Return ``(K_ext, K_conf)``.

    ``K_ext = det l / det g`` always; ``K_conf`` uses the conformal formula on
    E = g11 and is ``None`` when the input fails the isothermality gate.
    """
    k_ext = (f.l11 * f.l22 - f.l12 ** 2) / (f.g11 * f.g22 - f.g12 ** 2)
    if not float(np.max(isothermal_residual(f))) <= ISOTHERMAL_TOL:
        return k_ext, None
    return k_ext, conformal_gaussian_curvature(f.g11_jet)


def christoffels(E: Jet3) -> Christoffels:
    """Christoffel symbols of the conformal metric E (du^2 + dv^2)."""
    if np.any(np.asarray(E.f) <= 0):
        raise ValueError("conformal factor must be positive")
    a = E.fu / (2 * E.f)
    b = E.fv / (2 * E.f)
    return Christoffels(gamma1_11=a, gamma1_12=b, gamma1_22=-a,
                        gamma2_11=-b, gamma2_12=a, gamma2_22=b)


def christoffels_general(g11: Jet3, g12: Jet3, g22: Jet3) -> Christoffels:
    """Christoffel symbols of a general metric from its first derivatives."""
    det = g11.f * g22.f - g12.f ** 2
    if np.any(np.asarray(det) <= 0):
        raise ValueError("metric is not positive definite")
    inv = ((g22.f / det, -g12.f / det), (-g12.f / det, g11.f / det))
    g = ((g11, g12), (g12, g22))

    def d(l, i, j):
        jet = g[i][j]
        return jet.fu if l == 0 else jet.fv

    def gamma(k, i, j):
        return 0.5 * sum(inv[k][l] * (d(i, j, l) + d(j, i, l) - d(l, i, j)) for l in (0, 1))

    return Christoffels(
        gamma1_11=gamma(0, 0, 0), gamma1_12=gamma(0, 0, 1), gamma1_22=gamma(0, 1, 1),
        gamma2_11=gamma(1, 0, 0), gamma2_12=gamma(1, 0, 1), gamma2_22=gamma(1, 1, 1),
    )
