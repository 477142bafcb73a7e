"""Geodesic flow of conformal metrics E (du^2 + dv^2).

Trajectories are integrated with classical fixed-step RK4.  Two conserved
quantities serve as accuracy oracles: the kinetic energy ``E |velocity|^2``,
and for separable factors ``E = f(u) + g(v)`` the Liouville quadratic
integral ``(f + g)(g du^2 - f dv^2)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exprlang import Expr, eval_jet, evaluate
from .forms import christoffels, fundamental_forms
from .jets import Jet3, JetVec3
from .surfaces import DEFAULT_DOMAIN, SurfaceDef


BOUNDARY_SLACK = 1e-12


class OutsideDomainError(ValueError):
    pass


@dataclass(frozen=True)
class GeodesicState:
    u: float
    v: float
    du: float
    dv: float

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.du, self.dv], dtype=float)

    @classmethod
    def from_array(cls, a) -> "GeodesicState":
        return cls(*(float(x) for x in a))


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (n, 4): u, v, du, dv
    h: float
    metric_name: str
    exited: bool = False
    energies: Optional[np.ndarray] = None
    first_integrals: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> GeodesicState:
        return GeodesicState.from_array(self.states[-1])


class ConformalMetric:
    """Callable giving the jet of E at a point, with a rectangular domain.

    Build one from an expression (``from_expr``) or from any
    :class:`~umbilic.surfaces.SurfaceDef`; for immersions E is g11.
    """

    def __init__(self, jet_at: Callable[[float, float], Jet3], domain, name="metric",
                 value_at: Optional[Callable] = None):
        self.jet_at = jet_at
        self.domain = tuple(domain)
        self.name = name
        self._value_at = value_at

    @classmethod
    def from_expr(cls, ast: Expr, domain=DEFAULT_DOMAIN, name="metric") -> "ConformalMetric":
        return cls(lambda u, v: eval_jet(ast, u, v), domain, name,
                   value_at=lambda u, v: float(evaluate(ast, u, v)))

    @classmethod
    def from_surface(cls, surface: SurfaceDef, domain=None) -> "ConformalMetric":
        domain = surface.domain if domain is None else domain
        if surface.kind == "metric_only":
            return cls.from_expr(surface.exprs[0], domain, surface.name)

        def jet_at(u, v):
            p = JetVec3(*(eval_jet(e, u, v) for e in surface.exprs))
            return fundamental_forms(p).g11_jet

        return cls(jet_at, domain, surface.name)

    def contains(self, u, v) -> bool:
        u0, u1, v0, v1 = self.domain
        # rounding slack so a step landing exactly on the boundary is kept
        su = BOUNDARY_SLACK * max(1.0, u1 - u0)
        sv = BOUNDARY_SLACK * max(1.0, v1 - v0)
        return u0 - su <= u <= u1 + su and v0 - sv <= v <= v1 + sv

    def value(self, u, v) -> float:
        if self._value_at is not None:
            return self._value_at(u, v)
        return float(self.jet_at(u, v).f)


def geodesic_rhs(E: Jet3, s: GeodesicState):
    """Geodesic vector field ``(du, dv, ddu, ddv)`` from the jet of E at ``s``."""
    G = christoffels(E)
    du, dv = s.du, s.dv
    ddu = -(G.gamma1_11 * du * du + 2 * G.gamma1_12 * du * dv + G.gamma1_22 * dv * dv)
    ddv = -(G.gamma2_11 * du * du + 2 * G.gamma2_12 * du * dv + G.gamma2_22 * dv * dv)
    return du, dv, float(ddu), float(ddv)


def _field(metric: ConformalMetric, y):
    if not metric.contains(y[0], y[1]):
        raise OutsideDomainError(f"({y[0]:.17g}, {y[1]:.17g}) is outside {metric.domain}")
    return np.array(geodesic_rhs(metric.jet_at(y[0], y[1]), GeodesicState.from_array(y)))


def energy(E_value: float, s: GeodesicState) -> float:
    return E_value * (s.du ** 2 + s.dv ** 2)


def liouville_first_integral(f: Expr, g: Expr, s: GeodesicState) -> float:
    """Quadratic first integral of ``(f(u) + g(v))(du^2 + dv^2)``.

    Separation of the Hamilton-Jacobi equation gives
    ``p_u^2 - H f = const`` with ``p_u = (f + g) du``; in velocities this is
    ``(f + g)(g du^2 - f dv^2)``.
    """
    fu = float(evaluate(f, s.u, s.v))
    gv = float(evaluate(g, s.u, s.v))
    return (fu + gv) * (gv * s.du ** 2 - fu * s.dv ** 2)


def integrate(metric: ConformalMetric, s0: GeodesicState, h: float, n: int,
              first_integral: Optional[tuple] = None) -> Trajectory:
    """RK4 trajectory of at most ``n`` steps.

    Integration stops early, with ``exited=True``, as soon as a stage point
    would leave the metric's domain; the partial trajectory is returned.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    if n < 0:
        raise ValueError("step count must be non-negative")
    y = s0.as_array()
    if not metric.contains(y[0], y[1]):
        raise OutsideDomainError(f"start ({y[0]}, {y[1]}) is outside {metric.domain}")
    states = [y]
    exited = False
    for _ in range(n):
        try:
            k1 = _field(metric, y)
            k2 = _field(metric, y + 0.5 * h * k1)
            k3 = _field(metric, y + 0.5 * h * k2)
            k4 = _field(metric, y + h * k3)
            y_next = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        except OutsideDomainError:
            exited = True
            break
        if not metric.contains(y_next[0], y_next[1]):
            exited = True
            break
        y = y_next
        states.append(y)
    states = np.array(states)
    times = h * np.arange(len(states))
    traj = Trajectory(times, states, h, metric.name, exited)
    traj.energies = np.array([energy(metric.value(s[0], s[1]), GeodesicState.from_array(s))
                              for s in states])
    if first_integral is not None:
        f, g = first_integral
        traj.first_integrals = np.array([liouville_first_integral(f, g, GeodesicState.from_array(s))
                                         for s in states])
    return traj


def relative_drift(values: np.ndarray) -> float:
    """``max |q(t) - q(0)| / max(|q(0)|, tiny)`` along a trajectory."""
    q0 = values[0]
    scale = abs(q0) if q0 != 0 else 1.0
    return float(np.max(np.abs(values - q0)) / scale)


def write_csv(traj: Trajectory, path) -> None:
    """Write columns t, u, v, du, dv, energy[, first_integral] with a header row."""
    header = ["t", "u", "v", "du", "dv", "energy"]
    if traj.first_integrals is not None:
        header.append("first_integral")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k, (t, s) in enumerate(zip(traj.times, traj.states)):
            row = [t, *s, traj.energies[k]]
            if traj.first_integrals is not None:
                row.append(traj.first_integrals[k])
            w.writerow([repr(float(x)) for x in row])
