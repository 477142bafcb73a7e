"""Surface and metric definitions sampled as jets on rectangular grids."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .exprlang import Expr, eval_jet, parse
from .jets import DomainError, Jet3, JetVec3

POSITIVITY_MARGIN = 1e-9
DEFAULT_GRID = 33
DEFAULT_DOMAIN = (-1.0, 1.0, -1.0, 1.0)
PERIODIC_DOMAIN = (-math.pi, math.pi, -1.0, 1.0)


class SurfaceError(ValueError):
    """Bad surface definition, unknown catalog entry or failed sampling."""


class PositivityError(SurfaceError):
    def __init__(self, point, value):
        self.point = point
        self.value = value
        super().__init__(
            f"conformal factor E = {value:.17g} at (u, v) = ({point[0]:.17g}, {point[1]:.17g}) "
            f"is below the positivity margin {POSITIVITY_MARGIN:g}"
        )


@dataclass(frozen=True)
class SurfaceDef:
    """An immersion (x, y, z) or a bare conformal factor E over a rectangle.

    ``kind`` is ``"immersion"`` or ``"metric_only"``; ``exprs`` holds three or
    one expression trees accordingly.  ``domain`` is
    ``(u_min, u_max, v_min, v_max)``.
    """

    name: str
    kind: str
    exprs: tuple
    domain: tuple = DEFAULT_DOMAIN
    isothermal: bool = False
    sources: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.kind not in ("immersion", "metric_only"):
            raise SurfaceError(f"unknown surface kind {self.kind!r}")
        expected = 3 if self.kind == "immersion" else 1
        if len(self.exprs) != expected:
            raise SurfaceError(f"{self.kind} needs {expected} expression(s), got {len(self.exprs)}")
        _check_domain(self.domain)

    def with_domain(self, domain) -> "SurfaceDef":
        return SurfaceDef(self.name, self.kind, self.exprs, tuple(float(d) for d in domain),
                          self.isothermal, self.sources)


def _check_domain(domain):
    if len(domain) != 4:
        raise SurfaceError("domain needs four numbers u_min,u_max,v_min,v_max")
    u0, u1, v0, v1 = domain
    if not all(math.isfinite(d) for d in domain):
        raise SurfaceError("domain bounds must be finite")
    if not (u1 > u0 and v1 > v0):
        raise SurfaceError(f"domain {tuple(domain)} has no positive area")


@dataclass(frozen=True)
class GridSpec:
    """Closed tensor grid: both rectangle endpoints are sample points."""

    nu: int = DEFAULT_GRID
    nv: int = DEFAULT_GRID

    def __post_init__(self):
        if int(self.nu) != self.nu or int(self.nv) != self.nv or self.nu < 3 or self.nv < 3:
            raise SurfaceError(f"grid needs at least 3x3 points, got {self.nu}x{self.nv}")

    def mesh(self, domain):
        u0, u1, v0, v1 = domain
        us = np.linspace(u0, u1, self.nu)
        vs = np.linspace(v0, v1, self.nv)
        return np.meshgrid(us, vs, indexing="ij")

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        try:
            nu, nv = (int(p) for p in text.lower().split("x"))
        except ValueError:
            raise SurfaceError(f"grid must look like NxM, got {text!r}") from None
        return cls(nu, nv)


@dataclass(frozen=True, eq=False)
class GridSample:
    """Jets of a surface at every grid point; arrays have shape (nu, nv)."""

    surface: SurfaceDef
    grid: GridSpec
    u: np.ndarray
    v: np.ndarray
    position: Optional[JetVec3] = None
    metric: Optional[Jet3] = None

    @property
    def shape(self):
        return self.u.shape

    @property
    def count(self) -> int:
        return self.u.size

    def point(self, i: int, j: int):
        """Return the jet data at one grid node."""
        if self.position is not None:
            return self.position[i, j]
        return self.metric[i, j]


_CATALOG_TEXT = {
    "plane": ("immersion", ("u", "v", "0"), DEFAULT_DOMAIN, True),
    "sphere_stereo": (
        "immersion",
        ("{r}*2*u/(1+u^2+v^2)", "{r}*2*v/(1+u^2+v^2)", "{r}*(u^2+v^2-1)/(1+u^2+v^2)"),
        DEFAULT_DOMAIN, True,
    ),
    "catenoid": (
        "immersion",
        ("{r}*cosh(v)*cos(u)", "{r}*cosh(v)*sin(u)", "{r}*v"),
        PERIODIC_DOMAIN, True,
    ),
    "enneper": (
        "immersion",
        ("u-u^3/3+u*v^2", "v-v^3/3+v*u^2", "u^2-v^2"),
        DEFAULT_DOMAIN, True,
    ),
    "cylinder": ("immersion", ("{r}*cos(u)", "{r}*sin(u)", "{r}*v"), PERIODIC_DOMAIN, True),
    "graph_paraboloid": ("immersion", ("u", "v", "u^2"), DEFAULT_DOMAIN, False),
    "metric_linear": ("metric_only", ("2+u",), DEFAULT_DOMAIN, False),
    "metric_saddle": ("metric_only", ("u^2-v^2+3",), DEFAULT_DOMAIN, False),
}
# entries accepting an optional overall scale (radius or waist)
_SCALED = {"sphere_stereo", "catenoid", "cylinder"}

CATALOG_NAMES = tuple(_CATALOG_TEXT)


def catalog(name: str, params: Sequence[float] = ()) -> SurfaceDef:
    """Look up a built-in surface.

    ``sphere_stereo``, ``catenoid`` and ``cylinder`` take an optional scale
    (radius of sphere or cylinder, waist of the catenoid); every other entry
    takes no parameters.
    """
    if name not in _CATALOG_TEXT:
        raise SurfaceError(f"unknown catalog surface {name!r}; known: {', '.join(CATALOG_NAMES)}")
    params = list(params)
    allowed = 1 if name in _SCALED else 0
    if len(params) > allowed:
        raise SurfaceError(f"{name} takes at most {allowed} parameter(s), got {len(params)}")
    kind, texts, domain, isothermal = _CATALOG_TEXT[name]
    scale = float(params[0]) if params else 1.0
    if params and not (math.isfinite(scale) and scale > 0):
        raise SurfaceError(f"{name} scale must be positive, got {scale!r}")
    sources = tuple(t.replace("{r}*", "" if scale == 1.0 else f"{scale!r}*") for t in texts)
    return SurfaceDef(name, kind, tuple(parse(s) for s in sources), domain, isothermal, sources)


def from_expressions(name, *, x=None, y=None, z=None, E=None, domain=DEFAULT_DOMAIN) -> SurfaceDef:
    """Build a user surface from expression text."""
    if E is not None:
        if any(c is not None for c in (x, y, z)):
            raise SurfaceError("give either x, y, z or E, not both")
        return SurfaceDef(name, "metric_only", (parse(E),), tuple(domain), sources=(E,))
    if any(c is None for c in (x, y, z)):
        raise SurfaceError("an immersion needs all of x, y and z")
    return SurfaceDef(name, "immersion", (parse(x), parse(y), parse(z)), tuple(domain),
                      sources=(x, y, z))


def load_surface_file(path) -> SurfaceDef:
    """Read a definition file with lines ``x=``, ``y=``, ``z=`` or ``E=`` and ``domain=``."""
    path = Path(path)
    entries = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in ("x", "y", "z", "E", "domain"):
            raise SurfaceError(f"{path}:{lineno}: expected x=, y=, z=, E= or domain=")
        if key in entries:
            raise SurfaceError(f"{path}:{lineno}: duplicate {key}=")
        entries[key] = value.strip()
    domain = DEFAULT_DOMAIN
    if "domain" in entries:
        domain = parse_domain(entries.pop("domain"))
    return from_expressions(path.stem, domain=domain, **entries)


def parse_domain(text: str) -> tuple:
    try:
        domain = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise SurfaceError(f"domain must be four comma-separated numbers, got {text!r}") from None
    _check_domain(domain)
    return domain


def _eval_on_grid(expr: Expr, u, v) -> Jet3:
    jet = eval_jet(expr, u, v).broadcast_to(u.shape)
    if not jet.is_finite():
        bad = np.flatnonzero(~np.all(np.isfinite(jet.coefficients()), axis=0).ravel())[0]
        point = (float(u.ravel()[bad]), float(v.ravel()[bad]))
        raise DomainError("expression is not finite", index=int(bad), point=point)
    return jet


def sample(surface: SurfaceDef, grid: GridSpec = GridSpec()) -> GridSample:
    """Evaluate the surface's jets at every node of a closed grid."""
    u, v = grid.mesh(surface.domain)
    if surface.kind == "immersion":
        x, y, z = (_eval_on_grid(e, u, v) for e in surface.exprs)
        return GridSample(surface, grid, u, v, position=JetVec3(x, y, z))
    E = _eval_on_grid(surface.exprs[0], u, v)
    k = int(np.argmin(E.f))
    if E.f.ravel()[k] < POSITIVITY_MARGIN:
        raise PositivityError((float(u.ravel()[k]), float(v.ravel()[k])), float(E.f.ravel()[k]))
    return GridSample(surface, grid, u, v, metric=E)
