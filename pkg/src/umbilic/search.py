"""Falsification search over positive harmonic polynomial conformal factors.

The search looks for a harmonic ``E`` and a constant ``c != 0`` with
``2 c^2 E^3 = |grad E|^2`` on a grid, the relation an umbilic isothermal
immersion with harmonic metric would have to satisfy.  Floors
``E >= eps_pos`` and ``|c| >= eps_c`` keep the question from collapsing to
the trivial ``c -> 0``; they enter the least-squares problem as quadratic
hinge penalties and every returned candidate is projected onto the feasible
set (constant shift of E, clamp of |c|) before it is scored.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .exprlang import Expr, eval_jet, parse
from .jets import Jet3
from .surfaces import DEFAULT_DOMAIN, GridSpec

MAX_DEGREE = 8
EPS_POS = 0.5
EPS_C = 0.1
PENALTY_WEIGHT = 100.0
LM_DAMPING = 1e-3
LM_MAX_ITER = 500
INIT_SIGMA = 0.3


def _monomial(a: int, b: int) -> str:
    parts = []
    for name, p in (("u", a), ("v", b)):
        if p == 1:
            parts.append(name)
        elif p > 1:
            parts.append(f"{name}^{p}")
    return "*".join(parts)


def _harmonic_text(k: int, imaginary: bool) -> str:
    terms = []
    for j in range(k + 1):
        if (j % 2 == 1) != imaginary:
            continue
        sign = -1 if (j // 2) % 2 else 1
        coef = math.comb(k, j)
        mono = _monomial(k - j, j)
        body = mono if coef == 1 else (f"{coef}*{mono}" if mono else str(coef))
        terms.append((sign, body or "1"))
    text = ""
    for sign, body in terms:
        if not text:
            text = body if sign > 0 else "-" + body
        else:
            text += ("+" if sign > 0 else "-") + body
    return text


def harmonic_basis_text(degree: int) -> list[str]:
    if int(degree) != degree or not 0 <= degree <= MAX_DEGREE:
        raise ValueError(f"degree must be an integer in [0, {MAX_DEGREE}], got {degree!r}")
    texts = ["1"]
    for k in range(1, int(degree) + 1):
        texts += [_harmonic_text(k, False), _harmonic_text(k, True)]
    return texts


def harmonic_basis(degree: int) -> list[Expr]:
    """Expression trees for ``1, Re z, Im z, ..., Re z^d, Im z^d`` with z = u + iv."""
    return [parse(t) for t in harmonic_basis_text(degree)]


@dataclass(frozen=True, eq=False)
class HarmonicAnsatz:
    """``E = sum_k coeffs[k] * basis[k]``; harmonic for every coefficient vector."""

    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        if len(self.coeffs) != 2 * self.degree + 1:
            raise ValueError(f"degree {self.degree} needs {2 * self.degree + 1} coefficients")

    def jet(self, basis_jets) -> Jet3:
        total = 0.0
        for a, b in zip(self.coeffs, basis_jets):
            total = b * float(a) + total
        return total


class BasisGrid:
    """Basis jets evaluated once on a closed grid.

    Everything downstream is linear in the coefficients, so these arrays are
    all that is needed for exact Jacobians.
    """

    def __init__(self, degree: int, grid: GridSpec = GridSpec(), domain=DEFAULT_DOMAIN):
        self.degree = degree
        self.grid = grid
        self.domain = tuple(domain)
        self.u, self.v = grid.mesh(domain)
        self.jets = [eval_jet(b, self.u, self.v).broadcast_to(self.u.shape)
                     for b in harmonic_basis(degree)]
        self.B = np.array([j.f.ravel() for j in self.jets])
        self.Bu = np.array([j.fu.ravel() for j in self.jets])
        self.Bv = np.array([j.fv.ravel() for j in self.jets])

    def fields(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        return coeffs @ self.B, coeffs @ self.Bu, coeffs @ self.Bv


def _normalized_r8(E, Eu, Ev, c):
    A = 2 * c * c * E ** 3
    G = Eu * Eu + Ev * Ev
    return (A - G) / (1 + A + G), A, G


def objective_parts(basis: BasisGrid, coeffs, c, eps_pos=EPS_POS, eps_c=EPS_C,
                    weight=PENALTY_WEIGHT):
    """Return ``(floor, penalty)`` for a candidate; the objective is their sum."""
    E, Eu, Ev = basis.fields(coeffs)
    r, _, _ = _normalized_r8(E, Eu, Ev, c)
    floor = float(np.max(np.abs(r)))
    hinge_e = max(0.0, eps_pos - float(np.min(E)))
    hinge_c = max(0.0, eps_c - abs(c))
    return floor, weight * (hinge_e ** 2 + hinge_c ** 2)


def objective(ansatz: HarmonicAnsatz, c: float, grid: GridSpec = GridSpec(),
              domain=DEFAULT_DOMAIN, eps_pos=EPS_POS, eps_c=EPS_C, weight=PENALTY_WEIGHT,
              basis: Optional[BasisGrid] = None) -> float:
    """Normalized r8 floor ``max |2c^2E^3 - |grad E|^2| / (1 + 2c^2E^3 + |grad E|^2)``
    plus hinge penalties for ``min E < eps_pos`` and ``|c| < eps_c``."""
    basis = basis or BasisGrid(ansatz.degree, grid, domain)
    floor, penalty = objective_parts(basis, ansatz.coeffs, c, eps_pos, eps_c, weight)
    return floor + penalty


@dataclass
class RestartRecord:
    index: int
    initial: list
    coefficients: list
    c: float
    objective: float
    iterations: int
    converged: bool
    costs: list = field(default_factory=list)


@dataclass
class SearchResult:
    degree: int
    coefficients: list
    c: float
    objective: float
    iterations: int
    seed: int
    restarts: int
    config: dict
    history: list

    def to_dict(self) -> dict:
        return asdict(self)


class _Problem:
    def __init__(self, basis: BasisGrid, eps_pos, eps_c, weight):
        self.basis = basis
        self.eps_pos, self.eps_c, self.weight = eps_pos, eps_c, weight
        self.n = basis.B.shape[1]
        self.scale = 1.0 / math.sqrt(self.n)
        self.sw = math.sqrt(weight)

    def residuals(self, x):
        coeffs, c = x[:-1], x[-1]
        E, Eu, Ev = self.basis.fields(coeffs)
        r, _, _ = _normalized_r8(E, Eu, Ev, c)
        hinge_e = np.maximum(0.0, self.eps_pos - E)
        hinge_c = max(0.0, self.eps_c - abs(c))
        return np.concatenate([r * self.scale, self.sw * self.scale * hinge_e,
                               [self.sw * hinge_c]])

    def jacobian(self, x):
        coeffs, c = x[:-1], x[-1]
        b = self.basis
        E, Eu, Ev = b.fields(coeffs)
        A = 2 * c * c * E ** 3
        G = Eu * Eu + Ev * Ev
        d2 = (1 + A + G) ** 2
        dA = 6 * c * c * E ** 2 * b.B          # (k, p)
        dG = 2 * (Eu * b.Bu + Ev * b.Bv)
        jr = ((dA * (1 + 2 * G) - dG * (1 + 2 * A)) / d2).T
        jr_c = (4 * c * E ** 3 * (1 + 2 * G) / d2)[:, None]
        active = (self.eps_pos - E) > 0
        jh = np.where(active[:, None], -b.B.T, 0.0)
        jc = np.zeros((1, x.size))
        if abs(c) < self.eps_c:
            jc[0, -1] = -self.sw * (1.0 if c >= 0 else -1.0)
        top = np.hstack([jr, jr_c]) * self.scale
        mid = np.hstack([jh, np.zeros((self.n, 1))]) * self.sw * self.scale
        return np.vstack([top, mid, jc])


def levenberg_marquardt(problem: _Problem, x0, max_iter=LM_MAX_ITER, damping=LM_DAMPING):
    """Marquardt-scaled LM; damping /10 on acceptance and x10 on rejection.

    Returns ``(x, iterations, converged, costs)`` where ``costs`` is the
    sequence of accepted half-sum-of-squares values (non-increasing).
    """
    x = np.array(x0, dtype=float)
    r = problem.residuals(x)
    cost = 0.5 * float(r @ r)
    costs = [cost]
    lam = damping
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        J = problem.jacobian(x)
        g = J.T @ r
        if float(np.max(np.abs(g))) < 1e-15:
            converged = True
            break
        JtJ = J.T @ J
        scale = np.maximum(np.diag(JtJ), 1e-12)
        accepted = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(JtJ + lam * np.diag(scale), -g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            x_new = x + step
            r_new = problem.residuals(x_new)
            cost_new = 0.5 * float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new < cost:
                accepted = True
                break
            lam *= 10
        if not accepted:
            converged = True
            break
        rel = (cost - cost_new) / max(cost, 1e-300)
        x, r, cost = x_new, r_new, cost_new
        costs.append(cost)
        lam = max(lam / 10, 1e-12)
        if rel < 1e-14:
            converged = True
            break
    return x, it, converged, costs


def project_feasible(basis: BasisGrid, coeffs, c, eps_pos=EPS_POS, eps_c=EPS_C):
    """Shift the constant coefficient so ``min E >= eps_pos``; clamp ``|c| >= eps_c``."""
    coeffs = np.array(coeffs, dtype=float)
    E, _, _ = basis.fields(coeffs)
    shortfall = eps_pos - float(np.min(E))
    if shortfall > 0:
        coeffs[0] += shortfall
        # guard against the shifted minimum rounding just below the floor
        while float(np.min(basis.fields(coeffs)[0])) < eps_pos:
            coeffs[0] = np.nextafter(coeffs[0], np.inf)
    c = float(c)
    if abs(c) < eps_c:
        c = eps_c if c >= 0 else -eps_c
    return coeffs, c


def falsify(degree: int, grid: GridSpec = GridSpec(), restarts: int = 20, seed: int = 42,
            domain=DEFAULT_DOMAIN, eps_pos=EPS_POS, eps_c=EPS_C, weight=PENALTY_WEIGHT,
            max_iter=LM_MAX_ITER) -> SearchResult:
    """Multi-restart LM search for ``(E, c)`` satisfying ``2c^2E^3 = |grad E|^2``.

    Restarts run sequentially in index order from one seeded generator, so the
    result is a deterministic function of the arguments.
    """
    if restarts < 1:
        raise ValueError("need at least one restart")
    basis = BasisGrid(degree, grid, domain)
    problem = _Problem(basis, eps_pos, eps_c, weight)
    rng = np.random.default_rng(seed)
    nb = 2 * degree + 1
    records = []
    for k in range(restarts):
        coeffs0 = rng.normal(0.0, INIT_SIGMA, nb)
        coeffs0[0] += 1.0
        c0 = float(rng.uniform(eps_c, 1.0))
        x0 = np.concatenate([coeffs0, [c0]])
        x, its, converged, costs = levenberg_marquardt(problem, x0, max_iter)
        coeffs, c = project_feasible(basis, x[:-1], x[-1], eps_pos, eps_c)
        floor, penalty = objective_parts(basis, coeffs, c, eps_pos, eps_c, weight)
        records.append(RestartRecord(k, x0.tolist(), coeffs.tolist(), c, floor + penalty,
                                     its, converged, costs))
    best = min(records, key=lambda r: (r.objective, r.index))
    config = {"grid": [grid.nu, grid.nv], "domain": list(domain), "eps_pos": eps_pos,
              "eps_c": eps_c, "penalty_weight": weight, "damping": LM_DAMPING,
              "max_iter": max_iter, "init_sigma": INIT_SIGMA}
    return SearchResult(degree, best.coefficients, best.c, best.objective, best.iterations,
                        seed, restarts, config, [asdict(r) for r in records])
