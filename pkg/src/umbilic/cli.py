"""Command-line entry point: ``umbilic analyze|certify|geodesic|search``.

Reports are JSON (stdout, or ``--json PATH``).  Exit codes: 0 success
(a no_go verdict is a success), 2 usage error, 3 evaluation error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import forms, geodesics, nogo, search
from .exprlang import ParseError, parse
from .jets import DomainError
from .surfaces import (CATALOG_NAMES, GridSpec, PositivityError, SurfaceDef, SurfaceError, catalog,
                       from_expressions, load_surface_file, parse_domain, sample)

EXIT_USAGE = 2
EXIT_EVAL = 3

_RESIDUAL = {
    "type": "object",
    "required": ["linf", "l2", "argmax"],
    "properties": {
        "linf": {"type": "number", "minimum": 0},
        "l2": {"type": "number", "minimum": 0},
        "argmax": {"oneOf": [{"type": "null"},
                             {"type": "array", "items": {"type": "number"},
                              "minItems": 2, "maxItems": 2}]},
    },
}
_POINT_OR_NULL = {"oneOf": [{"type": "null"},
                            {"type": "array", "items": {"type": "number"},
                             "minItems": 2, "maxItems": 2}]}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["version", "command", "argv", "input", "residuals", "curvature", "timing_ms"],
    "properties": {
        "version": {"type": "string"},
        "command": {"enum": ["analyze", "certify", "geodesic", "search"]},
        "argv": {"type": "array", "items": {"type": "string"}},
        "input": {
            "type": "object",
            "required": ["name", "grid"],
            "properties": {
                "name": {"type": "string"},
                "grid": {"oneOf": [{"type": "null"}, {
                    "type": "object",
                    "required": ["nu", "nv", "domain"],
                    "properties": {
                        "nu": {"type": "integer", "minimum": 3},
                        "nv": {"type": "integer", "minimum": 3},
                        "domain": {"type": "array", "items": {"type": "number"},
                                   "minItems": 4, "maxItems": 4},
                    },
                }]},
            },
        },
        "residuals": {"type": "object", "additionalProperties": _RESIDUAL},
        "curvature": {
            "type": "object",
            "required": ["k_min", "k_max", "cross_check_max_diff"],
            "properties": {
                "k_min": {"type": ["number", "null"]},
                "k_max": {"type": ["number", "null"]},
                "cross_check_max_diff": {"type": ["number", "null"]},
            },
        },
        "verdict": {
            "type": "object",
            "required": ["outcome", "violated", "margin", "witness", "best_c"],
            "properties": {
                "outcome": {"enum": ["flat_consistent", "no_go", "hypothesis_violated"]},
                "violated": {"enum": [None, "harmonicity", "positivity", "eq8", "compatibility"]},
                "margin": {"type": "number", "minimum": 0},
                "witness": _POINT_OR_NULL,
                "best_c": {"type": "number"},
            },
        },
        "search": {"type": "object"},
        "geodesic": {"type": "object"},
        "timing_ms": {"type": "number", "minimum": 0},
    },
    "allOf": [
        {"if": {"properties": {"command": {"const": "certify"}}},
         "then": {"required": ["verdict"]},
         "else": {"not": {"required": ["verdict"]}}},
        {"if": {"properties": {"command": {"const": "search"}}},
         "then": {"required": ["search"]}},
    ],
}


class UsageError(Exception):
    pass


def _finite(obj):
    """Convert numpy scalars/arrays to plain JSON types; reject non-finite floats."""
    if isinstance(obj, dict):
        return {str(k): _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _finite(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValueError(f"non-finite number {x!r} in report")
        return x
    return obj


def _residuals(fields) -> dict:
    return {f.name: f.summary() for f in fields}


def _grid_info(grid: GridSpec, domain) -> dict:
    return {"nu": grid.nu, "nv": grid.nv, "domain": list(domain)}


def _resolve_surface(arg: str, domain=None) -> SurfaceDef:
    if arg in CATALOG_NAMES:
        surface = catalog(arg)
    elif Path(arg).is_file():
        surface = load_surface_file(arg)
    else:
        raise UsageError(f"--surface {arg!r} is neither a catalog name ({', '.join(CATALOG_NAMES)}) "
                         "nor a readable file")
    return surface.with_domain(domain) if domain else surface


def _resolve_metric(arg: str, domain=None) -> SurfaceDef:
    if arg in CATALOG_NAMES:
        surface = catalog(arg)
    elif Path(arg).is_file():
        surface = load_surface_file(arg)
    else:
        surface = from_expressions(arg, E=arg)
    return surface.with_domain(domain) if domain else surface


def _pair(text: str, flag: str):
    try:
        a, b = (float(p) for p in text.split(","))
    except ValueError:
        raise UsageError(f"{flag} expects two comma-separated numbers, got {text!r}") from None
    return a, b


def cmd_analyze(args) -> dict:
    surface = _resolve_surface(args.surface, args.domain)
    grid = args.grid
    s = sample(surface, grid)
    E = nogo.metric_field(s)
    fields = []
    curvature = {"k_min": None, "k_max": None, "cross_check_max_diff": None}
    if s.position is not None:
        f = forms.fundamental_forms(s.position, point=(s.u, s.v))
        L = nogo.SecondFormField(s.u, s.v, *f.second)
        fields.append(nogo.ResidualField.from_values("isothermal", forms.isothermal_residual(f), s.u, s.v))
        fields.append(nogo.ResidualField.from_values("umbilic_defect", forms.umbilic_defect(f), s.u, s.v))
        k_ext, k_conf = forms.gaussian_curvature_two_ways(f)
        if k_conf is not None:
            diff = np.abs(k_ext - k_conf)
            fields.append(nogo.ResidualField.from_values("curvature_cross_check", diff, s.u, s.v))
            curvature["cross_check_max_diff"] = float(np.max(diff))
            lam = forms.principal_curvatures(f)
            fields.append(nogo.ResidualField.from_values(
                "principal_gap", lam.lambda2 - lam.lambda1, s.u, s.v))
        curvature["k_min"], curvature["k_max"] = float(np.min(k_ext)), float(np.max(k_ext))
        fields.extend(nogo.codazzi_residuals(E, L))
        fields.append(nogo.gauss_residual_reduced(E, L))
        chr_ = forms.christoffels_general(*f.first)
        fields.append(nogo.ResidualField.from_values("christoffel_identity", chr_.identity_residual, s.u, s.v))
    else:
        K, _ = nogo.curvature_sign_census(E)
        curvature["k_min"], curvature["k_max"] = float(np.min(K.values)), float(np.max(K.values))
        chr_ = forms.christoffels(E.jet)
        fields.append(nogo.ResidualField.from_values("christoffel_identity", chr_.identity_residual, s.u, s.v))
    fields.append(nogo.harmonicity_residual(E))
    return {"input": {"name": surface.name, "grid": _grid_info(grid, surface.domain)},
            "residuals": _residuals(fields), "curvature": curvature}


def cmd_certify(args) -> dict:
    surface = _resolve_metric(args.metric, args.domain)
    grid = args.grid
    E = nogo.metric_field(sample(surface, grid))
    tol = args.tol
    if tol is None:
        tol = nogo.IMMERSION_TOL if surface.kind == "immersion" else nogo.SYNTHETIC_TOL
    verdict = nogo.certify_no_go(E, tol)
    c = verdict.best_c
    table = nogo.certify_residuals(E, c)
    K, signs = nogo.curvature_sign_census(E, tol)
    curvature = {"k_min": signs["k_min"], "k_max": signs["k_max"], "cross_check_max_diff": None,
                 "sign_counts": {k: signs[k] for k in ("negative", "zero", "positive")}}
    details = dict(verdict.details)
    verdict_dict = verdict.to_dict()
    verdict_dict["tol"] = tol
    verdict_dict["details"] = details
    return {"input": {"name": surface.name, "grid": _grid_info(grid, surface.domain)},
            "residuals": _residuals(table.values()), "curvature": curvature,
            "verdict": verdict_dict}


def cmd_geodesic(args) -> dict:
    surface = _resolve_metric(args.metric, args.domain)
    metric = geodesics.ConformalMetric.from_surface(surface)
    u0, v0 = _pair(args.start, "--start")
    a, b = _pair(args.vel, "--vel")
    if not args.h > 0:
        raise UsageError("--h must be positive")
    if args.steps < 0:
        raise UsageError("--steps must be non-negative")
    fi = None
    if args.first_integral:
        parts = args.first_integral.split(",")
        if len(parts) != 2:
            raise UsageError("--first-integral expects f_expr,g_expr")
        fi = tuple(parse(p) for p in parts)
    s0 = geodesics.GeodesicState(u0, v0, a, b)
    traj = geodesics.integrate(metric, s0, args.h, args.steps, fi)
    if args.csv:
        geodesics.write_csv(traj, args.csv)
    final = traj.final
    info = {
        "h": args.h,
        "steps_requested": args.steps,
        "steps_taken": len(traj) - 1,
        "truncated": traj.exited,
        "final": {"t": float(traj.times[-1]), "u": final.u, "v": final.v,
                  "du": final.du, "dv": final.dv},
        "energy_initial": float(traj.energies[0]),
        "energy_drift": geodesics.relative_drift(traj.energies),
    }
    if fi is not None:
        info["first_integral_initial"] = float(traj.first_integrals[0])
        info["first_integral_drift"] = geodesics.relative_drift(traj.first_integrals)
    return {"input": {"name": surface.name, "grid": None}, "residuals": {},
            "curvature": {"k_min": None, "k_max": None, "cross_check_max_diff": None},
            "geodesic": info}


def cmd_search(args) -> dict:
    if not 0 <= args.degree <= search.MAX_DEGREE:
        raise UsageError(f"--degree must be in [0, {search.MAX_DEGREE}], got {args.degree}")
    if args.restarts < 1:
        raise UsageError("--restarts must be at least 1")
    grid = args.grid
    domain = args.domain or search.DEFAULT_DOMAIN
    result = search.falsify(args.degree, grid, args.restarts, args.seed, domain,
                            eps_pos=args.eps_pos, eps_c=args.eps_c)
    basis = search.BasisGrid(args.degree, grid, domain)
    E_jet = search.HarmonicAnsatz(args.degree, np.array(result.coefficients)).jet(basis.jets)
    E = nogo.MetricField("search_best", basis.u, basis.v, E_jet, domain)
    verdict = nogo.certify_no_go(E, nogo.SYNTHETIC_TOL)
    payload = result.to_dict()
    payload["basis"] = search.harmonic_basis_text(args.degree)
    payload["verdict"] = verdict.to_dict()
    table = nogo.certify_residuals(E, result.c)
    _, signs = nogo.curvature_sign_census(E)
    return {"input": {"name": f"harmonic_degree_{args.degree}", "grid": _grid_info(grid, domain)},
            "residuals": _residuals([table["r8"], table["laplacian_E"]]),
            "curvature": {"k_min": signs["k_min"], "k_max": signs["k_max"],
                          "cross_check_max_diff": None},
            "search": payload}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _grid_type(text):
    try:
        return GridSpec.parse(text)
    except SurfaceError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _domain_type(text):
    try:
        return parse_domain(text)
    except SurfaceError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="umbilic", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--grid", type=_grid_type, default=GridSpec(), help="NxM (default 33x33)")
        sp.add_argument("--domain", type=_domain_type, default=None, help="u_min,u_max,v_min,v_max")
        sp.add_argument("--json", default=None, help="write the report here instead of stdout")

    a = sub.add_parser("analyze", help="forms, curvatures and residuals of a surface")
    a.add_argument("--surface", required=True, help="catalog name or definition file")
    common(a)

    c = sub.add_parser("certify", help="run the no-go certifier on a conformal factor")
    c.add_argument("--metric", required=True, help="expression in u, v, catalog name or file")
    c.add_argument("--tol", type=float, default=None)
    common(c)

    g = sub.add_parser("geodesic", help="integrate a geodesic of E (du^2 + dv^2)")
    g.add_argument("--metric", required=True)
    g.add_argument("--start", required=True, help="u,v")
    g.add_argument("--vel", required=True, help="du,dv")
    g.add_argument("--h", type=float, default=1e-3)
    g.add_argument("--steps", type=int, default=1000)
    g.add_argument("--first-integral", default=None, help="f_expr,g_expr for E = f(u) + g(v)")
    g.add_argument("--csv", default=None, help="trajectory CSV path")
    g.add_argument("--domain", type=_domain_type, default=None)
    g.add_argument("--json", default=None)

    s = sub.add_parser("search", help="falsification search over harmonic polynomials")
    s.add_argument("--degree", type=int, required=True)
    s.add_argument("--restarts", type=int, default=20)
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--eps-pos", type=float, default=search.EPS_POS)
    s.add_argument("--eps-c", type=float, default=search.EPS_C)
    common(s)
    return p


COMMANDS = {"analyze": cmd_analyze, "certify": cmd_certify,
            "geodesic": cmd_geodesic, "search": cmd_search}


def validate_report(report: dict) -> None:
    import jsonschema

    jsonschema.validate(report, REPORT_SCHEMA)


def run(argv=None):
    """Execute a command; returns ``(exit_code, report, json_path)`` without printing."""
    argv = list(sys.argv[1:] if argv is None else argv)
    t0 = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        body = COMMANDS[args.command](args)
    except PositivityError as exc:
        print(f"umbilic: evaluation error: {exc}", file=sys.stderr)
        return EXIT_EVAL, None, None
    except (UsageError, ParseError, SurfaceError) as exc:
        print(f"umbilic: error: {exc}", file=sys.stderr)
        return EXIT_USAGE, None, None
    except (DomainError, forms.RegularityError, forms.NotIsothermalError,
            geodesics.OutsideDomainError, ValueError, ArithmeticError) as exc:
        print(f"umbilic: evaluation error: {exc}", file=sys.stderr)
        return EXIT_EVAL, None, None
    report = {"version": __version__, "command": args.command, "argv": argv}
    report.update(body)
    report["timing_ms"] = (time.perf_counter() - t0) * 1e3
    report = _finite(report)
    validate_report(report)
    return 0, report, args.json


def main(argv=None) -> int:
    try:
        code, report, out = run(argv)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    if report is None:
        return code
    text = json.dumps(report, indent=2, allow_nan=False)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
