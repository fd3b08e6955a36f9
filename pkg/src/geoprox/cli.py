"""Command line interface: ``python -m geoprox <subcommand> ...``.

Exit codes: 0 success, 1 verification failure, 2 config or input error,
3 an iterate left the sphere cap.
"""

from __future__ import annotations

import argparse
import ast
import csv
import inspect
import io
import json
import math
import os
import re
import sys

import numpy as np

from . import config as cfgmod
from .certificates import (Certificate, asymptotic_certificate, certify_operator,
                           certify_operator_asymptotic, compose_certificates,
                           cyclic_projections_certificate, finite_certificate,
                           rate_from_certificate)
from .harness import DOMAIN_ESCAPE, PRESETS, iterate, preset, run_experiment
from .operators import KnownPoint, apply, barycenter
from .regularity import check_quasi_strict, estimate_subregularity, firmness_frontier
from .spaces import DomainError, Euclidean, SphereCap, local_convexity_constant
from .verify import run_suite

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_ESCAPE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _dump(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else None
    return v


def _fmt(v) -> str:
    """Shortest round-trip decimal; empty for missing values."""
    if v is None:
        return ""
    v = float(v)
    return repr(v) if math.isfinite(v) else ""


# -- preset and parameter parsing -----------------------------------------------------

_ALLOWED = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Constant, ast.Name, ast.operator,
            ast.unaryop, ast.Load)


def parse_value(text: str):
    """JSON literal, or an arithmetic expression in numbers and ``pi``."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError:
        return text
    nodes = list(ast.walk(tree))
    if all(isinstance(n, _ALLOWED) for n in nodes) and \
            all(n.id == "pi" for n in nodes if isinstance(n, ast.Name)):
        return float(eval(compile(tree, "<param>", "eval"), {"__builtins__": {}}, {"pi": math.pi}))
    return text


def parse_preset(spec: str, extra: list[str]):
    """``name``, ``name(a, k=v)`` plus ``k=v`` strings from ``--param``."""
    m = re.fullmatch(r"\s*(\w+)\s*(?:\((.*)\))?\s*", spec)
    if not m:
        raise UsageError(f"malformed preset {spec!r}")
    name, inner = m.group(1), m.group(2)
    if name not in PRESETS:
        raise UsageError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    names = list(inspect.signature(PRESETS[name]).parameters)
    params = {}
    args = _split_args(inner) if inner else []
    for i, a in enumerate(args + list(extra)):
        if "=" in a:
            k, v = a.split("=", 1)
            params[k.strip()] = parse_value(v.strip())
        elif i < len(args):
            params[names[i]] = parse_value(a.strip())
        else:
            raise UsageError(f"--param expects key=value, got {a!r}")
    return name, params


def _split_args(text):
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == "," and depth == 0:
            out.append(cur)
            cur = ""
        else:
            cur += ch
    if cur.strip():
        out.append(cur)
    return out


def load_experiment(args):
    if bool(args.config) == bool(args.preset):
        raise UsageError("give exactly one of --config or --preset")
    if args.config:
        cfg = cfgmod.load(args.config)
    else:
        name, params = parse_preset(args.preset, args.param or [])
        cfg = preset(name, **params)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


# -- subcommands ----------------------------------------------------------------------

def trace_rows(result):
    tr, rep = result.trace, result.report
    dim = tr.iterates.shape[1]
    header = ["k"] + [f"x{i}" for i in range(dim)] + ["residual", "dist_to_fix", "ratio"]
    rows = []
    for k, x in enumerate(tr.iterates):
        dist = None if tr.dist_to_fix is None else tr.dist_to_fix[k]
        ratio = None if rep is None or k == 0 else rep.ratios[k - 1]
        rows.append([str(k)] + [_fmt(v) for v in x] + [_fmt(tr.residuals[k]), _fmt(dist),
                                                      _fmt(ratio)])
    return header, rows


def trace_csv(result) -> str:
    header, rows = trace_rows(result)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def report_dict(result) -> dict:
    tr = result.trace
    sub = result.subregularity
    return {
        "config": cfgmod.to_dict(result.config),
        "stop_reason": tr.stop_reason,
        "escape_index": tr.escape_index,
        "message": tr.message,
        "iterations": len(tr) - 1,
        "final_point": tr.final,
        "final_residual": tr.residuals[-1],
        "certificate": None if result.certificate is None else result.certificate.to_dict(),
        "asymptotic_certificate": (None if result.asymptotic_certificate is None
                                   else result.asymptotic_certificate.to_dict()),
        "subregularity": None if sub is None else sub.to_dict(),
        "rate": None if result.report is None else result.report.to_dict(),
        "notes": result.notes,
    }


def _write(out_dir, name, text):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def cmd_run(args, stdout):
    cfg = load_experiment(args)
    result = run_experiment(cfg)
    report = report_dict(result)
    if args.out:
        if args.format == "csv":
            _write(args.out, cfg.outputs.get("trace", "trace.csv"), trace_csv(result))
        else:
            header, rows = trace_rows(result)
            _write(args.out, os.path.splitext(cfg.outputs.get("trace", "trace.csv"))[0] + ".json",
                   _dump({"columns": header, "rows": rows}))
        _write(args.out, cfg.outputs.get("report", "report.json"), _dump(report))
    elif args.format == "csv":
        stdout.write(trace_csv(result))
    else:
        header, rows = trace_rows(result)
        report["trace"] = {"columns": header, "rows": rows}
        stdout.write(_dump(report))
    return EXIT_ESCAPE if result.trace.stop_reason == DOMAIN_ESCAPE else EXIT_OK


def cmd_estimate(args, stdout):
    cfg = load_experiment(args)
    space, T = cfg.space, cfg.operator
    if isinstance(cfg.fixed, KnownPoint):
        y = cfg.fixed.point
    else:
        tr = iterate(space, T, cfg.x0, cfg.tol, cfg.max_iter)
        if tr.stop_reason == DOMAIN_ESCAPE:
            raise DomainError("iteration left the cap while locating a fixed point")
        y = tr.final
    alphas = args.alpha or [round(0.05 * k, 10) for k in range(1, 20)]
    out = {"config": cfgmod.to_dict(cfg), "fixed_point": y,
           "fixed_point_residual": float(space.distance(y, apply(space, T, y)))}
    out["firmness"] = firmness_frontier(space, T, y, alphas, cfg.sample).to_dict()
    ok, margin = check_quasi_strict(space, T, y, cfg.sample, skip_fixed=True)
    out["quasi_strict"] = {"holds": ok, "min_margin": margin}
    try:
        out["certificate"] = certify_operator(space, T).to_dict()
    except DomainError as exc:
        out["certificate"] = None
        out["certificate_note"] = str(exc)
    if cfg.fixed.__class__.__name__ not in ("Unknown", "EmptySet"):
        out["subregularity"] = estimate_subregularity(space, T, cfg.fixed, cfg.sample).to_dict()
    _emit(args, stdout, "estimate.json", out)
    return EXIT_OK


def cmd_certify(args, stdout):
    b = args.builder
    p = args.p
    if b == "operator":
        cfg = load_experiment(args)
        out = {"certificate": certify_operator(cfg.space, cfg.operator).to_dict(),
               "asymptotic": certify_operator_asymptotic(cfg.space, cfg.operator).to_dict()}
        _emit(args, stdout, "certificate.json", out)
        return EXIT_OK
    if args.c is None and args.kappa is None:
        args.c = 2.0
    if args.kappa is not None:
        if args.delta is None:
            raise UsageError("--kappa needs --delta")
        c = local_convexity_constant(args.kappa, args.delta)
    else:
        c = args.c
    kw = {"p": p}
    if args.beta is not None:
        kw["beta"] = args.beta
    if b == "cyclic":
        res = cyclic_projections_certificate(args.n, c, p)
        out = dict(res.certificate.to_dict(), closed_form_alpha=res.closed_form_alpha)
    elif b == "compose":
        need(args, "alpha0", "alpha1")
        c0 = Certificate(args.alpha0, args.eps0, p, c, provenance="T0")
        c1 = Certificate(args.alpha1, args.eps1, p, c, provenance="T1")
        out = compose_certificates(c0, c1, c).to_dict()
    else:
        if b in ("km", "projected_gradient", "prox_km_prox"):
            need(args, "beta")
        if b == "prox_after":
            need(args, "alpha0")
            kw.update(alpha0=args.alpha0, eps0=args.eps0)
        if args.kappa is not None:
            res = asymptotic_certificate(b, args.kappa, args.delta, **kw)
            out = dict(res.local.to_dict(), limit=res.limit.to_dict())
        else:
            out = finite_certificate(b, c, **kw).to_dict()
    _emit(args, stdout, "certificate.json", out)
    return EXIT_OK


def need(args, *names):
    for n in names:
        if getattr(args, n) is None:
            raise UsageError(f"--{n.replace('_', '-')} is required for this builder")


def cmd_rate(args, stdout):
    cert = Certificate(args.alpha, args.eps, args.p, provenance="command line")
    _emit(args, stdout, "rate.json", rate_from_certificate(cert, args.mu).to_dict())
    return EXIT_OK


def cmd_barycenter(args, stdout):
    try:
        pts = np.asarray(json.loads(args.points), dtype=float)
        w = np.asarray(json.loads(args.weights), dtype=float) if args.weights else \
            np.full(len(pts), 1.0 / len(pts))
    except (json.JSONDecodeError, ValueError) as exc:
        raise UsageError(f"points and weights must be JSON arrays: {exc}") from None
    if pts.ndim != 2:
        raise UsageError("points must be a list of coordinate lists")
    if args.kappa is None:
        space = Euclidean(pts.shape[1])
    else:
        center = pts.mean(axis=0)
        center /= np.linalg.norm(center) * math.sqrt(args.kappa)
        # the barycenter does not consult the cap; any admissible radius will do
        space = SphereCap(pts.shape[1] - 1, args.kappa, center, 0.99 * math.pi / (4 * math.sqrt(args.kappa)))
    z = barycenter(space, pts, w, args.p)
    obj = float(np.sum(w * np.asarray(space.distance(pts, z)) ** args.p))
    _emit(args, stdout, "barycenter.json", {"point": z, "objective": obj, "p": args.p})
    return EXIT_OK


def cmd_verify(args, stdout):
    seed = 0 if args.seed is None else args.seed
    rep = run_suite(seed=seed, samples=args.samples, only=args.only)
    _emit(args, stdout, "verify_report.json", rep)
    return EXIT_OK if rep["passed"] else EXIT_VERIFY


def _emit(args, stdout, name, obj):
    text = _dump(obj)
    if getattr(args, "out", None):
        _write(args.out, name, text)
    else:
        stdout.write(text)


# -- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="geoprox",
                                 description="Fixed-point experiments with prox mappings on "
                                             "2-uniformly convex model spaces.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, experiment=True):
        p.add_argument("--seed", type=int, default=None, help="sampling seed (u64)")
        p.add_argument("--out", default=None, help="output directory (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="json")
        if experiment:
            p.add_argument("--config", default=None, help="JSON config (schema geoprox-config/1)")
            p.add_argument("--preset", default=None,
                           help="preset name, optionally with arguments, e.g. 'two_halfspaces(pi/4)'")
            p.add_argument("--param", action="append", metavar="KEY=VALUE",
                           help="preset parameter (repeatable)")

    p = sub.add_parser("run", help="iterate and write a trace CSV plus a report JSON")
    common(p)
    p.set_defaults(func=cmd_run, format="csv")

    p = sub.add_parser("estimate", help="sampled firmness frontier and subregularity modulus")
    common(p)
    p.add_argument("--alpha", type=float, action="append", help="firmness constant (repeatable)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("certify", help="certificate from the closed-form calculus")
    common(p)
    p.add_argument("builder", choices=("prox", "prox_prox", "prox_after", "km", "projected_gradient",
                                       "prox_km_prox", "compose", "cyclic", "operator"))
    p.add_argument("--c", type=float, default=None, help="convexity constant (default 2)")
    p.add_argument("--kappa", type=float, default=None, help="curvature bound (with --delta)")
    p.add_argument("--delta", type=float, default=None, help="neighbourhood radius")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--alpha0", type=float, default=None)
    p.add_argument("--eps0", type=float, default=0.0)
    p.add_argument("--alpha1", type=float, default=None)
    p.add_argument("--eps1", type=float, default=0.0)
    p.add_argument("--n", type=int, default=2, help="number of sets for 'cyclic'")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("rate", help="predicted linear rate from (alpha, eps, mu)")
    common(p, experiment=False)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--p", type=float, default=2.0)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("barycenter", help="weighted p-barycenter of points")
    common(p, experiment=False)
    p.add_argument("--points", required=True, help="JSON list of points")
    p.add_argument("--weights", default=None, help="JSON list of weights (default uniform)")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--kappa", type=float, default=None,
                   help="points lie on the sphere of this curvature (default: Euclidean)")
    p.set_defaults(func=cmd_barycenter)

    p = sub.add_parser("verify", help="run the invariant suites; nonzero exit on failure")
    common(p, experiment=False)
    p.add_argument("--samples", type=int, default=1000, help="base sample size")
    p.add_argument("--only", action="append", help="run only the named check (repeatable)")
    p.set_defaults(func=cmd_verify)
    return ap


def run_cli(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, stdout)
    except cfgmod.ConfigError as exc:
        stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except (UsageError, DomainError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG


def main():
    sys.exit(run_cli())
