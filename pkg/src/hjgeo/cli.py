"""Command-line entry point: validate, solve, verify, geodesic, demo.

Exit codes: 0 success, 1 a check failed, 2 usage error.  Results go to
stdout, diagnostics to stderr.  All sampling is seeded (default seed 0).
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import models
from .geodesics import integrate, jacobi_consistency, killing_momenta, matched_state, write_csv
from .liealg import check_polarization, lie_index
from .reconstruct import (CompleteIntegral, OutsideDomainError, alpha_names, hj_residual, nondegeneracy,
                          sample_admissible, sweep_line)
from .reduce import EmptyDomainError
from .special import EllipticDomainError, mtt_reduced_closed_form

RESIDUAL_TOL = 1e-8
DET_TOL = 1e-6


class UsageError(Exception):
    pass


# -- output helpers ----------------------------------------------------------

def format_table(headers, rows, fmt: str = "text") -> str:
    rows = [[_cell(v) for v in r] for r in rows]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(headers)
        w.writerows(rows)
        return buf.getvalue().rstrip("\n")
    widths = [max(len(str(h)), *(len(r[i]) for r in rows)) if rows else len(str(h)) for i, h in enumerate(headers)]
    lines = ["  ".join(str(h).rjust(w) for h, w in zip(headers, widths))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(lines)


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{v:.10g}"
    return str(v)


def threads() -> int:
    try:
        return max(0, int(os.environ.get("HJGEO_THREADS", "0")))
    except ValueError:
        return 0


def ordered_map(fn, items):
    """map() over a thread pool capped by HJGEO_THREADS; results keep input order."""
    items = list(items)
    n = threads()
    if n <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# -- argument handling ----------------------------------------------------------

def _constants(args) -> dict:
    out = {}
    for item in getattr(args, "const", None) or []:
        name, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--const expects NAME=VALUE, got {item!r}")
        try:
            out[name.strip()] = float(val)
        except ValueError:
            raise UsageError(f"--const {name}: {val!r} is not a number") from None
    if getattr(args, "k", None) is not None:
        out["k"] = args.k
    return out


def _model(args):
    try:
        return models.resolve(args.model, _constants(args) or None)
    except (models.ModelError, OSError) as err:
        raise UsageError(str(err)) from None


def _alpha_from(args, model) -> np.ndarray:
    if getattr(args, "alpha", None):
        return np.array(args.alpha, dtype=float)
    if args.j is None:
        raise UsageError("give --alpha or --j (with --q and --m for a one-dimensional Q)")
    j = list(args.j)
    if len(j) != model.s:
        raise UsageError(f"--j needs {model.s} values, got {len(j)}")
    if model.r == 0:
        return np.array(j, dtype=float)
    q = args.q if args.q is not None else [0.0] * model.r
    if args.m is None:
        raise UsageError("--m is required")
    return np.array(list(q) + j + [args.m], dtype=float)


def _build(model, alpha, branch):
    try:
        return CompleteIntegral.build(model, alpha, branch)
    except (EmptyDomainError, OutsideDomainError, ValueError) as err:
        raise UsageError(f"alpha = {list(map(float, alpha))}: {err}") from None


# -- subcommands --------------------------------------------------------------------

def cmd_validate(args, out) -> int:
    spec = _model(args)
    rep = models.validate_all(spec, args.samples, args.seed)
    if args.format == "csv":
        rows = [(c.name, "PASS" if c.passed else "FAIL", f"{c.residual:.6e}", "" if c.tol is None else f"{c.tol:g}")
                for c in rep.checks]
        print(format_table(["check", "status", "residual", "tol"], rows, "csv"), file=out)
    else:
        print(rep.format(), file=out)
        print(f"{'all checks passed' if rep.passed else f'{len(rep.failures())} check(s) failed'}", file=out)
    return 0 if rep.passed else 1


def cmd_solve(args, out) -> int:
    model = _model(args)
    alpha = _alpha_from(args, model)
    S = _build(model, alpha, args.branch)
    names = alpha_names(model)
    print(f"model {model.name}  " + "  ".join(f"{k}={v:.10g}" for k, v in zip(names, alpha)), file=out)
    if S.reduced is not None:
        lo, hi = S.reduced.domain
        print(f"reduced domain ({lo:.12g}, {hi:.12g})  branch {'+' if S.branch > 0 else '-'}", file=out)
    print(f"S(x0) = {S.value(model.x0):.15g}", file=out)
    rng = np.random.default_rng(args.seed)
    rows = []
    tries = 0
    xb = model.x_box
    while len(rows) < args.points and tries < 100 * args.points:
        tries += 1
        x = rng.uniform(xb[:, 0], xb[:, 1])
        if not S.admissible(x, 0.01):
            continue
        rows.append([*x, S.value(x), hj_residual(S, x).value])
    headers = [f"x{i}" for i in range(1, model.n + 1)] + ["S", "residual"]
    table = format_table(headers, rows, args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(table + "\n")
        print(f"wrote {len(rows)} rows to {args.out}", file=out)
    else:
        print(table, file=out)
    return 0


def _verify_one(item):
    x, S = item
    try:
        res = hj_residual(S, x).value
        nd = nondegeneracy(S, x)
        return res, nd.det, nd.reliable
    except (OutsideDomainError, ArithmeticError, ValueError):
        return math.nan, math.nan, False


def cmd_verify(args, out) -> int:
    model = _model(args)
    rng = np.random.default_rng(args.seed)
    samples = [sample_admissible(model, rng, args.branch) for _ in range(args.samples)]
    results = ordered_map(_verify_one, samples)
    worst = 0.0
    min_det = math.inf
    unreliable = 0
    rows = []
    for (x, S), (res, det, reliable) in zip(samples, results):
        worst = max(worst, res) if not math.isnan(res) else math.inf
        min_det = min(min_det, abs(det)) if not math.isnan(det) else 0.0
        unreliable += not reliable
        if args.format == "csv":
            rows.append([*(f"{v:.17g}" for v in x), *(f"{v:.17g}" for v in S.alpha), f"{res:.6e}", f"{det:.6e}"])
        else:
            print(sweep_line(x, S.alpha, res, det), file=out)
    if args.format == "csv":
        headers = [f"x{i}" for i in range(1, model.n + 1)] + alpha_names(model) + ["residual", "det"]
        print(format_table(headers, rows, "csv"), file=out)
    ok = worst < RESIDUAL_TOL and min_det > DET_TOL
    summary = (f"samples {args.samples} seed {args.seed} max residual {worst:.6e} (tol {RESIDUAL_TOL:g}) "
               f"min |det| {min_det:.6e} (tol {DET_TOL:g}) unreliable {unreliable} {'PASS' if ok else 'FAIL'}")
    print(summary, file=out if args.format != "csv" else sys.stderr)
    return 0 if ok else 1


def cmd_geodesic(args, out) -> int:
    model = _model(args)
    alpha = _alpha_from(args, model)
    S = _build(model, alpha, args.branch)
    x0 = model.x0 if args.x is None else np.array(args.x, dtype=float)
    if len(x0) != model.n:
        raise UsageError(f"--x needs {model.n} values, got {len(x0)}")
    if not S.admissible(x0):
        raise UsageError(f"x = {list(map(float, x0))} is outside the admissible domain of S")
    if not args.dt > 0 or args.t_max < 0:
        raise UsageError("need --dt > 0 and --t-max >= 0")
    traj = integrate(model, matched_state(S, x0), args.t_max, args.dt)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_csv(traj, fh)
        print(f"wrote {len(traj)} samples to {args.out}", file=out)
    jac = jacobi_consistency(S, traj, stride=max(1, args.stride))
    print(f"max |H(t) - H(0)| = {float(np.abs(traj.H - traj.H[0]).max()):.6e}", file=out)
    if model.killing_set is not None:
        K = killing_momenta(model, traj)
        print(f"max Killing momentum drift = {float(np.abs(K - K[0]).max()):.6e}", file=out)
    print(jac.report.format(), file=out)
    return 0 if jac.report.passed else 1


def cmd_demo(args, out) -> int:
    if args.name != "mtt":
        raise UsageError("only the mtt demo is available")
    spec = _model(argparse.Namespace(model="mtt", const=args.const, k=args.k))
    k = spec.constants["k"]
    C = spec.structure_constants
    rows = []

    def row(name, value, passed):
        rows.append([name, value, "PASS" if passed else "FAIL"])

    val = models.validate_all(spec, 50, args.seed)
    row("model validation", f"{len(val.checks) - len(val.failures())}/{len(val.checks)} checks", val.passed)
    ind = lie_index(C, 20, args.seed)
    row("index of the algebra", str(ind), ind == 2)
    lam = spec.orbit([1.0, -1.0])
    eye = np.eye(4)
    good, _ = check_polarization(C, eye[[0, 2, 3]], lam)
    bad, _ = check_polarization(C, eye[[1, 2]], lam)
    row("<e1,e3,e4> polarization", "accepted" if good else "rejected", good)
    row("<e2,e3> polarization", "accepted" if bad else "rejected", not bad)

    # numeric reduced solution against the elliptic closed form
    j1, j2, m = 1.0, -1.0, 0.0
    S = CompleteIntegral.build(spec, [0.0, j1, j2, m])
    lo, hi = S.reduced.domain
    worst = 0.0
    try:
        for qq in np.linspace(lo, hi, 23)[1:-1]:
            worst = max(worst, abs(S.reduced.value(qq) - mtt_reduced_closed_form(qq, j1, j2, m, k)))
        row("reduced S: quadrature vs elliptic", f"{worst:.3e}", worst < 1e-8)
    except EllipticDomainError as err:
        row("reduced S: quadrature vs elliptic", str(err), False)
    # theta+ = 1 for these parameters, so the turning points sit at +-1/k
    row("reduced domain (j=(1,-1), m=0)", f"({lo:.10f}, {hi:.10f})", max(abs(lo + 1 / k), abs(hi - 1 / k)) < 1e-10)

    rng = np.random.default_rng(args.seed)
    samples = [sample_admissible(spec, rng) for _ in range(args.samples)]
    res = ordered_map(_verify_one, samples)
    worst_res = max(r[0] for r in res)
    min_det = min(abs(r[1]) for r in res)
    row("max HJ residual", f"{worst_res:.3e}", worst_res < RESIDUAL_TOL)
    row("min |det d2S/dx dalpha|", f"{min_det:.3e}", min_det > DET_TOL)
    print(f"demo mtt  k={k:g}  seed={args.seed}", file=out)
    print(format_table(["quantity", "value", "status"], rows, args.format), file=out)
    return 0 if all(r[2] == "PASS" for r in rows) else 1


# -- parser ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hjgeo", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, model=True):
        if model:
            sp.add_argument("model", help="builtin name (mtt, flat4) or path to a .model file")
        sp.add_argument("--const", action="append", metavar="NAME=VALUE", help="override a model constant")
        sp.add_argument("--k", type=float, help="shortcut for --const k=VALUE")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--format", choices=("text", "csv"), default="text")

    def params(sp):
        sp.add_argument("--alpha", type=float, nargs="+", help="full parameter vector (q.., j.., m)")
        sp.add_argument("--j", type=float, nargs="+")
        sp.add_argument("--q", type=float, nargs="+")
        sp.add_argument("--m", type=float)
        sp.add_argument("--branch", choices=("+", "-"), default="+")

    sp = sub.add_parser("validate", help="run every structural check on a model")
    common(sp)
    sp.add_argument("--samples", type=int, default=100)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("solve", help="build S for given parameters and tabulate it")
    common(sp)
    params(sp)
    sp.add_argument("--points", type=int, default=5)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("verify", help="HJ residual and nondegeneracy at random admissible points")
    common(sp)
    sp.add_argument("--samples", type=int, default=100)
    sp.add_argument("--branch", choices=("+", "-"), default="+")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("geodesic", help="matched-momentum geodesic and Jacobi-constant drift")
    common(sp)
    params(sp)
    sp.add_argument("--x", type=float, nargs="+", help="initial point (default: base point)")
    sp.add_argument("--t-max", type=float, default=0.5)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--stride", type=int, default=10, help="check Jacobi constants every STRIDE steps")
    sp.add_argument("--out", help="CSV trajectory file")
    sp.set_defaults(func=cmd_geodesic)

    sp = sub.add_parser("demo", help="worked example")
    sp.add_argument("name", choices=("mtt",))
    common(sp, model=False)
    sp.add_argument("--samples", type=int, default=20)
    sp.set_defaults(func=cmd_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors itself
        return int(exc.code) if exc.code is not None else 0
    if getattr(args, "branch", "+") in ("+", "-"):
        args.branch = 1 if getattr(args, "branch", "+") == "+" else -1
    try:
        return args.func(args, sys.stdout)
    except UsageError as err:
        print(f"hjgeo: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
