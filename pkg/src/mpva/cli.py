"""Command-line front end.

Exit codes: 0 all checks passed, 1 a verification failed, 2 usage or
configuration error.

``.mpva`` files describe one bracket::

    # comment
    eps eps+1;
    symbol g free;
    symbol F defined F[0]*g[0]^-1;
    mode 1: g[0]*g[1]*(F[0] + F[1]);
    mode 2: g[0]*g[2]*F[1];

Negative ``mode`` lines switch to a raw structure (no skewsymmetry normal form).
"""
from __future__ import annotations

import argparse
import json
import sys
from typing import Dict, List, Optional

from .diffalg import SymbolError, SymbolTable, TowerDepthError
from .exprtext import ParseError, format_expr, parse_declaration, parse_expr
from .families import TAGS, FamilyError, FamilySpec, build_family
from .lambda_bracket import (BracketStructure, format_lambda, generator_skew_residual,
                             jacobi_residual, master_bracket)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def parse_mpva(text: str) -> BracketStructure:
    table: Optional[SymbolTable] = None
    eps = None
    name = ""
    decls: List[str] = []
    modes: Dict[int, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not line.endswith(";"):
            raise ParseError(f"line {lineno}: missing ';'", 0)
        body = line[:-1].strip()
        head = body.split(None, 1)[0]
        rest = body[len(head):].strip()
        if head == "eps":
            eps = rest
        elif head == "name":
            name = rest
        elif head == "symbol":
            decls.append(line)
        elif head == "mode":
            k, sep, expr = rest.partition(":")
            if not sep:
                raise ParseError(f"line {lineno}: expected 'mode <k>: <expr>;'", 0)
            try:
                modes[int(k)] = expr.strip()
            except ValueError:
                raise ParseError(f"line {lineno}: bad mode index {k.strip()!r}", 0) from None
        else:
            raise ParseError(f"line {lineno}: unknown directive {head!r}", 0)
    table = SymbolTable(eps)
    for d in decls:
        parse_declaration(d, table)
    parsed = {k: parse_expr(v, table) for k, v in modes.items()}
    if 0 in parsed and not parsed[0].is_zero():
        raise ParseError("mode 0 must vanish", 0)
    if any(k < 0 for k in parsed):
        return BracketStructure.raw(parsed, name or "raw")
    return BracketStructure.from_modes(parsed, name)


def format_mpva(st: BracketStructure) -> str:
    lines = []
    if st.name:
        lines.append(f"name {st.name};")
    if st.eps.min_poly is not None:
        lines.append(f"eps {st.eps.name};")
    lines += st.table.declarations()[1:]
    modes = st.all_modes() if st.is_raw else st.modes
    for k, v in sorted(modes.items()):
        lines.append(f"mode {k}: {format_expr(v)};")
    return "\n".join(lines) + "\n"


def _structure(args) -> BracketStructure:
    if getattr(args, "expr_file", None):
        with open(args.expr_file) as fh:
            return parse_mpva(fh.read())
    if not args.family:
        raise UsageError("give --family or --expr-file")
    params = {}
    spec = FamilySpec(args.family, args.order, args.eps, args.g or "free", args.F or "defined",
                      params)
    return build_family(spec)


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def cmd_verify(args) -> int:
    st = _structure(args)
    jac = jacobi_residual(st)
    skew = generator_skew_residual(st)
    if args.format == "json":
        report = {
            "name": st.name, "order": st.order, "eps_min_poly": st.eps.name,
            "jacobi_residual": {f"{m},{n}": format_expr(v) for (m, n), v in jac.items()},
            "skew_residual": {str(k): format_expr(v) for k, v in skew.items()},
            "passed": not jac and not skew,
        }
        _emit(args, json.dumps(report, indent=2, sort_keys=True))
    else:
        lines = [f"structure: {st.name or 'unnamed'} (order {st.order}, eps {st.eps.name})"]
        lines.append("skew residual: 0" if not skew else
                     "skew residual: " + format_lambda(skew))
        if not jac:
            lines.append("jacobi residual: 0")
        else:
            lines.append(f"jacobi residual: {len(jac)} nonzero coefficients")
            for (m, n), v in jac.items():
                lines.append(f"  lambda^{m} mu^{n}: {format_expr(v)}")
        _emit(args, "\n".join(lines))
    return EXIT_OK if not jac and not skew else EXIT_FAIL


def _hier_symbols(args):
    from .lenard import make_symbols
    return make_symbols(args.g or "free", args.F or "defined")


def cmd_hierarchy(args) -> int:
    from .lenard import RecursionBroken, involution_matrix, run_hierarchy
    table, g, F = _hier_symbols(args)
    wanted = {c.strip() for c in (args.check or "").split(",") if c.strip()}
    unknown = wanted - {"involution", "closed", "exact", "lenard"}
    if unknown:
        raise UsageError(f"unknown checks: {', '.join(sorted(unknown))}")
    try:
        st = run_hierarchy(g, F, args.depth)
    except RecursionBroken as exc:
        _emit(args, f"recursion broken: {exc}")
        return EXIT_FAIL
    ok = all(all(v for k, v in step.items()) for step in st.ledger)
    report = st.to_json()
    if "involution" in wanted:
        inv = {}
        for which in ("K", "H2"):
            M = involution_matrix(st, which)
            bad = [[m, n, str(e)] for m, row in enumerate(M) for n, e in enumerate(row) if not e.is_zero()]
            inv[which] = bad
            ok = ok and not bad
        report["involution_nonzero"] = inv
    if args.format == "json":
        report["passed"] = ok
        _emit(args, json.dumps(report, indent=2, sort_keys=True))
    else:
        lines = [f"K  = {report['K']}", f"H2 = {report['H2']}"]
        for step in report["steps"]:
            checks = step["checks"]
            if wanted:
                checks = {k: v for k, v in checks.items()
                          if k in wanted or k.startswith("reference") or k == "order_growth"}
            flags = " ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in checks.items())
            lines.append(f"xi_{step['j']}: {step['xi']}")
            lines.append(f"    density ({step['density_source']}): {step['density']}")
            lines.append(f"    {flags}")
        if "involution" in wanted:
            for which, bad in report["involution_nonzero"].items():
                lines.append(f"involution {which}: " + ("all zero" if not bad else f"{len(bad)} nonzero"))
        lines.append("hierarchy: " + ("all checks passed" if ok else "FAILED"))
        _emit(args, "\n".join(lines))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_lax(args) -> int:
    from .lenard import lax_alignment, lax_commutator, lax_residue_density, run_hierarchy
    from .varops import check_exact
    table, g, F = _hier_symbols(args)
    depth = args.depth
    st = run_hierarchy(g, F, depth + 1)
    rows = []
    ok = True
    for N in range(0, depth + 1):
        C = lax_commutator(F, N)
        support = sorted(C.coeffs)
        row = {"N": N, "support": support}
        if support == [-1]:
            row["alignment"] = lax_alignment(st, N)
            row["matched"] = [k for k, v in row["alignment"].items() if v]
        else:
            row["alignment"] = {}
            row["matched"] = []
        if N >= 1:
            row["residue_exact"] = check_exact(lax_residue_density(F, N), st.xis[N])
            ok = ok and row["residue_exact"]
        ok = ok and support == [-1] and bool(row["matched"])
        rows.append(row)
    if args.format == "json":
        _emit(args, json.dumps({"rows": rows, "passed": ok}, indent=2, sort_keys=True))
    else:
        lines = ["desk check of the Lax-form conjecture (finite N only)"]
        for r in rows:
            lines.append(f"N={r['N']}: support {r['support']}, matches {', '.join(r['matched']) or 'none'}"
                         + (f", residue exact={r['residue_exact']}" if "residue_exact" in r else ""))
        lines.append("lax-check: " + ("passed" if ok else "FAILED"))
        _emit(args, "\n".join(lines))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_simulate(args) -> int:
    import numpy as np

    from .lenard import make_symbols, reference_density, run_hierarchy
    from .numsim import LatticeState, Realization, SymbolBinding, conservation_report, integrate_flow
    from .numsim import Compiled, write_csv
    if (args.g or "u") != "u" or (args.F or "u") != "u":
        raise UsageError("simulate supports the concrete realization g = F = u only")
    if args.format == "csv" and not args.out:
        raise UsageError("--format csv needs --out")
    if args.flow < 0:
        raise UsageError("--flow must be >= 0")
    table, g, F = make_symbols("u", "u")
    st = run_hierarchy(g, F, max(3, args.flow))
    bind = SymbolBinding({"Phi": Realization.log(0.5)})
    state = LatticeState.random(args.lattice, args.seed)
    P = st.flows[args.flow]
    dens = {"u": table.u(), "half_log_u": reference_density(F, g, 0),
            "h2": st.densities[2], "h3": st.densities[3]}
    T = args.dt * args.steps
    rows = conservation_report({f"P{args.flow}": P}, dens, state, args.dt, T, bind)
    ok = all(r["drift"] <= args.tol for r in rows)
    if args.format == "csv":
        traj = integrate_flow(P, state, args.dt, args.steps, bind)
        funcs = {k: np.array([Compiled(h, bind)(u).sum() for u in traj]) for k, h in dens.items()}
        write_csv(args.out, traj, args.dt, funcs)
    elif args.format == "json":
        _emit(args, json.dumps({"lattice": args.lattice, "dt": args.dt, "steps": args.steps,
                                "seed": args.seed, "rows": rows, "tol": args.tol, "passed": ok},
                               indent=2, sort_keys=True))
    else:
        lines = [f"flow P{args.flow}, M={args.lattice}, dt={args.dt}, steps={args.steps}, seed={args.seed}"]
        for r in rows:
            lines.append(f"  {r['density']:>12}: drift {r['drift']:.3e}")
        lines.append("simulate: " + ("conserved" if ok else "drift above tolerance"))
        _emit(args, "\n".join(lines))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_bracket(args) -> int:
    st = _structure(args)
    a = parse_expr(args.lhs, st.table)
    b = parse_expr(args.rhs, st.table)
    out = master_bracket(a, b, st)
    if args.format == "json":
        _emit(args, json.dumps({str(k): format_expr(v) for k, v in out.items()}, indent=2, sort_keys=True))
    else:
        _emit(args, format_lambda(out))
    return EXIT_OK


def cmd_export(args) -> int:
    st = _structure(args)
    _emit(args, format_mpva(st) if args.format == "mpva" else st.dumps())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mpva", description="Multiplicative Poisson bracket toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def structure_flags(sp):
        sp.add_argument("--family", choices=TAGS)
        sp.add_argument("--order", type=int)
        sp.add_argument("--eps")
        sp.add_argument("--g", choices=("free", "u"))
        sp.add_argument("--F", choices=("defined", "u"))
        sp.add_argument("--expr-file")

    def common(sp, formats=("text", "json")):
        sp.add_argument("--format", choices=formats, default=formats[0])
        sp.add_argument("--out")

    v = sub.add_parser("verify", help="skewsymmetry and Jacobi residuals of a bracket")
    structure_flags(v)
    common(v)
    v.set_defaults(func=cmd_verify)

    h = sub.add_parser("hierarchy", help="Lenard-Magri recursion with exact checks")
    h.add_argument("--g", choices=("free", "u"))
    h.add_argument("--F", choices=("defined", "u"))
    h.add_argument("--depth", type=int, default=6)
    h.add_argument("--check", default="")
    common(h)
    h.set_defaults(func=cmd_hierarchy)

    lx = sub.add_parser("lax-check", help="compare Lax flows and residues with the hierarchy")
    lx.add_argument("--g", choices=("free", "u"), default="u")
    lx.add_argument("--F", choices=("defined", "u"), default="u")
    lx.add_argument("--depth", type=int, default=4)
    common(lx)
    lx.set_defaults(func=cmd_lax)

    s = sub.add_parser("simulate", help="RK4 conservation run of a hierarchy flow (g = F = u)")
    s.add_argument("--g", choices=("u",))
    s.add_argument("--F", choices=("u",))
    s.add_argument("--flow", type=int, default=0)
    s.add_argument("--lattice", type=int, default=32)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--steps", type=int, default=10000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tol", type=float, default=1e-7)
    common(s, ("text", "json", "csv"))
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bracket", help="lambda-bracket of two expressions")
    b.add_argument("lhs")
    b.add_argument("rhs")
    structure_flags(b)
    common(b)
    b.set_defaults(func=cmd_bracket)

    e = sub.add_parser("export", help="write a family as JSON or .mpva text")
    structure_flags(e)
    common(e, ("json", "mpva"))
    e.set_defaults(func=cmd_export)
    return p


def dispatch(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, FamilyError, ParseError, SymbolError, TowerDepthError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(dispatch())
