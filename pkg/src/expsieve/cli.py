"""Command-line front end.

Exit status: 0 when a certificate or solution list was produced, 1 when the
run completed without one (survivors remain, verification failed), 2 for
usage errors, 3 when an enumeration budget was exceeded.
"""

from __future__ import annotations

import argparse
import sys
from math import lcm
from pathlib import Path

from . import baker, casework
from . import certificates as certs
from .constraints import ConstraintError, ConstraintSet
from .equation import EquationError, ParseError, brute_force_solutions, family_equation, parse_equation, render
from .rigorous import DEFAULT_PRECISION
from .sieve import BudgetExceeded, SieveError, auto_modulus_search, format_modulus, parse_modulus

EXIT_OK, EXIT_NO_CERT, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3


class UsageError(Exception):
    pass


# --- helpers --------------------------------------------------------------------------------


def _equation(args):
    if args.eq and args.family_e is not None:
        raise UsageError("give either --eq or --family-e, not both")
    if args.eq:
        return parse_equation(args.eq)
    if args.family_e is not None:
        return family_equation(args.family_e)[1]
    raise UsageError("an equation is required (--eq or --family-e)")


def _constraints(args) -> ConstraintSet:
    return ConstraintSet.parse(args.constraint or [])


def _moduli(args) -> list[int]:
    if not args.modulus:
        raise UsageError("at least one --modulus is required")
    return [parse_modulus(m) for m in args.modulus]


def _budget(args) -> int | None:
    if args.budget is not None and args.budget < 1:
        raise UsageError("--budget must be positive")
    return args.budget


def _emit(args, report: dict, text: str) -> None:
    body = certs.dumps(report) if args.format == "json" else text.rstrip("\n") + "\n"
    if args.out:
        Path(args.out).write_text(certs.dumps(report), encoding="utf-8")
        if args.format == "text":
            sys.stdout.write(body)
    else:
        sys.stdout.write(body)


def _solutions_text(eq, sols) -> str:
    if not sols:
        return f"{render(eq)}: no solutions in range\n"
    lines = [f"{render(eq)}: {len(sols)} solution(s)"]
    lines += ["  " + ", ".join(f"{k}={v}" for k, v in s.items()) for s in sols]
    return "\n".join(lines)


# --- commands -------------------------------------------------------------------------------


def cmd_solve(args) -> int:
    eq = _equation(args)
    if args.max_exp < 1:
        raise UsageError("--max-exp must be positive")
    sols = brute_force_solutions(eq, args.max_exp, _constraints(args), workers=args.threads)
    report = {"command": "solve", "equation": render(eq), "max_exp": args.max_exp,
              "constraints": [str(c) for c in _constraints(args)], "solutions": sols}
    _emit(args, report, _solutions_text(eq, sols))
    return EXIT_OK


def _sieve_command(args, moduli: list[int]) -> int:
    eq, cs = _equation(args), _constraints(args)
    out, cert = certs.certify_sieve(eq, moduli, cs, _budget(args), not args.no_size_filter)
    text = f"{render(eq)} mod {' then '.join(format_modulus(m) for m in out.moduli)}: {out}"
    _emit(args, cert, text)
    return EXIT_OK if out.is_certificate else EXIT_NO_CERT


def cmd_sieve(args) -> int:
    return _sieve_command(args, [lcm(*_moduli(args))])


def cmd_chain(args) -> int:
    return _sieve_command(args, _moduli(args))


def cmd_auto(args) -> int:
    eq, cs = _equation(args), _constraints(args)
    primes = [int(p) for p in args.primes.split(",") if p.strip()]
    caps = {}
    for item in args.cap or []:
        p, _, k = item.partition("=")
        try:
            caps[int(p)] = int(k)
        except ValueError:
            raise UsageError(f"--cap expects p=k, got {item!r}") from None
    sf = not args.no_size_filter
    found = auto_modulus_search(eq, primes, caps, _budget(args), cs, args.max_candidates, sf)
    report = {"command": "auto-modulus", "equation": render(eq), "primes": primes,
              "certificates": [certs.sieve_certificate(eq, o, cs, sf) for _, o in found]}
    text = "\n".join(f"{format_modulus(M)}: {o}" for M, o in found) or "no certifying modulus found"
    _emit(args, report, text)
    return EXIT_OK if found else EXIT_NO_CERT


def cmd_bounds(args) -> int:
    which, p = args.which, args.precision
    if which in ("padic-y", "padic-x", "rational", "s-threshold") and args.family_e is None:
        raise UsageError(f"--which {which} needs --family-e")
    e = args.family_e
    if which == "padic-y":
        rep = baker.padic_bound(baker.case_y_params(e, args.b1, args.b2), p)
    elif which == "padic-x":
        rep = baker.padic_bound(baker.case_x_params(e, args.b1, args.b2), p)
    elif which == "rational":
        rep = baker.rational_bound(baker.rational_case_params(e, args.b1, args.b2), p)
    elif which == "s-threshold":
        rep = baker.s_threshold_report(e, p)
    else:
        cap = args.max_exp
        ys = [baker.resolve_padic_y_case(k, p).to_json() for k in range(2, cap + 1)]
        xs = [baker.resolve_padic_x_case(k, p).to_json() for k in range(2, cap + 1)]
        best = baker.resolve_rational_case(cap, p)
        report = {
            "command": "bounds", "which": "resolve", "cap": cap, "precision": p,
            "padic_y": ys, "padic_x": xs, "rational_max_e": best,
            "padic_y_max_e": max([r["e"] for r in ys if r["verdict"] == "compatible"], default=1),
            "padic_x_max_e": max([r["e"] for r in xs if r["verdict"] == "compatible"], default=1),
        }
        text = (f"2-adic case compatible up to e = {report['padic_y_max_e']}, "
                f"3-adic up to e = {report['padic_x_max_e']}, rational up to e = {best}")
        _emit(args, report, text)
        return EXIT_OK
    cert = certs.bound_certificate(rep)
    _emit(args, cert, f"{rep.kind} bound {rep.bound_value} ({rep.regime} regime, {rep.precision} bits)")
    return EXIT_OK


def cmd_replay(args) -> int:
    if args.table == 1:
        es = [args.family_e] if args.family_e is not None else list(range(1, 9))
        if any(e not in casework.TABLE1_MODULI for e in es):
            raise UsageError("table 1 covers e = 1..8")
        rows = []
        for e in es:
            _, eq = family_equation(e)
            out, cert = certs.certify_sieve(eq, [casework.TABLE1_MODULI[e]], None, _budget(args))
            rows.append({"e": e, "expected": casework.TABLE1_OUTPUT[e], "outcome": str(out),
                         "ok": str(out) == casework.TABLE1_OUTPUT[e], "certificate": cert})
        text = "\n".join(f"e={r['e']} {r['certificate']['modulus']}: {r['outcome']}"
                         f" [{'ok' if r['ok'] else 'MISMATCH'}]" for r in rows)
    else:
        eq = parse_equation("3^x+4^y+5^z=6^w")
        rows = []
        for r in casework.replay_table2(eq):
            d = r.to_json()
            d["certificate"] = certs.sieve_certificate(eq, r.outcome, ConstraintSet.parse(r.clauses), False)
            rows.append(d)
        text = "\n".join(f"{r['label']}: {r['outcome']} [{'ok' if r['ok'] else 'MISMATCH'}]" for r in rows)
    _emit(args, {"command": "replay-table", "table": args.table, "rows": rows}, text)
    return EXIT_OK if all(r["ok"] for r in rows) else EXIT_NO_CERT


def cmd_pipeline(args) -> int:
    trace = casework.PipelineTrace()
    try:
        sols = casework.full_theorem_pipeline(trace)
    except casework.CaseworkError as exc:
        _emit(args, {"command": "pipeline", "error": str(exc), "trace": trace.to_json(args.timings)},
              f"pipeline aborted: {exc}")
        return EXIT_NO_CERT
    sols = sorted(sols)
    report = {"command": "pipeline", "solutions": [list(s) for s in sols], "trace": trace.to_json(args.timings)}
    lines = [f"{s['stage']}: {s['result']} ({s['claim']})" for s in trace.stages]
    lines += [f"solution (n,x,y,z,w) = {s}" for s in sols]
    _emit(args, report, "\n".join(lines))
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        res = certs.verify_certificate(args.certificate, _budget(args))
    except (certs.CertificateError, OSError) as exc:
        raise UsageError(f"cannot read certificate: {exc}") from exc
    _emit(args, {"command": "verify", **res.to_json()},
          ("valid: " if res.valid else "invalid: ") + res.reason
          + (f" (first difference: {res.first_difference})" if res.first_difference else ""))
    return EXIT_OK if res.valid else EXIT_NO_CERT


# --- parser ---------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--out", help="write the JSON report to this path")
    common.add_argument("--precision", type=int, default=DEFAULT_PRECISION, help="working precision in bits")
    common.add_argument("--threads", type=int, default=1, help="worker processes for brute force")
    common.add_argument("--budget", type=int, help="enumeration budget (overrides EXPSIEVE_BUDGET)")

    eqargs = argparse.ArgumentParser(add_help=False)
    eqargs.add_argument("--eq", help='equation text, e.g. "3^x+4^y+5^z=6^w"')
    eqargs.add_argument("--family-e", type=int, help="use the family member with N = 4^e")
    eqargs.add_argument("--constraint", action="append", help='restriction such as "x>=3" (repeatable)')
    eqargs.add_argument("--no-size-filter", action="store_true",
                        help="keep cells that are refuted only by comparing the sizes of the two sides")

    parser = argparse.ArgumentParser(prog="expsieve", description="Solve and certify purely exponential equations.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common, eqargs], help="exhaustive search in a box")
    p.add_argument("--max-exp", type=int, default=20)
    p.set_defaults(func=cmd_solve)

    for name, func, desc in (("sieve", cmd_sieve, "sieve modulo the lcm of the given moduli"),
                             ("chain", cmd_chain, "sieve with each modulus in turn")):
        p = sub.add_parser(name, parents=[common, eqargs], help=desc)
        p.add_argument("--modulus", action="append", help="modulus such as 2^2*7*13 (repeatable)")
        p.set_defaults(func=func)

    p = sub.add_parser("auto-modulus", parents=[common, eqargs], help="search for a certifying modulus")
    p.add_argument("--primes", default="2,3,5,7,11,13,17,19,23,29,31,37,41,43,47,53,59,61,67,71,73")
    p.add_argument("--cap", action="append", help="maximal exponent for a prime, as p=k (repeatable)")
    p.add_argument("--max-candidates", type=int)
    p.set_defaults(func=cmd_auto)

    p = sub.add_parser("bounds", parents=[common], help="linear-form bounds and their resolution")
    p.add_argument("--which", choices=("padic-y", "padic-x", "rational", "s-threshold", "resolve"), default="resolve")
    p.add_argument("--family-e", type=int)
    p.add_argument("--b1", type=int, default=1)
    p.add_argument("--b2", type=int, default=1)
    p.add_argument("--max-exp", type=int, default=casework.BAKER_CAP, help="largest e scanned by resolve")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("replay-table", parents=[common], help="replay the small-base tables")
    p.add_argument("--table", type=int, choices=(1, 2), default=1)
    p.add_argument("--family-e", type=int)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("pipeline", parents=[common], help="run the whole reduction and search")
    p.add_argument("--timings", action="store_true", help="include wall-clock times in the report")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("verify", parents=[common], help="re-check a certificate file")
    p.add_argument("certificate")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.precision < 80:
        print("expsieve: error: --precision must be at least 80 bits", file=sys.stderr)
        return EXIT_USAGE
    if args.threads < 1:
        print("expsieve: error: --threads must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"expsieve: malformed equation at position {exc.position}: {exc}", file=sys.stderr)
    except (EquationError, ConstraintError, UsageError, baker.BakerParamError) as exc:
        print(f"expsieve: error: {exc}", file=sys.stderr)
    except BudgetExceeded as exc:
        print(f"expsieve: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except SieveError as exc:
        print(f"expsieve: error: {exc}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
