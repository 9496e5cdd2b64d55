"""``lambda-ext``: expansions, family solves and verification from the shell.

Exit status: 0 when everything asked for passed, 1 on a failing check,
2 for an unknown id, 3 when the computation itself aborted.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from decimal import Decimal, localcontext

from ._backend import fmt_q, to_q
from .catalog import OrderBeyondPrinted, UnknownEntry, default_catalog
from .families import FAMILIES, UnknownFamily, calibrated_family, get_def, raw_family, seed_for
from .odes import OdeSpec
from .series import Series
from .solver import CalibrationError, SeedAnsatz, SolverError, solve_family
from .verification import UnknownCheck, gb_check, load_manifest, meets_expectation, run_check, run_suite

SCHEMA_VERSION = 1

EXIT_OK, EXIT_FAIL, EXIT_UNKNOWN, EXIT_COMPUTE = 0, 1, 2, 3


class UsageError(Exception):
    """Bad id or argument; maps to exit status 2."""


# -- rendering ---------------------------------------------------------------

def _approx(q, k: int) -> str:
    q = to_q(q)
    with localcontext() as ctx:
        ctx.prec = k + 4
        d = Decimal(int(q.numerator)) / Decimal(int(q.denominator))
    return format(d, f".{k}g")


def _approx_coeff(s: Series, n: int, k: int) -> str:
    c = s[n]
    if s.param is None:
        return _approx(c, k)
    parts = []
    for i, x in enumerate(c.coeffs):
        if not x:
            continue
        mag = _approx(abs(x), k)
        body = mag if i == 0 else (f"{mag}*{s.param}" if i == 1 else f"{mag}*{s.param}^{i}")
        parts.append(("-" if x < 0 else "+", body))
    if not parts:
        return "0"
    out = ("-" if parts[0][0] == "-" else "") + parts[0][1]
    for sign, body in parts[1:]:
        out += f" {sign} {body}"
    return out


def _series_lines(s: Series, decimal: int | None) -> list[str]:
    out = []
    for n in range(s.order + 1):
        line = f"t^{n} : {s.coeff_str(n)}"
        if decimal:
            line += f"    [approx. {_approx_coeff(s, n, decimal)}]"
        out.append(line)
    return out


def _series_json(s: Series, decimal: int | None) -> dict:
    obj = s.to_json()
    if decimal:
        obj["approximations"] = [_approx_coeff(s, n, decimal) for n in range(s.order + 1)]
        obj["approximation_digits"] = decimal
    return obj


def _csv(rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue().rstrip("\n")


def _series_csv(s: Series, decimal: int | None) -> str:
    head = ["order", "coefficient"] + (["approximation"] if decimal else [])
    rows = [head]
    for n in range(s.order + 1):
        rows.append([n, s.coeff_str(n)] + ([_approx_coeff(s, n, decimal)] if decimal else []))
    return _csv(rows)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


# -- argument helpers --------------------------------------------------------

def _rational(text: str):
    try:
        return to_q(text.strip())
    except (ValueError, ZeroDivisionError, TypeError):
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}") from None


def _assignment(text: str):
    name, sep, value = text.partition("=")
    if not sep:
        return None, _rational(text)
    return name.strip(), _rational(value)


def _specialize(s: Series, params: list) -> Series:
    for name, value in params:
        if s.param is None:
            raise UsageError(f"series has no parameter to assign ({name or 'value'}={fmt_q(value)})")
        if name is not None and name != s.param:
            raise UsageError(f"series parameter is {s.param!r}, not {name!r}")
        s = s.specialize(value)
    return s


def _reference_owner(ref_id: str):
    for fd in FAMILIES.values():
        for pname, rid in fd.references.items():
            if rid == ref_id:
                return fd.name, pname
    return None


# -- verbs -------------------------------------------------------------------

def _target_series(target: str, order: int) -> tuple[Series, str]:
    cat = default_catalog()
    if target in cat:
        entry = cat.get(target)
        if entry.kind == "reference_series":
            try:
                return cat.reference_series(target, order), "printed"
            except OrderBeyondPrinted:
                owner = _reference_owner(target)
                if owner is None:
                    raise
                fam, pname = owner
                return calibrated_family(fam, order, pname).series, f"calibrated family {fam}"
        if entry.kind in ("ek_polynomial", "alg_expr"):
            return cat.series(target, order), "closed form"
        raise UsageError(f"{target} is a {entry.kind} entry and has no series")
    try:
        fd = get_def(target)
    except UnknownFamily:
        raise UsageError(f"unknown id {target!r} (neither a catalog entry nor a family)") from None
    if fd.references:
        return calibrated_family(target, order).series, f"calibrated family {target}"
    return raw_family(target, order).series, f"family {target}"


def cmd_series(args) -> int:
    s, source = _target_series(args.target, args.order)
    s = _specialize(s, args.param)
    if args.output == "json":
        obj = _series_json(s, args.decimal)
        obj.update(schema_version=SCHEMA_VERSION, id=args.target, source=source)
        print(_dump(obj))
    elif args.output == "csv":
        print(_series_csv(s, args.decimal))
    else:
        print("\n".join(_series_lines(s, args.decimal)))
    return EXIT_OK


def _triple(text: str):
    bits = [b for b in text.replace(",", " ").split() if b]
    if len(bits) != 3:
        raise argparse.ArgumentTypeError("expected 'a,b,kappa'")
    return tuple(_rational(b) for b in bits)


def cmd_solve(args) -> int:
    try:
        spec = OdeSpec(args.equation, args.N, args.M)
    except ValueError as e:
        raise UsageError(str(e)) from None
    if args.seed is not None:
        fd = get_def(args.seed)
        seed = seed_for(fd)
    elif args.normalization is not None:
        a, b, k = args.normalization
        seed = SeedAnsatz(args.valuation, args.leading, (a, b), k)
    else:
        matches = [fd for fd in FAMILIES.values() if fd.spec == spec]
        if not matches and spec.family == "DIAG_PVI":
            matches = [get_def(f"C{spec.N}{spec.N}")]
        if not matches:
            raise UsageError(f"no stored seed for {spec.label()}; pass --seed or --normalization")
        seed = seed_for(matches[0])
    if args.normalization is not None and args.seed is not None:
        a, b, k = args.normalization
        seed = SeedAnsatz(seed.valuation, seed.leading, (a, b), k, seed.branch_terms, seed.root)
    fam = solve_family(spec, seed, args.order)
    s = _specialize(fam.series, args.param)
    if args.output == "json":
        print(_dump({
            "schema_version": SCHEMA_VERSION,
            "type": "family",
            "equation": spec.label(),
            "normalization": [fmt_q(seed.a), fmt_q(seed.b), fmt_q(seed.k)],
            "valuation": seed.valuation,
            "leading": fmt_q(to_q(seed.leading)),
            "free_parameter": fam.parameter_name,
            "degeneracy_orders": list(fam.degeneracy_orders),
            "series": _series_json(s, args.decimal),
            "sigma": fam.sigma.to_json(),
        }))
        return EXIT_OK
    if args.output == "csv":
        print(_series_csv(s, args.decimal))
        return EXIT_OK
    print(f"family of {spec.label()} to order {args.order}")
    print(f"normalization: a={fmt_q(seed.a)} b={fmt_q(seed.b)} kappa={fmt_q(seed.k)}; "
          f"F = {fmt_q(to_q(seed.leading))}*t^{seed.valuation}*(1 + ...)")
    for n in fam.degeneracy_orders:
        print(f"degeneracy at n={n}")
    print(f"free parameter: {fam.parameter_name or 'none'}")
    print("\n".join(_series_lines(s, args.decimal)))
    return EXIT_OK


def _report_row(rep) -> list:
    fm = rep.first_mismatch
    return [rep.check_id, rep.status, rep.checked_order,
            "" if fm is None else fm[0], "" if fm is None else fm[1], "" if fm is None else fm[2], rep.notes]


_REPORT_HEAD = ["check_id", "status", "checked_order", "mismatch_order", "expected", "got", "notes"]


def _report_text(rep) -> str:
    line = f"{rep.check_id}: {rep.status.upper()} (checked to order {rep.checked_order})"
    if rep.first_mismatch is not None:
        n, exp, got = rep.first_mismatch
        line += f"\n  first mismatch at t^{n}: expected {exp}, got {got}"
    if rep.notes:
        line += f"\n  {rep.notes}"
    return line


def cmd_check(args) -> int:
    rep = run_check(args.target, args.order)
    if args.output == "json":
        obj = rep.to_json()
        obj["schema_version"] = SCHEMA_VERSION
        print(_dump(obj))
    elif args.output == "csv":
        print(_csv([_REPORT_HEAD, _report_row(rep)]))
    else:
        print(_report_text(rep))
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_suite(args) -> int:
    items = load_manifest(args.manifest)
    results = run_suite(items, args.order, args.jobs)
    ok = [meets_expectation(it, rep) for it, rep in results]
    if args.output == "json":
        print(_dump({
            "schema_version": SCHEMA_VERSION,
            "type": "suite",
            "all_as_expected": all(ok),
            "results": [dict(rep.to_json(), expected=it.expect,
                             expected_order=it.expect_order, as_expected=good)
                        for (it, rep), good in zip(results, ok)],
        }))
    elif args.output == "csv":
        rows = [_REPORT_HEAD + ["expected", "as_expected"]]
        rows += [_report_row(rep) + [it.expect, "yes" if good else "no"] for (it, rep), good in zip(results, ok)]
        print(_csv(rows))
    else:
        for (it, rep), good in zip(results, ok):
            mark = "ok  " if good else "BAD "
            extra = "" if it.expect == "pass" else f" (expected {it.expect})"
            tail = "" if rep.first_mismatch is None else f" at t^{rep.first_mismatch[0]}"
            print(f"{mark}{rep.check_id}: {rep.status}{tail}{extra}")
        print(f"{sum(ok)}/{len(ok)} checks as expected")
    return EXIT_OK if all(ok) else EXIT_FAIL


def cmd_gb(args) -> int:
    target = args.target
    cat = default_catalog()
    if target in cat and _reference_owner(target) is not None:
        fam, pname = _reference_owner(target)
        s = calibrated_family(fam, args.order, pname).series
    elif target in cat:
        s = cat.series(target, args.order)
    else:
        fd = get_def(target)
        s = (calibrated_family(target, args.order).series if fd.references
             else raw_family(target, args.order).series)
    if s.param is not None and args.param is None:
        raise UsageError(f"{target} depends on {s.param}; pass --param")
    rep = gb_check(s, args.param if args.param is not None else 0, max_rescale=args.max_rescale,
                   order=args.order, rescale=args.rescale)
    if args.output == "json":
        obj = rep.to_json()
        obj.update(schema_version=SCHEMA_VERSION, id=target, order=args.order)
        print(_dump(obj))
    elif args.output == "csv":
        obj = rep.to_json()
        print(_csv([list(obj), list(obj.values())]))
    else:
        print(f"{target} at {s.param or 'parameter'} = {fmt_q(rep.parameter_value)}, rescale t -> {rep.rescale_factor} t")
        print(f"integer prefix verified: {rep.verified_prefix} terms")
        if rep.notes:
            print(rep.notes)
    return EXIT_OK if rep.all_integer else EXIT_FAIL


# -- entry point ---------------------------------------------------------------

def _order(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("order must be at least 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", choices=("text", "json", "csv"), default="text")
    common.add_argument("--decimal", type=int, metavar="K",
                        help="append K-digit decimal approximations (marked as such)")

    p = argparse.ArgumentParser(prog="lambda-ext", description="Exact lambda-extension series and checks.")
    sub = p.add_subparsers(dest="verb", required=True)

    s = sub.add_parser("series", parents=[common], help="expand a catalog entry or family")
    s.add_argument("target")
    s.add_argument("--order", type=_order, default=10)
    s.add_argument("--param", type=_assignment, action="append", default=[], metavar="NAME=P/Q")
    s.set_defaults(run=cmd_series)

    s = sub.add_parser("solve", parents=[common], help="solve an equation for its one-parameter family")
    s.add_argument("equation", choices=("EQNMODD", "NONLINEAREQ", "DIAG_PVI", "FOURFACT"))
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--M", type=int)
    s.add_argument("--order", type=_order, default=10)
    s.add_argument("--seed", help="take the seed of a stored family (C05, f1, C22, ...)")
    s.add_argument("--normalization", type=_triple, metavar="A,B,KAPPA")
    s.add_argument("--valuation", type=int, default=0)
    s.add_argument("--leading", type=_rational, default=to_q(1))
    s.add_argument("--param", type=_assignment, action="append", default=[], metavar="NAME=P/Q")
    s.set_defaults(run=cmd_solve)

    s = sub.add_parser("check", parents=[common], help="run one identity, residual or Toda check")
    s.add_argument("target")
    s.add_argument("--order", type=_order)
    s.set_defaults(run=cmd_check)

    s = sub.add_parser("suite", parents=[common], help="run a manifest of checks")
    s.add_argument("--manifest", help="manifest file (default: the bundled battery)")
    s.add_argument("--order", type=_order)
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(run=cmd_suite)

    s = sub.add_parser("gb", parents=[common], help="global boundedness: integer prefix after t -> N t")
    s.add_argument("target")
    s.add_argument("--param", type=_rational)
    s.add_argument("--order", type=_order, default=20)
    s.add_argument("--rescale", type=int)
    s.add_argument("--max-rescale", type=int, default=4096)
    s.set_defaults(run=cmd_gb)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.run(args)
    except (UnknownEntry, UnknownFamily, UnknownCheck, UsageError, OrderBeyondPrinted) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_UNKNOWN
    except (SolverError, CalibrationError, ArithmeticError, ValueError) as e:
        print(f"computation error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
