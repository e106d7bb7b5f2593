"""Command line interface: ``genfeyn graphs|pressure|verify|cumulants``.

Every command prints a human readable table and can write a JSON side file
(``--json PATH``); both embed a run manifest.  Exit codes: 0 success,
2 validation error, 3 verification failure, 4 resource cap.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import os
import re
import sys
from dataclasses import asdict, dataclass
from itertools import combinations_with_replacement
from typing import Any, Sequence

import sympy

from . import __version__
from .cumulants import (
    CumulantTable,
    IncompleteTableError,
    MomentTable,
    cumulants_to_moments,
    dump_table,
    load_table_file,
    moments_to_cumulants,
    wick_monomial,
)
from .graphs import classify, enumerate_graphs, is_connected
from .keyvalue import KeyValueError, read_keyvalue
from .levy_models import GasParameters, ModelError
from .partitions import EnumerationLimitError, PartitionError
from .series_engine import MAX_ORDER_GAS, MAX_TOTAL_LEGS, OrderCapError, pressure_series, thin_edge_shape
from .verify import SUITES, run_suite

EXIT_OK, EXIT_VALIDATION, EXIT_VERIFY, EXIT_CAP = 0, 2, 3, 4


class ValidationError(ValueError):
    pass


class CapError(RuntimeError):
    pass


# ------------------------------------------------------------ manifest
@dataclass
class RunManifest:
    command: str
    parameters: dict[str, Any]
    input_digest: str | None
    seed: int | None
    version: str
    timestamp: str


def _digest(path: str | None) -> str | None:
    if not path:
        return None
    with open(path, "rb") as fh:
        return "sha256:" + hashlib.sha256(fh.read()).hexdigest()


def _timestamp(override: str | None) -> str:
    if override:
        return override
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = _dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc) if epoch else _dt.datetime.now(_dt.timezone.utc)
    return when.replace(microsecond=0).isoformat()


def make_manifest(args: argparse.Namespace, input_path: str | None = None) -> RunManifest:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "json", "timestamp")}
    return RunManifest(args.command, params, _digest(input_path), getattr(args, "seed", None),
                       __version__, _timestamp(args.timestamp))


def _emit(args: argparse.Namespace, manifest: RunManifest, header: Sequence[str], rows: list[Sequence[Any]],
          payload: dict[str, Any], footer: Sequence[str] = ()) -> None:
    print(f"# genfeyn {manifest.version} {manifest.command}  {manifest.timestamp}")
    if manifest.input_digest:
        print(f"# input {manifest.input_digest}")
    if rows:
        cells = [list(map(str, header))] + [[str(c) for c in r] for r in rows]
        widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
        for j, r in enumerate(cells):
            print("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
            if j == 0:
                print("  ".join("-" * w for w in widths))
    else:
        print("(no entries)")
    for line in footer:
        print(line)
    if args.json:
        doc = {"manifest": asdict(manifest), **payload}
        with open(args.json, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")


# ------------------------------------------------------------ interaction specs
_TERM = re.compile(r"^(?:(?P<coef>[0-9./]+)\s*\*?\s*)?phi(?:\^(?P<p>\d+))?$")


def parse_interaction(text: str) -> tuple[dict[int, sympy.Expr], bool]:
    """Parse ``"coeff*phi^p + ..."``; wrapping a term in ``:...:`` marks Wick
    ordering.  Coefficients may be omitted (formal coupling lambda_p) or be
    positive rationals.  Returns (couplings, wick_ordered)."""
    out: dict[int, sympy.Expr] = {}
    marks: set[bool] = set()
    for raw in text.split("+"):
        t = raw.strip().replace(" ", "")
        wick = t.startswith(":") and t.endswith(":") and len(t) > 2
        if wick:
            t = t[1:-1]
        elif ":" in t:
            raise ValidationError(f"unbalanced Wick marker in {raw.strip()!r}")
        m = _TERM.match(t)
        if not m:
            raise ValidationError(f"cannot parse interaction term {raw.strip()!r}")
        p = int(m.group("p") or 1)
        if p in out:
            raise ValidationError(f"power {p} appears twice")
        out[p] = sympy.Rational(m.group("coef")) if m.group("coef") else sympy.Symbol(f"lambda_{p}")
        marks.add(wick)
    if len(marks) > 1:
        raise ValidationError("either all terms or none must be Wick ordered")
    return out, marks == {True}


# ------------------------------------------------------------ commands
def cmd_graphs(args: argparse.Namespace) -> int:
    couplings, wick = parse_interaction(args.interaction)
    wick = wick or args.wick
    arities = sorted(p for p in couplings if p >= 1)
    if args.order < 0:
        raise ValidationError("order must be nonnegative")
    rows, records = [], []
    if args.order > 0:
        for ar in combinations_with_replacement(arities, args.order):
            legs = args.outer + sum(ar)
            if legs > MAX_TOTAL_LEGS:
                raise CapError(f"order {args.order} with arities {ar} needs {legs} labels (cap {MAX_TOTAL_LEGS})")
            stream = enumerate_graphs(list(ar), args.outer, connected=args.connected, wick=wick,
                                      even_only=args.even_only)
            for cls in classify(stream):
                g = cls.representative
                shape = ""
                if args.outer == 0 and set(ar) == {2} and is_connected(g) and all(len(e) % 2 == 0 for e in g.empties):
                    try:
                        shape = str(thin_edge_shape(g))
                    except Exception:
                        shape = ""
                rec = {"arities": list(ar), "canonical_key": repr(cls.canonical_key), "multiplicity": cls.multiplicity,
                       "empty_sizes": sorted(len(e) for e in g.empties), "shape": shape, "graph": g.to_dict()}
                records.append(rec)
                rows.append([len(records), "x".join(map(str, ar)), cls.multiplicity,
                             ",".join(map(str, rec["empty_sizes"])), shape])
    footer = [f"{len(records)} classes, {sum(r['multiplicity'] for r in records)} labelled graphs"]
    _emit(args, make_manifest(args), ["id", "arities", "u", "empty sizes", "V'"], rows, {"classes": records}, footer)
    return EXIT_OK


_PARAM_KEYS = ("beta", "z", "sigma", "c", "lambda2", "m0")


def _gas_params(path: str | None) -> GasParameters:
    if not path:
        return GasParameters.symbolic()
    doc = read_keyvalue(path)
    unknown = set(doc) - set(_PARAM_KEYS)
    if unknown:
        raise ValidationError(f"{path}: unknown keys {sorted(unknown)}")
    sym = GasParameters.symbolic()
    vals = {k: (sympy.nsimplify(doc[k]) if k in doc else getattr(sym, k)) for k in _PARAM_KEYS}
    return GasParameters(**vals)


def cmd_pressure(args: argparse.Namespace) -> int:
    params = _gas_params(args.params)
    if args.order > MAX_ORDER_GAS and args.exact:
        raise CapError(f"closed-form mode is limited to order {MAX_ORDER_GAS}")
    report = pressure_series(params, args.order, quartic=args.quartic)
    rows, records = [], []
    for t in report.terms:
        val = sympy.N(t.coefficient, 20) if args.numeric else t.coefficient
        flag = "" if t.matches_printed in (None, True) else "DIFFERS"
        rows.append([t.order, t.number or "-", t.multiplicity, t.shape, val, flag])
        records.append({"order": t.order, "number": t.number, "multiplicity": t.multiplicity, "shape": str(t.shape),
                        "coefficient": str(t.coefficient), "numeric": str(sympy.N(t.coefficient, 20)) if args.numeric else None,
                        "published": None if t.printed is None else str(t.printed),
                        "matches_published": t.matches_printed, "note": t.note})
    footer, totals = [], {}
    for m in sorted({t.order for t in report.terms}):
        c = report.order_coefficient(m)
        totals[m] = str(sympy.N(c, 20) if args.numeric else c)
        footer.append(f"order {m}: coefficient of lambda2^{m} beta^{m - 1} = {totals[m]}")
    for t in report.terms:
        if t.note:
            footer.append(f"note (graph {t.number}): {t.note}")
    _emit(args, make_manifest(args, args.params), ["order", "graph", "u", "V'", "term", "published"], rows,
          {"terms": records, "order_totals": totals, "quartic": report.quartic}, footer)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    checks = run_suite(args.suite)
    rows = [[c.as_record()["status"], c.name, c.measured if c.measured is not None else "",
             c.tolerance if c.tolerance is not None else "", c.note] for c in checks]
    failed = [c for c in checks if not c.passed and not c.informational]
    passed = sum(1 for c in checks if c.passed and not c.informational)
    footer = [f"{args.suite}: {passed}/{passed + len(failed)} checks passed"]
    _emit(args, make_manifest(args), ["status", "check", "measured", "tolerance", "note"], rows,
          {"suite": args.suite, "checks": [c.as_record() for c in checks], "ok": not failed}, footer)
    return EXIT_VERIFY if failed else EXIT_OK


def _sites(text: str) -> list[Any]:
    out = []
    for t in text.split(","):
        t = t.strip()
        if not t:
            continue
        out.append(int(t) if re.fullmatch(r"-?\d+", t) else t)
    if not out:
        raise ValidationError("--wick needs at least one site")
    return out


def cmd_cumulants(args: argparse.Namespace) -> int:
    path = args.from_moments or args.from_cumulants
    kind, table = load_table_file(path)
    expected = "moments" if args.from_moments else "cumulants"
    if kind != expected:
        raise ValidationError(f"{path} holds {kind}, expected {expected}")
    manifest = make_manifest(args, path)
    if args.wick:
        c = table if kind == "cumulants" else CumulantTable(
            {k: moments_to_cumulants(table, k) for k in table.keys()})
        poly = wick_monomial(_sites(args.wick), c)
        rows = [[" ".join(map(str, sites)) or "1", coef] for sites, coef in poly.terms()]
        _emit(args, manifest, ["monomial", "coefficient"], rows,
              {"wick": _sites(args.wick), "terms": [[list(s), str(v)] for s, v in poly.terms()],
               "polynomial": poly.render()}, [f":{' '.join(map(str, _sites(args.wick)))}: = {poly.render()}"])
        return EXIT_OK
    if kind == "moments":
        out_kind, out = "cumulants", CumulantTable({k: moments_to_cumulants(table, k) for k in table.keys()})
    else:
        out_kind, out = "moments", MomentTable({k: cumulants_to_moments(table, k) for k in table.keys()})
    rows = [[" ".join(map(str, k)), table[k], out[k]] for k in out.keys()]
    _emit(args, manifest, ["sites", kind, out_kind], rows, {"output": dump_table(out_kind, out)})
    return EXIT_OK


# ------------------------------------------------------------ parser
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="genfeyn", description="Generalized Feynman graph expansions for non-Gaussian noise.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", metavar="PATH", help="write structured output with the run manifest")
    common.add_argument("--timestamp", help="fixed manifest timestamp (default: SOURCE_DATE_EPOCH or now)")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("graphs", parents=[common], help="enumerate graph classes")
    g.add_argument("--order", type=int, required=True)
    g.add_argument("--interaction", default="phi^2", help='e.g. "phi^2", "1/2*phi^2 + phi^4", ":phi^4:"')
    g.add_argument("--outer", type=int, default=0, help="number of outer vertices")
    g.add_argument("--connected", action="store_true")
    g.add_argument("--wick", action="store_true", help="drop graphs with self-contractions")
    g.add_argument("--even-only", action="store_true", help="only even empty vertices")
    g.set_defaults(func=cmd_graphs)

    pr = sub.add_parser("pressure", parents=[common], help="charged gas equation of state")
    pr.add_argument("--params", metavar="FILE", help="key = value file with beta, z, sigma, c, lambda2, m0")
    pr.add_argument("--order", type=int, default=4)
    mode = pr.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true", default=True)
    mode.add_argument("--numeric", action="store_true")
    pr.add_argument("--quartic", choices=("exact", "printed"), default="exact",
                    help="value of int gtilde_1^4 (printed: the published 1/(64 pi^3))")
    pr.set_defaults(func=cmd_pressure)

    v = sub.add_parser("verify", parents=[common], help="run a self-check suite")
    v.add_argument("suite", choices=sorted(SUITES))
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("cumulants", parents=[common], help="moment/cumulant conversion and Wick polynomials")
    src = c.add_mutually_exclusive_group(required=True)
    src.add_argument("--from-moments", metavar="FILE")
    src.add_argument("--from-cumulants", metavar="FILE")
    c.add_argument("--wick", metavar="SITES", help="comma separated sites X; print the Wick polynomial :X:")
    c.set_defaults(func=cmd_cumulants)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "numeric", False):
        args.exact = False
    try:
        return args.func(args)
    except (CapError, OrderCapError, EnumerationLimitError) as exc:
        print(f"genfeyn: resource cap: {exc}", file=sys.stderr)
        return EXIT_CAP
    except IncompleteTableError as exc:
        print(f"genfeyn: incomplete table: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValidationError, KeyValueError, ModelError, PartitionError, ValueError, OSError) as exc:
        print(f"genfeyn: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
