"""Command-line front end: ingestion, dispatch, and report emission.

Exit codes: 0 clean verdict, 1 input or usage error (with a structured
error object on stdout), 2 when the requested check detects a paradox /
reversal / non-collapsibility, so shell pipelines can branch on it.

Reports are deterministic: keys are emitted sorted and floats with 17
significant digits, so identical inputs and options produce byte-identical
output.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .assoc import FiniteJoint, detect_assoc_reversal, double_linkage, holds_relation
from .collapse import check_collapsibility, check_strict_collapsibility
from .depfun import check_avg_collapsibility, check_homogeneity, model_from_json
from .errors import CollapsekitError, SchemeError, TableError
from .loglinear import decompose, is_hierarchical
from .paradox import cornfield, detect_reversal, scan_strata
from .regress import (
    StratifiedRegressionSummary,
    check_a_collapsibility,
    check_parallel_collapsibility,
    summary_from_records,
)
from .survival import SurvivalSpec, check_condition, verify_numeric
from .tables import CategoricalScheme, ContingencyTable, build_table

MAX_CSV_VARIABLES = 20

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DETECTED = 2


# -- deterministic JSON -------------------------------------------------------


def _fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise ValueError("reports must not contain NaN or infinity")
    return format(x, ".17g")


def dumps_report(obj, indent: int = 0) -> str:
    """JSON text with sorted keys and fixed float formatting."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, str):
        out = obj.replace("\\", "\\\\").replace('"', '\\"')
        out = out.replace("\n", "\\n").replace("\r", "\\r").replace("\t", "\\t")
        return f'"{out}"'
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = ",\n".join(inner + dumps_report(v, indent + 1) for v in obj)
        return "[\n" + items + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            f'{inner}"{k}": ' + dumps_report(obj[k], indent + 1)
            for k in sorted(obj, key=str)
        )
        return "{\n" + items + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _render_markdown(payload: dict, indent: int = 0) -> list[str]:
    lines = []
    pad = "  " * indent
    for k in sorted(payload, key=str):
        v = payload[k]
        if isinstance(v, dict):
            lines.append(f"{pad}- **{k}**:")
            lines.extend(_render_markdown(v, indent + 1))
        elif isinstance(v, (list, tuple)):
            lines.append(f"{pad}- **{k}**: {dumps_report(list(v))}")
        elif isinstance(v, float):
            lines.append(f"{pad}- **{k}**: {_fmt_float(v)}")
        else:
            lines.append(f"{pad}- **{k}**: {v}")
    return lines


def _emit(report: dict, fmt: str, markdown_body: str | None = None) -> None:
    if fmt == "md":
        lines = [f"# collapsekit {report['verb']}", ""]
        if markdown_body is not None:
            lines += [markdown_body, ""]
        lines += _render_markdown(
            {k: v for k, v in report.items() if k != "verdict"}
        )
        lines += _render_markdown({"verdict": report["verdict"]})
        print("\n".join(lines))
    else:
        print(dumps_report(report))


# -- input loading -------------------------------------------------------------


def _read_bytes(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise TableError(f"cannot read {path}: {exc}") from exc


def ingest_csv(path: str, scheme: CategoricalScheme | None = None) -> ContingencyTable:
    """Cross-tabulate a CSV of observations into a counts table.

    The header row names the categorical variables; each subsequent row is
    one observation.  Without a declared ``scheme``, levels keep
    first-appearance order and every column must show at least two levels;
    with one, the header must match the scheme's variables and every value
    must be a declared level (unfilled cells stay zero).
    """
    text = _read_bytes(path).decode("utf-8")
    rows = list(csv.reader(text.splitlines()))
    rows = [r for r in rows if r]
    if not rows:
        raise TableError("empty CSV file")
    header = [h.strip() for h in rows[0]]
    if len(header) > MAX_CSV_VARIABLES:
        raise TableError(f"more than {MAX_CSV_VARIABLES} variables")
    if not rows[1:]:
        raise TableError("CSV has a header but no observation rows")
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise TableError(f"ragged row at line {lineno}")
        records.append([v.strip() for v in row])
    if scheme is None:
        levels: list[list[str]] = [[] for _ in header]
        for rec in records:
            for j, val in enumerate(rec):
                if val not in levels[j]:
                    levels[j].append(val)
        for name, lv in zip(header, levels):
            if len(lv) < 2:
                # a single observed level cannot form a categorical axis by
                # inference; pass a declared scheme for such files
                raise TableError(f"column {name!r} has a single observed level")
        scheme = CategoricalScheme(
            tuple((n, tuple(lv)) for n, lv in zip(header, levels))
        )
    elif tuple(header) != scheme.names:
        raise TableError(
            f"CSV header {tuple(header)} does not match the declared variables {scheme.names}"
        )
    cells = np.zeros(scheme.shape)
    for rec in records:
        idx = tuple(scheme.level_index(name, v) for name, v in zip(scheme.names, rec))
        cells[idx] += 1.0
    return ContingencyTable(scheme, cells, "counts")


def _load_scheme(path: str | None) -> CategoricalScheme | None:
    if path is None:
        return None
    payload = json.loads(_read_bytes(path).decode("utf-8"))
    try:
        return CategoricalScheme(
            tuple((v["name"], tuple(v["levels"])) for v in payload["variables"])
        )
    except (KeyError, TypeError) as exc:
        raise TableError(f"malformed variables payload: {exc}") from exc


def _load_table(path: str, variables: str | None = None) -> ContingencyTable:
    if path.endswith(".csv"):
        return ingest_csv(path, scheme=_load_scheme(variables))
    return ContingencyTable.from_json(_read_bytes(path).decode("utf-8"))


def _digest(path: str) -> str:
    return hashlib.sha256(_read_bytes(path)).hexdigest()


def _report(verb: str, path: str, verdict: dict) -> dict:
    return {
        "verb": verb,
        "input_sha256": _digest(path),
        "tool_version": __version__,
        "verdict": verdict,
    }


def _parse_event(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise SchemeError(f"expected VAR=LEVEL, got {text!r}")
    var, _, level = text.partition("=")
    return var.strip(), level.strip()


def _parse_subset(text: str) -> tuple["str | int", ...]:
    """Comma-separated variable names; all-digit tokens are axis indices."""
    parts = tuple(p.strip() for p in text.split(",") if p.strip())
    if not parts:
        raise SchemeError(f"empty variable subset {text!r}")
    return tuple(int(p) if p.isdigit() else p for p in parts)


# -- verbs ---------------------------------------------------------------------


def _cmd_ingest(args) -> int:
    table = ingest_csv(args.input, scheme=_load_scheme(args.variables))
    _emit(_report("ingest", args.input, table.to_json_dict()), args.format)
    return EXIT_OK


def _cmd_scan_paradox(args) -> int:
    table = _load_table(args.input, variables=args.variables)
    response = _parse_event(args.response)
    exposure = _parse_event(args.exposure)
    if args.covariate:
        reports = [detect_reversal(table, response, exposure, args.covariate)]
        entries = [
            {"covariate": args.covariate, "report": reports[0].to_json_dict(), "error": None}
        ]
        md = reports[0].to_markdown()
    else:
        scans = scan_strata(table, response, exposure)
        reports = [s.report for s in scans if s.report is not None]
        entries = [
            {
                "covariate": s.covariate,
                "report": s.report.to_json_dict() if s.report else None,
                "error": s.error,
            }
            for s in scans
        ]
        md = "\n\n".join(r.to_markdown() for r in reports)
    detected = any(r.reversal for r in reports)
    verdict = {"candidates": entries, "reversal_detected": detected}
    if args.cornfield:
        verdict["cornfield"] = cornfield(
            table, response, exposure, _parse_event(args.cornfield)
        ).to_json_dict()
    _emit(_report("scan-paradox", args.input, verdict), args.format, markdown_body=md)
    return EXIT_DETECTED if detected else EXIT_OK


def _cmd_decompose(args) -> int:
    table = _load_table(args.input)
    if table.form == "counts":
        table = table.normalize(smoothing=args.smoothing)
    dec = decompose(table)
    hier = is_hierarchical(dec, tol=args.tol)
    verdict = dec.to_json_dict()
    verdict["hierarchical"] = hier.hierarchical
    verdict["hierarchy_violations"] = [
        {"superset": list(b), "vanished_subset": list(a)} for b, a in hier.violations
    ]
    _emit(_report("decompose", args.input, verdict), args.format)
    return EXIT_OK


def _cmd_collapse_check(args) -> int:
    table = _load_table(args.input)
    if table.form == "counts":
        table = table.normalize(smoothing=args.smoothing)
    target = table.scheme.subset_names(
        table.scheme.resolve_subset(_parse_subset(args.target))
    )
    if args.strict:
        given = (
            table.scheme.subset_names(
                table.scheme.resolve_subset(_parse_subset(args.given))
            )
            if args.given
            else ()
        )
        collapsed = tuple(
            n for n in table.scheme.names if n not in set(target) | set(given)
        )
        v = check_strict_collapsibility(
            table, target, given, collapsed, tol=args.tol
        )
        verdict = {
            "target": list(v.target),
            "margin": list(v.margin),
            "collapsible": v.collapsible,
            "strict": v.strict,
            "max_residual": v.max_residual,
            "direct_gap": v.direct_gap,
            "zero_set_max": v.zero_set_max,
            "interaction_zero_ok": v.interaction_zero_ok,
            "ci_holds": v.ci.holds if v.ci else None,
            "ci_max_deviation": v.ci.max_deviation if v.ci else None,
            "tol": v.tol,
        }
        detected = not v.strict
    else:
        if not args.margin:
            raise SchemeError("--margin is required without --strict")
        v = check_collapsibility(
            table, target, _parse_subset(args.margin), tol=args.tol
        )
        verdict = {
            "target": list(v.target),
            "margin": list(v.margin),
            "collapsible": v.collapsible,
            "strict": None,
            "max_residual": v.max_residual,
            "direct_gap": v.direct_gap,
            "tau_full": [float(x) for x in v.tau_full.reshape(-1)],
            "eta_marginal": [float(x) for x in v.eta_marginal.reshape(-1)],
            "tol": v.tol,
        }
        detected = not v.collapsible
    _emit(_report("collapse-check", args.input, verdict), args.format)
    return EXIT_DETECTED if detected else EXIT_OK


def _cmd_assoc_check(args) -> int:
    joint = FiniteJoint.from_json(_read_bytes(args.input).decode("utf-8"))
    rep = detect_assoc_reversal(joint, args.relation, tol=args.tol)
    verdict = {
        "relation": args.relation,
        "holds_up": holds_relation(joint, args.relation, "up", tol=args.tol),
        "holds_down": holds_relation(joint, args.relation, "down", tol=args.tol),
        "reversal": rep.to_json_dict(),
        "linkage": double_linkage(joint, tol=args.tol).to_json_dict(),
    }
    _emit(_report("assoc-check", args.input, verdict), args.format)
    return EXIT_DETECTED if rep.reversal else EXIT_OK


def _cmd_regress_audit(args) -> int:
    if args.input.endswith(".csv"):
        text = _read_bytes(args.input).decode("utf-8")
        rows = [r for r in csv.reader(text.splitlines()) if r]
        if not rows or [h.strip().lower() for h in rows[0]] != ["y", "x", "a"]:
            raise TableError("records CSV must have header y,x,a")
        try:
            y = [float(r[0]) for r in rows[1:]]
            x = [float(r[1]) for r in rows[1:]]
            a = [r[2].strip() for r in rows[1:]]
        except (ValueError, IndexError) as exc:
            raise TableError(f"malformed records CSV: {exc}") from exc
        summary = summary_from_records(y, x, a)
    else:
        summary = StratifiedRegressionSummary.from_json(
            _read_bytes(args.input).decode("utf-8")
        )
    betas = [s.beta for s in summary.strata]
    mode = args.mode
    if mode == "auto":
        mode = "parallel" if max(betas) - min(betas) <= 1e-12 else "average"
    if mode == "parallel":
        v = check_parallel_collapsibility(summary, tol=args.tol)
        detected = not v.collapsible
    else:
        v = check_a_collapsibility(summary, tol=args.tol)
        detected = not v.a_collapsible
    verdict = v.to_json_dict()
    verdict["summary"] = summary.to_json_dict()
    _emit(_report("regress-audit", args.input, verdict), args.format)
    return EXIT_DETECTED if detected else EXIT_OK


def _cmd_dep_check(args) -> int:
    model = model_from_json(_read_bytes(args.input).decode("utf-8"))
    v = check_avg_collapsibility(model, tol=args.tol)
    h = check_homogeneity(model, tol=args.tol)
    verdict = {
        "model": model.to_json_dict(),
        "avg_collapsibility": v.to_json_dict(),
        "homogeneous": h.homogeneous,
        "homogeneity_gap": h.max_gap,
        "x_w_independent": model.x_w_independent,
        "y_w_cond_independent": model.y_w_cond_independent,
    }
    _emit(_report("dep-check", args.input, verdict), args.format)
    return EXIT_DETECTED if not v.avg_collapsible else EXIT_OK


def _cmd_survival_check(args) -> int:
    spec = SurvivalSpec.from_json(_read_bytes(args.input).decode("utf-8"))
    v = verify_numeric(spec) if args.numeric else check_condition(spec)
    _emit(_report("survival-check", args.input, v.to_json_dict()), args.format)
    return EXIT_DETECTED if v.condition else EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="collapsekit",
        description="Simpson's paradox detection and collapsibility verdicts",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, tol_default=None, tol_help="decision tolerance"):
        p.add_argument("input", help="input file (JSON; CSV where noted)")
        p.add_argument(
            "--format", choices=("json", "md"), default="json", help="output format"
        )
        if tol_default is not None:
            p.add_argument(
                "--tol", type=float, default=tol_default, help=f"{tol_help} (default {tol_default})"
            )

    p = sub.add_parser("ingest", help="cross-tabulate a CSV of observations")
    common(p)
    p.add_argument("--variables", help="JSON file declaring variables and levels")
    p.set_defaults(fn=_cmd_ingest)

    p = sub.add_parser("scan-paradox", help="event-level reversal scan (exit 2 on reversal)")
    common(p)
    p.add_argument("--variables", help="JSON file declaring variables and levels (CSV input)")
    p.add_argument("--response", required=True, metavar="VAR=LEVEL")
    p.add_argument("--exposure", required=True, metavar="VAR=LEVEL")
    p.add_argument("--covariate", help="restrict the scan to one covariate variable")
    p.add_argument(
        "--cornfield", metavar="VAR=LEVEL", help="also report effect-size diagnostics for this confounder event"
    )
    p.set_defaults(fn=_cmd_scan_paradox)

    p = sub.add_parser("decompose", help="saturated log-linear interaction parameters")
    common(p, tol_default=1e-8, tol_help="zero-interaction tolerance")
    p.add_argument(
        "--smoothing", type=float, default=None, help="additive smoothing for zero count cells"
    )
    p.set_defaults(fn=_cmd_decompose)

    p = sub.add_parser(
        "collapse-check", help="collapsibility onto a margin (exit 2 when not collapsible)"
    )
    common(p, tol_default=1e-8)
    p.add_argument("--target", required=True, help="comma-separated target variables")
    p.add_argument("--margin", help="comma-separated margin variables (plain check)")
    p.add_argument("--strict", action="store_true", help="strict collapsibility over the complement")
    p.add_argument("--given", help="conditioning variables for --strict (may be empty)")
    p.add_argument("--smoothing", type=float, default=None)
    p.set_defaults(fn=_cmd_collapse_check)

    p = sub.add_parser("assoc-check", help="association relation and reversal report")
    common(p, tol_default=1e-9)
    p.add_argument("--relation", choices=("r1", "r2", "r3", "r4"), default="r4")
    p.set_defaults(fn=_cmd_assoc_check)

    p = sub.add_parser("regress-audit", help="regression collapsibility audit")
    common(p, tol_default=1e-9)
    p.add_argument("--mode", choices=("auto", "parallel", "average"), default="auto")
    p.set_defaults(fn=_cmd_regress_audit)

    p = sub.add_parser("dep-check", help="dependence-function average collapsibility")
    common(p, tol_default=1e-6)
    p.set_defaults(fn=_cmd_dep_check)

    p = sub.add_parser("survival-check", help="survival reversal condition (exit 2 when predicted)")
    common(p)
    p.add_argument("--numeric", action="store_true", help="also verify on the probe grid")
    p.set_defaults(fn=_cmd_survival_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit code 2 for usage errors; remap to the input-error code
        return EXIT_ERROR if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except CollapsekitError as exc:
        print(
            dumps_report(
                {"error": {"kind": type(exc).__name__, "message": str(exc)}}
            )
        )
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
