"""Report writers: score tables, run summaries, JSON and CSV.

Everything here is a pure function of the score reports, so repeated runs
and different worker counts give byte-identical output.
"""
from __future__ import annotations

import csv
import io
import json
from typing import Optional, Sequence

from .mutation_ops import MAPPING, OPERATORS, STATECHART
from .pipeline import OperatorRow, ScoreReport

CSV_COLUMNS = (
    "spl", "operator", "layer", "generated", "participating", "killed", "equivalent", "invalid",
    "score", "product_mutants", "equivalent_products", "invalid_products", "tests_executed", "failed_tests",
)


def _pct(row: OperatorRow) -> str:
    return f"{row.score:.2f}"


def _cell(row: Optional[OperatorRow]) -> str:
    if row is None:
        return "-"
    return f"{_pct(row)} ({row.generated})"


def _codes(layer: Optional[str], reports: Sequence[ScoreReport]) -> list[str]:
    present = {c for r in reports for c in r.rows}
    return [c for c, d in OPERATORS.items() if c in present and (layer is None or d.layer == layer)]


def score_table(reports: Sequence[ScoreReport], layer: Optional[str] = None) -> str:
    """Per-operator scores with generated counts in parentheses, one column per SPL."""
    codes = _codes(layer, reports)
    header = ["Op."] + [r.name for r in reports] + ["Acc"]
    lines = []
    for code in codes:
        total = OperatorRow(code)
        cells = []
        for r in reports:
            row = r.rows.get(code)
            cells.append(_cell(row))
            if row is not None:
                total.add(row)
        lines.append([code] + cells + [_pct(total)])
    acc_cells = []
    grand = OperatorRow("Acc")
    for r in reports:
        acc = OperatorRow("Acc")
        for code in codes:
            if code in r.rows:
                acc.add(r.rows[code])
        grand.add(acc)
        acc_cells.append(_cell(acc))
    lines.append(["Acc"] + acc_cells + [_pct(grand)])
    return _render(header, lines)


def summary_table(reports: Sequence[ScoreReport], layer: Optional[str] = None) -> str:
    """Run tallies per SPL: products, mutants, tests and executions."""
    header = [""] + [r.name for r in reports]
    totals = [r.layer(layer) for r in reports]
    lines = [
        ["Products for testing"] + [str(len(r.products)) for r in reports],
        ["Product line mutants"] + [str(t.generated) for t in totals],
        ["Product mutants"] + [str(t.product_mutants) for t in totals],
        ["  equivalent-filtered"] + [str(t.equivalent_products) for t in totals],
        ["  invalid"] + [str(t.invalid_products) for t in totals],
        ["Tests"] + [str(r.tests) for r in reports],
        ["Test steps"] + [str(r.test_steps) for r in reports],
        ["Tests executed"] + [str(t.tests_executed) for t in totals],
        ["Failed tests"] + [str(t.failed_tests) for t in totals],
    ]
    return _render(header, lines, total_rows=0)


def comparison_table(report: ScoreReport, reference: dict) -> str:
    """Observed scores next to reference scores (from fixture metadata)."""
    scores = reference.get("scores", {})
    header = ["Op.", "observed", "reference", "delta"]
    lines = []
    for code in _codes(None, [report]):
        row = report.rows[code]
        ref = scores.get(code)
        if ref is None:
            lines.append([code, _cell(row), "-", "-"])
        else:
            lines.append([code, _cell(row), f"{ref:.2f}", f"{row.score - ref:+.2f}"])
    for layer in (MAPPING, STATECHART):
        if not _codes(layer, [report]):
            continue
        acc = report.layer(layer)
        ref = reference.get(layer, {}).get("score")
        ref_text = "-" if ref is None else f"{ref:.2f}"
        delta = "-" if ref is None else f"{acc.score - ref:+.2f}"
        lines.append([f"Acc {layer}", _cell(acc), ref_text, delta])
    return _render(header, lines, total_rows=2)


def _render(header: list[str], lines: list[list[str]], total_rows: int = 1) -> str:
    """Left-align the first column, right-align the rest.

    The last ``total_rows`` lines are ruled off as accumulated rows.
    """
    widths = [max(len(row[i]) for row in [header] + lines) for i in range(len(header))]

    def fmt(row: list[str]) -> str:
        cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        return "  ".join(cells).rstrip()

    rule = "-" * len(fmt(header))
    body = [fmt(r) for r in lines]
    if 0 < total_rows < len(body):
        body.insert(len(body) - total_rows, rule)
    return "\n".join([fmt(header), rule] + body) + "\n"


LAYER_TITLES = {MAPPING: "Mapping operator", STATECHART: "State machine operator"}


def text_report(reports: Sequence[ScoreReport]) -> str:
    """Score tables then run summaries, for each layer that was run."""
    layers = [layer for layer in (MAPPING, STATECHART) if _codes(layer, reports)]
    parts = []
    for layer in layers:
        parts += ["\n" if parts else "", f"{LAYER_TITLES[layer]} scores (%)\n", score_table(reports, layer)]
    for layer in layers:
        parts += ["\n" if parts else "", f"{LAYER_TITLES[layer]}s: run summary\n", summary_table(reports, layer)]
    return "".join(parts)


def _row_doc(row: OperatorRow) -> dict:
    return {
        "generated": row.generated,
        "participating": row.participating,
        "killed": row.killed,
        "equivalent": row.equivalent,
        "invalid": row.invalid,
        "score": round(row.score, 2),
        "product_mutants": row.product_mutants,
        "equivalent_products": row.equivalent_products,
        "invalid_products": row.invalid_products,
        "tests_executed": row.tests_executed,
        "failed_tests": row.failed_tests,
    }


def report_doc(report: ScoreReport) -> dict:
    by_parent: dict[str, list] = {}
    for pm in report.product_mutants:
        by_parent.setdefault(pm.parent, []).append(pm)
    return {
        "spl": report.name,
        "policy": report.policy,
        "products": [list(c.selected) for c in report.products],
        "tests": report.tests,
        "test_steps": report.test_steps,
        "excluded_tests": list(report.excluded_tests),
        "not_applicable": dict(sorted(report.not_applicable.items())),
        "operators": {code: _row_doc(row) for code, row in report.rows.items()},
        "layers": {layer: _row_doc(report.layer(layer)) for layer in (MAPPING, STATECHART)},
        "total": _row_doc(report.layer(None)),
        "trace": [
            {
                "spl_mutant": link.spl_mutant,
                "operator": link.operator,
                "locus": list(link.locus),
                "outcome": link.outcome,
                "killing_tests": list(link.killing_tests),
                "product_mutants": [
                    {
                        "id": pm.id,
                        "configuration": list(pm.configuration.selected),
                        "status": pm.status,
                        **({"fault": pm.fault} if pm.fault else {}),
                        **({"failing_tests": list(pm.failing_tests)} if pm.failing_tests else {}),
                    }
                    for pm in by_parent.get(link.spl_mutant, [])
                ],
            }
            for link in report.links
        ],
    }


def report_json(reports: Sequence[ScoreReport]) -> str:
    return json.dumps({"format": "splmut-report/1", "runs": [report_doc(r) for r in reports]},
                      indent=2, sort_keys=False) + "\n"


def report_csv(reports: Sequence[ScoreReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        for code, row in r.rows.items():
            d = _row_doc(row)
            writer.writerow([r.name, code, OPERATORS[code].layer] + [d[c] for c in CSV_COLUMNS[3:]])
    return buf.getvalue()
