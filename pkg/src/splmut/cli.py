"""Command-line front end.

Exit codes: 0 ok, 1 diagnostics or threshold failure, 2 usage error,
3 internal error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .bundle import BundleError, SpecBundle, dumps_bundle, dumps_tests, load_bundle, load_tests
from .feature_model import Configuration, LimitExceeded, enumerate_configurations
from .fixtures import FIXTURES, load_fixture
from .mapping import InvalidConfiguration, materialize, validate_spec
from .mutation_ops import generate, parse_operator_list
from .pipeline import POLICIES, RunConfig, run
from .report import comparison_table, report_csv, report_json, text_report
from .statechart import DEFAULT_STEP_BUDGET
from .testing import DEFAULT_DEPTH, default_alphabet, generate_plc

log = logging.getLogger("splmut")

EXIT_OK, EXIT_DIAGNOSTICS, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3
REPORT_DIR_ENV = "SPLMUT_REPORT_DIR"
FIXTURE_PREFIX = "fixture:"


class UsageError(Exception):
    pass


def _load(source: str) -> SpecBundle:
    """Load a bundle file, or a bundled example written as ``fixture:<name>``."""
    if source.startswith(FIXTURE_PREFIX):
        name = source[len(FIXTURE_PREFIX):]
        if name.lower() not in FIXTURES:
            raise UsageError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}")
        return load_fixture(name)
    return load_bundle(source)


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# ---------------------------------------------------------------- commands

def cmd_validate(args) -> int:
    status = EXIT_OK
    for source in args.bundles:
        b = _load(source)
        diags = validate_spec(b.spec)
        for d in diags:
            print(f"{source}: {d}")
        if diags:
            status = EXIT_DIAGNOSTICS
        else:
            print(f"{source}: ok")
    return status


def cmd_variants(args) -> int:
    b = _load(args.bundle)
    try:
        configs = enumerate_configurations(b.spec.feature_model, limit=args.limit)
    except LimitExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIAGNOSTICS
    if args.list:
        for cfg in configs:
            print(" ".join(cfg.selected))
    else:
        print(len(configs))
    return EXIT_OK


def cmd_materialize(args) -> int:
    b = _load(args.bundle)
    fm = b.spec.feature_model
    selected = [f.strip() for f in args.features.split(",") if f.strip()]
    unknown = [f for f in selected if f not in fm.ids]
    if unknown:
        raise UsageError(f"unknown features: {', '.join(unknown)}")
    cfg = Configuration.from_selected(fm, selected)
    try:
        product = materialize(b.spec, cfg)
    except InvalidConfiguration as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIAGNOSTICS
    out = SpecBundle(f"{b.name} [{' '.join(cfg.selected)}]",
                     type(b.spec)(fm, (), product.machine), None, b.payloads)
    _write(args.out, dumps_bundle(out))
    return EXIT_OK


def cmd_mutate(args) -> int:
    b = _load(args.bundle)
    codes = parse_operator_list(args.operators)
    mutants, skipped = generate(b.spec, codes)
    manifest = {
        "source": b.name,
        "operators": list(codes),
        "mutants": [
            {"id": m.id, "operator": m.operator.code, "locus": list(m.locus)} for m in mutants
        ],
        "not_applicable": dict(sorted(skipped.items())),
    }
    for code, reason in sorted(skipped.items()):
        log.warning("%s not applicable: %s", code, reason)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for m in mutants:
            mb = SpecBundle(f"{b.name} {m.id}", m.spec, b.tests, b.payloads,
                            {"mutant": m.id, "operator": m.operator.code, "locus": list(m.locus)})
            (out / f"{m.id}.json").write_text(dumps_bundle(mb))
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
        print(f"{len(mutants)} mutants written to {out}")
    else:
        sys.stdout.write(json.dumps(manifest, indent=2) + "\n")
    return EXIT_OK


def cmd_generate_tests(args) -> int:
    b = _load(args.bundle)
    alphabet = default_alphabet(b.spec.machine, b.payloads)
    result = generate_plc(b.spec, alphabet, depth_limit=args.depth, budget=args.step_budget)
    _write(args.out, dumps_tests(result.tests))
    print(f"{len(result.tests)} tests, {result.step_count} steps, search depth {result.depth_reached}",
          file=sys.stderr)
    if result.gaps:
        print(f"uncovered transitions: {', '.join(result.gaps)}", file=sys.stderr)
    return EXIT_OK


def cmd_run(args) -> int:
    codes = parse_operator_list(args.operators)
    rc = RunConfig(operators=codes, policy=args.policy, step_budget=args.step_budget, workers=args.workers)
    bundles = [_load(s) for s in args.bundles]
    if args.tests and len(bundles) != 1:
        raise UsageError("--tests needs exactly one bundle")

    reports = []
    for b in bundles:
        diags = validate_spec(b.spec)
        if diags:
            for d in diags:
                print(f"{b.name}: {d}", file=sys.stderr)
            return EXIT_DIAGNOSTICS
        tests = load_tests(args.tests) if args.tests else b.tests
        if tests is None:
            log.warning("%s has no test suite; every mutant will survive", b.name)
            tests = []
        reports.append(run(b.spec, tests, rc, b.name or "spl"))

    text = text_report(reports)
    for b, r in zip(bundles, reports):
        reference = b.metadata.get("reference")
        if reference:
            text += f"\n{r.name}: observed vs reference\n" + comparison_table(r, reference)
    sys.stdout.write(text)

    report_dir = args.report or os.environ.get(REPORT_DIR_ENV)
    if report_dir:
        out = Path(report_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(text)
        (out / "report.json").write_text(report_json(reports))
        (out / "report.csv").write_text(report_csv(reports))
        log.info("reports written to %s", out)

    if args.score_threshold is not None:
        worst = min(r.layer(None).score for r in reports)
        if worst < args.score_threshold:
            print(f"score {worst:.2f}% is below the threshold {args.score_threshold:.2f}%", file=sys.stderr)
            return EXIT_DIAGNOSTICS
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="splmut", description="Mutation analysis for software product lines.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    bundle_help = f"spec bundle file, or {FIXTURE_PREFIX}NAME for a bundled example ({', '.join(FIXTURES)})"

    v = sub.add_parser("validate", help="check bundles for structural problems")
    v.add_argument("bundles", nargs="+", metavar="BUNDLE", help=bundle_help)
    v.set_defaults(func=cmd_validate)

    va = sub.add_parser("variants", help="count or list valid configurations")
    va.add_argument("bundle", metavar="BUNDLE", help=bundle_help)
    mode = va.add_mutually_exclusive_group()
    mode.add_argument("--count", action="store_true", help="print the number of variants (default)")
    mode.add_argument("--list", action="store_true", help="print one configuration per line")
    va.add_argument("--limit", type=int, default=100_000, help="refuse to enumerate more than this many")
    va.set_defaults(func=cmd_variants)

    m = sub.add_parser("materialize", help="derive one product from a configuration")
    m.add_argument("bundle", metavar="BUNDLE", help=bundle_help)
    m.add_argument("--features", required=True, help="comma-separated selected feature ids")
    m.add_argument("--out", help="output bundle file (default: stdout)")
    m.set_defaults(func=cmd_materialize)

    mu = sub.add_parser("mutate", help="generate SPL mutants")
    mu.add_argument("bundle", metavar="BUNDLE", help=bundle_help)
    mu.add_argument("--operators", default="all",
                    help="comma-separated operator codes, or all / mapping / statechart (default: all)")
    mu.add_argument("--out", help="directory for mutant bundles and manifest.json (default: manifest to stdout)")
    mu.set_defaults(func=cmd_mutate)

    g = sub.add_parser("generate-tests", help="all-transitions test design over the whole product line")
    g.add_argument("bundle", metavar="BUNDLE", help=bundle_help)
    g.add_argument("--depth", type=int, default=DEFAULT_DEPTH, help="maximum stimuli per test")
    g.add_argument("--step-budget", type=int, default=DEFAULT_STEP_BUDGET, help="micro-steps per stimulus")
    g.add_argument("--out", help="test file (default: stdout)")
    g.set_defaults(func=cmd_generate_tests)

    r = sub.add_parser("run", help="run the mutation analysis and report scores")
    r.add_argument("bundles", nargs="+", metavar="BUNDLE", help=bundle_help)
    r.add_argument("--tests", help="test file (default: the suite embedded in the bundle)")
    r.add_argument("--operators", default="all", help="operator selection as for mutate")
    r.add_argument("--policy", choices=POLICIES, default=POLICIES[0], help="treatment of invalid product mutants")
    r.add_argument("--workers", type=int, default=1, help="worker processes")
    r.add_argument("--step-budget", type=int, default=DEFAULT_STEP_BUDGET, help="micro-steps per stimulus")
    r.add_argument("--report", help=f"directory for report.txt/json/csv (or set {REPORT_DIR_ENV})")
    r.add_argument("--score-threshold", type=float, help="exit 1 if any accumulated score is below this")
    r.add_argument("--seed", type=int, help="accepted for reproducibility scripts; generation is deterministic")
    r.set_defaults(func=cmd_run)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s: %(message)s")
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be at least 1")
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:
        if isinstance(exc, BundleError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DIAGNOSTICS
        parser.error(str(exc))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIAGNOSTICS
    except Exception:  # pragma: no cover - last resort
        log.exception("internal error")
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
