"""The SPL mutation process: generate, select products, materialise, test, score.

Work is split per SPL mutant; results come back in mutant order whatever the
worker count, so reports are reproducible.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .feature_model import Configuration, FeatureModel, Unsatisfiable, complete_partial
from .mapping import ProductSpecification, SplSpecification, canonicalize, materialize
from .mutation_ops import OPERATORS, SplMutant, generate
from .statechart import DEFAULT_STEP_BUDGET, structural_validate
from .testing import TestCase, Verdict, execute

log = logging.getLogger(__name__)

EXCLUDE, COUNT_AS_KILLED = "exclude", "count-as-killed"
POLICIES = (EXCLUDE, COUNT_AS_KILLED)

PENDING, EQUIVALENT, INVALID, SURVIVED, KILLED = (
    "pending", "equivalent-filtered", "invalid", "survived", "killed")


@dataclass(frozen=True)
class RunConfig:
    operators: tuple[str, ...] = tuple(OPERATORS)
    policy: str = EXCLUDE
    step_budget: int = DEFAULT_STEP_BUDGET
    workers: int = 1
    selection: str = "greedy"

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("worker count must be at least 1")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown invalid-mutant policy {self.policy!r}")
        unknown = [c for c in self.operators if c not in OPERATORS]
        if unknown:
            raise ValueError(f"unknown operators: {unknown}")


@dataclass(frozen=True)
class ProductMutant:
    id: str
    parent: str
    configuration: Configuration
    status: str
    verdicts: tuple[tuple[str, Verdict], ...] = ()
    fault: str = ""

    @property
    def failing_tests(self) -> tuple[str, ...]:
        return tuple(tid for tid, v in self.verdicts if v.failed)


@dataclass(frozen=True)
class TraceLink:
    spl_mutant: str
    operator: str
    locus: tuple[str, ...]
    product_mutants: tuple[str, ...]
    participating: bool
    killed: bool
    killing_tests: tuple[str, ...]
    outcome: str  # killed | survived | equivalent | invalid


@dataclass
class OperatorRow:
    operator: str
    generated: int = 0
    participating: int = 0
    killed: int = 0
    equivalent: int = 0
    invalid: int = 0
    product_mutants: int = 0
    equivalent_products: int = 0
    invalid_products: int = 0
    tests_executed: int = 0
    failed_tests: int = 0

    @property
    def score(self) -> float:
        return 100.0 * self.killed / self.participating if self.participating else 0.0

    def add(self, other: "OperatorRow") -> None:
        for name in ("generated", "participating", "killed", "equivalent", "invalid", "product_mutants",
                     "equivalent_products", "invalid_products", "tests_executed", "failed_tests"):
            setattr(self, name, getattr(self, name) + getattr(other, name))


@dataclass
class ScoreReport:
    name: str
    rows: dict[str, OperatorRow]
    products: tuple[Configuration, ...]
    tests: int
    test_steps: int
    links: list[TraceLink] = field(default_factory=list)
    product_mutants: list[ProductMutant] = field(default_factory=list)
    not_applicable: dict[str, str] = field(default_factory=dict)
    excluded_tests: tuple[str, ...] = ()
    policy: str = EXCLUDE

    def layer(self, layer: Optional[str]) -> OperatorRow:
        total = OperatorRow("Acc")
        for code, row in self.rows.items():
            if layer is None or OPERATORS[code].layer == layer:
                total.add(row)
        return total


# ---------------------------------------------------------- product choice

def select_products(tests: Sequence[TestCase], fm: FeatureModel) -> dict[str, Configuration]:
    """Assign every satisfiable test a product, greedily minimising distinct products.

    Candidates are the minimal completions of each test's feature
    constraints; the candidate applicable to most unassigned tests is taken
    first and then re-completed from the merged constraints of the tests it
    takes over.  Unsatisfiable tests are left out of the result.
    """
    pending: list[TestCase] = []
    candidates: list[Configuration] = []
    for t in tests:
        try:
            cfg = complete_partial(fm, t.required, t.forbidden)
        except Unsatisfiable:
            log.warning("test %s has unsatisfiable feature constraints; excluded", t.id)
            continue
        pending.append(t)
        if cfg not in candidates:
            candidates.append(cfg)

    assignment: dict[str, Configuration] = {}
    while pending:
        best = max(candidates, key=lambda c: sum(c.satisfies(t.required, t.forbidden) for t in pending))
        group = [t for t in pending if best.satisfies(t.required, t.forbidden)]
        required = set().union(*(t.required for t in group))
        forbidden = set().union(*(t.forbidden for t in group))
        chosen = complete_partial(fm, required, forbidden)
        for t in group:
            assignment[t.id] = chosen
        pending = [t for t in pending if t.id not in assignment]
    return assignment


# -------------------------------------------------------------- execution

@dataclass(frozen=True)
class _Context:
    products: tuple[Configuration, ...]
    originals: tuple[bytes, ...]
    tests_by_product: tuple[tuple[TestCase, ...], ...]
    budget: int
    policy: str


def _evaluate(mutant: SplMutant, ctx: _Context) -> tuple[TraceLink, list[ProductMutant]]:
    pms: list[ProductMutant] = []
    for k, cfg in enumerate(ctx.products):
        pid = f"{mutant.id}@P{k + 1}"
        product: ProductSpecification = materialize(mutant.spec, cfg, check=False)
        if canonicalize(product) == ctx.originals[k]:
            pms.append(ProductMutant(pid, mutant.id, cfg, EQUIVALENT))
            continue
        diags = structural_validate(product.machine)
        if diags:
            pms.append(ProductMutant(pid, mutant.id, cfg, INVALID, fault=str(diags[0])))
            continue
        verdicts = tuple((t.id, execute(t, product, ctx.budget)) for t in ctx.tests_by_product[k])
        faults = [v.detail for _, v in verdicts if v.kind == Verdict.INVALID]
        if faults:
            status = INVALID
        elif any(v.failed for _, v in verdicts):
            status = KILLED
        else:
            status = SURVIVED
        pms.append(ProductMutant(pid, mutant.id, cfg, status, verdicts, faults[0] if faults else ""))

    def counts(pm: ProductMutant) -> bool:
        if pm.status == EQUIVALENT:
            return False
        return pm.status != INVALID or ctx.policy == COUNT_AS_KILLED

    live = [pm for pm in pms if counts(pm)]
    killed_by = [pm for pm in live if pm.status in (KILLED, INVALID)]
    killing = sorted({tid for pm in killed_by for tid in pm.failing_tests})
    if live:
        outcome = "killed" if killed_by else "survived"
    elif any(pm.status == INVALID for pm in pms):
        outcome = "invalid"
    else:
        outcome = "equivalent"
    link = TraceLink(
        spl_mutant=mutant.id,
        operator=mutant.operator.code,
        locus=mutant.locus,
        product_mutants=tuple(pm.id for pm in pms),
        participating=bool(live),
        killed=bool(killed_by),
        killing_tests=tuple(killing),
        outcome=outcome,
    )
    return link, pms


_WORKER_CTX: Optional[_Context] = None


def _init_worker(ctx: _Context) -> None:
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _evaluate_in_worker(mutant: SplMutant):
    return _evaluate(mutant, _WORKER_CTX)


def run(spec: SplSpecification, tests: Sequence[TestCase], rc: RunConfig = RunConfig(),
        name: str = "spl") -> ScoreReport:
    mutants, skipped = generate(spec, rc.operators)
    assignment = select_products(tests, spec.feature_model)
    products: list[Configuration] = []
    for t in tests:
        cfg = assignment.get(t.id)
        if cfg is not None and cfg not in products:
            products.append(cfg)
    originals = tuple(canonicalize(materialize(spec, cfg)) for cfg in products)
    tests_by_product = tuple(
        tuple(t for t in tests if assignment.get(t.id) == cfg) for cfg in products
    )
    ctx = _Context(tuple(products), originals, tests_by_product, rc.step_budget, rc.policy)

    if rc.workers > 1 and len(mutants) > 1:
        with ProcessPoolExecutor(max_workers=rc.workers, initializer=_init_worker, initargs=(ctx,)) as pool:
            chunk = max(1, len(mutants) // (rc.workers * 4))
            results = list(pool.map(_evaluate_in_worker, mutants, chunksize=chunk))
    else:
        results = [_evaluate(m, ctx) for m in mutants]

    rows = {code: OperatorRow(code) for code in OPERATORS if code in rc.operators}
    report = ScoreReport(
        name=name,
        rows=rows,
        products=tuple(products),
        tests=len(tests),
        test_steps=sum(len(t.steps) for t in tests),
        not_applicable=dict(skipped),
        excluded_tests=tuple(t.id for t in tests if t.id not in assignment),
        policy=rc.policy,
    )
    for link, pms in results:
        row = rows[link.operator]
        row.generated += 1
        row.participating += link.participating
        row.killed += link.killed
        row.equivalent += link.outcome == "equivalent"
        row.invalid += link.outcome == "invalid"
        for pm in pms:
            row.product_mutants += 1
            if pm.status == EQUIVALENT:
                row.equivalent_products += 1
                continue
            row.invalid_products += pm.status == INVALID
            row.tests_executed += len(pm.verdicts)
            row.failed_tests += len(pm.failing_tests)
        report.links.append(link)
        report.product_mutants.extend(pms)
    return report
