"""Conformance tests: model, execution against products, PLC generation."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .diagnostics import RuntimeFault
from .feature_model import is_satisfiable
from .mapping import ProductSpecification, SplSpecification, presence_conditions
from .statechart import (
    DEFAULT_STEP_BUDGET,
    Emission,
    Interpreter,
    RuntimeState,
    StateMachine,
    StepResult,
    Stimulus,
    Transition,
    format_emission,
)

DEFAULT_DEPTH = 40


@dataclass(frozen=True)
class TestStep:
    stimulus: Stimulus
    expected: tuple[Emission, ...] = ()

    __test__ = False


@dataclass(frozen=True)
class TestCase:
    id: str
    steps: tuple[TestStep, ...]
    required: frozenset[str] = frozenset()
    forbidden: frozenset[str] = frozenset()

    __test__ = False


@dataclass(frozen=True)
class Verdict:
    kind: str
    step: Optional[int] = None
    detail: str = ""

    PASS = "pass"
    FAIL = "fail"
    INAPPLICABLE = "inapplicable"
    INVALID = "invalid"

    @property
    def passed(self) -> bool:
        return self.kind == self.PASS

    @property
    def failed(self) -> bool:
        return self.kind == self.FAIL

    def __str__(self) -> str:
        if self.kind == self.FAIL:
            return f"fail@{self.step}: {self.detail}"
        if self.kind == self.INVALID:
            return f"invalid({self.detail})"
        return self.kind


def _emissions_text(es: Iterable[Emission]) -> str:
    return "[" + ", ".join(format_emission(e) for e in es) + "]"


def trace(test: TestCase, machine: StateMachine, budget: int = DEFAULT_STEP_BUDGET) -> tuple[Verdict, list[str]]:
    """Run ``test`` on ``machine``; return the verdict and fired transition ids."""
    fired: list[str] = []
    interp = Interpreter(machine, budget)
    try:
        res = interp.initial()
        fired.extend(res.fired)
        rt = res.state
        for i, step in enumerate(test.steps):
            res = interp.step(rt, step.stimulus)
            fired.extend(res.fired)
            if res.emissions != step.expected:
                detail = (f"after {step.stimulus} expected {_emissions_text(step.expected)}, "
                          f"got {_emissions_text(res.emissions)}")
                return Verdict(Verdict.FAIL, i, detail), fired
            rt = res.state
    except RuntimeFault as fault:
        return Verdict(Verdict.INVALID, None, fault.kind), fired
    return Verdict(Verdict.PASS), fired


def execute(test: TestCase, product: ProductSpecification, budget: int = DEFAULT_STEP_BUDGET) -> Verdict:
    if not product.configuration.satisfies(test.required, test.forbidden):
        return Verdict(Verdict.INAPPLICABLE)
    return trace(test, product.machine, budget)[0]


def all_transitions_coverage(suite: Sequence[TestCase], spec: SplSpecification,
                             assignment=None, budget: int = DEFAULT_STEP_BUDGET) -> float:
    """Fraction of the domain machine's transitions traversed by the suite.

    Each test runs on the product it is assigned to (``select_products`` when
    no assignment is given).
    """
    targets = [t.id for t in spec.machine.mutable_transitions()]
    if not suite or not targets:
        return 0.0
    from .mapping import materialize
    from .pipeline import select_products

    if assignment is None:
        assignment = select_products(suite, spec.feature_model)
    products: dict = {}
    seen: set[str] = set()
    for test in suite:
        cfg = assignment.get(test.id)
        if cfg is None:
            continue
        if cfg not in products:
            products[cfg] = materialize(spec, cfg)
        _, fired = trace(test, products[cfg].machine, budget)
        seen.update(fired)
    return sum(1 for t in targets if t in seen) / len(targets)


# ------------------------------------------------------------ PLC generation

def default_alphabet(machine: StateMachine, payloads: Optional[dict[str, Sequence[int]]] = None) -> list[Stimulus]:
    """Input signals in sorted order; signals carrying a payload get one stimulus per value."""
    payloads = payloads or {}
    bound = {tr.signal for t in machine.transitions() for tr in t.triggers if tr.binding}
    alphabet: list[Stimulus] = []
    for sig in sorted(machine.signals_in):
        if sig in payloads:
            alphabet.extend(Stimulus(sig, int(v)) for v in payloads[sig])
        elif sig in bound:
            alphabet.extend(Stimulus(sig, v) for v in (0, 1))
        else:
            alphabet.append(Stimulus(sig))
    return alphabet


class _Undecided(Exception):
    def __init__(self, tid: str):
        self.tid = tid


Constraints = frozenset  # of (feature, bool)


@dataclass
class GenerationResult:
    tests: list[TestCase]
    gaps: list[str]
    explored: int = 0
    depth_reached: int = 0

    @property
    def step_count(self) -> int:
        return sum(len(t.steps) for t in self.tests)


@dataclass
class _Edge:
    parent: Optional[tuple]
    stimulus: Optional[Stimulus]
    emissions: tuple[Emission, ...]
    fired: tuple[str, ...]
    constraints: Constraints = field(default_factory=frozenset)


class _Explorer:
    """Executes the domain machine under partial feature assumptions.

    Whenever a transition whose presence is not yet decided could fire, the
    execution is split into a branch where it is present and branches where
    one of its mapping literals is violated.
    """

    def __init__(self, spec: SplSpecification, budget: int):
        self.spec = spec
        self.cond = presence_conditions(spec.mappings)
        self.interp = Interpreter(spec.machine, budget)
        self._sat: dict[Constraints, bool] = {}

    def satisfiable(self, c: Constraints) -> bool:
        if c not in self._sat:
            self._sat[c] = is_satisfiable(self.spec.feature_model, c)
        return self._sat[c]

    def _presence(self, decided: dict[str, bool]):
        cond = self.cond

        def presence(t: Transition) -> bool:
            lits = cond.get(t.id)
            if not lits:
                return True
            if all(decided.get(f) == v for f, v in lits):
                return True
            if any(f in decided and decided[f] != v for f, v in lits):
                return False
            raise _Undecided(t.id)

        return presence

    def branches(self, c: Constraints, rt: Optional[RuntimeState],
                 stimulus: Optional[Stimulus]) -> list[tuple[Constraints, StepResult]]:
        results: list[tuple[Constraints, StepResult]] = []
        work = deque([c])
        while work:
            cur = work.popleft()
            self.interp.presence = self._presence(dict(cur))
            try:
                res = self.interp.initial() if rt is None else self.interp.step(rt, stimulus)
            except _Undecided as u:
                decided = dict(cur)
                lits = self.cond[u.tid]
                options = [cur | {lit for lit in lits}]
                options += [cur | {(f, not v)} for f, v in lits if f not in decided]
                for opt in options:
                    if self._consistent(opt) and self.satisfiable(opt):
                        work.append(opt)
                continue
            except RuntimeFault:
                continue
            results.append((cur, res))
        return results

    @staticmethod
    def _consistent(c: Constraints) -> bool:
        seen: dict[str, bool] = {}
        for f, v in c:
            if seen.setdefault(f, v) != v:
                return False
        return True


def generate_plc(spec: SplSpecification, alphabet: Optional[Sequence[Stimulus]] = None,
                 depth_limit: int = DEFAULT_DEPTH, budget: int = DEFAULT_STEP_BUDGET,
                 id_prefix: str = "T") -> GenerationResult:
    """Product-line-centred all-transitions test design.

    Breadth-first search over concrete interpreter states of the domain
    machine, each path carrying the feature literals its behaviour relies
    on.  Every transition gets its shortest covering path; paths become tests
    longest first, skipping transitions an earlier test already traverses.
    """
    machine = spec.machine
    if alphabet is None:
        alphabet = default_alphabet(machine)
    targets = [t.id for t in machine.mutable_transitions()]
    explorer = _Explorer(spec, budget)

    edges: dict[tuple, _Edge] = {}
    by_state: dict[RuntimeState, list[Constraints]] = {}
    first_cover: dict[str, tuple] = {}
    first_edge_from_root: dict[tuple, tuple] = {}

    def dominated(rt: RuntimeState, c: Constraints) -> bool:
        return any(prev <= c for prev in by_state.get(rt, ()))

    frontier: list[tuple] = []
    for c, res in explorer.branches(frozenset(), None, None):
        key = (res.state, c)
        if dominated(res.state, c):
            continue
        by_state.setdefault(res.state, []).append(c)
        edges[key] = _Edge(None, None, res.emissions, res.fired, c)
        frontier.append(key)
        for tid in res.fired:
            first_cover.setdefault(tid, ("root", key))

    remaining = set(targets) - set(first_cover)
    depth = 0
    explored = len(frontier)
    while frontier and remaining and depth < depth_limit:
        depth += 1
        nxt: list[tuple] = []
        for key in frontier:
            rt, c = key
            for stim in alphabet:
                for c2, res in explorer.branches(c, rt, stim):
                    if not res.fired:
                        continue
                    if edges[key].parent is None:
                        first_edge_from_root.setdefault(key, (stim, c2, res))
                    for tid in res.fired:
                        if tid not in first_cover:
                            first_cover[tid] = ("edge", key, stim, c2, res)
                            remaining.discard(tid)
                    child = (res.state, c2)
                    if dominated(res.state, c2):
                        continue
                    by_state.setdefault(res.state, []).append(c2)
                    edges[child] = _Edge(key, stim, res.emissions, res.fired, c2)
                    nxt.append(child)
                    explored += 1
            if not remaining:
                break
        frontier = nxt

    def path_to(key: tuple) -> tuple[list[TestStep], list[str]]:
        steps: list[TestStep] = []
        fired: list[str] = []
        cur: Optional[tuple] = key
        chain = []
        while cur is not None:
            chain.append(edges[cur])
            cur = edges[cur].parent
        for e in reversed(chain):
            fired.extend(e.fired)
            if e.stimulus is not None:
                steps.append(TestStep(e.stimulus, e.emissions))
        return steps, fired

    # One candidate path per transition; transitions fired while settling the
    # initial state are covered by the first step taken from there.
    paths: dict[str, tuple[list[TestStep], list[str], Constraints]] = {}
    gaps: list[str] = []
    for tid in targets:
        cover = first_cover.get(tid)
        if cover is not None and cover[0] == "root":
            key = cover[1]
            if key not in first_edge_from_root:
                cover = None
            else:
                stim, c2, res = first_edge_from_root[key]
                cover = ("edge", key, stim, c2, res)
        if cover is None:
            gaps.append(tid)
            continue
        _, key, stim, c2, res = cover
        steps, fired = path_to(key)
        steps.append(TestStep(stim, res.emissions))
        fired.extend(res.fired)
        paths[tid] = (steps, fired, c2)

    # Longest paths first: their prefixes already cover the shallow targets.
    order = sorted(paths, key=lambda tid: (-len(paths[tid][0]), targets.index(tid)))
    tests: list[TestCase] = []
    covered: set[str] = set()
    for tid in order:
        if tid in covered:
            continue
        steps, fired, c2 = paths[tid]
        tests.append(TestCase(
            id=f"{id_prefix}{len(tests) + 1:02d}",
            steps=tuple(steps),
            required=frozenset(f for f, v in c2 if v),
            forbidden=frozenset(f for f, v in c2 if not v),
        ))
        covered.update(fired)
    return GenerationResult(tests, gaps, explored, depth)
