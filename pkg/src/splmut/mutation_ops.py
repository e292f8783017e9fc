"""First-order mutation operators over feature mappings and the domain machine.

Initial-state arrows are structural scaffolding, not modelled behaviour, so the
state-machine operators never target them.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Iterator, Optional

from .expr import (
    Binary,
    Expr,
    Lit,
    Ref,
    Unary,
)
from .mapping import SplSpecification
from .statechart import (
    Region,
    StateKind,
    StateMachine,
    Transition,
    remove_transitions,
    replace_transition,
    structural_validate,
)


class NotApplicable(Exception):
    pass


MAPPING, STATECHART = "mapping", "statechart"


@dataclass(frozen=True)
class OperatorDescriptor:
    code: str
    name: str
    layer: str
    error_type: str


OPERATORS: dict[str, OperatorDescriptor] = {
    d.code: d
    for d in (
        OperatorDescriptor("DMP", "Delete Mapping", "mapping", "add"),
        OperatorDescriptor("DME", "Delete Mapped Element", "mapping", "add"),
        OperatorDescriptor("IME", "Insert Mapped Element", "mapping", "omit"),
        OperatorDescriptor("SWP", "Swap Feature", "mapping", "alter"),
        OperatorDescriptor("CFV", "Change Feature Value", "mapping", "alter"),
        OperatorDescriptor("DTR", "Delete Transition", "statechart", "mix"),
        OperatorDescriptor("CTT", "Change Transition Target", "statechart", "mix"),
        OperatorDescriptor("DEF", "Delete Effect", "statechart", "mix"),
        OperatorDescriptor("DTI", "Delete Trigger", "statechart", "mix"),
        OperatorDescriptor("ITG", "Insert Trigger", "statechart", "mix"),
        OperatorDescriptor("DGD", "Delete Guard", "statechart", "mix"),
        OperatorDescriptor("CGD", "Change Guard", "statechart", "mix"),
    )
}
MAPPING_OPERATORS = tuple(c for c, d in OPERATORS.items() if d.layer == MAPPING)
STATECHART_OPERATORS = tuple(c for c, d in OPERATORS.items() if d.layer == STATECHART)

# One counterpart per operator keeps CGD linear in the number of operators.
BINARY_SUBSTITUTES = {
    "+": "-", "-": "+",
    "*": "/", "/": "*", "%": "*",
    "<": "<=", "<=": "<", ">": ">=", ">=": ">",
    "==": "!=", "!=": "==",
    "&&": "||", "||": "&&",
    "&": "|", "|": "&", "^": "&",
    "<<": ">>", ">>": "<<",
}
UNARY_DROPPED = ("-", "!", "~")


@dataclass(frozen=True)
class SplMutant:
    id: str
    operator: OperatorDescriptor
    locus: tuple[str, ...]
    spec: SplSpecification


def _mutant(code: str, index: int, locus, spec: SplSpecification) -> SplMutant:
    return SplMutant(f"{code}-{index:03d}", OPERATORS[code], tuple(locus), spec)


def _with_mappings(spec: SplSpecification, mappings) -> SplSpecification:
    return replace(spec, mappings=tuple(mappings))


# ------------------------------------------------------------ mapping layer

def gen_dmp(spec: SplSpecification) -> list[SplMutant]:
    out = []
    for i, m in enumerate(spec.mappings):
        rest = spec.mappings[:i] + spec.mappings[i + 1:]
        out.append(_mutant("DMP", len(out) + 1, [m.id], _with_mappings(spec, rest)))
    return out


def gen_dme(spec: SplSpecification) -> list[SplMutant]:
    out = []
    for i, m in enumerate(spec.mappings):
        for e in m.elements:
            remaining = tuple(x for x in m.elements if x != e)
            if remaining:
                ms = spec.mappings[:i] + (replace(m, elements=remaining),) + spec.mappings[i + 1:]
            else:
                ms = spec.mappings[:i] + spec.mappings[i + 1:]
            out.append(_mutant("DME", len(out) + 1, [m.id, e], _with_mappings(spec, ms)))
    return out


def gen_ime(spec: SplSpecification) -> list[SplMutant]:
    ms = spec.mappings
    if len(ms) < 2:
        raise NotApplicable("IME needs at least two mappings")
    out = []
    for i, m in enumerate(ms):
        donor = ms[(i + 1) % len(ms)]
        e = donor.elements[0]
        if e in m.elements:
            continue
        new = ms[:i] + (replace(m, elements=m.elements + (e,)),) + ms[i + 1:]
        out.append(_mutant("IME", len(out) + 1, [m.id, e], _with_mappings(spec, new)))
    return out


def gen_swp(spec: SplSpecification) -> list[SplMutant]:
    ms = spec.mappings
    n = len(ms)
    if n < 2:
        raise NotApplicable("SWP needs at least two mappings")
    out = []
    done: set[frozenset[int]] = set()
    for i in range(n):
        j = (i + 1) % n
        pair = frozenset((i, j))
        a, b = ms[i], ms[j]
        if pair in done or a.feature == b.feature:
            continue
        done.add(pair)
        swapped = list(ms)
        swapped[i] = replace(a, feature=b.feature)
        swapped[j] = replace(b, feature=a.feature)
        keys = [(m.feature, m.value) for m in swapped]
        if len(set(keys)) != len(keys):
            continue
        out.append(_mutant("SWP", len(out) + 1, [a.id, b.id], _with_mappings(spec, swapped)))
    return out


def gen_cfv(spec: SplSpecification) -> list[SplMutant]:
    out = []
    ms = spec.mappings
    for i, m in enumerate(ms):
        if any(o.feature == m.feature and o.value != m.value for o in ms if o is not m):
            continue
        new = ms[:i] + (replace(m, value=not m.value),) + ms[i + 1:]
        out.append(_mutant("CFV", len(out) + 1, [m.id], _with_mappings(spec, new)))
    return out


# ------------------------------------------------------- state-machine layer

def _targets(spec: SplSpecification) -> Iterator[tuple[Region, Transition]]:
    m = spec.machine
    for r in m.regions:
        for t in r.transitions:
            if not m.is_initial_transition(t):
                yield r, t


def _with_transition(spec: SplSpecification, t: Transition) -> SplSpecification:
    return replace(spec, machine=replace_transition(spec.machine, t))


def _pseudo_issues(m: StateMachine) -> set[tuple[str, str]]:
    return {(d.location, d.message) for d in structural_validate(m) if d.code == "pseudo-state"}


def gen_dtr(spec: SplSpecification) -> list[SplMutant]:
    out = []
    baseline = _pseudo_issues(spec.machine)
    for _, t in _targets(spec):
        machine = remove_transitions(spec.machine, {t.id})
        if _pseudo_issues(machine) - baseline:
            continue
        mappings = []
        for mp in spec.mappings:
            if t.id in mp.elements:
                remaining = tuple(e for e in mp.elements if e != t.id)
                if not remaining:
                    continue
                mp = replace(mp, elements=remaining)
            mappings.append(mp)
        mutated = SplSpecification(spec.feature_model, tuple(mappings), machine)
        out.append(_mutant("DTR", len(out) + 1, [t.id], mutated))
    return out


def gen_ctt(spec: SplSpecification) -> list[SplMutant]:
    out = []
    for r, t in _targets(spec):
        simple = [s.id for s in r.states if not s.kind.is_pseudo]
        if len(simple) < 2:
            continue
        order = [s.id for s in r.states]
        pos = order.index(t.target)
        new_target = next(
            order[(pos + k) % len(order)]
            for k in range(1, len(order) + 1)
            if order[(pos + k) % len(order)] in simple and order[(pos + k) % len(order)] != t.target
        )
        out.append(_mutant("CTT", len(out) + 1, [t.id], _with_transition(spec, replace(t, target=new_target))))
    return out


def gen_def(spec: SplSpecification) -> list[SplMutant]:
    out = []
    for _, t in _targets(spec):
        if t.effect:
            out.append(_mutant("DEF", len(out) + 1, [t.id], _with_transition(spec, replace(t, effect=()))))
    return out


def gen_dti(spec: SplSpecification) -> list[SplMutant]:
    out = []
    for _, t in _targets(spec):
        for k, trig in enumerate(t.triggers):
            rest = t.triggers[:k] + t.triggers[k + 1:]
            out.append(_mutant("DTI", len(out) + 1, [t.id, trig.signal],
                               _with_transition(spec, replace(t, triggers=rest))))
    return out


def gen_itg(spec: SplSpecification) -> list[SplMutant]:
    out = []
    m = spec.machine
    for r in m.regions:
        candidates = [t for t in r.transitions if not m.is_initial_transition(t)]
        n = len(candidates)
        for i, t in enumerate(candidates):
            if m.state_kind(t.source) in (StateKind.CHOICE, StateKind.JUNCTION):
                continue
            donor = next(
                (candidates[(i + k) % n] for k in range(1, n) if candidates[(i + k) % n].triggers),
                None,
            )
            if donor is None:
                continue
            trig = donor.triggers[0]
            if any(x.signal == trig.signal for x in t.triggers):
                continue
            mutated = _with_transition(spec, replace(t, triggers=t.triggers + (trig,)))
            out.append(_mutant("ITG", len(out) + 1, [t.id, donor.id, trig.signal], mutated))
    return out


def gen_dgd(spec: SplSpecification) -> list[SplMutant]:
    out = []
    for _, t in _targets(spec):
        if t.guard is not None:
            out.append(_mutant("DGD", len(out) + 1, [t.id], _with_transition(spec, replace(t, guard=None))))
    return out


def guard_mutations(expr: Expr) -> list[tuple[str, Expr]]:
    """Every single-point change of ``expr`` as (description, mutated expression)."""
    results: list[tuple[str, Expr]] = []

    def visit(node: Expr, rebuild: Callable[[Expr], Expr]) -> None:
        if isinstance(node, Lit):
            if isinstance(node.value, bool):
                results.append((f"{str(node.value).lower()} -> {str(not node.value).lower()}",
                                rebuild(Lit(not node.value))))
            elif node.value is Ref.NULL:
                results.append(("null -> this", rebuild(Lit(Ref.THIS))))
        elif isinstance(node, Unary):
            if node.op in UNARY_DROPPED:
                results.append((f"drop unary {node.op}", rebuild(node.operand)))
            visit(node.operand, lambda x: rebuild(Unary(node.op, x)))
        elif isinstance(node, Binary):
            sub = BINARY_SUBSTITUTES.get(node.op)
            if sub is not None:
                results.append((f"{node.op} -> {sub}", rebuild(Binary(sub, node.left, node.right))))
            visit(node.left, lambda x: rebuild(Binary(node.op, x, node.right)))
            visit(node.right, lambda x: rebuild(Binary(node.op, node.left, x)))

    visit(expr, lambda x: x)
    return results


def gen_cgd(spec: SplSpecification) -> list[SplMutant]:
    out = []
    for _, t in _targets(spec):
        if t.guard is None:
            continue
        for desc, g in guard_mutations(t.guard):
            out.append(_mutant("CGD", len(out) + 1, [t.id, desc], _with_transition(spec, replace(t, guard=g))))
    return out


GENERATORS: dict[str, Callable[[SplSpecification], list[SplMutant]]] = {
    "DMP": gen_dmp,
    "DME": gen_dme,
    "IME": gen_ime,
    "SWP": gen_swp,
    "CFV": gen_cfv,
    "DTR": gen_dtr,
    "CTT": gen_ctt,
    "DEF": gen_def,
    "DTI": gen_dti,
    "ITG": gen_itg,
    "DGD": gen_dgd,
    "CGD": gen_cgd,
}


def parse_operator_list(text: Optional[str]) -> tuple[str, ...]:
    """Parse ``DMP,CFV`` style lists; ``all``, ``mapping`` and ``statechart`` are shortcuts."""
    if text is None:
        return tuple(OPERATORS)
    codes: list[str] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        key = part.lower()
        if key == "all":
            expanded = tuple(OPERATORS)
        elif key == "mapping":
            expanded = MAPPING_OPERATORS
        elif key == "statechart":
            expanded = STATECHART_OPERATORS
        elif part.upper() in OPERATORS:
            expanded = (part.upper(),)
        else:
            raise ValueError(f"unknown mutation operator {part!r}")
        for c in expanded:
            if c not in codes:
                codes.append(c)
    return tuple(codes)


def generate(spec: SplSpecification, codes=None) -> tuple[list[SplMutant], dict[str, str]]:
    """Run the selected operators in catalog order.

    Returns the mutants and a map of operator code to the reason it was not
    applicable.
    """
    selected = tuple(OPERATORS) if codes is None else tuple(codes)
    mutants: list[SplMutant] = []
    skipped: dict[str, str] = {}
    for code in OPERATORS:
        if code not in selected:
            continue
        try:
            mutants.extend(GENERATORS[code](spec))
        except NotApplicable as exc:
            skipped[code] = str(exc)
    return mutants, skipped
