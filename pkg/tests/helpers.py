"""Random small specifications and independent oracles shared by the tests."""
from __future__ import annotations

import ctypes
import itertools
import random
from fractions import Fraction

from splmut.expr import Assign, Binary, Emit, Lit, Ref, Unary, Var, walk
from splmut.feature_model import ChildSlot, CrossTreeConstraint, Feature, FeatureModel
from splmut.mapping import Mapping, SplSpecification
from splmut.statechart import (
    Region,
    StateKind,
    StateMachine,
    StateNode,
    Transition,
    Trigger,
    VariableDecl,
)
from splmut.mutation_ops import BINARY_SUBSTITUTES, UNARY_DROPPED

# ------------------------------------------------------------ random specs

GUARDS = [
    Binary(">", Var("x"), Lit(0)),
    Binary("&&", Var("b"), Binary("<", Var("x"), Lit(3))),
    Binary("||", Unary("!", Var("b")), Binary("==", Binary("%", Var("x"), Lit(2)), Lit(1))),
    Lit(True),
    Binary("!=", Binary("+", Var("x"), Lit(1)), Lit(2)),
]
EFFECTS = [
    (Assign("x", "+=", Lit(1)),),
    (Assign("b", "=", Unary("!", Var("b"))), Emit("o1")),
    (Emit("o2", (Var("x"),)),),
    (Assign("x", "=", Lit(0)), Emit("o1")),
]
SIGNALS = ("a", "b", "c")


def random_feature_model(rng: random.Random, n: int) -> FeatureModel:
    ids = [f"F{i:02d}" for i in range(n)]
    children: dict[str, list[str]] = {f: [] for f in ids}
    for i in range(1, n):
        children[ids[rng.randrange(i)]].append(ids[i])
    features = []
    for f in ids:
        rest = list(children[f])
        slots = []
        while rest:
            if len(rest) >= 2 and rng.random() < 0.4:
                k = rng.randint(2, min(3, len(rest)))
                slots.append(ChildSlot(rng.choice(("or", "alternative")), tuple(rest[:k])))
                rest = rest[k:]
            else:
                slots.append(ChildSlot(rng.choice(("mandatory", "optional", "optional")), (rest.pop(0),)))
        features.append(Feature(f, "", tuple(slots)))
    constraints = []
    if n >= 3:
        for _ in range(rng.randint(0, 2)):
            a, b = rng.sample(ids[1:], 2)
            constraints.append(CrossTreeConstraint(rng.choice(("requires", "excludes")), a, b))
    return FeatureModel(ids[0], tuple(features), tuple(constraints))


def random_machine(rng: random.Random, n_transitions: int, regions: int = 1) -> StateMachine:
    regs = []
    count = 0
    per = [n_transitions // regions + (1 if r < n_transitions % regions else 0) for r in range(regions)]
    for r in range(regions):
        simple = [f"R{r}S{i}" for i in range(rng.randint(1, 4))]
        states = (StateNode(f"R{r}init", StateKind.INITIAL),) + tuple(StateNode(s) for s in simple)
        transitions = [Transition(f"R{r}t00", f"R{r}init", simple[0])]
        for _ in range(per[r]):
            count += 1
            k = rng.choice((0, 1, 1, 1, 2))
            triggers = tuple(Trigger(s) for s in rng.sample(SIGNALS, k))
            transitions.append(Transition(
                id=f"t{count:02d}",
                source=rng.choice(simple),
                target=rng.choice(simple),
                triggers=triggers,
                guard=rng.choice(GUARDS) if rng.random() < 0.4 else None,
                effect=rng.choice(EFFECTS) if rng.random() < 0.5 else (),
            ))
        regs.append(Region(f"R{r}", states, tuple(transitions)))
    return StateMachine(
        (VariableDecl("x", "int", 0), VariableDecl("b", "bool", False)),
        tuple(regs),
        frozenset(SIGNALS),
        frozenset(("o1", "o2")),
    )


def random_spec(rng: random.Random, max_features: int = 16, max_transitions: int = 12) -> SplSpecification:
    fm = random_feature_model(rng, rng.randint(1, max_features))
    machine = random_machine(rng, rng.randint(1, max_transitions), regions=rng.choice((1, 1, 2)))
    mutable = [t.id for t in machine.mutable_transitions()]
    pairs = [(f, v) for f in fm.ids for v in (True, False)]
    rng.shuffle(pairs)
    mappings = []
    for k, (f, v) in enumerate(pairs[: rng.randint(0, min(5, len(pairs)))]):
        elements = tuple(rng.sample(mutable, rng.randint(1, min(3, len(mutable)))))
        mappings.append(Mapping(f"M{k + 1}", f, v, elements))
    return SplSpecification(fm, tuple(mappings), machine)


def random_valuation(rng: random.Random, fm: FeatureModel) -> dict[str, bool]:
    return {f: rng.random() < 0.5 for f in fm.ids}


# ----------------------------------------------------------------- oracles

def oracle_valid(fm: FeatureModel, v: dict[str, bool]) -> bool:
    """FODA semantics written as a list of implications."""
    rules = [v[fm.root]]
    for f in fm.features:
        for slot in f.children:
            members = [v[m] for m in slot.members]
            rules += [(not on) or v[f.id] for on in members]  # child implies parent
            if slot.kind == "mandatory":
                rules.append((not v[f.id]) or all(members))
            elif slot.kind == "or":
                rules.append((not v[f.id]) or any(members))
            elif slot.kind == "alternative":
                rules.append((not v[f.id]) or sum(members) == 1)
    for c in fm.constraints:
        if c.kind == "requires":
            rules.append((not v[c.left]) or v[c.right])
        else:
            rules.append(not (v[c.left] and v[c.right]))
    return all(rules)


def oracle_variants(fm: FeatureModel) -> list[tuple[str, ...]]:
    """All valid configurations as sorted selected-id tuples, by brute force over 2^n."""
    ids = sorted(fm.ids)
    out = []
    for bits in itertools.product((False, True), repeat=len(ids)):
        v = dict(zip(ids, bits))
        if oracle_valid(fm, v):
            out.append(tuple(f for f in ids if v[f]))
    return sorted(out, key=lambda sel: [f in sel for f in ids])


def oracle_present(spec: SplSpecification, v: dict[str, bool]) -> set[str]:
    """Transition ids kept in the product: every mapping naming a transition must hold."""
    kept = set()
    for t in spec.machine.transitions():
        naming = [m for m in spec.mappings if t.id in m.elements]
        if all(v[m.feature] == m.value for m in naming):
            kept.add(t.id)
    return kept


def i32(x: int) -> int:
    return ctypes.c_int32(x & 0xFFFFFFFF).value


def oracle_int_op(op: str, a: int, b: int) -> int:
    if op == "+":
        return i32(a + b)
    if op == "-":
        return i32(a - b)
    if op == "*":
        return i32(a * b)
    if op == "/":
        return i32(int(Fraction(a, b)))  # int() truncates toward zero
    if op == "%":
        return i32(a - b * int(Fraction(a, b)))
    if op == "&":
        return i32(a & b)
    if op == "|":
        return i32(a | b)
    if op == "^":
        return i32(a ^ b)
    if op == "<<":
        return i32(a << (b % 32))
    if op == ">>":
        return i32(a >> (b % 32))
    raise ValueError(op)


# ---------------------------------------------------------- count oracle

def expected_guard_points(expr) -> int:
    n = 0
    for node in walk(expr):
        if isinstance(node, Binary) and node.op in BINARY_SUBSTITUTES:
            n += 1
        elif isinstance(node, Unary) and node.op in UNARY_DROPPED:
            n += 1
        elif isinstance(node, Lit) and (isinstance(node.value, bool) or node.value is Ref.NULL):
            n += 1
    return n


def expected_counts(spec) -> dict:
    ms = spec.mappings
    m = spec.machine
    mutable = list(m.mutable_transitions())
    has_pseudo = any(s.kind in (StateKind.CHOICE, StateKind.JUNCTION) for r in m.regions for s in r.states)
    exp = {
        "DMP": len(ms),
        "DME": sum(len(x.elements) for x in ms),
        "CFV": sum(1 for x in ms if not any(o.feature == x.feature and o.value != x.value for o in ms)),
        "DEF": sum(1 for t in mutable if t.effect),
        "DTI": sum(len(t.triggers) for t in mutable),
        "DGD": sum(1 for t in mutable if t.guard is not None),
        "CGD": sum(expected_guard_points(t.guard) for t in mutable if t.guard is not None),
        "CTT": sum(1 for r in m.regions for t in r.transitions
                   if not m.is_initial_transition(t) and sum(not s.kind.is_pseudo for s in r.states) >= 2),
    }
    if not has_pseudo:
        exp["DTR"] = len(mutable)
    return exp


# B has a triggerless self-loop that only its guard keeps quiet, and the two
# "go" transitions out of A are kept apart by complementary guards.
SAFETY = """{
  "format": "splmut-bundle/1", "name": "safety",
  "features": {"root": "R", "features": [{"id": "R"}]},
  "machine": {
    "variables": [{"name": "x", "type": "int", "initial": 0}],
    "signals_in": ["back", "go"], "signals_out": ["out"],
    "regions": [{"id": "main", "states": [{"id": "init", "kind": "initial"}, "A", "B", "C"],
      "transitions": [
        {"id": "t0", "source": "init", "target": "A"},
        {"id": "t1", "source": "A", "target": "B", "triggers": ["go"], "guard": "x == 0", "effect": ["^out"]},
        {"id": "t2", "source": "A", "target": "C", "triggers": ["go"], "guard": "x != 0"},
        {"id": "t3", "source": "B", "target": "A", "triggers": ["back"]},
        {"id": "t4", "source": "B", "target": "B", "guard": "x > 100", "effect": ["x += 1"]},
        {"id": "t5", "source": "C", "target": "A", "triggers": ["back"]}
      ]}]
  }
}"""
