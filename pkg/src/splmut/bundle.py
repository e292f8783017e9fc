"""JSON spec bundles and test files.

A bundle holds one SPL: feature model, mappings, domain machine, optional
test suite, an optional stimulus payload domain for test generation and
free-form fixture metadata.  Guards and effects are written in the infix
expression syntax of :mod:`splmut.expr`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .expr import ExprSyntaxError, Lit, Ref, action_text, parse_action, parse_expr, to_text
from .feature_model import ChildSlot, CrossTreeConstraint, Feature, FeatureModel
from .mapping import Mapping, SplSpecification
from .statechart import (
    Region,
    StateKind,
    StateMachine,
    StateNode,
    Stimulus,
    Transition,
    Trigger,
    VariableDecl,
    format_emission,
)
from .testing import TestCase, TestStep

BUNDLE_FORMAT = "splmut-bundle/1"
TESTS_FORMAT = "splmut-tests/1"


class BundleError(ValueError):
    """Malformed bundle or test file; ``line``/``column`` are 1-based when known."""

    def __init__(self, message: str, path: str = "", line: Optional[int] = None, column: Optional[int] = None):
        where = ""
        if line is not None:
            where = f"line {line}, column {column}: "
        elif path:
            where = f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.line = line
        self.column = column


@dataclass
class SpecBundle:
    name: str
    spec: SplSpecification
    tests: Optional[list[TestCase]] = None
    payloads: dict[str, list[int]] = field(default_factory=dict)
    metadata: dict[str, Any] = field(default_factory=dict)


# ---------------------------------------------------------------- reading

def _need(obj: dict, key: str, path: str, kind=None):
    if not isinstance(obj, dict):
        raise BundleError("expected an object", path)
    if key not in obj:
        raise BundleError(f"missing field {key!r}", path)
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        raise BundleError(f"field {key!r} has the wrong type", f"{path}/{key}")
    return value


def _expr(text: str, path: str):
    try:
        return parse_expr(text)
    except ExprSyntaxError as exc:
        raise BundleError(str(exc), path) from None


def _action(text: str, path: str):
    try:
        return parse_action(text)
    except ExprSyntaxError as exc:
        raise BundleError(str(exc), path) from None


def _trigger(text: str, path: str) -> Trigger:
    text = text.strip()
    if text.endswith(")") and "(" in text:
        sig, binding = text[:-1].split("(", 1)
        if not binding.strip().isidentifier():
            raise BundleError(f"bad payload binding in trigger {text!r}", path)
        return Trigger(sig.strip(), binding.strip())
    if not text.isidentifier():
        raise BundleError(f"bad trigger {text!r}", path)
    return Trigger(text)


def _initial_value(raw, typ: str, path: str):
    if typ == "bool" and isinstance(raw, bool):
        return raw
    if typ == "int" and isinstance(raw, int) and not isinstance(raw, bool):
        return raw
    raise BundleError(f"initial value {raw!r} does not match type {typ!r}", path)


def feature_model_from_doc(doc: dict, path: str = "/features") -> FeatureModel:
    root = _need(doc, "root", path, str)
    features = []
    for i, f in enumerate(_need(doc, "features", path, list)):
        fp = f"{path}/features/{i}"
        slots = []
        for j, slot in enumerate(f.get("children", [])):
            sp = f"{fp}/children/{j}"
            kind = _need(slot, "kind", sp, str)
            members = _need(slot, "features", sp, list)
            slots.append(ChildSlot(kind, tuple(members)))
        features.append(Feature(_need(f, "id", fp, str), f.get("name", ""), tuple(slots)))
    constraints = []
    for i, c in enumerate(doc.get("constraints", [])):
        cp = f"{path}/constraints/{i}"
        constraints.append(CrossTreeConstraint(_need(c, "kind", cp, str), _need(c, "left", cp, str),
                                               _need(c, "right", cp, str)))
    return FeatureModel(root, tuple(features), tuple(constraints))


def machine_from_doc(doc: dict, path: str = "/machine") -> StateMachine:
    variables = []
    for i, v in enumerate(doc.get("variables", [])):
        vp = f"{path}/variables/{i}"
        typ = _need(v, "type", vp, str)
        variables.append(VariableDecl(_need(v, "name", vp, str), typ,
                                      _initial_value(_need(v, "initial", vp), typ, vp)))
    regions = []
    for i, r in enumerate(_need(doc, "regions", path, list)):
        rp = f"{path}/regions/{i}"
        states = []
        for j, s in enumerate(_need(r, "states", rp, list)):
            sp = f"{rp}/states/{j}"
            if isinstance(s, str):
                states.append(StateNode(s))
                continue
            try:
                kind = StateKind(s.get("kind", "simple"))
            except ValueError:
                raise BundleError(f"unknown state kind {s.get('kind')!r}", sp) from None
            states.append(StateNode(_need(s, "id", sp, str), kind))
        transitions = []
        for j, t in enumerate(_need(r, "transitions", rp, list)):
            tp = f"{rp}/transitions/{j}"
            guard = t.get("guard")
            transitions.append(Transition(
                id=_need(t, "id", tp, str),
                source=_need(t, "source", tp, str),
                target=_need(t, "target", tp, str),
                triggers=tuple(_trigger(x, f"{tp}/triggers") for x in t.get("triggers", [])),
                guard=None if guard is None else _expr(guard, f"{tp}/guard"),
                effect=tuple(_action(a, f"{tp}/effect/{k}") for k, a in enumerate(t.get("effect", []))),
            ))
        regions.append(Region(_need(r, "id", rp, str), tuple(states), tuple(transitions)))
    return StateMachine(
        tuple(variables),
        tuple(regions),
        frozenset(_need(doc, "signals_in", path, list)),
        frozenset(_need(doc, "signals_out", path, list)),
    )


def _emission(text: str, path: str):
    text = text.strip()
    if not (text.endswith(")") and "(" in text):
        return (text, ())
    sig, inner = text[:-1].split("(", 1)
    args = []
    for part in inner.split(","):
        e = _expr(part.strip(), path)
        if not isinstance(e, Lit):
            raise BundleError(f"expected a literal emission argument in {text!r}", path)
        args.append(e.value)
    return (sig.strip(), tuple(args))


def tests_from_doc(items: list, path: str = "/tests") -> list[TestCase]:
    tests = []
    for i, t in enumerate(items):
        tp = f"{path}/{i}"
        steps = []
        for j, s in enumerate(_need(t, "steps", tp, list)):
            sp = f"{tp}/steps/{j}"
            try:
                stim = Stimulus.parse(_need(s, "stimulus", sp, str))
            except ValueError:
                raise BundleError(f"bad stimulus {s['stimulus']!r}", sp) from None
            expected = tuple(_emission(e, sp) for e in s.get("expected", []))
            steps.append(TestStep(stim, expected))
        tests.append(TestCase(
            id=_need(t, "id", tp, str),
            steps=tuple(steps),
            required=frozenset(t.get("required", [])),
            forbidden=frozenset(t.get("forbidden", [])),
        ))
    return tests


def _loads(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise BundleError(exc.msg, line=exc.lineno, column=exc.colno) from None


def bundle_from_doc(doc: dict) -> SpecBundle:
    fmt = doc.get("format") if isinstance(doc, dict) else None
    if fmt != BUNDLE_FORMAT:
        raise BundleError(f"unsupported bundle format {fmt!r} (expected {BUNDLE_FORMAT!r})", "/format")
    fm = feature_model_from_doc(_need(doc, "features", ""))
    machine = machine_from_doc(_need(doc, "machine", ""))
    mappings = []
    for i, m in enumerate(doc.get("mappings", [])):
        mp = f"/mappings/{i}"
        value = _need(m, "value", mp, bool)
        mappings.append(Mapping(_need(m, "id", mp, str), _need(m, "feature", mp, str), value,
                                tuple(_need(m, "elements", mp, list))))
    tests = tests_from_doc(doc["tests"]) if "tests" in doc else None
    payloads = {k: [int(x) for x in v] for k, v in doc.get("payloads", {}).items()}
    return SpecBundle(doc.get("name", ""), SplSpecification(fm, tuple(mappings), machine), tests, payloads,
                      dict(doc.get("metadata", {})))


def loads_bundle(text: str) -> SpecBundle:
    return bundle_from_doc(_loads(text))


def load_bundle(path) -> SpecBundle:
    return loads_bundle(Path(path).read_text())


def loads_tests(text: str) -> list[TestCase]:
    doc = _loads(text)
    if isinstance(doc, dict) and doc.get("format") == TESTS_FORMAT:
        return tests_from_doc(_need(doc, "tests", ""))
    if isinstance(doc, dict) and doc.get("format") == BUNDLE_FORMAT:
        return bundle_from_doc(doc).tests or []
    raise BundleError(f"unsupported test file format (expected {TESTS_FORMAT!r})", "/format")


def load_tests(path) -> list[TestCase]:
    return loads_tests(Path(path).read_text())


# ---------------------------------------------------------------- writing

def _json_value(v):
    return v.value if isinstance(v, Ref) else v


def feature_model_doc(fm: FeatureModel) -> dict:
    return {
        "root": fm.root,
        "features": [
            {
                "id": f.id,
                **({"name": f.name} if f.name else {}),
                **({"children": [{"kind": s.kind, "features": list(s.members)} for s in f.children]}
                   if f.children else {}),
            }
            for f in fm.features
        ],
        "constraints": [{"kind": c.kind, "left": c.left, "right": c.right} for c in fm.constraints],
    }


def machine_doc(m: StateMachine) -> dict:
    def transition(t: Transition) -> dict:
        d: dict[str, Any] = {"id": t.id, "source": t.source, "target": t.target}
        if t.triggers:
            d["triggers"] = [str(tr) for tr in t.triggers]
        if t.guard is not None:
            d["guard"] = to_text(t.guard)
        if t.effect:
            d["effect"] = [action_text(a) for a in t.effect]
        return d

    return {
        "variables": [{"name": v.name, "type": v.type, "initial": _json_value(v.initial)} for v in m.variables],
        "signals_in": sorted(m.signals_in),
        "signals_out": sorted(m.signals_out),
        "regions": [
            {
                "id": r.id,
                "states": [s.id if s.kind is StateKind.SIMPLE else {"id": s.id, "kind": s.kind.value}
                           for s in r.states],
                "transitions": [transition(t) for t in r.transitions],
            }
            for r in m.regions
        ],
    }


def tests_doc(tests: list[TestCase]) -> list[dict]:
    out = []
    for t in tests:
        d: dict[str, Any] = {"id": t.id}
        if t.required:
            d["required"] = sorted(t.required)
        if t.forbidden:
            d["forbidden"] = sorted(t.forbidden)
        d["steps"] = [
            {"stimulus": str(s.stimulus), "expected": [format_emission(e) for e in s.expected]}
            for s in t.steps
        ]
        out.append(d)
    return out


def bundle_doc(b: SpecBundle) -> dict:
    doc: dict[str, Any] = {"format": BUNDLE_FORMAT, "name": b.name}
    doc["features"] = feature_model_doc(b.spec.feature_model)
    doc["mappings"] = [
        {"id": m.id, "feature": m.feature, "value": m.value, "elements": list(m.elements)}
        for m in b.spec.mappings
    ]
    doc["machine"] = machine_doc(b.spec.machine)
    if b.payloads:
        doc["payloads"] = {k: list(v) for k, v in sorted(b.payloads.items())}
    if b.tests is not None:
        doc["tests"] = tests_doc(b.tests)
    if b.metadata:
        doc["metadata"] = b.metadata
    return doc


def dumps_bundle(b: SpecBundle) -> str:
    return json.dumps(bundle_doc(b), indent=2) + "\n"


def dumps_tests(tests: list[TestCase]) -> str:
    return json.dumps({"format": TESTS_FORMAT, "tests": tests_doc(tests)}, indent=2) + "\n"
