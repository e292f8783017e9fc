"""Feature mappings, SPL specifications and product materialisation."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

from .diagnostics import Diagnostic
from .expr import Ref, action_text, to_text
from .feature_model import Configuration, FeatureModel, is_valid_configuration, validate_model
from .statechart import StateMachine, remove_transitions, structural_validate


class InvalidConfiguration(ValueError):
    pass


@dataclass(frozen=True)
class Mapping:
    id: str
    feature: str
    value: bool
    elements: tuple[str, ...]


@dataclass(frozen=True)
class SplSpecification:
    feature_model: FeatureModel
    mappings: tuple[Mapping, ...]
    machine: StateMachine

    def mapping(self, mid: str) -> Mapping:
        for m in self.mappings:
            if m.id == mid:
                return m
        raise KeyError(mid)


@dataclass(frozen=True)
class ProductSpecification:
    machine: StateMachine
    configuration: Configuration


def presence_conditions(mappings: Iterable[Mapping]) -> dict[str, list[tuple[str, bool]]]:
    """Map each mapped transition id to the feature literals that must all hold."""
    cond: dict[str, list[tuple[str, bool]]] = {}
    for m in mappings:
        for e in m.elements:
            cond.setdefault(e, []).append((m.feature, m.value))
    return cond


def materialize(spec: SplSpecification, cfg: Configuration, check: bool = True) -> ProductSpecification:
    if check and not is_valid_configuration(spec.feature_model, cfg):
        raise InvalidConfiguration(f"configuration {cfg} violates the feature model")
    values = cfg.as_dict()
    dropped = {
        tid for tid, lits in presence_conditions(spec.mappings).items()
        if not all(values[f] == v for f, v in lits)
    }
    return ProductSpecification(remove_transitions(spec.machine, dropped), cfg)


def _value_json(v):
    if isinstance(v, Ref):
        return v.value
    return v


def machine_document(m: StateMachine) -> dict:
    """Order-normalised plain-data view of a machine."""
    return {
        "variables": sorted([v.name, v.type, _value_json(v.initial)] for v in m.variables),
        "signals_in": sorted(m.signals_in),
        "signals_out": sorted(m.signals_out),
        "regions": sorted(
            (
                {
                    "id": r.id,
                    "states": sorted([s.id, s.kind.value] for s in r.states),
                    "transitions": sorted(
                        (
                            {
                                "id": t.id,
                                "source": t.source,
                                "target": t.target,
                                "triggers": sorted(str(tr) for tr in t.triggers),
                                "guard": None if t.guard is None else to_text(t.guard),
                                # effect order is behaviour, not incidental
                                "effect": [action_text(a) for a in t.effect],
                            }
                            for t in r.transitions
                        ),
                        key=lambda d: d["id"],
                    ),
                }
                for r in m.regions
            ),
            key=lambda d: d["id"],
        ),
    }


def canonicalize(p: ProductSpecification) -> bytes:
    doc = machine_document(p.machine)
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


def validate_spec(spec: SplSpecification) -> list[Diagnostic]:
    diags = list(validate_model(spec.feature_model))
    diags += structural_validate(spec.machine)
    features = set(spec.feature_model.ids)
    initial_arrows = {t.id for t in spec.machine.transitions() if spec.machine.is_initial_transition(t)}
    transitions = {t.id for t in spec.machine.transitions()}
    seen_ids: set[str] = set()
    seen_pairs: dict[tuple[str, bool], str] = {}
    for m in spec.mappings:
        loc = f"mapping {m.id}"
        if m.id in seen_ids:
            diags.append(Diagnostic("duplicate", loc, "mapping id used twice"))
        seen_ids.add(m.id)
        if m.feature not in features:
            diags.append(Diagnostic("reference", loc, f"feature {m.feature!r} does not exist"))
        if not m.elements:
            diags.append(Diagnostic("mapping", loc, "maps no elements"))
        if len(set(m.elements)) != len(m.elements):
            diags.append(Diagnostic("mapping", loc, "lists an element twice"))
        for e in m.elements:
            if e not in transitions:
                diags.append(Diagnostic("reference", loc, f"element {e!r} is not a transition"))
            elif e in initial_arrows:
                diags.append(Diagnostic("mapping", loc, f"initial transition {e!r} cannot be mapped"))
        key = (m.feature, m.value)
        if key in seen_pairs:
            diags.append(Diagnostic(
                "mapping", loc,
                f"feature {m.feature!r} with value {str(m.value).lower()} is already mapped by {seen_pairs[key]}"))
        else:
            seen_pairs[key] = m.id
    return diags

