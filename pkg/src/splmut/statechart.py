"""State machines with orthogonal regions and a run-to-completion interpreter."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterator, NamedTuple, Optional

from .diagnostics import (
    DeadEnd,
    Diagnostic,
    LivelockDetected,
    NonDeterminism,
    RuntimeFault,
)
from .expr import (
    BOOL,
    INT,
    Action,
    Assign,
    Emit,
    Expr,
    ExprTypeError,
    Value,
    apply_action,
    check_action,
    eval_expr,
    typecheck,
)

DEFAULT_STEP_BUDGET = 1000


class StateKind(str, enum.Enum):
    INITIAL = "initial"
    SIMPLE = "simple"
    CHOICE = "choice"
    JUNCTION = "junction"

    @property
    def is_pseudo(self) -> bool:
        return self is not StateKind.SIMPLE


@dataclass(frozen=True)
class VariableDecl:
    name: str
    type: str
    initial: Value


@dataclass(frozen=True)
class StateNode:
    id: str
    kind: StateKind = StateKind.SIMPLE


@dataclass(frozen=True)
class Trigger:
    signal: str
    binding: Optional[str] = None

    def __str__(self) -> str:
        return f"{self.signal}({self.binding})" if self.binding else self.signal


@dataclass(frozen=True)
class Transition:
    id: str
    source: str
    target: str
    triggers: tuple[Trigger, ...] = ()
    guard: Optional[Expr] = None
    effect: tuple[Action, ...] = ()


@dataclass(frozen=True)
class Region:
    id: str
    states: tuple[StateNode, ...]
    transitions: tuple[Transition, ...]

    def state(self, state_id: str) -> Optional[StateNode]:
        for s in self.states:
            if s.id == state_id:
                return s
        return None

    @property
    def initial(self) -> Optional[StateNode]:
        for s in self.states:
            if s.kind is StateKind.INITIAL:
                return s
        return None


@dataclass(frozen=True)
class StateMachine:
    variables: tuple[VariableDecl, ...]
    regions: tuple[Region, ...]
    signals_in: frozenset[str]
    signals_out: frozenset[str]

    def transitions(self) -> Iterator[Transition]:
        for region in self.regions:
            yield from region.transitions

    @cached_property
    def _state_kinds(self) -> dict[str, StateKind]:
        return {s.id: s.kind for r in self.regions for s in r.states}

    def state_kind(self, state_id: str) -> Optional[StateKind]:
        return self._state_kinds.get(state_id)

    def is_initial_transition(self, t: Transition) -> bool:
        return self.state_kind(t.source) is StateKind.INITIAL

    def mutable_transitions(self) -> Iterator[Transition]:
        """Transitions that count as model content (everything but initial arrows)."""
        for t in self.transitions():
            if not self.is_initial_transition(t):
                yield t

    def transition(self, tid: str) -> Transition:
        for t in self.transitions():
            if t.id == tid:
                return t
        raise KeyError(tid)

    def region_of(self, tid: str) -> Region:
        for r in self.regions:
            if any(t.id == tid for t in r.transitions):
                return r
        raise KeyError(tid)

    @property
    def type_env(self) -> dict[str, str]:
        return {v.name: v.type for v in self.variables}


def replace_transition(m: StateMachine, new: Transition) -> StateMachine:
    regions = tuple(
        Region(r.id, r.states, tuple(new if t.id == new.id else t for t in r.transitions))
        for r in m.regions
    )
    return StateMachine(m.variables, regions, m.signals_in, m.signals_out)


def remove_transitions(m: StateMachine, ids: set[str] | frozenset[str]) -> StateMachine:
    regions = tuple(
        Region(r.id, r.states, tuple(t for t in r.transitions if t.id not in ids))
        for r in m.regions
    )
    return StateMachine(m.variables, regions, m.signals_in, m.signals_out)


# --------------------------------------------------------------- validation

def structural_validate(m: StateMachine) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    env = m.type_env

    def add(code: str, loc: str, msg: str) -> None:
        diags.append(Diagnostic(code, loc, msg))

    seen_vars: set[str] = set()
    for v in m.variables:
        if v.name in seen_vars:
            add("duplicate", f"variable {v.name}", "declared twice")
        seen_vars.add(v.name)
        if v.type not in (INT, BOOL):
            add("type", f"variable {v.name}", f"unsupported type {v.type!r}")
        elif (v.type == BOOL) != isinstance(v.initial, bool) or not isinstance(v.initial, int):
            add("type", f"variable {v.name}", f"initial value {v.initial!r} is not {v.type}")

    seen_ids: set[str] = set()
    for r in m.regions:
        if r.id in seen_ids:
            add("duplicate", f"region {r.id}", "id used twice")
        seen_ids.add(r.id)
        for s in r.states:
            if s.id in seen_ids:
                add("duplicate", f"state {s.id}", "id used twice")
            seen_ids.add(s.id)
    for t in m.transitions():
        if t.id in seen_ids:
            add("duplicate", f"transition {t.id}", "id used twice")
        seen_ids.add(t.id)

    for r in m.regions:
        local = {s.id: s for s in r.states}
        initials = [s for s in r.states if s.kind is StateKind.INITIAL]
        if len(initials) != 1:
            add("pseudo-state", f"region {r.id}", f"needs exactly one initial state, found {len(initials)}")
        if not any(not s.kind.is_pseudo for s in r.states):
            add("structure", f"region {r.id}", "has no simple state")
        outgoing: dict[str, list[Transition]] = {s.id: [] for s in r.states}
        for t in r.transitions:
            loc = f"transition {t.id}"
            for end, sid in (("source", t.source), ("target", t.target)):
                if sid not in local:
                    add("reference", loc, f"{end} {sid!r} is not a state of region {r.id}")
            if t.source in outgoing:
                outgoing[t.source].append(t)
            if t.target in local and local[t.target].kind is StateKind.INITIAL:
                add("pseudo-state", loc, "targets an initial state")
            for trig in t.triggers:
                if trig.signal not in m.signals_in:
                    add("reference", loc, f"trigger {trig.signal!r} is not an input signal")
                if trig.binding is not None and env.get(trig.binding) != INT:
                    add("type", loc, f"payload binding {trig.binding!r} is not a declared int variable")
            if t.guard is not None:
                try:
                    gt = typecheck(t.guard, env)
                    if gt != BOOL:
                        add("type", loc, f"guard has type {gt}, expected bool")
                except ExprTypeError as exc:
                    add("type", loc, f"guard: {exc}")
            for action in t.effect:
                try:
                    check_action(action, env)
                except ExprTypeError as exc:
                    add("type", loc, f"effect: {exc}")
                if isinstance(action, Emit) and action.signal not in m.signals_out:
                    add("reference", loc, f"emitted signal {action.signal!r} is not an output signal")
        for s in r.states:
            outs = outgoing[s.id]
            loc = f"state {s.id}"
            if s.kind is StateKind.INITIAL:
                if len(outs) != 1:
                    add("pseudo-state", loc, f"initial state needs exactly one outgoing transition, has {len(outs)}")
                elif outs[0].triggers or outs[0].guard is not None:
                    add("pseudo-state", loc, "initial transition must have no trigger and no guard")
            elif s.kind in (StateKind.CHOICE, StateKind.JUNCTION):
                if not outs:
                    add("pseudo-state", loc, f"{s.kind.value} has no outgoing transition")
                if any(t.triggers for t in outs):
                    add("pseudo-state", loc, f"{s.kind.value} has a triggered outgoing transition")
    return diags


# -------------------------------------------------------------- interpreter

class Stimulus(NamedTuple):
    signal: str
    payload: Optional[int] = None

    def __str__(self) -> str:
        return self.signal if self.payload is None else f"{self.signal}({self.payload})"

    @classmethod
    def parse(cls, text: str) -> "Stimulus":
        text = text.strip()
        if text.endswith(")") and "(" in text:
            name, arg = text[:-1].split("(", 1)
            return cls(name.strip(), int(arg))
        return cls(text)


Emission = tuple  # (signal, tuple of argument values)


def format_emission(e: Emission) -> str:
    signal, args = e
    if not args:
        return signal
    return f"{signal}({', '.join(_value_text(a) for a in args)})"


def _value_text(v: Value) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    return v.value


@dataclass(frozen=True)
class RuntimeState:
    active: tuple[tuple[str, str], ...]
    store: tuple[tuple[str, Value], ...]

    def active_state(self, region_id: str) -> str:
        return dict(self.active)[region_id]

    def value(self, name: str) -> Value:
        return dict(self.store)[name]


@dataclass(frozen=True)
class StepResult:
    state: RuntimeState
    emissions: tuple[Emission, ...]
    fired: tuple[str, ...] = field(default=())


# presence(t) -> whether t is part of the machine being executed; it may also
# raise to let a caller explore an undecided variability point.
Presence = Callable[[Transition], bool]


class Interpreter:
    """Deterministic run-to-completion execution of a :class:`StateMachine`.

    Junctions are evaluated like choices: after the effects of the incoming
    transition have been applied.
    """

    def __init__(self, machine: StateMachine, budget: int = DEFAULT_STEP_BUDGET,
                 presence: Optional[Presence] = None):
        self.machine = machine
        self.budget = budget
        self.presence = presence
        self._outgoing: dict[str, list[Transition]] = {}
        for t in machine.transitions():
            self._outgoing.setdefault(t.source, []).append(t)

    def initial(self) -> StepResult:
        store: dict[str, Value] = {v.name: v.initial for v in self.machine.variables}
        active: dict[str, str] = {}
        run = _Run(self, store)
        for r in self.machine.regions:
            init = r.initial
            outs = self._outgoing.get(init.id, []) if init else []
            if len(outs) != 1:
                raise DeadEnd(f"region {r.id} has no usable initial transition")
            active[r.id] = run.fire(outs[0], None, None)
        run.complete(active)
        return StepResult(_freeze(active, store), tuple(run.emissions), tuple(run.fired))

    def step(self, rt: RuntimeState, stimulus: Stimulus) -> StepResult:
        if stimulus.signal not in self.machine.signals_in:
            raise ValueError(f"{stimulus.signal!r} is not an input signal")
        store = dict(rt.store)
        active = dict(rt.active)
        run = _Run(self, store)
        for r in self.machine.regions:
            cur = active[r.id]
            enabled: list[tuple[Transition, Trigger]] = []
            for t in self._outgoing.get(cur, ()):
                trig = next((tr for tr in t.triggers if tr.signal == stimulus.signal), None)
                if trig is None:
                    continue
                overlay = store
                if trig.binding is not None:
                    overlay = dict(store)
                    overlay[trig.binding] = stimulus.payload if stimulus.payload is not None else 0
                if run.is_enabled(t, overlay):
                    enabled.append((t, trig))
            if len(enabled) > 1:
                ids = ", ".join(t.id for t, _ in enabled)
                raise NonDeterminism(f"state {cur}: {ids} enabled by {stimulus}")
            if enabled:
                t, trig = enabled[0]
                active[r.id] = run.fire(t, trig, stimulus.payload)
        run.complete(active)
        return StepResult(_freeze(active, store), tuple(run.emissions), tuple(run.fired))

    def run(self, stimuli) -> list[StepResult]:
        results = [self.initial()]
        for s in stimuli:
            results.append(self.step(results[-1].state, s))
        return results


class _Run:
    """Mutable scratch state for one initialisation or one stimulus."""

    def __init__(self, interp: Interpreter, store: dict[str, Value]):
        self.interp = interp
        self.store = store
        self.emissions: list[Emission] = []
        self.fired: list[str] = []
        self.budget = interp.budget

    def is_enabled(self, t: Transition, store) -> bool:
        try:
            guard_ok = t.guard is None or bool(eval_expr(t.guard, store))
        except RuntimeFault:
            if self._present(t):
                raise
            return False
        return guard_ok and self._present(t)

    def _present(self, t: Transition) -> bool:
        presence = self.interp.presence
        return True if presence is None else presence(t)

    def fire(self, t: Transition, trig: Optional[Trigger], payload: Optional[int]) -> str:
        if trig is not None and trig.binding is not None:
            self.store[trig.binding] = payload if payload is not None else 0
        self._traverse(t)
        return self._settle(t.target)

    def _traverse(self, t: Transition) -> None:
        for action in t.effect:
            if isinstance(action, Assign):
                apply_action(action, self.store)
            else:
                args = tuple(eval_expr(a, self.store) for a in action.args)
                self.emissions.append((action.signal, args))
        self.fired.append(t.id)

    def _tick(self) -> None:
        self.budget -= 1
        if self.budget < 0:
            raise LivelockDetected(f"step budget of {self.interp.budget} micro-steps exhausted")

    def _completions(self, state_id: str) -> list[Transition]:
        return [
            t for t in self.interp._outgoing.get(state_id, ())
            if not t.triggers and self.is_enabled(t, self.store)
        ]

    def _settle(self, state_id: str) -> str:
        """Pass through choice/junction nodes until a simple state is reached."""
        kind = self.interp.machine.state_kind(state_id)
        while kind in (StateKind.CHOICE, StateKind.JUNCTION):
            enabled = self._completions(state_id)
            if not enabled:
                raise DeadEnd(f"{kind.value} {state_id} has no enabled outgoing transition")
            if len(enabled) > 1:
                ids = ", ".join(t.id for t in enabled)
                raise NonDeterminism(f"{kind.value} {state_id}: {ids} enabled together")
            self._tick()
            t = enabled[0]
            self._traverse(t)
            state_id = t.target
            kind = self.interp.machine.state_kind(state_id)
        return state_id

    def complete(self, active: dict[str, str]) -> None:
        progressed = True
        while progressed:
            progressed = False
            for r in self.interp.machine.regions:
                cur = active[r.id]
                enabled = self._completions(cur)
                if len(enabled) > 1:
                    ids = ", ".join(t.id for t in enabled)
                    raise NonDeterminism(f"state {cur}: completion transitions {ids} enabled together")
                if enabled:
                    self._tick()
                    active[r.id] = self.fire(enabled[0], None, None)
                    progressed = True


def _freeze(active: dict[str, str], store: dict[str, Value]) -> RuntimeState:
    return RuntimeState(tuple(active.items()), tuple(store.items()))
