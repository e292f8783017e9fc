"""Feature models, configurations and brute-force variant enumeration."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Mapping

from .diagnostics import Diagnostic

MANDATORY, OPTIONAL, OR, ALTERNATIVE = "mandatory", "optional", "or", "alternative"
REQUIRES, EXCLUDES = "requires", "excludes"

DEFAULT_LIMIT = 100_000


class DomainMismatch(ValueError):
    pass


class LimitExceeded(RuntimeError):
    pass


class Unsatisfiable(ValueError):
    pass


@dataclass(frozen=True)
class ChildSlot:
    kind: str
    members: tuple[str, ...]


@dataclass(frozen=True)
class Feature:
    id: str
    name: str = ""
    children: tuple[ChildSlot, ...] = ()


@dataclass(frozen=True)
class CrossTreeConstraint:
    kind: str
    left: str
    right: str


@dataclass(frozen=True)
class FeatureModel:
    root: str
    features: tuple[Feature, ...]
    constraints: tuple[CrossTreeConstraint, ...] = ()

    @cached_property
    def by_id(self) -> dict[str, Feature]:
        return {f.id: f for f in self.features}

    @cached_property
    def ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.by_id))

    @cached_property
    def parent(self) -> dict[str, str]:
        parents: dict[str, str] = {}
        for f in self.features:
            for slot in f.children:
                for m in slot.members:
                    parents.setdefault(m, f.id)
        return parents


@dataclass(frozen=True)
class Configuration:
    """A total valuation, stored sorted by feature id."""

    valuation: tuple[tuple[str, bool], ...]

    @classmethod
    def of(cls, values: Mapping[str, bool]) -> "Configuration":
        return cls(tuple(sorted((k, bool(v)) for k, v in values.items())))

    @classmethod
    def from_selected(cls, fm: FeatureModel, selected: Iterable[str]) -> "Configuration":
        chosen = set(selected)
        return cls(tuple((f, f in chosen) for f in fm.ids))

    def __getitem__(self, feature: str) -> bool:
        return self.as_dict()[feature]

    def as_dict(self) -> dict[str, bool]:
        return dict(self.valuation)

    @property
    def selected(self) -> tuple[str, ...]:
        return tuple(f for f, v in self.valuation if v)

    def satisfies(self, required: Iterable[str] = (), forbidden: Iterable[str] = ()) -> bool:
        d = self.as_dict()
        return all(d.get(f, False) for f in required) and not any(d.get(f, False) for f in forbidden)

    def __str__(self) -> str:
        return "{" + ", ".join(self.selected) + "}"


def validate_model(fm: FeatureModel) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    ids = [f.id for f in fm.features]
    known = set(ids)
    for fid in sorted({i for i in ids if ids.count(i) > 1}):
        diags.append(Diagnostic("duplicate", f"feature {fid}", "declared more than once"))
    if fm.root not in known:
        diags.append(Diagnostic("tree", "root", f"root {fm.root!r} is not a declared feature"))

    parents: dict[str, list[str]] = {}
    for f in fm.features:
        for slot in f.children:
            loc = f"feature {f.id}"
            if slot.kind not in (MANDATORY, OPTIONAL, OR, ALTERNATIVE):
                diags.append(Diagnostic("tree", loc, f"unknown child kind {slot.kind!r}"))
            if slot.kind in (MANDATORY, OPTIONAL) and len(slot.members) != 1:
                diags.append(Diagnostic("group-size", loc, f"{slot.kind} slot must hold exactly one feature"))
            if slot.kind in (OR, ALTERNATIVE) and len(slot.members) < 2:
                diags.append(Diagnostic(
                    "group-size", loc, f"{slot.kind} group needs at least 2 members, has {len(slot.members)}"))
            for m in slot.members:
                if m not in known:
                    diags.append(Diagnostic("reference", loc, f"child {m!r} is not a declared feature"))
                parents.setdefault(m, []).append(f.id)

    for child, ps in sorted(parents.items()):
        if len(ps) > 1:
            diags.append(Diagnostic("tree", f"feature {child}", f"has {len(ps)} parent slots ({', '.join(ps)})"))
    if fm.root in parents:
        diags.append(Diagnostic("tree", f"feature {fm.root}", "root must not have a parent"))
    for fid in sorted(known - set(parents) - {fm.root}):
        diags.append(Diagnostic("tree", f"feature {fid}", "is not attached to the tree"))

    # cycle check: walk up from every feature
    first_parent = {c: ps[0] for c, ps in parents.items()}
    for fid in sorted(known):
        seen = {fid}
        cur = fid
        while cur in first_parent:
            cur = first_parent[cur]
            if cur in seen:
                diags.append(Diagnostic("tree", f"feature {fid}", "lies on a parent cycle"))
                break
            seen.add(cur)

    for i, c in enumerate(fm.constraints):
        loc = f"constraint {i}"
        if c.kind not in (REQUIRES, EXCLUDES):
            diags.append(Diagnostic("constraint", loc, f"unknown constraint kind {c.kind!r}"))
        for side in (c.left, c.right):
            if side not in known:
                diags.append(Diagnostic("reference", loc, f"{side!r} is not a declared feature"))
        if c.left == c.right:
            diags.append(Diagnostic("constraint", loc, "constraint must relate two distinct features"))
    return diags


def _valid(fm: FeatureModel, v: Mapping[str, bool]) -> bool:
    if not v[fm.root]:
        return False
    for f in fm.features:
        on = v[f.id]
        for slot in f.children:
            picked = sum(1 for m in slot.members if v[m])
            if not on:
                if picked:
                    return False
                continue
            if slot.kind == MANDATORY and picked != 1:
                return False
            if slot.kind == OR and picked < 1:
                return False
            if slot.kind == ALTERNATIVE and picked != 1:
                return False
    for c in fm.constraints:
        if c.kind == REQUIRES and v[c.left] and not v[c.right]:
            return False
        if c.kind == EXCLUDES and v[c.left] and v[c.right]:
            return False
    return True


def is_valid_configuration(fm: FeatureModel, cfg: Configuration) -> bool:
    v = cfg.as_dict()
    if set(v) != set(fm.ids):
        missing = sorted(set(fm.ids) - set(v))
        extra = sorted(set(v) - set(fm.ids))
        raise DomainMismatch(f"configuration not total over the model (missing {missing}, unknown {extra})")
    return _valid(fm, v)


@lru_cache(maxsize=64)
def _all_valid(fm: FeatureModel, limit: int) -> tuple[Configuration, ...]:
    ids = fm.ids
    n = len(ids)
    found: list[Configuration] = []
    # first sorted id is the most significant bit, so integer order is
    # lexicographic order over the sorted bit-vector
    for code in range(1 << n):
        v = {f: bool(code >> (n - 1 - i) & 1) for i, f in enumerate(ids)}
        if _valid(fm, v):
            found.append(Configuration(tuple(v.items())))
            if len(found) > limit:
                raise LimitExceeded(f"more than {limit} valid configurations")
    return tuple(found)


def enumerate_configurations(fm: FeatureModel, limit: int = DEFAULT_LIMIT) -> list[Configuration]:
    return list(_all_valid(fm, limit))


def complete_partial(fm: FeatureModel, required: Iterable[str] = (), forbidden: Iterable[str] = (),
                     limit: int = DEFAULT_LIMIT) -> Configuration:
    """Smallest valid configuration honouring ``required`` and ``forbidden``.

    Ties between equally small completions go to the lexicographically
    smallest sorted list of selected feature ids.
    """
    req, forb = set(required), set(forbidden)
    if req & forb:
        raise Unsatisfiable(f"features both required and forbidden: {sorted(req & forb)}")
    unknown = (req | forb) - set(fm.ids)
    if unknown:
        raise Unsatisfiable(f"unknown features: {sorted(unknown)}")
    candidates = [c for c in _all_valid(fm, limit) if c.satisfies(req, forb)]
    if not candidates:
        raise Unsatisfiable(f"no valid configuration with {sorted(req)} and without {sorted(forb)}")
    return min(candidates, key=lambda c: (len(c.selected), c.selected))


def is_satisfiable(fm: FeatureModel, literals: Iterable[tuple[str, bool]], limit: int = DEFAULT_LIMIT) -> bool:
    req = [f for f, v in literals if v]
    forb = [f for f, v in literals if not v]
    return any(c.satisfies(req, forb) for c in _all_valid(fm, limit))
