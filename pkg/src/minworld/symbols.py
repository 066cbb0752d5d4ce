"""Grounding symbols: what an instruction can refer to.

Perception symbols name object detectors (independent properties such as
a semantic label, or a parent/subtype pair for a constituent detector).
Behavior symbols name robot actions over targets. A SymbolSpace collects
them with dense integer ids for factor-graph indexing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

INDEPENDENT_CATEGORIES = (
    "color",
    "geometry",
    "semantic_label",
    "bounding_box",
    "spatial_relation",
    "pose",
)

ACTIONS = ("navigate", "open", "turn", "look")


class SymbolError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class IndependentDetectorSymbol:
    category: str
    value: str

    def __post_init__(self):
        if self.category not in INDEPENDENT_CATEGORIES:
            raise SymbolError(f"unknown detector category {self.category!r}")
        if not self.value:
            raise SymbolError("empty symbol value")


@dataclass(frozen=True, order=True)
class ConditionalPairSymbol:
    """Joint detector over two independent properties of one object."""

    first: IndependentDetectorSymbol
    second: IndependentDetectorSymbol

    def __post_init__(self):
        if self.first.category == self.second.category:
            raise SymbolError("conditional pair needs two distinct categories")


@dataclass(frozen=True, order=True)
class HierarchicalDetectorSymbol:
    """A subtype detector nested one level under a parent type.

    Exactly one level by construction: parent and subtype are plain
    labels, never symbols.
    """

    parent_type: str
    subtype: str

    def __post_init__(self):
        if not self.parent_type or not self.subtype:
            raise SymbolError("empty hierarchy label")
        if self.parent_type == self.subtype:
            raise SymbolError("hierarchy parent equals subtype")


@dataclass(frozen=True)
class BehaviorSymbol:
    """An action over a target; target_a is a semantic label in the
    abstract space or a world object id once instantiated in a graph."""

    action: str
    target_a: str | int
    target_b: str | int | None = None

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise SymbolError(f"unknown action {self.action!r}")


def subtype_detector_id(parent: str, subtype: str) -> str:
    """Composite id/label for a constituent detector, e.g. door_handle."""
    return f"{parent}_{subtype}"


@dataclass(frozen=True)
class DetectorSet:
    """Detector ids plus the parent/subtype links among them."""

    ids: frozenset[str]
    links: frozenset[tuple[str, str]] = frozenset()

    def union(self, other: "DetectorSet") -> "DetectorSet":
        return DetectorSet(self.ids | other.ids, self.links | other.links)


class SymbolSpace:
    """All symbols over a label set, with dense ids.

    Perception symbols come first (independent semantic-label symbols in
    sorted label order, then hierarchical symbols in sorted pair order),
    then one behavior symbol per (action, label) pair.
    """

    def __init__(self, labels, hierarchies, actions):
        labels = tuple(sorted(set(labels)))
        if not labels:
            raise SymbolError("symbol space needs at least one label")
        pairs = tuple(sorted(set(tuple(p) for p in hierarchies)))
        actions = tuple(sorted(set(actions)))
        for a in actions:
            if a not in ACTIONS:
                raise SymbolError(f"unknown action {a!r}")
        for parent, subtype in pairs:
            if parent not in labels or subtype not in labels:
                raise SymbolError(f"hierarchy ({parent}, {subtype}) uses unknown label")
        self.labels = labels
        self.actions = actions
        self.hierarchy_pairs = pairs
        self.perception: tuple = tuple(
            [IndependentDetectorSymbol("semantic_label", x) for x in labels]
            + [HierarchicalDetectorSymbol(p, s) for p, s in pairs]
        )
        self.behavior: tuple[BehaviorSymbol, ...] = tuple(
            BehaviorSymbol(a, x) for a in actions for x in labels
        )
        self._ids = {sym: i for i, sym in enumerate(self.perception + self.behavior)}

    def __len__(self) -> int:
        return len(self._ids)

    def id_of(self, symbol) -> int:
        return self._ids[symbol]

    def semantic(self, label: str) -> IndependentDetectorSymbol:
        if label not in self.labels:
            raise SymbolError(f"unknown label {label!r}")
        return IndependentDetectorSymbol("semantic_label", label)

    def hierarchy(self, parent: str, subtype: str) -> HierarchicalDetectorSymbol:
        if (parent, subtype) not in self.hierarchy_pairs:
            raise SymbolError(f"unknown hierarchy ({parent!r}, {subtype!r})")
        return HierarchicalDetectorSymbol(parent, subtype)

    def pair_for_subtype(self, subtype: str) -> tuple[str, str] | None:
        for p, s in self.hierarchy_pairs:
            if s == subtype:
                return (p, s)
        return None


def build_symbol_space(labels, hierarchies, actions) -> SymbolSpace:
    return SymbolSpace(labels, hierarchies, actions)


def load_symbol_space(path: str | Path) -> SymbolSpace:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return SymbolSpace(raw["labels"], raw.get("hierarchies", []), raw.get("actions", []))


def save_symbol_space(space: SymbolSpace, path: str | Path) -> None:
    data = {
        "labels": list(space.labels),
        "hierarchies": [list(p) for p in space.hierarchy_pairs],
        "actions": list(space.actions),
    }
    Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def detectors_from_groundings(expressed) -> DetectorSet:
    """Map expressed perception symbols to the minimal detector set.

    A semantic label becomes the detector of that label; a hierarchical
    symbol becomes its parent detector plus the composite subtype
    detector, linked parent -> subtype. Monotone and idempotent in the
    input set; a hierarchical symbol always brings its parent detector.
    """
    ids: set[str] = set()
    links: set[tuple[str, str]] = set()
    for sym in expressed:
        if isinstance(sym, IndependentDetectorSymbol):
            if sym.category != "semantic_label":
                raise SymbolError(
                    f"no detector mapping for category {sym.category!r}")
            ids.add(sym.value)
        elif isinstance(sym, HierarchicalDetectorSymbol):
            ids.add(sym.parent_type)
            ids.add(subtype_detector_id(sym.parent_type, sym.subtype))
            links.add((sym.parent_type, sym.subtype))
        else:
            raise SymbolError(f"not a perception symbol: {sym!r}")
    return DetectorSet(frozenset(ids), frozenset(links))
