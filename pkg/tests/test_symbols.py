from __future__ import annotations

import random

import pytest

from minworld.symbols import (
    ACTIONS,
    BehaviorSymbol,
    ConditionalPairSymbol,
    DetectorSet,
    HierarchicalDetectorSymbol,
    IndependentDetectorSymbol,
    SymbolError,
    build_symbol_space,
    detectors_from_groundings,
    load_symbol_space,
    save_symbol_space,
    subtype_detector_id,
)


def test_bundled_space_counts(space):
    # 5 labels + 2 hierarchy pairs on the perception side
    assert len(space.perception) == 7
    sem = [s for s in space.perception if isinstance(s, IndependentDetectorSymbol)]
    hier = [s for s in space.perception if isinstance(s, HierarchicalDetectorSymbol)]
    assert len(sem) == 5
    assert len(hier) == 2
    assert len(space.actions) == 4
    # behavior bank is actions x labels
    assert len(space.behavior) == 20
    assert len(space) == 27


def test_ids_dense_and_stable(space):
    ids = [space.id_of(s) for s in space.perception + space.behavior]
    assert ids == list(range(len(space)))
    # labels sorted, then pairs sorted
    sem_values = [s.value for s in space.perception[:5]]
    assert sem_values == sorted(sem_values)
    pairs = [(s.parent_type, s.subtype) for s in space.perception[5:]]
    assert pairs == sorted(pairs)


def test_small_space_counts():
    space = build_symbol_space(
        ["a", "b", "c", "d", "e"], [("a", "b")], ["navigate", "open"],
    )
    assert len(space.perception) == 6
    assert len(space.behavior) == 10


def test_pair_lookup(space):
    assert space.pair_for_subtype("handle") == ("door", "handle")
    assert space.pair_for_subtype("top") == ("box", "top")
    assert space.pair_for_subtype("door") is None


def test_hierarchy_lookup(space):
    sym = space.hierarchy("door", "handle")
    assert isinstance(sym, HierarchicalDetectorSymbol)
    assert (sym.parent_type, sym.subtype) == ("door", "handle")
    with pytest.raises(SymbolError):
        space.hierarchy("door", "top")


def test_semantic_lookup(space):
    sym = space.semantic("door")
    assert isinstance(sym, IndependentDetectorSymbol)
    assert sym.category == "semantic_label"
    with pytest.raises(SymbolError):
        space.semantic("window")


def test_hierarchy_requires_known_labels():
    with pytest.raises(SymbolError):
        build_symbol_space(["a"], [("a", "b")], ["navigate"])


def test_hierarchy_rejects_self_pair():
    with pytest.raises(SymbolError):
        HierarchicalDetectorSymbol("door", "door")


def test_independent_symbol_validation():
    sym = IndependentDetectorSymbol("semantic_label", "door")
    assert sym.category == "semantic_label"
    with pytest.raises(SymbolError):
        IndependentDetectorSymbol("texture", "rough")
    with pytest.raises(SymbolError):
        IndependentDetectorSymbol("color", "")


def test_conditional_pair_needs_distinct_categories():
    red = IndependentDetectorSymbol("color", "red")
    ball = IndependentDetectorSymbol("geometry", "sphere")
    pair = ConditionalPairSymbol(red, ball)
    assert pair.first is red
    with pytest.raises(SymbolError):
        ConditionalPairSymbol(red, IndependentDetectorSymbol("color", "blue"))


def test_behavior_symbol_shapes():
    one = BehaviorSymbol("navigate", 3)
    assert one.target_b is None
    two = BehaviorSymbol("open", 3, 7)
    assert (two.target_a, two.target_b) == (3, 7)
    with pytest.raises(SymbolError):
        BehaviorSymbol("fly", 3)


def test_subtype_detector_id():
    assert subtype_detector_id("door", "handle") == "door_handle"
    assert subtype_detector_id("box", "top") == "box_top"


def test_detectors_from_semantic_only(space):
    ds = detectors_from_groundings([space.semantic("door")])
    assert ds.ids == frozenset({"door"})
    assert ds.links == frozenset()


def test_detectors_from_hierarchy(space):
    ds = detectors_from_groundings(
        [space.semantic("door"), space.hierarchy("door", "handle")],
    )
    assert ds.ids == frozenset({"door", "door_handle"})
    assert ds.links == frozenset({("door", "handle")})


def test_hierarchy_alone_pulls_parent(space):
    ds = detectors_from_groundings([space.hierarchy("door", "handle")])
    assert ds.ids == frozenset({"door", "door_handle"})


def test_behavior_symbol_rejected_by_detector_mapping():
    with pytest.raises(SymbolError):
        detectors_from_groundings([BehaviorSymbol("open", 1)])


def test_non_label_category_rejected_by_detector_mapping():
    with pytest.raises(SymbolError):
        detectors_from_groundings([IndependentDetectorSymbol("color", "red")])


def test_detector_set_union():
    a = DetectorSet(frozenset({"door"}), frozenset())
    b = DetectorSet(frozenset({"door", "door_handle"}), frozenset({("door", "handle")}))
    u = a.union(b)
    assert u.ids == frozenset({"door", "door_handle"})
    assert u.links == b.links


def test_detectors_monotone_and_idempotent(space):
    # adding groundings can only grow the detector set; mapping twice is stable
    rng = random.Random(20240817)
    pool = list(space.perception)
    for _ in range(50):
        chosen = rng.sample(pool, rng.randrange(1, len(pool) + 1))
        ds = detectors_from_groundings(chosen)
        assert ds == detectors_from_groundings(chosen)
        extra = rng.choice(pool)
        bigger = detectors_from_groundings(chosen + [extra])
        assert ds.ids <= bigger.ids
        assert ds.links <= bigger.links


def test_space_roundtrip(tmp_path, space):
    path = tmp_path / "space.json"
    save_symbol_space(space, path)
    loaded = load_symbol_space(path)
    assert loaded.perception == space.perception
    assert loaded.behavior == space.behavior
    assert loaded.actions == space.actions
    assert [loaded.id_of(s) for s in loaded.perception] == [
        space.id_of(s) for s in space.perception
    ]


def test_space_orders_input(space):
    shuffled = build_symbol_space(
        ["top", "handle", "floor", "drawer", "door", "box"],
        [("door", "handle"), ("box", "top")],
        list(ACTIONS),
    )
    assert shuffled.labels == tuple(sorted(shuffled.labels))
    assert shuffled.actions == tuple(sorted(ACTIONS))
