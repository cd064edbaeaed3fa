import dataclasses

import pytest

from src.errors import StateMachineError
from src.regions import Region, minimal_regions, region_from_states
from src.sm import (
    SmSet,
    StateMachine,
    ec_set_check,
    parse_sm,
    reachability_graph,
    serialize_sm,
    sm_from_regions,
    sm_to_dot,
    token_game,
    validate_sm,
)
from src.ts import accepts, is_isomorphic, parse_ts, sync_product


def test_sm4_structure(ring10, sm4):
    assert sm4.names[sm4.initial] == "r1"
    edges = {(sm4.names[p], e, sm4.names[q]) for p, e, q in sm4.edges}
    assert edges == {("r1", "a", "r14"), ("r14", "c", "r8"), ("r14", "e", "r8"), ("r8", "d", "r1")}
    assert sm4.complement == ("b", "f")
    assert validate_sm(ring10, sm4) == []


def test_sm5_structure(ring10, sm5):
    edges = {(sm5.names[p], e, sm5.names[q]) for p, e, q in sm5.edges}
    assert edges == {("r11", "b", "r12"), ("r12", "f", "r11")}
    assert sm5.names[sm5.initial] == "r11"


def test_overlap_rejected(ring10):
    a = region_from_states(ring10, ["s0", "s8"])
    with pytest.raises(StateMachineError, match="overlap"):
        sm_from_regions(ring10, [a, a])


def test_non_cover_rejected(ring10):
    a = region_from_states(ring10, ["s0", "s8"])
    with pytest.raises(StateMachineError, match="cover"):
        sm_from_regions(ring10, [a])


def test_non_region_rejected(ring10):
    a = region_from_states(ring10, ["s7", "s1", "s9", "s2"])
    with pytest.raises(StateMachineError, match="not a region"):
        sm_from_regions(ring10, [a])


def test_complement_pair_two_cycle(cycle2):
    regions = minimal_regions(cycle2)
    sm = sm_from_regions(cycle2, regions, catalog=regions)
    assert sm.names == ("r0", "r1")
    assert sm.alphabet == ("a", "b")


def test_retargeted_edge_invalid(ring10, sm4):
    r1 = sm4.names.index("r1")
    edges = tuple((p, e, r1) if e == "c" else (p, e, q) for p, e, q in sm4.edges)
    broken = dataclasses.replace(sm4, edges=edges)
    assert any("post-region" in p for p in validate_sm(ring10, broken))


def test_two_initial_places_invalid(ring10, sm4):
    broken = dataclasses.replace(sm4, marking=(0, 1))
    assert any("initial place" in p for p in validate_sm(ring10, broken))


def test_reachability_graphs(sm4, sm5):
    rg5 = reachability_graph(sm5)
    assert len(rg5.states) == 2 and len(rg5.transitions) == 2
    rg4 = reachability_graph(sm4)
    assert len(rg4.states) == 3 and len(rg4.transitions) == 4
    for sm in (sm4, sm5):
        assert is_isomorphic(reachability_graph(sm), token_game(sm)) is not None


def test_one_place_machine():
    ts = parse_ts(".initial s0\n")
    sm = StateMachine(places=(Region(1),), names=("r0",), edges=(), marking=(0,), alphabet=(), universe=ts.states)
    assert len(reachability_graph(sm).states) == 1
    assert sm_to_dot(sm).count("->") == 0
    assert '"r0" [shape=doublecircle' in sm_to_dot(sm)


def test_product_of_sm4_sm5(ring10, sm4, sm5):
    product = sync_product([reachability_graph(sm4), reachability_graph(sm5)])
    assert len(product.states) == 6
    assert accepts(product, "acbdaefd")
    assert accepts(product, "bacfd")
    assert accepts(ring10, "acbdaefd")
    assert not accepts(ring10, "bacfd")


def test_ec_set_check(ring10, sm4, sm5):
    assert not ec_set_check(ring10, SmSet((sm4, sm5))).ec_ok
    empty = ec_set_check(ring10, SmSet(()))
    assert not empty.effectiveness_ok


def test_region_union_backrefs(sm4, sm5):
    sms = SmSet((sm4, sm5, sm4))
    assert len(sms.region_union) == 5
    assert sms.instances[sm4.places[0]] == [(0, 0), (2, 0)]


def test_sm_text_round_trip(ring10, sm4):
    text = serialize_sm(sm4)
    assert text.splitlines()[0] == ".initial r1"
    assert ".place r1 = {s0, s8}" in text
    again = parse_sm(text, ring10)
    assert again.signature() == sm4.signature()
    assert parse_sm(text).signature() is not None


def test_parse_sm_rejects_bad_machine(ring10):
    text = ".initial r1\n.place r1 = {s0, s8}\n"
    with pytest.raises(StateMachineError):
        parse_sm(text, ring10)


def test_sm_dot(sm5):
    dot = sm_to_dot(sm5)
    assert dot == sm_to_dot(sm5)
    assert dot.count("->") == 2
    assert 'tooltip="{s1, s2, s8, s4, s6}"' in dot
