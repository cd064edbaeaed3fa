import itertools
import random

import pytest

from src.errors import SizeCapExceeded, TSFormatError, TSValidationError
from src.ts import (
    accepts,
    accessible,
    bisimilar,
    distinguishing_trace,
    is_bisimulation,
    is_isomorphic,
    parse_ts,
    product_with_components,
    reroot,
    serialize_ts,
    sync_product,
    TransitionSystem,
    to_dot,
)


def test_parse_ring10_counts(ring10):
    assert len(ring10.states) == 10
    assert len(ring10.transitions) == 12
    assert ring10.events == ("a", "b", "c", "d", "f", "e")
    # initial first, then first appearance
    assert ring10.states[:4] == ("s0", "s7", "s1", "s9")


def test_serialize_ring10_is_13_lines(ring10):
    text = serialize_ts(ring10)
    assert text.splitlines()[0] == ".initial s0"
    assert len(text.splitlines()) == 13
    assert parse_ts(text) == ring10


def test_only_initial_is_one_state_ts():
    ts = parse_ts(".initial s0\n")
    assert ts.states == ("s0",)
    assert ts.transitions == ()


def test_self_loop_rejected():
    with pytest.raises(TSValidationError, match="self-loop"):
        parse_ts(".initial s0\ns0 a s0\n")


def test_nondeterminism_rejected():
    with pytest.raises(TSValidationError, match="nondeterminism"):
        parse_ts(".initial s0\ns0 a s1\ns0 a s2\ns1 b s0\ns2 b s0\n")


def test_missing_initial_rejected():
    with pytest.raises(TSValidationError, match="missing .initial"):
        parse_ts("s0 a s1\ns1 b s0\n")


def test_unknown_initial_rejected():
    with pytest.raises(TSValidationError, match="unknown state"):
        parse_ts(".initial x\ns0 a s1\ns1 b s0\n")


def test_unreachable_state_rejected():
    with pytest.raises(TSValidationError, match="unreachable"):
        parse_ts(".initial s0\ns0 a s1\ns1 b s0\ns2 c s0\n")


def test_syntax_error_has_line_number():
    with pytest.raises(TSFormatError) as err:
        parse_ts(".initial s0\ns0 a\n")
    assert err.value.line == 2


def test_product_separator_only_with_composite_names():
    text = ".initial p0·q0\np0·q0 a p1·q0\np1·q0 b p0·q0\n"
    with pytest.raises(TSFormatError):
        parse_ts(text)
    assert len(parse_ts(text, composite_names=True).states) == 2


def test_accepts_traces(ring10):
    assert accepts(ring10, "acbdaefd")
    assert not accepts(ring10, "bacfd")
    assert accepts(ring10, "")


def test_accessible_drops_unreachable_and_relaxes():
    ts = accessible(["s0", "s1", "s2"], ["a", "b", "c"], [("s0", "a", "s1"), ("s1", "b", "s0"), ("s2", "c", "s0")], "s0")
    assert ts.states == ("s0", "s1")
    assert not ts.strict
    with pytest.raises(TSValidationError, match="zero occurrences"):
        ts.require_strict()


def test_product_with_single_state_is_isomorphic(ring10):
    unit = parse_ts(".initial q0\n")
    assert is_isomorphic(ring10, sync_product([ring10, unit])) is not None


def test_product_single_input_is_copy(cycle2):
    assert sync_product([cycle2]) == cycle2


def test_product_is_associative(cycle2):
    a = cycle2
    b = parse_ts(".initial x0\nx0 c x1\nx1 d x0\n")
    c = parse_ts(".initial y0\ny0 b y1\ny1 d y0\n")
    left = sync_product([sync_product([a, b]), c])
    right = sync_product([a, sync_product([b, c])])
    flat, tuples = product_with_components([a, b, c])
    assert is_isomorphic(left, right) is not None
    assert is_isomorphic(left, flat) is not None
    assert len(tuples) == len(flat.states)


def test_isomorphic_vs_bisimilar(cycle2, cycle4):
    # same behaviour, different sizes
    assert is_isomorphic(cycle2, cycle4) is None
    relation = bisimilar(cycle4, cycle2)
    assert relation is not None
    assert ("q0", "p0") in relation and ("q2", "p0") in relation
    assert is_bisimulation(cycle4, cycle2, relation.pairs)
    assert distinguishing_trace(cycle4, cycle2) is None


def test_isomorphism_cap(ring10):
    with pytest.raises(SizeCapExceeded):
        is_isomorphic(ring10, ring10, cap=5)


def test_distinguishing_trace_is_shortest(ring10, cycle2):
    # both start with a; after it ring10 also offers c, cycle2 only b
    assert distinguishing_trace(ring10, cycle2) == ("a", "c")


def test_reroot_keeps_everything_on_a_cycle(ring10):
    ts = reroot(ring10, "s8")
    assert ts.initial == "s8"
    assert len(ts.states) == 10


def test_to_dot_is_stable(cycle2):
    dot = to_dot(cycle2)
    assert dot == to_dot(cycle2)
    assert '"p0" [shape=doublecircle];' in dot
    assert '"p0" -> "p1" [label="a"];' in dot


def rename_states(ts: TransitionSystem, rng: random.Random, prefix: str = "q") -> TransitionSystem:
    order = list(ts.states)
    rng.shuffle(order)
    rename = {s: f"{prefix}{i}" for i, s in enumerate(order)}
    return TransitionSystem(
        tuple(rename[s] for s in order),
        ts.events,
        tuple((rename[a], e, rename[b]) for a, e, b in ts.transitions),
        rename[ts.initial],
        strict=ts.strict,
    )


def path_traces(ts: TransitionSystem, depth: int) -> set[tuple[str, ...]]:
    """
    Every label sequence of a path from the initial state, up to `depth`
    steps, read off the transition list.
    """
    found = {()}
    frontier = {((), ts.initial)}
    for _ in range(depth):
        nxt = set()
        for trace, state in frontier:
            for src, event, dst in ts.transitions:
                if src == state:
                    nxt.add((trace + (event,), dst))
        found |= {t for t, _s in nxt}
        frontier = nxt
    return found


def test_renamed_ring10_is_isomorphic(ring10):
    renamed = rename_states(ring10, random.Random(0))
    mapping = is_isomorphic(ring10, renamed)
    assert mapping is not None
    assert mapping["s0"] == renamed.initial
    assert sorted(mapping.values()) == sorted(renamed.states)
    for src, event, dst in ring10.transitions:
        assert renamed.successors[mapping[src]][event] == mapping[dst]


def test_accepts_matches_path_enumeration(random_ts_corpus):
    for ts in random_ts_corpus[:20]:
        paths = path_traces(ts, 6)
        for length in range(7):
            for trace in itertools.product(ts.events, repeat=length):
                assert accepts(ts, trace) == (trace in paths), (ts.transitions, trace)


def test_product_associative_on_random_systems(random_ts_corpus):
    rng = random.Random(21)
    small = [ts for ts in random_ts_corpus if len(ts.states) <= 4]
    for _ in range(15):
        a, b, c = (rng.choice(small) for _ in range(3))
        left = sync_product([sync_product([a, b]), c])
        right = sync_product([a, sync_product([b, c])])
        flat = sync_product([a, b, c])
        assert is_isomorphic(left, right, cap=200) is not None
        assert is_isomorphic(left, flat, cap=200) is not None


def test_bisimilar_reflexive_and_symmetric(random_ts_corpus):
    for ts in random_ts_corpus:
        assert bisimilar(ts, ts) is not None
    for a, b in itertools.combinations(random_ts_corpus[:15], 2):
        assert (bisimilar(a, b) is None) == (bisimilar(b, a) is None)
        assert (bisimilar(a, b) is None) == (distinguishing_trace(a, b) is not None)


def test_isomorphic_implies_bisimilar(random_ts_corpus):
    rng = random.Random(8)
    for ts in random_ts_corpus:
        renamed = rename_states(ts, rng)
        assert is_isomorphic(ts, renamed) is not None
        relation = bisimilar(ts, renamed)
        assert relation is not None
        assert is_bisimulation(ts, renamed, relation.pairs)
