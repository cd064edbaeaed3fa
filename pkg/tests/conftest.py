from __future__ import annotations

import random
from pathlib import Path

import pytest

from src.errors import TSValidationError
from src.regions import check_ects, minimal_regions, region_from_states
from src.sm import sm_from_regions
from src.ts import TransitionSystem, parse_ts, sync_product

DATA = Path(__file__).resolve().parents[1] / "data" / "ts"


def load(name: str) -> TransitionSystem:
    return parse_ts((DATA / name).read_text())


@pytest.fixture
def ring10() -> TransitionSystem:
    return load("ring10.ts")


@pytest.fixture
def handshake() -> TransitionSystem:
    return load("handshake.ts")


@pytest.fixture
def merge_ts() -> TransitionSystem:
    return load("merge.ts")


@pytest.fixture
def cycle2() -> TransitionSystem:
    return load("cycle2.ts")


@pytest.fixture
def cycle4() -> TransitionSystem:
    # a,b,a,b around four states: same behaviour as cycle2, twice as long
    return parse_ts(".initial q0\nq0 a q1\nq1 b q2\nq2 a q3\nq3 b q0\n")


@pytest.fixture
def not_ects() -> TransitionSystem:
    # two a's in a row: no region can be exited by both a-edges
    return parse_ts(".initial s0\ns0 a s1\ns1 a s2\ns2 b s3\ns3 c s0\n")


@pytest.fixture
def sm4(ring10):
    places = [["s0", "s8"], ["s7", "s1", "s4", "s3"], ["s9", "s2", "s6", "s5"]]
    return sm_from_regions(ring10, [region_from_states(ring10, p) for p in places], names=["r1", "r14", "r8"])


@pytest.fixture
def sm5(ring10):
    places = [["s0", "s7", "s9", "s3", "s5"], ["s1", "s2", "s8", "s4", "s6"]]
    return sm_from_regions(ring10, [region_from_states(ring10, p) for p in places], names=["r11", "r12"])


def random_cycle(rng: random.Random, pool: list[str], prefix: str) -> TransitionSystem:
    """
    A labelled cycle of 2..5 states. Labels are usually distinct, sometimes
    repeated (those often fail excitation closure and get filtered out).
    """
    n = rng.randint(2, 5)
    if rng.random() < 0.8:
        labels = rng.sample(pool, min(n, len(pool)))
        while len(labels) < n:
            labels.append(rng.choice(pool))
    else:
        labels = [rng.choice(pool) for _ in range(n)]
    names = [f"{prefix}{i}" for i in range(n)]
    transitions = [(names[i], labels[i], names[(i + 1) % n]) for i in range(n)]
    events = list(dict.fromkeys(labels))
    return TransitionSystem(tuple(names), tuple(events), tuple(transitions), names[0])


def random_ects(seed: int) -> TransitionSystem | None:
    """
    Product of 1..3 random cycles over at most 6 events, kept only if it
    has at most 12 states, every event occurs and it is excitation-closed.
    """
    rng = random.Random(seed)
    pool = ["a", "b", "c", "d", "e", "f"][: rng.randint(2, 6)]
    try:
        components = [random_cycle(rng, pool, f"{chr(ord('p') + i)}") for i in range(rng.randint(1, 3))]
        ts = sync_product(components).require_strict()
    except TSValidationError:
        return None
    if len(ts.states) > 12:
        return None
    # flatten names so the result reads like a parsed file
    rename = {s: f"s{i}" for i, s in enumerate(ts.states)}
    ts = TransitionSystem(
        tuple(rename[s] for s in ts.states),
        ts.events,
        tuple((rename[a], e, rename[b]) for a, e, b in ts.transitions),
        rename[ts.initial],
    )
    if not check_ects(ts, minimal_regions(ts)).ok:
        return None
    return ts


def random_reachable_ts(seed: int, min_states: int = 3, max_states: int = 8) -> TransitionSystem | None:
    """
    A random deterministic TS: a spanning tree from s0 plus extra edges.
    None when some event never occurs.
    """
    rng = random.Random(seed)
    n = rng.randint(min_states, max_states)
    events = ["a", "b", "c", "d", "e"][: rng.randint(2, 5)]
    names = [f"s{i}" for i in range(n)]
    used: set[tuple[str, str]] = set()
    transitions = []

    def add(src: str, dst: str) -> bool:
        free = [e for e in events if (src, e) not in used]
        if src == dst or not free:
            return False
        event = rng.choice(free)
        used.add((src, event))
        transitions.append((src, event, dst))
        return True

    for i in range(1, n):
        # parent among earlier states with a free event
        parents = [names[j] for j in range(i) if any((names[j], e) not in used for e in events)]
        if not parents:
            return None
        add(rng.choice(parents), names[i])
    for _ in range(rng.randint(1, 2 * n)):
        add(rng.choice(names), rng.choice(names))

    try:
        return TransitionSystem(tuple(names), tuple(events), tuple(transitions), names[0])
    except TSValidationError:
        return None


def random_reachable_ects(seed: int) -> TransitionSystem | None:
    ts = random_reachable_ts(seed)
    if ts is None or not check_ects(ts, minimal_regions(ts)).ok:
        return None
    return ts


@pytest.fixture(scope="session")
def ects_corpus() -> list[TransitionSystem]:
    """
    150 distinct excitation-closed inputs: up to 60 products of cycles, the
    rest random reachable systems.
    """
    corpus: dict[tuple, TransitionSystem] = {}

    def keep(ts: TransitionSystem | None) -> None:
        if ts is not None:
            corpus.setdefault((ts.initial, ts.transitions), ts)

    seed = 0
    while len(corpus) < 60 and seed < 5000:
        keep(random_ects(seed))
        seed += 1
    seed = 0
    while len(corpus) < 150 and seed < 20000:
        keep(random_reachable_ects(seed))
        seed += 1
    return list(corpus.values())


@pytest.fixture(scope="session")
def random_ts_corpus() -> list[TransitionSystem]:
    """
    40 random reachable systems of 2..6 states, excitation-closed or not.
    """
    corpus = []
    seed = 0
    while len(corpus) < 40:
        ts = random_reachable_ts(seed, min_states=2, max_states=6)
        if ts is not None:
            corpus.append(ts)
        seed += 1
    return corpus
