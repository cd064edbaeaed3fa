from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

from src.config import Config
from src.errors import SizeCapExceeded, TSFormatError, TSValidationError


# Product states are named by joining component states with this separator.
# It is a legal state character but is rejected in input files.
PRODUCT_SEP = "·"

EVENT_RE = re.compile(r"^[A-Za-z0-9_+\-']+$")
STATE_RE = re.compile(r"^[A-Za-z0-9_.]+$")
COMPOSITE_STATE_RE = re.compile(r"^[A-Za-z0-9_.·]+$")

Transition = tuple[str, str, str]
Trace = tuple[str, ...]


def ts_problems(
    states: Sequence[str],
    events: Sequence[str],
    transitions: Sequence[Transition],
    initial: str,
    strict: bool = True,
) -> list[str]:
    """
    Return every broken transition-system rule, as readable messages.

    Rules:
    - initial state exists, names are unique
    - transitions only use known states/events
    - no self-loops, deterministic
    - every state reachable from the initial state
    - every event occurs (only checked when strict=True)
    """
    problems: list[str] = []
    state_set = set(states)
    event_set = set(events)

    if len(state_set) != len(states):
        problems.append("duplicate state names")
    if len(event_set) != len(events):
        problems.append("duplicate event names")
    if initial not in state_set:
        problems.append(f"unknown state {initial!r} in .initial")
        return problems

    enabled: set[tuple[str, str]] = set()
    used_events: set[str] = set()
    succ: dict[str, list[str]] = {}
    for src, event, dst in transitions:
        for s in (src, dst):
            if s not in state_set:
                problems.append(f"unknown state {s!r} in transition {src} {event} {dst}")
        if event not in event_set:
            problems.append(f"unknown event {event!r} in transition {src} {event} {dst}")
        if src == dst:
            problems.append(f"self-loop on {src!r} with event {event!r}")
        if (src, event) in enabled:
            problems.append(f"nondeterminism at ({src}, {event})")
        enabled.add((src, event))
        used_events.add(event)
        succ.setdefault(src, []).append(dst)

    if problems:
        return problems

    reached = {initial}
    queue = deque([initial])
    while queue:
        s = queue.popleft()
        for d in succ.get(s, ()):
            if d not in reached:
                reached.add(d)
                queue.append(d)
    for s in states:
        if s not in reached:
            problems.append(f"unreachable state {s!r}")

    if strict:
        for e in events:
            if e not in used_events:
                problems.append(f"event {e!r} has zero occurrences")

    return problems


@dataclass(frozen=True)
class TransitionSystem:
    """
    A deterministic labelled transition system.

    Orders are canonical: states and events keep their first-appearance
    order (the initial state first), transitions keep input order.
    A non-strict TS may carry events that never occur (products do).
    """
    states: tuple[str, ...]
    events: tuple[str, ...]
    transitions: tuple[Transition, ...]
    initial: str
    strict: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(self, "transitions", tuple(tuple(t) for t in self.transitions))
        problems = ts_problems(self.states, self.events, self.transitions, self.initial, self.strict)
        if problems:
            raise TSValidationError("; ".join(problems))

    @cached_property
    def state_index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.states)}

    @cached_property
    def event_set(self) -> frozenset[str]:
        return frozenset(self.events)

    @cached_property
    def successors(self) -> dict[str, dict[str, str]]:
        """
        successors[state][event] = next state (deterministic).
        """
        succ: dict[str, dict[str, str]] = {s: {} for s in self.states}
        for src, event, dst in self.transitions:
            succ[src][event] = dst
        return succ

    @cached_property
    def arcs_by_event(self) -> dict[str, tuple[tuple[int, int], ...]]:
        """
        arcs_by_event[event] = ((src index, dst index), ...) in transition order.
        """
        idx = self.state_index
        arcs: dict[str, list[tuple[int, int]]] = {e: [] for e in self.events}
        for src, event, dst in self.transitions:
            arcs[event].append((idx[src], idx[dst]))
        return {e: tuple(v) for e, v in arcs.items()}

    def require_strict(self) -> "TransitionSystem":
        """
        Re-validate with every rule on (pipeline inputs must pass this).
        """
        problems = ts_problems(self.states, self.events, self.transitions, self.initial, strict=True)
        if problems:
            raise TSValidationError("; ".join(problems))
        return self


@dataclass(frozen=True)
class BisimRelation:
    """
    A set of (state of a, state of b) pairs.
    """
    pairs: frozenset[tuple[str, str]]

    def __contains__(self, pair: object) -> bool:
        return pair in self.pairs

    def __len__(self) -> int:
        return len(self.pairs)


# ---------------------------------------------------------------------------
# .ts text format


def _check_token(pattern: re.Pattern[str], token: str, line: int, what: str) -> None:
    if not pattern.match(token):
        raise TSFormatError(line, token, f"bad {what} name")


def parse_ts(text: str, composite_names: bool = False) -> TransitionSystem:
    """
    Parse the line-oriented .ts format.

    Example:
        # comment
        .initial s0
        s0 a s1
        s1 b s0
        .end

    composite_names=True also accepts product state names (with "·"),
    which is how we read back files written by `product`.
    """
    state_re = COMPOSITE_STATE_RE if composite_names else STATE_RE
    initial: str | None = None
    seen_states: dict[str, None] = {}
    seen_events: dict[str, None] = {}
    transitions: list[Transition] = []
    enabled: dict[tuple[str, str], int] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()

        if tokens[0] == ".end":
            break

        if tokens[0] == ".initial":
            if len(tokens) != 2:
                raise TSFormatError(lineno, line, "expected '.initial <state>'")
            if initial is not None:
                raise TSFormatError(lineno, tokens[1], "second .initial line")
            _check_token(state_re, tokens[1], lineno, "state")
            initial = tokens[1]
            continue

        if tokens[0].startswith("."):
            raise TSFormatError(lineno, tokens[0], "unknown directive")
        if len(tokens) != 3:
            raise TSFormatError(lineno, line, "expected '<src> <event> <dst>'")

        src, event, dst = tokens
        _check_token(state_re, src, lineno, "state")
        _check_token(EVENT_RE, event, lineno, "event")
        _check_token(state_re, dst, lineno, "state")

        if src == dst:
            raise TSValidationError(f"line {lineno}: self-loop on {src!r} with event {event!r}")
        if (src, event) in enabled:
            first = enabled[(src, event)]
            raise TSValidationError(
                f"line {lineno}: nondeterminism at ({src}, {event}), first seen on line {first}"
            )
        enabled[(src, event)] = lineno

        seen_states.setdefault(src)
        seen_states.setdefault(dst)
        seen_events.setdefault(event)
        transitions.append((src, event, dst))

    if initial is None:
        raise TSValidationError("missing .initial line")
    if transitions and initial not in seen_states:
        raise TSValidationError(f"unknown state {initial!r} in .initial")

    states = [initial] + [s for s in seen_states if s != initial]
    return TransitionSystem(tuple(states), tuple(seen_events), tuple(transitions), initial)


def serialize_ts(ts: TransitionSystem) -> str:
    lines = [f".initial {ts.initial}"]
    lines += [f"{src} {event} {dst}" for src, event, dst in ts.transitions]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Operations


def accessible(
    states: Iterable[str],
    events: Iterable[str],
    transitions: Iterable[Transition],
    initial: str,
) -> TransitionSystem:
    """
    Keep only what is reachable from `initial` (the Ac operation).

    The event list is kept as given; if some event no longer occurs the
    result is a non-strict TS.
    """
    states = list(states)
    events = list(events)
    transitions = list(transitions)
    if initial not in states:
        raise TSValidationError(f"unknown state {initial!r} in .initial")

    succ: dict[str, list[str]] = {}
    for src, _event, dst in transitions:
        succ.setdefault(src, []).append(dst)

    reached = {initial}
    queue = deque([initial])
    while queue:
        s = queue.popleft()
        for d in succ.get(s, ()):
            if d not in reached:
                reached.add(d)
                queue.append(d)

    kept_states = [initial] + [s for s in states if s in reached and s != initial]
    kept_transitions = [t for t in transitions if t[0] in reached]
    used = {e for _s, e, _d in kept_transitions}
    return TransitionSystem(
        tuple(kept_states),
        tuple(events),
        tuple(kept_transitions),
        initial,
        strict=all(e in used for e in events),
    )


def reroot(ts: TransitionSystem, state: str) -> TransitionSystem:
    """
    The part of `ts` reachable from `state`, with `state` as initial.
    """
    return accessible(ts.states, ts.events, ts.transitions, state)


def product_with_components(
    components: Sequence[TransitionSystem],
) -> tuple[TransitionSystem, list[tuple[str, ...]]]:
    """
    Synchronous product of n components, plus the component tuple of every
    product state (same order as the product's states).

    Shared events move every component that owns them, private events
    move only their owner. Only reachable tuples are built.
    """
    if not components:
        raise TSValidationError("sync_product needs at least one component")

    alphabet: dict[str, None] = {}
    for comp in components:
        for e in comp.events:
            alphabet.setdefault(e)
    owners = {e: [i for i, c in enumerate(components) if e in c.event_set] for e in alphabet}
    succ = [c.successors for c in components]

    start = tuple(c.initial for c in components)
    seen = {start}
    order = [start]
    arcs: list[tuple[tuple[str, ...], str, tuple[str, ...]]] = []
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for e in alphabet:
            nxt = list(cur)
            for i in owners[e]:
                d = succ[i][cur[i]].get(e)
                if d is None:
                    break
                nxt[i] = d
            else:
                target = tuple(nxt)
                if target not in seen:
                    seen.add(target)
                    order.append(target)
                    queue.append(target)
                arcs.append((cur, e, target))

    name = {t: PRODUCT_SEP.join(t) for t in order}
    used = {e for _s, e, _d in arcs}
    ts = TransitionSystem(
        tuple(name[t] for t in order),
        tuple(alphabet),
        tuple((name[s], e, name[d]) for s, e, d in arcs),
        name[start],
        strict=all(e in used for e in alphabet),
    )
    return ts, order


def sync_product(components: Sequence[TransitionSystem]) -> TransitionSystem:
    return product_with_components(components)[0]


def accepts(ts: TransitionSystem, trace: Iterable[str]) -> bool:
    state: str | None = ts.initial
    for event in trace:
        state = ts.successors[state].get(event)
        if state is None:
            return False
    return True


def is_isomorphic(
    a: TransitionSystem,
    b: TransitionSystem,
    cap: int | None = None,
) -> dict[str, str] | None:
    """
    Return a state bijection a -> b satisfying the isomorphism rules, or None.

    Candidate pairs must agree on their enabled-event signature. Both
    systems are deterministic and fully reachable, so once the initial
    pair is fixed every other pair is forced; the search never needs to
    undo a choice.
    """
    cap = cap if cap is not None else Config().iso_cap
    for ts in (a, b):
        if len(ts.states) > cap:
            raise SizeCapExceeded(f"isomorphism check limited to {cap} states, got {len(ts.states)}")

    if len(a.states) != len(b.states) or len(a.transitions) != len(b.transitions):
        return None
    if a.event_set != b.event_set:
        return None

    mapping = {a.initial: b.initial}
    used = {b.initial}
    queue = deque([a.initial])
    while queue:
        p = queue.popleft()
        out_p = a.successors[p]
        out_q = b.successors[mapping[p]]
        if out_p.keys() != out_q.keys():
            return None
        for event, p2 in out_p.items():
            q2 = out_q[event]
            if p2 in mapping:
                if mapping[p2] != q2:
                    return None
            elif q2 in used:
                return None
            else:
                mapping[p2] = q2
                used.add(q2)
                queue.append(p2)

    if len(mapping) != len(a.states):
        return None
    return {s: mapping[s] for s in a.states}


def bisimilar(a: TransitionSystem, b: TransitionSystem) -> BisimRelation | None:
    """
    Coarsest bisimulation between a and b, or None if the initial states
    are not bisimilar.

    Partition refinement on the disjoint union: split blocks by the
    signature {(event, block of successor)} until nothing splits.
    """
    nodes = [("a", s) for s in a.states] + [("b", s) for s in b.states]
    offset = len(a.states)
    index_a, index_b = a.state_index, b.state_index

    succ: list[list[tuple[str, int]]] = []
    for s in a.states:
        succ.append([(e, index_a[d]) for e, d in a.successors[s].items()])
    for s in b.states:
        succ.append([(e, offset + index_b[d]) for e, d in b.successors[s].items()])

    block = [0] * len(nodes)
    count = 1
    while True:
        signatures: dict[tuple[int, frozenset[tuple[str, int]]], int] = {}
        refined = []
        for i in range(len(nodes)):
            key = (block[i], frozenset((e, block[j]) for e, j in succ[i]))
            if key not in signatures:
                signatures[key] = len(signatures)
            refined.append(signatures[key])
        block = refined
        if len(signatures) == count:
            break
        count = len(signatures)

    if block[index_a[a.initial]] != block[offset + index_b[b.initial]]:
        return None

    members_b: dict[int, list[str]] = {}
    for s in b.states:
        members_b.setdefault(block[offset + index_b[s]], []).append(s)
    pairs = {
        (p, q)
        for p in a.states
        for q in members_b.get(block[index_a[p]], ())
    }
    return BisimRelation(frozenset(pairs))


def is_bisimulation(
    a: TransitionSystem,
    b: TransitionSystem,
    pairs: Iterable[tuple[str, str]],
) -> bool:
    """
    Check a candidate relation against the bisimulation definition.
    """
    relation = set(pairs)
    if (a.initial, b.initial) not in relation:
        return False
    for p, q in relation:
        out_p = a.successors[p]
        out_q = b.successors[q]
        for event, p2 in out_p.items():
            q2 = out_q.get(event)
            if q2 is None or (p2, q2) not in relation:
                return False
        for event, q2 in out_q.items():
            p2 = out_p.get(event)
            if p2 is None or (p2, q2) not in relation:
                return False
    return True


def distinguishing_trace(a: TransitionSystem, b: TransitionSystem) -> Trace | None:
    """
    Shortest trace accepted by exactly one of a and b, or None.

    For deterministic systems this is None exactly when they are bisimilar.
    """
    start = (a.initial, b.initial)
    parent: dict[tuple[str, str], tuple[tuple[str, str], str] | None] = {start: None}
    queue = deque([start])

    def trace_to(pair: tuple[str, str]) -> list[str]:
        events: list[str] = []
        link = parent[pair]
        while link is not None:
            pair, event = link
            events.append(event)
            link = parent[pair]
        return events[::-1]

    while queue:
        pair = queue.popleft()
        out_p = a.successors[pair[0]]
        out_q = b.successors[pair[1]]
        only = [e for e in out_p if e not in out_q] + [e for e in out_q if e not in out_p]
        if only:
            return tuple(trace_to(pair) + [only[0]])
        for event, p2 in out_p.items():
            nxt = (p2, out_q[event])
            if nxt not in parent:
                parent[nxt] = (pair, event)
                queue.append(nxt)
    return None


# ---------------------------------------------------------------------------
# DOT


def _quote(s: str) -> str:
    return '"{}"'.format(s.replace('"', r"\""))


def to_dot(ts: TransitionSystem) -> str:
    lines = ["digraph ts {", "  node [shape=circle];"]
    for s in ts.states:
        if s == ts.initial:
            lines.append(f"  {_quote(s)} [shape=doublecircle];")
        else:
            lines.append(f"  {_quote(s)};")
    for src, event, dst in ts.transitions:
        lines.append(f"  {_quote(src)} -> {_quote(dst)} [label={_quote(event)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
