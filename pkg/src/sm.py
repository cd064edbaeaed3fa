from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

from src.errors import StateMachineError, TSFormatError
from src.regions import (
    Region,
    RegionSetReport,
    check_ects,
    crossing_profile,
    is_region,
)
from src.ts import EVENT_RE, STATE_RE, TransitionSystem

PLACE_RE = re.compile(r"^[A-Za-z0-9_]+$")

Edge = tuple[int, str, int]


@dataclass(frozen=True)
class StateMachine:
    """
    A state machine over regions of one TS.

    places:   regions, pairwise disjoint and covering every state
    names:    one name per place ("r<k>" = k-th canonical minimal region)
    edges:    (pre place, event, post place), one per event, in event order
    marking:  marked places (a valid machine has exactly one)
    alphabet: events on edges; complement: TS events this machine ignores
    universe: TS state names, bit i of a place mask is universe[i]
    """
    places: tuple[Region, ...]
    names: tuple[str, ...]
    edges: tuple[Edge, ...]
    marking: tuple[int, ...]
    alphabet: tuple[str, ...]
    complement: tuple[str, ...] = ()
    universe: tuple[str, ...] = field(default=(), compare=False, repr=False)

    @property
    def initial(self) -> int:
        if len(self.marking) != 1:
            raise StateMachineError(f"expected one marked place, got {len(self.marking)}")
        return self.marking[0]

    @property
    def num_places(self) -> int:
        return len(self.places)

    @property
    def num_transitions(self) -> int:
        return len(self.edges)

    def place_states(self, i: int) -> list[str]:
        return [self.universe[j] for j in self.places[i].indices]

    def signature(self) -> tuple[frozenset[int], frozenset[tuple[int, str, int]]]:
        """
        Name-free identity: place sets and edge relation.
        """
        masks = frozenset(p.mask for p in self.places)
        edges = frozenset((self.places[p].mask, e, self.places[q].mask) for p, e, q in self.edges)
        return masks, edges


def place_name(region: Region, catalog: Sequence[Region] | None, fallback: int) -> str:
    if catalog is not None and region in catalog:
        return f"r{list(catalog).index(region)}"
    return f"p{fallback}"


def sm_from_regions(
    ts: TransitionSystem,
    regions: Sequence[Region],
    catalog: Sequence[Region] | None = None,
    names: Sequence[str] | None = None,
) -> StateMachine:
    """
    Build the state machine whose places are `regions`.

    The regions must be pairwise disjoint and cover every state of ts.
    Each event crossing some place becomes one edge from the place it
    exits to the place it enters; other events are left out.
    """
    regions = list(regions)
    if not regions:
        raise StateMachineError("no regions given")
    if names is None:
        names = [place_name(r, catalog, i) for i, r in enumerate(regions)]
    names = list(names)

    for name, r in zip(names, regions):
        if not is_region(ts, r):
            raise StateMachineError(f"place {name} = {r.names(ts)} is not a region")

    covered = 0
    for i, r in enumerate(regions):
        if covered & r.mask:
            other = next(j for j in range(i) if regions[j].intersects(r))
            raise StateMachineError(f"places {names[other]} and {names[i]} overlap")
        covered |= r.mask
    missing = [s for i, s in enumerate(ts.states) if not covered >> i & 1]
    if missing:
        raise StateMachineError(f"places do not cover states: {', '.join(missing)}")

    edges: list[Edge] = []
    for event in ts.events:
        pre = [i for i, r in enumerate(regions) if crossing_profile(ts, event, r).exits]
        post = [i for i, r in enumerate(regions) if crossing_profile(ts, event, r).enters]
        if not pre and not post:
            continue
        if len(pre) != 1 or len(post) != 1:
            raise StateMachineError(
                f"event {event!r} has {len(pre)} pre-places and {len(post)} post-places"
            )
        edges.append((pre[0], event, post[0]))

    initial_index = ts.state_index[ts.initial]
    marked = tuple(i for i, r in enumerate(regions) if initial_index in r)
    alphabet = tuple(e for _p, e, _q in edges)
    return StateMachine(
        places=tuple(regions),
        names=tuple(names),
        edges=tuple(edges),
        marking=marked,
        alphabet=alphabet,
        complement=tuple(e for e in ts.events if e not in alphabet),
        universe=ts.states,
    )


def validate_sm(ts: TransitionSystem, sm: StateMachine) -> list[str]:
    """
    Re-check every state machine rule against ts. Empty list = valid.
    """
    problems: list[str] = []
    n = len(sm.places)

    if len(sm.names) != n:
        problems.append("place/name count mismatch")
    if len(set(sm.names)) != len(sm.names):
        problems.append("duplicate place names")

    # ---- 1) places ----
    covered = 0
    for i, r in enumerate(sm.places):
        name = sm.names[i] if i < len(sm.names) else f"#{i}"
        if not is_region(ts, r):
            problems.append(f"place {name} is not a region")
        if covered & r.mask:
            problems.append(f"place {name} overlaps an earlier place")
        covered |= r.mask
    if covered != (1 << len(ts.states)) - 1:
        problems.append("places do not cover every state")

    # ---- 2) marking ----
    if len(sm.marking) != 1:
        problems.append(f"expected exactly one initial place, got {len(sm.marking)}")
    elif not 0 <= sm.marking[0] < n:
        problems.append("initial place out of range")
    elif ts.state_index[ts.initial] not in sm.places[sm.marking[0]]:
        problems.append(f"initial place does not contain {ts.initial!r}")

    # ---- 3) edges ----
    seen: dict[str, int] = {}
    for p, event, q in sm.edges:
        if event not in ts.event_set:
            problems.append(f"unknown event {event!r} on an edge")
            continue
        if not (0 <= p < n and 0 <= q < n):
            problems.append(f"edge on {event!r} uses an unknown place")
            continue
        seen[event] = seen.get(event, 0) + 1
        if p == q:
            problems.append(f"edge on {event!r} is a self-loop")
        if not crossing_profile(ts, event, sm.places[p]).exits:
            problems.append(f"{sm.names[p]} is not a pre-region of {event!r}")
        if not crossing_profile(ts, event, sm.places[q]).enters:
            problems.append(f"{sm.names[q]} is not a post-region of {event!r}")
    for event, count in seen.items():
        if count != 1:
            problems.append(f"event {event!r} labels {count} edges")

    for event in ts.events:
        if event in seen:
            continue
        if any(crossing_profile(ts, event, r).kind != "nocross" for r in sm.places):
            problems.append(f"event {event!r} crosses a place but has no edge")

    if tuple(e for _p, e, _q in sm.edges) != sm.alphabet:
        problems.append("alphabet does not match the edges")

    return problems


def reachability_graph(sm: StateMachine) -> TransitionSystem:
    """
    Read the machine as a TS: one state per place, one transition per edge.
    """
    start = sm.initial
    order = [start] + [i for i in range(len(sm.places)) if i != start]
    return TransitionSystem(
        tuple(sm.names[i] for i in order),
        sm.alphabet,
        tuple((sm.names[p], e, sm.names[q]) for p, e, q in sm.edges),
        sm.names[start],
    )


def token_game(sm: StateMachine) -> TransitionSystem:
    """
    Reachability graph by playing the token game from the initial marking.

    A transition fires when its input place is marked; the token moves to
    its output place. Markings are named by their marked places.
    """
    start = frozenset(sm.marking)
    seen = {start}
    order = [start]
    arcs: list[tuple[frozenset[int], str, frozenset[int]]] = []
    queue = deque([start])
    while queue:
        marking = queue.popleft()
        for p, event, q in sm.edges:
            if p not in marking:
                continue
            nxt = (marking - {p}) | {q}
            if nxt not in seen:
                seen.add(nxt)
                order.append(nxt)
                queue.append(nxt)
            arcs.append((marking, event, nxt))

    def label(m: frozenset[int]) -> str:
        return "_".join(sm.names[i] for i in sorted(m))

    return TransitionSystem(
        tuple(label(m) for m in order),
        sm.alphabet,
        tuple((label(a), e, label(b)) for a, e, b in arcs),
        label(start),
    )


@dataclass(frozen=True)
class SmSet:
    machines: tuple[StateMachine, ...]

    @cached_property
    def instances(self) -> dict[Region, list[tuple[int, int]]]:
        """
        Every distinct place region -> [(machine index, place index), ...],
        in first-appearance order.
        """
        out: dict[Region, list[tuple[int, int]]] = {}
        for m, sm in enumerate(self.machines):
            for p, r in enumerate(sm.places):
                out.setdefault(r, []).append((m, p))
        return out

    @property
    def region_union(self) -> tuple[Region, ...]:
        return tuple(self.instances)

    @property
    def total_places(self) -> int:
        return sum(sm.num_places for sm in self.machines)

    @property
    def total_transitions(self) -> int:
        return sum(sm.num_transitions for sm in self.machines)

    def __len__(self) -> int:
        return len(self.machines)

    def without(self, index: int) -> "SmSet":
        return SmSet(self.machines[:index] + self.machines[index + 1:])


def ec_set_check(ts: TransitionSystem, sms: SmSet) -> RegionSetReport:
    """
    Excitation closure and effectiveness over all places of all machines.
    """
    return check_ects(ts, list(sms.region_union))


# ---------------------------------------------------------------------------
# DOT and .sm text


def _quote(s: str) -> str:
    return '"{}"'.format(s.replace('"', r"\""))


def sm_to_dot(sm: StateMachine) -> str:
    lines = ["digraph sm {", "  node [shape=circle];"]
    for i, name in enumerate(sm.names):
        tooltip = _quote("{" + ", ".join(sm.place_states(i)) + "}")
        if i in sm.marking:
            lines.append(f"  {_quote(name)} [shape=doublecircle, tooltip={tooltip}];")
        else:
            lines.append(f"  {_quote(name)} [tooltip={tooltip}];")
    for p, event, q in sm.edges:
        lines.append(f"  {_quote(sm.names[p])} -> {_quote(sm.names[q])} [label={_quote(event)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def serialize_sm(sm: StateMachine) -> str:
    lines = [".initial " + " ".join(sm.names[i] for i in sm.marking)]
    for i, name in enumerate(sm.names):
        lines.append(f".place {name} = {{{', '.join(sm.place_states(i))}}}")
    for p, event, q in sm.edges:
        lines.append(f"{sm.names[p]} {event} {sm.names[q]}")
    return "\n".join(lines) + "\n"


_PLACE_LINE = re.compile(r"^\.place\s+(\S+)\s*=\s*\{(.*)\}$")


def parse_sm(text: str, ts: TransitionSystem | None = None) -> StateMachine:
    """
    Parse the .sm format:

        .initial r0
        .place r0 = {s0, s8}
        .place r1 = {s7, s1, s4, s3}
        r0 a r1

    With ts given, place states are checked against it and the machine is
    validated. Without ts, the state universe is taken from the file.
    """
    marking_names: list[str] | None = None
    place_names: list[str] = []
    place_states: list[list[str]] = []
    edge_lines: list[tuple[int, str, str, str]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith(".initial"):
            tokens = line.split()[1:]
            if not tokens:
                raise TSFormatError(lineno, line, "expected '.initial <place>'")
            marking_names = tokens
            continue
        if line.startswith(".place"):
            match = _PLACE_LINE.match(line)
            if not match:
                raise TSFormatError(lineno, line, "expected '.place <name> = {s, ...}'")
            name, body = match.group(1), match.group(2)
            if not PLACE_RE.match(name):
                raise TSFormatError(lineno, name, "bad place name")
            if name in place_names:
                raise TSFormatError(lineno, name, "duplicate place")
            states = [s.strip() for s in body.split(",") if s.strip()]
            for s in states:
                if not STATE_RE.match(s):
                    raise TSFormatError(lineno, s, "bad state name")
            place_names.append(name)
            place_states.append(states)
            continue
        if line.startswith("."):
            raise TSFormatError(lineno, line.split()[0], "unknown directive")
        tokens = line.split()
        if len(tokens) != 3:
            raise TSFormatError(lineno, line, "expected '<place> <event> <place>'")
        if not EVENT_RE.match(tokens[1]):
            raise TSFormatError(lineno, tokens[1], "bad event name")
        edge_lines.append((lineno, tokens[0], tokens[1], tokens[2]))

    if marking_names is None:
        raise StateMachineError("missing .initial line")
    if not place_names:
        raise StateMachineError("no .place lines")

    if ts is not None:
        universe = ts.states
    else:
        seen: dict[str, None] = {}
        for states in place_states:
            for s in states:
                seen.setdefault(s)
        universe = tuple(seen)
    index = {s: i for i, s in enumerate(universe)}

    places: list[Region] = []
    for name, states in zip(place_names, place_states):
        mask = 0
        for s in states:
            if s not in index:
                raise StateMachineError(f"place {name} uses unknown state {s!r}")
            mask |= 1 << index[s]
        places.append(Region(mask))

    by_name = {name: i for i, name in enumerate(place_names)}
    edges: list[Edge] = []
    for lineno, pre, event, post in edge_lines:
        for name in (pre, post):
            if name not in by_name:
                raise TSFormatError(lineno, name, "unknown place")
        edges.append((by_name[pre], event, by_name[post]))
    for name in marking_names:
        if name not in by_name:
            raise StateMachineError(f"unknown place {name!r} in .initial")

    alphabet = tuple(e for _p, e, _q in edges)
    sm = StateMachine(
        places=tuple(places),
        names=tuple(place_names),
        edges=tuple(edges),
        marking=tuple(by_name[n] for n in marking_names),
        alphabet=alphabet,
        complement=tuple(e for e in ts.events if e not in alphabet) if ts is not None else (),
        universe=tuple(universe),
    )
    if ts is not None:
        problems = validate_sm(ts, sm)
        if problems:
            raise StateMachineError("; ".join(problems))
    return sm
