from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

from src.config import Config
from src.errors import RegionBudgetExceeded, SizeCapExceeded, UnknownEventError
from src.ts import TransitionSystem


@dataclass(frozen=True)
class Region:
    """
    A set of states, stored as a bitmask over the TS's canonical state order
    (bit i = ts.states[i]).
    """
    mask: int

    @cached_property
    def indices(self) -> tuple[int, ...]:
        out = []
        m, i = self.mask, 0
        while m:
            if m & 1:
                out.append(i)
            m >>= 1
            i += 1
        return tuple(out)

    @property
    def size(self) -> int:
        return self.mask.bit_count()

    def sort_key(self) -> tuple[int, tuple[int, ...]]:
        return (self.size, self.indices)

    def __contains__(self, index: object) -> bool:
        return isinstance(index, int) and bool(self.mask >> index & 1)

    def issubset(self, other: "Region") -> bool:
        return self.mask & other.mask == self.mask

    def intersects(self, other: "Region") -> bool:
        return bool(self.mask & other.mask)

    def union(self, other: "Region") -> "Region":
        return Region(self.mask | other.mask)

    def names(self, ts: TransitionSystem) -> list[str]:
        return [ts.states[i] for i in self.indices]


def region_from_states(ts: TransitionSystem, states: Iterable[str]) -> Region:
    index = ts.state_index
    mask = 0
    for s in states:
        if s not in index:
            raise KeyError(f"unknown state {s!r}")
        mask |= 1 << index[s]
    return Region(mask)


def _mask_of(ts: TransitionSystem, r: Region | Iterable[str]) -> int:
    if isinstance(r, Region):
        return r.mask
    return region_from_states(ts, r).mask


def _full_mask(ts: TransitionSystem) -> int:
    return (1 << len(ts.states)) - 1


def _require_event(ts: TransitionSystem, event: str) -> None:
    if event not in ts.event_set:
        raise UnknownEventError(f"unknown event {event!r}")


@dataclass(frozen=True)
class CrossingProfile:
    """
    How the edges of one event sit relative to a set of states.
    """
    enters: bool
    exits: bool
    inside: bool
    outside: bool

    @property
    def violates(self) -> bool:
        # Entering/exiting must be uniform for a region.
        if self.enters and (self.inside or self.outside or self.exits):
            return True
        if self.exits and (self.inside or self.outside or self.enters):
            return True
        return False

    @property
    def kind(self) -> str:
        if self.violates:
            return "mixed"
        if self.enters:
            return "enter"
        if self.exits:
            return "exit"
        return "nocross"


def _profile(arcs: Sequence[tuple[int, int]], mask: int) -> CrossingProfile:
    enters = exits = inside = outside = False
    for src, dst in arcs:
        a = mask >> src & 1
        b = mask >> dst & 1
        if a and b:
            inside = True
        elif a:
            exits = True
        elif b:
            enters = True
        else:
            outside = True
    return CrossingProfile(enters, exits, inside, outside)


def crossing_profile(ts: TransitionSystem, event: str, r: Region | Iterable[str]) -> CrossingProfile:
    _require_event(ts, event)
    return _profile(ts.arcs_by_event[event], _mask_of(ts, r))


def _first_violation(ts: TransitionSystem, mask: int) -> str | None:
    for event in ts.events:
        if _profile(ts.arcs_by_event[event], mask).violates:
            return event
    return None


def is_region(ts: TransitionSystem, r: Region | Iterable[str]) -> bool:
    mask = _mask_of(ts, r)
    if mask == 0 or mask == _full_mask(ts):
        return False
    return _first_violation(ts, mask) is None


def _sources_mask(ts: TransitionSystem, event: str) -> int:
    mask = 0
    for src, _dst in ts.arcs_by_event[event]:
        mask |= 1 << src
    return mask


def _targets_mask(ts: TransitionSystem, event: str) -> int:
    mask = 0
    for _src, dst in ts.arcs_by_event[event]:
        mask |= 1 << dst
    return mask


def excitation_set(ts: TransitionSystem, event: str) -> Region:
    """
    ES(e): every state where e is enabled.
    """
    _require_event(ts, event)
    return Region(_sources_mask(ts, event))


def switching_set(ts: TransitionSystem, event: str) -> Region:
    """
    SS(e): every state reached by e.
    """
    _require_event(ts, event)
    return Region(_targets_mask(ts, event))


def _keep_minimal(found: Iterable[int]) -> list[Region]:
    kept: list[int] = []
    for mask in sorted(found, key=lambda m: Region(m).sort_key()):
        if not any(k & mask == k for k in kept):
            kept.append(mask)
    return [Region(m) for m in kept]


def minimal_regions(ts: TransitionSystem, budget: int | None = None) -> list[Region]:
    """
    All minimal regions of ts, in canonical order.

    Every region that some event crosses contains ES(e) (e exits) or SS(e)
    (e enters), so the search starts from those sets and grows them.
    For the first event whose edges are mixed, a region containing the
    candidate X must treat that event one of three ways:
      - no crossing: close X over the event's edges that touch X
      - entering: X | SS(e), only if no source of e is in X
      - exiting:  X | ES(e), only if no target of e is in X
    Every feasible branch strictly grows X, so the search ends. Legal
    candidates are kept (no need to grow them further) and filtered to
    the inclusion-minimal ones at the end.
    """
    budget = budget if budget is not None else Config().region_budget
    full = _full_mask(ts)

    seeds: list[int] = []
    for event in ts.events:
        for seed in (_sources_mask(ts, event), _targets_mask(ts, event)):
            if seed and seed != full:
                seeds.append(seed)

    visited: set[int] = set()
    legal: set[int] = set()
    stack = list(reversed(seeds))
    while stack:
        mask = stack.pop()
        if mask in visited or mask == full:
            continue
        visited.add(mask)
        if len(visited) > budget:
            raise RegionBudgetExceeded(
                f"region search visited more than {budget} candidate sets"
            )

        event = _first_violation(ts, mask)
        if event is None:
            legal.add(mask)
            continue

        arcs = ts.arcs_by_event[event]
        sources = _sources_mask(ts, event)
        targets = _targets_mask(ts, event)

        # ---- no crossing: pull in the other end of every crossing edge ----
        closed = mask
        changed = True
        while changed:
            changed = False
            for src, dst in arcs:
                a = closed >> src & 1
                b = closed >> dst & 1
                if a != b:
                    closed |= (1 << src) | (1 << dst)
                    changed = True
        branches = [closed]

        # ---- entering / exiting ----
        if not mask & sources:
            branches.append(mask | targets)
        if not mask & targets:
            branches.append(mask | sources)

        for nxt in branches:
            if nxt != mask and nxt not in visited:
                stack.append(nxt)

    return _keep_minimal(legal)


def minimal_regions_oracle(ts: TransitionSystem, cap: int | None = None) -> list[Region]:
    """
    Brute force: test every non-empty proper subset. Only for small inputs.
    """
    cap = cap if cap is not None else Config().oracle_cap
    n = len(ts.states)
    if n > cap:
        raise SizeCapExceeded(f"region oracle limited to {cap} states, got {n}")
    full = _full_mask(ts)
    found = [m for m in range(1, full) if _first_violation(ts, m) is None]
    return _keep_minimal(found)


def preregions(ts: TransitionSystem, regions: Sequence[Region], event: str) -> list[int]:
    """
    Indices of the regions that `event` exits.
    """
    _require_event(ts, event)
    arcs = ts.arcs_by_event[event]
    return [i for i, r in enumerate(regions) if _profile(arcs, r.mask).exits]


def postregions(ts: TransitionSystem, regions: Sequence[Region], event: str) -> list[int]:
    """
    Indices of the regions that `event` enters.
    """
    _require_event(ts, event)
    arcs = ts.arcs_by_event[event]
    return [i for i, r in enumerate(regions) if _profile(arcs, r.mask).enters]


@dataclass(frozen=True)
class RegionSetReport:
    minimal_regions: tuple[Region, ...]
    pre: dict[str, list[int]]
    post: dict[str, list[int]]
    ec_ok: bool
    effectiveness_ok: bool
    failing_events: list[str]

    @property
    def ok(self) -> bool:
        return self.ec_ok and self.effectiveness_ok

    def to_dict(self, ts: TransitionSystem) -> dict:
        return {
            "regions": [r.names(ts) for r in self.minimal_regions],
            "pre": {e: list(v) for e, v in self.pre.items()},
            "post": {e: list(v) for e, v in self.post.items()},
            "ec_ok": self.ec_ok,
            "effectiveness_ok": self.effectiveness_ok,
            "failing_events": list(self.failing_events),
        }


def check_ects(ts: TransitionSystem, regions: Sequence[Region]) -> RegionSetReport:
    """
    Excitation closure and event effectiveness over `regions`.

    An event with no pre-region fails both checks.
    """
    pre: dict[str, list[int]] = {}
    post: dict[str, list[int]] = {}
    ec_ok = True
    effectiveness_ok = True
    failing: list[str] = []

    for event in ts.events:
        pre[event] = preregions(ts, regions, event)
        post[event] = postregions(ts, regions, event)
        if not pre[event]:
            effectiveness_ok = False
            ec_ok = False
            failing.append(event)
            continue
        meet = _full_mask(ts)
        for i in pre[event]:
            meet &= regions[i].mask
        if meet != _sources_mask(ts, event):
            ec_ok = False
            failing.append(event)

    return RegionSetReport(
        minimal_regions=tuple(regions),
        pre=pre,
        post=post,
        ec_ok=ec_ok,
        effectiveness_ok=effectiveness_ok,
        failing_events=failing,
    )
