from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import networkx as nx

from src.config import Config
from src.errors import NotECTSError, SizeCapExceeded, StateMachineError
from src.merge import MergePlan, apply_merge, plan_merge
from src.mis import intersection_graph, mis_exact_all, mis_greedy
from src.regions import Region, RegionSetReport, check_ects, minimal_regions, preregions
from src.sm import SmSet, ec_set_check, reachability_graph, sm_from_regions
from src.ts import (
    BisimRelation,
    TransitionSystem,
    bisimilar,
    distinguishing_trace,
    is_bisimulation,
    product_with_components,
)


# ---------------------------------------------------------------------------
# SM generation


def _covering_extension(
    regions: Sequence[Region],
    g0: nx.Graph,
    forced: frozenset[int],
    full_mask: int,
) -> frozenset[int] | None:
    """
    Smallest-index-first search for a disjoint family of regions that
    contains `forced` and covers every state. Such a family is always a
    maximal independent set of g0.
    """
    order = sorted(g0.nodes, key=lambda v: (g0.degree[v], v))

    def search(chosen: frozenset[int], covered: int) -> frozenset[int] | None:
        if covered == full_mask:
            return chosen
        missing = (~covered & full_mask) & -(~covered & full_mask)
        for v in order:
            r = regions[v]
            if r.mask & missing and not r.mask & covered:
                found = search(chosen | {v}, covered | r.mask)
                if found is not None:
                    return found
        return None

    covered = 0
    for v in forced:
        covered |= regions[v].mask
    return search(frozenset(forced), covered)


def generate_sm_set(ts: TransitionSystem, regions: Sequence[Region]) -> SmSet:
    """
    One SM per independent set of the region intersection graph.

    1) take a MIS of what is left of the graph and delete it, until
       nothing is left (every region lands in some set)
    2) grow each stored set to a maximal independent set of the full graph
    3) build one state machine per distinct grown set

    If the greedy growth of step 2 does not cover every state, a covering
    growth is searched for; if none exists a StateMachineError is raised.
    """
    regions = list(regions)
    g0 = intersection_graph(regions)
    full_mask = (1 << len(ts.states)) - 1

    residual = g0.copy()
    stored: list[frozenset[int]] = []
    while residual.number_of_nodes():
        chosen = mis_greedy(residual)
        stored.append(chosen)
        residual.remove_nodes_from(chosen)

    grown: list[frozenset[int]] = []
    for chosen in stored:
        family = mis_greedy(g0, chosen)
        covered = 0
        for v in family:
            covered |= regions[v].mask
        if covered != full_mask:
            family = _covering_extension(regions, g0, chosen, full_mask)
            if family is None:
                names = [f"r{v}" for v in sorted(chosen)]
                raise StateMachineError(
                    f"no disjoint family of minimal regions extending {names} covers every state"
                )
        if family not in grown:
            grown.append(family)

    machines = [
        sm_from_regions(ts, [regions[v] for v in sorted(family)], catalog=regions)
        for family in grown
    ]
    return SmSet(tuple(machines))


def remove_redundant(ts: TransitionSystem, sms: SmSet) -> SmSet:
    """
    Drop machines, largest first (ties: lowest index), while excitation
    closure and effectiveness still hold without them.

    The check is monotone in the set of regions, so a single pass leaves
    a set where no machine can be dropped.
    """
    machines = sms.machines
    order = sorted(range(len(machines)), key=lambda i: (-machines[i].num_places, i))
    alive = set(range(len(machines)))
    for i in order:
        trial = SmSet(tuple(machines[j] for j in sorted(alive - {i})))
        if ec_set_check(ts, trial).ok:
            alive.discard(i)
    return SmSet(tuple(machines[j] for j in sorted(alive)))


# ---------------------------------------------------------------------------
# Exact mode


def enumerate_all_sms(
    ts: TransitionSystem,
    regions: Sequence[Region],
    cap: int | None = None,
) -> SmSet:
    """
    Every SM whose places are a maximal family of disjoint minimal regions
    covering all states.
    """
    cap = cap if cap is not None else Config().exact_region_cap
    if len(regions) > cap:
        raise SizeCapExceeded(f"exact mode limited to {cap} regions, got {len(regions)}")
    regions = list(regions)
    machines = []
    for family in mis_exact_all(intersection_graph(regions)):
        if not family:
            continue
        try:
            machines.append(sm_from_regions(ts, [regions[v] for v in sorted(family)], catalog=regions))
        except StateMachineError:
            # not covering
            continue
    return SmSet(tuple(machines))


def _requirements(ts: TransitionSystem, sms: SmSet) -> tuple[list[tuple[str, int | None]], list[frozenset[int]]]:
    """
    Requirement (e, s): some chosen pre-region of e leaves out state s.
    Requirement (e, None): e has some chosen pre-region at all.
    Returns the requirements and, per machine, which ones it meets.
    """
    reqs: list[tuple[str, int | None]] = []
    for event in ts.events:
        reqs.append((event, None))
        sources = {src for src, _dst in ts.arcs_by_event[event]}
        reqs += [(event, s) for s in range(len(ts.states)) if s not in sources]
    position = {r: i for i, r in enumerate(reqs)}

    meets: list[frozenset[int]] = []
    for sm in sms.machines:
        met: set[int] = set()
        for event in ts.events:
            pre = preregions(ts, sm.places, event)
            if not pre:
                continue
            met.add(position[(event, None)])
            for p in pre:
                place = sm.places[p]
                for s in range(len(ts.states)):
                    if s not in place and (event, s) in position:
                        met.add(position[(event, s)])
        meets.append(frozenset(met))
    return reqs, meets


def select_minimum(ts: TransitionSystem, sms: SmSet) -> SmSet:
    """
    Fewest machines (then fewest places) still passing excitation closure
    and effectiveness. Branch and bound over a set cover.
    """
    reqs, meets = _requirements(ts, sms)
    places = [sm.num_places for sm in sms.machines]
    everything = frozenset(range(len(reqs)))
    if frozenset().union(*meets) != everything:
        report = ec_set_check(ts, sms)
        raise NotECTSError(report.failing_events)

    best: list = [(float("inf"), float("inf")), None]
    cheapest = min(places) if places else 0

    def search(open_reqs: frozenset[int], chosen: tuple[int, ...], cost: int) -> None:
        if not open_reqs:
            if (len(chosen), cost) < best[0]:
                best[0] = (len(chosen), cost)
                best[1] = chosen
            return
        if (len(chosen) + 1, cost + cheapest) >= best[0]:
            return
        req = min(open_reqs, key=lambda r: (sum(1 for m in meets if r in m), r))
        options = [i for i, m in enumerate(meets) if req in m and i not in chosen]
        options.sort(key=lambda i: (-len(meets[i] & open_reqs), places[i], i))
        for i in options:
            search(open_reqs - meets[i], chosen + (i,), cost + places[i])

    search(everything, (), 0)
    picked = sorted(best[1] or ())
    return SmSet(tuple(sms.machines[i] for i in picked))


def exact_decompose(ts: TransitionSystem, regions: Sequence[Region], cap: int | None = None) -> SmSet:
    return select_minimum(ts, enumerate_all_sms(ts, regions, cap))


# ---------------------------------------------------------------------------
# Verification


@dataclass(frozen=True)
class VerificationResult:
    verified: bool
    relation: BisimRelation | None
    witness: tuple[str, ...] | None
    appendix_ok: bool
    product_states: int

    def to_dict(self) -> dict:
        return {
            "verified": self.verified,
            "witness": list(self.witness) if self.witness is not None else None,
            "appendix_ok": self.appendix_ok,
            "product_states": self.product_states,
        }


def _single_state() -> TransitionSystem:
    return TransitionSystem(("q",), (), (), "q")


def verify_decomposition(ts: TransitionSystem, sms: SmSet) -> VerificationResult:
    """
    Is the product of the machines bisimilar to ts?

    On success, also checks the relation "product state (p1, ..., pn) ~
    every TS state in p1 & ... & pn". On failure, returns the shortest
    trace accepted by only one side.
    """
    if not sms.machines:
        product, tuples = _single_state(), [()]
    else:
        product, tuples = product_with_components([reachability_graph(sm) for sm in sms.machines])

    relation = bisimilar(ts, product)
    if relation is None:
        return VerificationResult(
            verified=False,
            relation=None,
            witness=distinguishing_trace(ts, product),
            appendix_ok=False,
            product_states=len(product.states),
        )

    by_name = [dict(zip(sm.names, sm.places)) for sm in sms.machines]
    full = (1 << len(ts.states)) - 1
    pairs = set()
    for name, combo in zip(product.states, tuples):
        meet = full
        for m, place in enumerate(combo):
            meet &= by_name[m][place].mask
        pairs |= {(ts.states[i], name) for i in range(len(ts.states)) if meet >> i & 1}

    return VerificationResult(
        verified=True,
        relation=relation,
        witness=None,
        appendix_ok=is_bisimulation(ts, product, pairs),
        product_states=len(product.states),
    )


# ---------------------------------------------------------------------------
# Pipeline


@dataclass(frozen=True)
class PipelineOptions:
    merge: str = "sat"
    exact: bool = False
    region_budget: int | None = None
    solver_budget: int | None = None

    @classmethod
    def from_config(cls, cfg: Config, **overrides) -> "PipelineOptions":
        values = {
            "merge": cfg.merge_mode,
            "exact": False,
            "region_budget": cfg.region_budget,
            "solver_budget": cfg.solver_budget,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass(frozen=True)
class Stage:
    name: str
    sms: SmSet
    wall_ms: float

    @property
    def machines(self) -> int:
        return len(self.sms)

    @property
    def places(self) -> int:
        return self.sms.total_places

    @property
    def transitions(self) -> int:
        return self.sms.total_transitions

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "machines": self.machines,
            "places": self.places,
            "transitions": self.transitions,
            "wall_ms": round(self.wall_ms, 3),
        }


@dataclass(frozen=True)
class DecompositionReport:
    ts: TransitionSystem
    regions: tuple[Region, ...]
    ects: RegionSetReport
    stages: tuple[Stage, ...]
    verification: VerificationResult
    merge_plan: MergePlan | None = None
    wall_ms: float = field(default=0.0, compare=False)

    @property
    def final(self) -> SmSet:
        return self.stages[-1].sms

    def stage(self, name: str) -> Stage:
        return next(s for s in self.stages if s.name == name)

    def to_dict(self, input_name: str) -> dict:
        return {
            "input": input_name,
            "regions": [r.names(self.ts) for r in self.regions],
            "ects": {
                "ec_ok": self.ects.ec_ok,
                "effectiveness_ok": self.ects.effectiveness_ok,
                "failing_events": list(self.ects.failing_events),
            },
            "stages": [s.to_dict() for s in self.stages],
            "verified": self.verification.verified,
            "witness": self.verification.to_dict()["witness"],
        }


def _timed(fn, *args):
    start = time.perf_counter()
    out = fn(*args)
    return out, (time.perf_counter() - start) * 1000.0


def decompose_pipeline(ts: TransitionSystem, options: PipelineOptions | None = None) -> DecompositionReport:
    """
    minimal regions -> ECTS check -> SM set -> irredundant set -> merge -> verify

    Exact mode replaces the middle: "generate" holds every SM and
    "irredundant" holds a minimum selection of them.
    """
    options = options or PipelineOptions.from_config(Config())
    started = time.perf_counter()
    ts.require_strict()

    regions = minimal_regions(ts, options.region_budget)
    ects = check_ects(ts, regions)
    if not ects.ok:
        raise NotECTSError(ects.failing_events)

    stages: list[Stage] = []
    if options.exact:
        all_sms, ms = _timed(enumerate_all_sms, ts, regions)
        stages.append(Stage("generate", all_sms, ms))
        chosen, ms = _timed(select_minimum, ts, all_sms)
        stages.append(Stage("irredundant", chosen, ms))
    else:
        generated, ms = _timed(generate_sm_set, ts, regions)
        stages.append(Stage("generate", generated, ms))
        kept, ms = _timed(remove_redundant, ts, generated)
        stages.append(Stage("irredundant", kept, ms))

    plan = None
    if options.merge == "sat":
        start = time.perf_counter()
        plan = plan_merge(ts, stages[-1].sms, options.solver_budget)
        merged = apply_merge(ts, stages[-1].sms, plan)
        stages.append(Stage("merge", merged, (time.perf_counter() - start) * 1000.0))

    verification = verify_decomposition(ts, stages[-1].sms)
    return DecompositionReport(
        ts=ts,
        regions=tuple(regions),
        ects=ects,
        stages=tuple(stages),
        verification=verification,
        merge_plan=plan,
        wall_ms=(time.perf_counter() - started) * 1000.0,
    )
