from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from src.errors import MergeError, SolverBudgetExceeded
from src.regions import Region, is_region
from src.sm import SmSet, StateMachine
from src.solver import Formula, MinimizeResult, minimize_true_count
from src.ts import TransitionSystem

logger = logging.getLogger(__name__)

_CATALOG_NAME = re.compile(r"^r(\d+)$")


@dataclass(frozen=True)
class MergePlan:
    """
    keep[(machine, event)]: does the machine keep its edge for `event`?
    contractions[machine]: the place partition left after contracting
        every dropped edge (blocks of place indices)
    objective: number of kept edges
    certificate: the solver's optimum (None when we fell back to identity)
    """
    keep: dict[tuple[int, str], bool]
    contractions: tuple[tuple[tuple[int, ...], ...], ...]
    objective: int
    certificate: MinimizeResult | None = None

    @property
    def dropped(self) -> list[tuple[int, str]]:
        return [k for k, kept in self.keep.items() if not kept]

    @property
    def is_identity(self) -> bool:
        return not self.dropped


def _blocks(sm: StateMachine, machine: int, keep: dict[tuple[int, str], bool]) -> list[list[int]]:
    """
    Union-find over the places of one machine, joining the ends of dropped edges.
    Blocks are ordered by their smallest place index.
    """
    parent = list(range(len(sm.places)))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for p, event, q in sm.edges:
        if not keep[(machine, event)]:
            a, b = find(p), find(q)
            if a != b:
                parent[max(a, b)] = min(a, b)

    groups: dict[int, list[int]] = {}
    for i in range(len(sm.places)):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


def _finish_plan(
    sms: SmSet,
    keep: dict[tuple[int, str], bool],
    certificate: MinimizeResult | None,
) -> MergePlan:
    """
    Drop kept edges whose two places end up in the same block, then freeze.
    """
    keep = dict(keep)
    contractions = []
    for m, sm in enumerate(sms.machines):
        blocks = _blocks(sm, m, keep)
        block_of = {p: b for b, group in enumerate(blocks) for p in group}
        for p, event, q in sm.edges:
            if keep[(m, event)] and block_of[p] == block_of[q]:
                keep[(m, event)] = False
        contractions.append(tuple(tuple(g) for g in blocks))
    objective = sum(1 for kept in keep.values() if kept)
    return MergePlan(keep, tuple(contractions), objective, certificate)


def identity_plan(sms: SmSet) -> MergePlan:
    keep = {(m, e): True for m, sm in enumerate(sms.machines) for e in sm.alphabet}
    return _finish_plan(sms, keep, None)


def build_merge_formula(sms: SmSet) -> tuple[Formula, dict[tuple[int, str], int]]:
    """
    k(m, e): machine m keeps its e edge.
    t(m, p): place p of machine m is intact (every incident edge kept).

    C1: each distinct region has at least one intact instance.
    C2: each event is kept by at least one machine.
    """
    f = Formula()
    k_var: dict[tuple[int, str], int] = {}
    for m, sm in enumerate(sms.machines):
        for event in sm.alphabet:
            k_var[(m, event)] = f.new_var()

    t_var: dict[tuple[int, int], int] = {}
    for m, sm in enumerate(sms.machines):
        for p in range(len(sm.places)):
            t = f.new_var()
            t_var[(m, p)] = t
            for pre, event, post in sm.edges:
                if p in (pre, post):
                    f.add_clause([-t, k_var[(m, event)]])

    # ---- C1 ----
    for _region, instances in sms.instances.items():
        f.add_clause([t_var[inst] for inst in instances])

    # ---- C2 ----
    owners: dict[str, list[int]] = {}
    for (m, event), var in k_var.items():
        owners.setdefault(event, []).append(var)
    for event, lits in owners.items():
        f.add_clause(lits)

    return f, k_var


def plan_merge(ts: TransitionSystem, sms: SmSet, budget: int | None = None) -> MergePlan:
    """
    Choose the edges to keep so the total kept is minimal while every region
    keeps one intact copy. Falls back to the identity plan (with a warning)
    when the solver runs out of budget.
    """
    formula, k_var = build_merge_formula(sms)
    lits = list(k_var.values())
    try:
        result = minimize_true_count(formula, lits, budget)
    except SolverBudgetExceeded as e:
        logger.warning("merge solver budget exhausted (%s), keeping machines as they are", e)
        return identity_plan(sms)

    keep = {key: result.model.value(var) for key, var in k_var.items()}
    return _finish_plan(sms, keep, result)


def _merged_name(names: list[str]) -> str:
    if len(names) == 1:
        return names[0]
    numbers = [_CATALOG_NAME.match(n) for n in names]
    if all(numbers):
        return "r" + "_".join(m.group(1) for m in numbers)
    return "_".join(names)


def apply_merge(ts: TransitionSystem, sms: SmSet, plan: MergePlan) -> SmSet:
    """
    Contract every dropped edge, merging its places into their union.

    A machine that collapses into a single place says nothing and is left
    out. Raises MergeError if a merged place is not a region or a kept
    edge ends up inside one place.
    """
    machines: list[StateMachine] = []
    for m, sm in enumerate(sms.machines):
        blocks = _blocks(sm, m, plan.keep)
        if len(blocks) == 1:
            continue
        block_of = {p: b for b, group in enumerate(blocks) for p in group}

        places: list[Region] = []
        names: list[str] = []
        for group in blocks:
            mask = 0
            for p in group:
                mask |= sm.places[p].mask
            region = Region(mask)
            name = _merged_name([sm.names[p] for p in group])
            if len(group) > 1 and not is_region(ts, region):
                raise MergeError(f"merged place {name} of machine {m} is not a region")
            places.append(region)
            names.append(name)

        edges = []
        for p, event, q in sm.edges:
            if not plan.keep[(m, event)]:
                continue
            if block_of[p] == block_of[q]:
                raise MergeError(f"kept edge {event!r} of machine {m} is inside a merged place")
            edges.append((block_of[p], event, block_of[q]))

        alphabet = tuple(e for _p, e, _q in edges)
        machines.append(
            StateMachine(
                places=tuple(places),
                names=tuple(names),
                edges=tuple(edges),
                marking=tuple(sorted({block_of[p] for p in sm.marking})),
                alphabet=alphabet,
                complement=tuple(e for e in ts.events if e not in alphabet),
                universe=sm.universe,
            )
        )
    return SmSet(tuple(machines))
