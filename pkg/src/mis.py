from __future__ import annotations

from typing import Iterable, Sequence

import networkx as nx

from src.config import Config
from src.errors import SizeCapExceeded
from src.regions import Region


def intersection_graph(regions: Sequence[Region]) -> nx.Graph:
    """
    One vertex per region (its index), an edge between regions sharing a state.

    Independent sets of this graph are exactly the families of pairwise
    disjoint regions.
    """
    g = nx.Graph()
    g.add_nodes_from(range(len(regions)))
    for i in range(len(regions)):
        for j in range(i + 1, len(regions)):
            if regions[i].intersects(regions[j]):
                g.add_edge(i, j)
    return g


def mis_greedy(g: nx.Graph, forced: Iterable[int] = ()) -> frozenset[int]:
    """
    A maximal independent set of g that contains `forced`.

    Vertices are tried by ascending degree, ties by index, so the result is
    deterministic. Raises nx.NetworkXUnfeasible if `forced` is not an
    independent set of g.
    """
    chosen = set(forced)
    if not chosen.issubset(g):
        raise nx.NetworkXUnfeasible(f"{sorted(chosen)} is not a subset of the nodes of G")
    blocked: set[int] = set()
    for v in chosen:
        blocked.update(g.adj[v])
    if blocked & chosen:
        raise nx.NetworkXUnfeasible(f"{sorted(chosen)} is not an independent set of G")

    for v in sorted(g.nodes, key=lambda v: (g.degree[v], v)):
        if v in chosen or v in blocked:
            continue
        chosen.add(v)
        blocked.update(g.adj[v])
    return frozenset(chosen)


def is_maximal_independent(g: nx.Graph, nodes: Iterable[int]) -> bool:
    chosen = set(nodes)
    if any(u in chosen for v in chosen for u in g.adj[v]):
        return False
    return all(v in chosen or any(u in chosen for u in g.adj[v]) for v in g.nodes)


def mis_exact_all(g: nx.Graph, cap: int | None = None) -> list[frozenset[int]]:
    """
    Every maximal independent set of g (maximal cliques of the complement),
    sorted by their sorted vertex lists.
    """
    cap = cap if cap is not None else Config().mis_exact_cap
    if g.number_of_nodes() > cap:
        raise SizeCapExceeded(f"exact MIS enumeration limited to {cap} vertices, got {g.number_of_nodes()}")
    if g.number_of_nodes() == 0:
        return [frozenset()]
    found = [frozenset(c) for c in nx.find_cliques(nx.complement(g))]
    return sorted(found, key=lambda s: sorted(s))
