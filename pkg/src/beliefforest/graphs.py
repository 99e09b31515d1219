"""Undirected graph steps that turn a network into clique-forest structure:
moralization, triangulation, and maximal-clique extraction.

All iteration is in node declaration order and every heuristic tie is broken
deterministically, so identical inputs always produce identical structure.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Iterable, Sequence

from .network import BeliefNetwork


@dataclass
class UndirectedGraph:
    """Vertices in declaration order plus a symmetric adjacency map."""

    vertices: tuple[str, ...]
    cardinality: dict[str, int]
    adjacency: dict[str, set[str]]

    def edge_list(self) -> list[tuple[str, str]]:
        pos = {v: i for i, v in enumerate(self.vertices)}
        edges = []
        for v in self.vertices:
            for u in sorted(self.adjacency[v], key=pos.__getitem__):
                if pos[u] > pos[v]:
                    edges.append((v, u))
        return edges

    def copy(self) -> "UndirectedGraph":
        return UndirectedGraph(
            self.vertices, dict(self.cardinality), {v: set(a) for v, a in self.adjacency.items()}
        )


def moralize(net: BeliefNetwork) -> UndirectedGraph:
    """Drop edge directions and marry every pair of co-parents."""
    adjacency: dict[str, set[str]] = {n.id: set() for n in net.nodes}

    def connect(a: str, b: str) -> None:
        if a != b:
            adjacency[a].add(b)
            adjacency[b].add(a)

    for node in net.nodes:
        parents = net.parents[node.id]
        for p in parents:
            connect(p, node.id)
        for i, a in enumerate(parents):
            for b in parents[i + 1 :]:
                connect(a, b)
    return UndirectedGraph(
        vertices=tuple(n.id for n in net.nodes),
        cardinality={n.id: n.cardinality for n in net.nodes},
        adjacency=adjacency,
    )


def triangulate(g: UndirectedGraph) -> tuple[UndirectedGraph, tuple[str, ...]]:
    """Minimum-fill greedy triangulation.

    Ties are broken by the smaller state-space size of the clique the
    elimination would create, then by declaration order. Returns the filled
    graph and the (perfect) elimination order that produced it.
    """
    pos = {v: i for i, v in enumerate(g.vertices)}
    working = {v: set(a) for v, a in g.adjacency.items()}
    filled = {v: set(a) for v, a in g.adjacency.items()}
    order: list[str] = []
    remaining = list(g.vertices)
    while remaining:
        best_vertex = None
        best_key = None
        for v in remaining:
            nbrs = sorted(working[v], key=pos.__getitem__)
            fill = 0
            for i, a in enumerate(nbrs):
                for b in nbrs[i + 1 :]:
                    if b not in working[a]:
                        fill += 1
            weight = g.cardinality[v] * prod(g.cardinality[u] for u in nbrs)
            key = (fill, weight, pos[v])
            if best_key is None or key < best_key:
                best_key = key
                best_vertex = v
        v = best_vertex
        nbrs = sorted(working[v], key=pos.__getitem__)
        for i, a in enumerate(nbrs):
            for b in nbrs[i + 1 :]:
                if b not in working[a]:
                    working[a].add(b)
                    working[b].add(a)
                    filled[a].add(b)
                    filled[b].add(a)
        for a in working[v]:
            working[a].discard(v)
        del working[v]
        remaining.remove(v)
        order.append(v)
    chordal = UndirectedGraph(g.vertices, dict(g.cardinality), filled)
    return chordal, tuple(order)


def is_perfect_elimination_order(g: UndirectedGraph, order: Sequence[str]) -> bool:
    """True when each vertex's later neighbors form a clique (chordality check)."""
    pos = {v: i for i, v in enumerate(order)}
    for v in order:
        later = [u for u in g.adjacency[v] if pos[u] > pos[v]]
        for i, a in enumerate(later):
            for b in later[i + 1 :]:
                if b not in g.adjacency[a]:
                    return False
    return True


def elimination_cliques(
    chordal: UndirectedGraph, order: Sequence[str]
) -> list[tuple[str, ...]]:
    """Maximal cliques of the chordal graph, in creation order.

    Each eliminated vertex yields the clique of itself plus its later
    neighbors; non-maximal ones (subsets of an earlier clique) are dropped.
    """
    pos = {v: i for i, v in enumerate(order)}
    declared = {v: i for i, v in enumerate(chordal.vertices)}
    kept: list[set[str]] = []
    for v in order:
        clique = {v} | {u for u in chordal.adjacency[v] if pos[u] > pos[v]}
        if not any(clique <= existing for existing in kept):
            kept.append(clique)
    return [tuple(sorted(c, key=declared.__getitem__)) for c in kept]


def connected_components(
    vertices: Sequence[str], adjacency: dict[str, Iterable[str]]
) -> list[tuple[str, ...]]:
    """Components in order of their earliest vertex; members in input order."""
    pos = {v: i for i, v in enumerate(vertices)}
    seen: set[str] = set()
    components: list[tuple[str, ...]] = []
    for start in vertices:
        if start in seen:
            continue
        stack = [start]
        members = []
        seen.add(start)
        while stack:
            v = stack.pop()
            members.append(v)
            for u in adjacency[v]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        components.append(tuple(sorted(members, key=pos.__getitem__)))
    return components
