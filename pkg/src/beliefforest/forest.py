"""Clique-forest propagation.

The propagation structure is compiled once per network into a ForestStructure
(cliques, separators, spanning-tree edges, per-component message schedules).
Potentials live in a CliqueForest and carry a leading batch axis: row b of
every potential is an independent copy of the network's numbers. Batch size 1
is ordinary propagation; the conditioning engine stacks one row per cutset
instance so all instances propagate in single array operations.

Evidence handling is incremental and selective: entering evidence marks only
the components that contain observed nodes, propagation processes only marked
components, and each component's normalization constant is the probability of
that component's new evidence given everything absorbed before.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import (
    EvidenceConflictError,
    ImpossibleEvidenceError,
    NotCalibratedError,
    UnknownNodeError,
    UnknownValueError,
)
from .graphs import (
    UndirectedGraph,
    connected_components,
    elimination_cliques,
    moralize,
    triangulate,
)
from .network import BeliefNetwork

CALIBRATION_TOLERANCE = 1e-10


@dataclass(frozen=True)
class CliqueDef:
    """One clique: member ids in declaration order plus derived shape data."""

    index: int
    members: tuple[str, ...]
    shape: tuple[int, ...]
    state_space_size: int
    component: int


@dataclass(frozen=True)
class SeparatorDef:
    index: int
    scope: tuple[str, ...]
    shape: tuple[int, ...]
    cliques: tuple[int, int]


@dataclass(frozen=True)
class Message:
    """One directed separator update, precompiled to axis arithmetic.

    sum_axes: source potential axes (batch axis included) marginalized away.
    expand: destination-shaped dims (without batch) used to broadcast the
    separator ratio into the destination potential.
    """

    source: int
    target: int
    separator: int
    sum_axes: tuple[int, ...]
    expand: tuple[int, ...]


@dataclass(frozen=True)
class ComponentDef:
    index: int
    cliques: tuple[int, ...]
    separators: tuple[int, ...]
    top_clique: int
    collect: tuple[Message, ...]
    distribute: tuple[Message, ...]
    nodes: tuple[str, ...]

    @property
    def structural_messages(self) -> int:
        return len(self.collect) + len(self.distribute)


@dataclass(frozen=True)
class PropagationReport:
    """What one propagate call did.

    Constants are arrays with one entry per propagated batch row, keyed by
    component. messages_passed counts structural messages times rows, so the
    batched engine reports the same number an unbatched per-row sweep would.
    """

    touched_components: tuple[int, ...]
    messages_passed: int
    per_component_constant: dict[int, np.ndarray]
    messages_by_component: dict[int, int]
    rows_propagated: int

    def component_constant(self, component: int) -> np.ndarray:
        return self.per_component_constant[component]


def forest_likelihood(report: PropagationReport) -> np.ndarray:
    """Product of the per-component constants; ones when nothing was touched."""
    result = np.ones(report.rows_propagated)
    for constant in report.per_component_constant.values():
        result = result * constant
    return result


class ForestStructure:
    """Immutable compiled propagation structure for one network."""

    def __init__(self, net: BeliefNetwork, chordal: UndirectedGraph, order: tuple[str, ...]):
        self.node_order: tuple[str, ...] = tuple(n.id for n in net.nodes)
        self.cardinality: dict[str, int] = {n.id: n.cardinality for n in net.nodes}
        declared = {v: i for i, v in enumerate(self.node_order)}

        member_sets = elimination_cliques(chordal, order)
        vertex_components = connected_components(chordal.vertices, chordal.adjacency)
        component_of_vertex: dict[str, int] = {}
        for ci, comp in enumerate(vertex_components):
            for v in comp:
                component_of_vertex[v] = ci

        self.cliques: list[CliqueDef] = []
        for i, members in enumerate(member_sets):
            shape = tuple(self.cardinality[m] for m in members)
            self.cliques.append(
                CliqueDef(
                    index=i,
                    members=members,
                    shape=shape,
                    state_space_size=int(prod(shape)),
                    component=component_of_vertex[members[0]] if members else 0,
                )
            )

        self.separators: list[SeparatorDef] = []
        tree_edges = self._spanning_tree(declared)
        adjacency: dict[int, list[tuple[int, int]]] = {c.index: [] for c in self.cliques}
        for si, (a, b, scope) in enumerate(tree_edges):
            self.separators.append(
                SeparatorDef(
                    index=si,
                    scope=scope,
                    shape=tuple(self.cardinality[v] for v in scope),
                    cliques=(a, b),
                )
            )
            adjacency[a].append((b, si))
            adjacency[b].append((a, si))

        self.components: list[ComponentDef] = self._build_components(adjacency)
        self.component_of_clique = {
            c: comp.index for comp in self.components for c in comp.cliques
        }

        self.node_cliques: dict[str, tuple[int, ...]] = {}
        for node in self.node_order:
            containing = tuple(c.index for c in self.cliques if node in c.members)
            if not containing:
                raise RuntimeError(f"node {node!r} missing from every clique")
            self.node_cliques[node] = containing

        self.family_clique: dict[str, int] = {}
        for node in self.node_order:
            family = set(net.family(node))
            assigned = next(
                (c.index for c in self.cliques if family <= set(c.members)), None
            )
            if assigned is None:
                raise RuntimeError(f"no clique contains the family of node {node!r}")
            self.family_clique[node] = assigned

        # Cheapest containing clique for readout.
        self.readout_clique: dict[str, int] = {
            node: min(ids, key=lambda i: (self.cliques[i].state_space_size, i))
            for node, ids in self.node_cliques.items()
        }
        self.component_of_node: dict[str, int] = {
            node: self.component_of_clique[ids[0]] for node, ids in self.node_cliques.items()
        }

    def containing_clique(self, scope: Sequence[str]) -> int:
        """First clique whose members cover the scope."""
        wanted = set(scope)
        for clique in self.cliques:
            if wanted <= set(clique.members):
                return clique.index
        raise RuntimeError(f"no clique contains scope {tuple(scope)!r}")

    # -- construction helpers -------------------------------------------

    def _spanning_tree(self, declared: dict[str, int]) -> list[tuple[int, int, tuple[str, ...]]]:
        candidates = []
        for i, a in enumerate(self.cliques):
            set_a = set(a.members)
            for b in self.cliques[i + 1 :]:
                shared = set_a & set(b.members)
                if not shared:
                    continue
                scope = tuple(sorted(shared, key=declared.__getitem__))
                weight = prod(self.cardinality[v] for v in scope)
                candidates.append((-len(scope), -weight, a.index, b.index, scope))
        candidates.sort()
        parent = list(range(len(self.cliques)))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        edges = []
        for _, _, a, b, scope in candidates:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
                edges.append((a, b, scope))
        return edges

    def _build_components(
        self, adjacency: dict[int, list[tuple[int, int]]]
    ) -> list[ComponentDef]:
        comp_cliques: dict[int, list[int]] = {}
        for c in self.cliques:
            comp_cliques.setdefault(c.component, []).append(c.index)
        components = []
        for new_index, key in enumerate(sorted(comp_cliques, key=lambda k: min(comp_cliques[k]))):
            members = sorted(comp_cliques[key])
            top = min(
                members,
                key=lambda i: (-self.cliques[i].state_space_size, i),
            )
            bfs_order = [top]
            bfs_parent: dict[int, tuple[int, int]] = {}
            seen = {top}
            cursor = 0
            while cursor < len(bfs_order):
                current = bfs_order[cursor]
                cursor += 1
                for nbr, sep in sorted(adjacency[current]):
                    if nbr not in seen:
                        seen.add(nbr)
                        bfs_parent[nbr] = (current, sep)
                        bfs_order.append(nbr)
            collect = tuple(
                self._compile_message(child, *bfs_parent[child])
                for child in reversed(bfs_order)
                if child in bfs_parent
            )
            distribute = tuple(
                self._compile_message(bfs_parent[child][0], child, bfs_parent[child][1])
                for child in bfs_order
                if child in bfs_parent
            )
            nodes = []
            for i in members:
                for m in self.cliques[i].members:
                    if m not in nodes:
                        nodes.append(m)
            separators = tuple(
                s.index for s in self.separators if s.cliques[0] in members
            )
            components.append(
                ComponentDef(
                    index=new_index,
                    cliques=tuple(members),
                    separators=separators,
                    top_clique=top,
                    collect=collect,
                    distribute=distribute,
                    nodes=tuple(nodes),
                )
            )
        # Re-home clique component ids to the final component indexing.
        self.cliques = [
            CliqueDef(c.index, c.members, c.shape, c.state_space_size, comp.index)
            for comp in components
            for c in [self.cliques[i] for i in comp.cliques]
        ]
        self.cliques.sort(key=lambda c: c.index)
        return components

    def _compile_message(self, source: int, target: int, separator: int) -> Message:
        src = self.cliques[source]
        dst = self.cliques[target]
        sep = self.separators[separator]
        sum_axes = tuple(
            i + 1 for i, m in enumerate(src.members) if m not in sep.scope
        )
        expand = tuple(
            self.cardinality[m] if m in sep.scope else 1 for m in dst.members
        )
        return Message(source, target, separator, sum_axes, expand)

    # -- reporting -------------------------------------------------------

    @property
    def largest_component(self) -> int:
        """Component with the most cliques; ties by total state space, then index."""
        return min(
            (comp.index for comp in self.components),
            key=lambda i: (
                -len(self.components[i].cliques),
                -sum(self.cliques[c].state_space_size for c in self.components[i].cliques),
                i,
            ),
            default=0,
        )

    def describe(self) -> str:
        lines = []
        for comp in self.components:
            lines.append(f"component {comp.index} (top clique {comp.top_clique}):")
            for ci in comp.cliques:
                c = self.cliques[ci]
                lines.append(
                    f"  clique {c.index}: {{{', '.join(c.members)}}} "
                    f"state space {c.state_space_size}"
                )
            for si in comp.separators:
                s = self.separators[si]
                lines.append(
                    f"  edge {s.cliques[0]}--{s.cliques[1]} separator {{{', '.join(s.scope)}}}"
                )
        return "\n".join(lines)


def build_forest(
    chordal: UndirectedGraph, order: tuple[str, ...], net: BeliefNetwork
) -> ForestStructure:
    """Compile the clique forest from a triangulated graph."""
    return ForestStructure(net, chordal, order)


def structure_for(
    net: BeliefNetwork, extra_scopes: Optional[Sequence[tuple[str, ...]]] = None
) -> ForestStructure:
    """Compile a network's propagation structure.

    extra_scopes lists variable sets that must end up inside a single clique
    beyond the node families, e.g. the scopes of conditioning factors. They
    are made complete in the moral graph before triangulation.
    """
    moral = moralize(net)
    for scope in extra_scopes or ():
        for a in scope:
            for b in scope:
                if a != b:
                    moral.adjacency[a].add(b)
    chordal, order = triangulate(moral)
    return build_forest(chordal, order, net)


def _batch_rows(rows, batch: int) -> int:
    return batch if rows is None else len(rows)


class CliqueForest:
    """Batched potentials over a ForestStructure, with incremental evidence.

    tables maps node id to an array of shape (batch, *family shape) where the
    family axes follow the node's parent order plus the node itself. Row b of
    the forest then represents the network whose tables are the b-th slices.

    factors maps a label to a (scope, table) pair of extra multiplicative
    potentials, table shape (batch, *scope shape). The structure must have
    been compiled with these scopes (see structure_for) so a covering clique
    exists.
    """

    def __init__(
        self,
        structure: ForestStructure,
        tables: Mapping[str, np.ndarray],
        batch: int = 1,
        families: Optional[Mapping[str, tuple[str, ...]]] = None,
        factors: Optional[Mapping[str, tuple[tuple[str, ...], np.ndarray]]] = None,
    ):
        self.structure = structure
        self.batch = batch
        declared = {v: i for i, v in enumerate(structure.node_order)}
        self.clique_potentials: list[np.ndarray] = [
            np.ones((batch,) + c.shape) for c in structure.cliques
        ]
        self.separator_potentials: list[np.ndarray] = [
            np.ones((batch,) + s.shape) for s in structure.separators
        ]
        def multiply_into(clique: CliqueDef, scope: tuple[str, ...], table: np.ndarray, what: str):
            if table.ndim != len(scope) + 1:
                raise ValueError(
                    f"table for {what} has {table.ndim - 1} scope axes, expected {len(scope)}"
                )
            perm = (0,) + tuple(
                1 + k for k in sorted(range(len(scope)), key=lambda k: declared[scope[k]])
            )
            ordered_scope = sorted(scope, key=declared.__getitem__)
            expand = (table.shape[0],) + tuple(
                structure.cardinality[m] if m in ordered_scope else 1 for m in clique.members
            )
            self.clique_potentials[clique.index] = (
                self.clique_potentials[clique.index]
                * np.transpose(table, perm).reshape(expand)
            )

        for node in structure.node_order:
            table = np.asarray(tables[node], dtype=np.float64)
            scope = (families[node] if families is not None else ()) + (node,)
            clique = structure.cliques[structure.family_clique[node]]
            multiply_into(clique, scope, table, f"node {node!r}")
        for label, (scope, table) in (factors or {}).items():
            table = np.asarray(table, dtype=np.float64)
            clique = structure.cliques[structure.containing_clique(scope)]
            multiply_into(clique, tuple(scope), table, f"factor {label!r}")
        self.observed: dict[str, int] = {}
        self.dirty: list[np.ndarray] = [
            np.zeros(batch, dtype=bool) for _ in structure.components
        ]
        if structure.components:
            for mask in self.dirty:
                mask[:] = True
            self.propagate(force_all=True, strict=False)

    @classmethod
    def for_network(cls, net: BeliefNetwork, structure: Optional[ForestStructure] = None):
        """Single-row forest over a network's own tables."""
        structure = structure or structure_for(net)
        tables = {n.id: net.cpts[n.id].table[np.newaxis, ...] for n in net.nodes}
        families = {n.id: net.parents[n.id] for n in net.nodes}
        return cls(structure, tables, batch=1, families=families)

    # -- evidence ---------------------------------------------------------

    @property
    def dirty_components(self) -> tuple[int, ...]:
        return tuple(
            comp.index for comp in self.structure.components if self.dirty[comp.index].any()
        )

    def enter_evidence(self, observations: Mapping[str, int], rows=None) -> tuple[int, ...]:
        """Zero out entries inconsistent with each observation and mark the
        containing components dirty for the given rows. Returns the marked
        component ids. Re-observation at the same value re-applies the
        zeroing, which is idempotent on rows that already carry it but is
        how deferred rows catch up; a different value is a conflict."""
        structure = self.structure
        staged: dict[str, int] = {}
        for node, value in observations.items():
            if node not in structure.node_cliques:
                raise UnknownNodeError(node)
            card = structure.cardinality[node]
            if not 0 <= int(value) < card:
                raise UnknownValueError(
                    f"value index {value} out of range for node {node!r} (cardinality {card})"
                )
            if node in self.observed and self.observed[node] != int(value):
                raise EvidenceConflictError(
                    f"node {node!r} already observed at value {self.observed[node]}, "
                    f"cannot re-observe at {value}"
                )
            staged[node] = int(value)
        touched: list[int] = []
        selector = slice(None) if rows is None else rows
        for node, value in staged.items():
            clique = structure.cliques[structure.node_cliques[node][0]]
            axis = clique.members.index(node)
            mask_shape = tuple(
                clique.shape[i] if i == axis else 1 for i in range(len(clique.shape))
            )
            mask = np.zeros(mask_shape)
            mask.reshape(-1)[value] = 1.0
            self.clique_potentials[clique.index][selector] = (
                self.clique_potentials[clique.index][selector] * mask
            )
            self.observed[node] = value
            comp = structure.component_of_node[node]
            self.dirty[comp][selector] = True
            if comp not in touched:
                touched.append(comp)
        return tuple(sorted(touched))

    # -- propagation ------------------------------------------------------

    def propagate(self, force_all: bool = False, strict: bool = True, rows=None) -> PropagationReport:
        """Collect and distribute in every dirty (or all, when forced)
        component, restricted to the given batch rows.

        Each touched component's constant is its top clique's mass after
        collect: the probability of that component's new evidence given the
        evidence absorbed before. Potentials are renormalized afterwards so
        every clique row sums to 1. strict mode raises when any constant is 0.
        """
        structure = self.structure
        selector = slice(None) if rows is None else rows
        nrows = _batch_rows(rows, self.batch)
        targets = []
        for comp in structure.components:
            if force_all or self.dirty[comp.index][selector].any():
                targets.append(comp)
        constants: dict[int, np.ndarray] = {}
        messages_by_component: dict[int, int] = {}
        total_messages = 0
        for comp in targets:
            cpots = {i: self.clique_potentials[i][selector] for i in comp.cliques}
            spots = {i: self.separator_potentials[i][selector] for i in comp.separators}
            for msg in comp.collect:
                self._apply_message(msg, cpots, spots, nrows)
            top = cpots[comp.top_clique]
            constant = top.reshape(nrows, -1).sum(axis=1)
            if strict and not np.all(constant > 0.0):
                raise ImpossibleEvidenceError(
                    "evidence has probability zero in component "
                    f"{comp.index}"
                )
            for msg in comp.distribute:
                self._apply_message(msg, cpots, spots, nrows)
            for i in comp.cliques:
                pot = cpots[i]
                z = pot.reshape(nrows, -1).sum(axis=1).reshape((nrows,) + (1,) * (pot.ndim - 1))
                cpots[i] = np.divide(pot, z, out=np.zeros_like(pot), where=z > 0)
            for i in comp.separators:
                pot = spots[i]
                z = pot.reshape(nrows, -1).sum(axis=1).reshape((nrows,) + (1,) * (pot.ndim - 1))
                spots[i] = np.divide(pot, z, out=np.zeros_like(pot), where=z > 0)
            for i in comp.cliques:
                self.clique_potentials[i][selector] = cpots[i]
            for i in comp.separators:
                self.separator_potentials[i][selector] = spots[i]
            constants[comp.index] = constant
            messages_by_component[comp.index] = comp.structural_messages * nrows
            total_messages += comp.structural_messages * nrows
            self.dirty[comp.index][selector] = False
        return PropagationReport(
            touched_components=tuple(c.index for c in targets),
            messages_passed=total_messages,
            per_component_constant=constants,
            messages_by_component=messages_by_component,
            rows_propagated=nrows,
        )

    @staticmethod
    def _apply_message(msg: Message, cpots: dict, spots: dict, nrows: int) -> None:
        new_sep = cpots[msg.source].sum(axis=msg.sum_axes)
        old_sep = spots[msg.separator]
        ratio = np.divide(
            new_sep, old_sep, out=np.zeros_like(new_sep), where=old_sep > 0
        )
        cpots[msg.target] = cpots[msg.target] * ratio.reshape((nrows,) + msg.expand)
        spots[msg.separator] = new_sep

    # -- readout ----------------------------------------------------------

    def node_posterior(self, node: str, rows=None) -> np.ndarray:
        """Per-row distribution over the node's values, shape (rows, cardinality).

        Rows whose potentials are all zero (impossible instances) come back
        as all-zero rows.
        """
        structure = self.structure
        if node not in structure.node_cliques:
            raise UnknownNodeError(node)
        comp = structure.component_of_node[node]
        selector = slice(None) if rows is None else rows
        if self.dirty[comp][selector].any():
            raise NotCalibratedError(
                f"component {comp} has unpropagated evidence; call propagate first"
            )
        return self._clique_marginal(structure.readout_clique[node], node, selector)

    def _clique_marginal(self, clique_index: int, node: str, selector) -> np.ndarray:
        clique = self.structure.cliques[clique_index]
        axis = clique.members.index(node)
        pot = self.clique_potentials[clique_index][selector]
        sum_axes = tuple(i + 1 for i in range(len(clique.shape)) if i != axis)
        marginal = pot.sum(axis=sum_axes) if sum_axes else pot.copy()
        z = marginal.sum(axis=1, keepdims=True)
        return np.divide(marginal, z, out=np.zeros_like(marginal), where=z > 0)

    # -- state management ---------------------------------------------------

    def snapshot(self, components: Optional[Sequence[int]] = None) -> dict:
        """Copy the mutable state of the given components (default: all)."""
        comp_ids = (
            tuple(c.index for c in self.structure.components)
            if components is None
            else tuple(components)
        )
        cliques = {}
        separators = {}
        dirty = {}
        for ci in comp_ids:
            comp = self.structure.components[ci]
            for i in comp.cliques:
                cliques[i] = self.clique_potentials[i].copy()
            for i in comp.separators:
                separators[i] = self.separator_potentials[i].copy()
            dirty[ci] = self.dirty[ci].copy()
        return {
            "cliques": cliques,
            "separators": separators,
            "dirty": dirty,
            "observed": dict(self.observed),
        }

    def restore(self, snap: dict) -> None:
        for i, pot in snap["cliques"].items():
            self.clique_potentials[i] = pot.copy()
        for i, pot in snap["separators"].items():
            self.separator_potentials[i] = pot.copy()
        for ci, mask in snap["dirty"].items():
            self.dirty[ci] = mask.copy()
        self.observed = dict(snap["observed"])
