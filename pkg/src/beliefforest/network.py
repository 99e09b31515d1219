"""Discrete belief networks: nodes, conditional tables, evidence, and file IO.

A network is a DAG over finite-valued nodes. Each node carries a conditional
probability table (CPT) with one row per full assignment of its parents; rows
are laid out row-major, parent assignments enumerated lexicographically in
declared parent order, and each row ordered by the node's own value index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    NetworkFormatError,
    NetworkValidationError,
    UnknownNodeError,
    UnknownValueError,
)

ROW_SUM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class NodeDef:
    """A single network variable with a finite ordered value set."""

    id: str
    label: str
    values: tuple[str, ...]

    @property
    def cardinality(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ConditionalTable:
    """CPT for one node given its parents.

    ``table`` has one axis per parent (in ``parent_order``) followed by the
    node's own value axis, so ``table.reshape(-1, cardinality)`` recovers the
    row-major flat layout used in network files.
    """

    node: str
    parent_order: tuple[str, ...]
    table: np.ndarray

    @property
    def rows(self) -> np.ndarray:
        return self.table.reshape(-1, self.table.shape[-1])

    def flat(self) -> list[float]:
        return [float(x) for x in self.table.reshape(-1)]


class BeliefNetwork:
    """Immutable DAG of nodes with one conditional table per node."""

    def __init__(self, nodes: Sequence[NodeDef], cpts: Mapping[str, ConditionalTable]):
        self.nodes: tuple[NodeDef, ...] = tuple(nodes)
        self.cpts: dict[str, ConditionalTable] = dict(cpts)
        self._index = {n.id: i for i, n in enumerate(self.nodes)}
        self._by_id = {n.id: n for n in self.nodes}
        self._validate()
        self.parents = {n.id: self.cpts[n.id].parent_order for n in self.nodes}
        self.children: dict[str, tuple[str, ...]] = {n.id: () for n in self.nodes}
        kids: dict[str, list[str]] = {n.id: [] for n in self.nodes}
        for n in self.nodes:
            for p in self.parents[n.id]:
                kids[p].append(n.id)
        self.children = {k: tuple(v) for k, v in kids.items()}
        self.topological_order: tuple[str, ...] = self._topo_sort()

    # -- lookups -------------------------------------------------------

    def node(self, node_id: str) -> NodeDef:
        try:
            return self._by_id[node_id]
        except KeyError:
            raise UnknownNodeError(node_id) from None

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._by_id

    def node_index(self, node_id: str) -> int:
        self.node(node_id)
        return self._index[node_id]

    def cardinality(self, node_id: str) -> int:
        return self.node(node_id).cardinality

    def value_index(self, node_id: str, label: str) -> int:
        node = self.node(node_id)
        try:
            return node.values.index(label)
        except ValueError:
            raise UnknownValueError(
                f"node {node_id!r} has no value {label!r} (values: {list(node.values)})"
            ) from None

    def family(self, node_id: str) -> tuple[str, ...]:
        """Parents of the node plus the node itself."""
        return self.parents[node_id] + (node_id,)

    @property
    def edges(self) -> list[tuple[str, str]]:
        return [(p, n.id) for n in self.nodes for p in self.cpts[n.id].parent_order]

    # -- validation ----------------------------------------------------

    def _validate(self) -> None:
        if len(self._index) != len(self.nodes):
            seen: set[str] = set()
            dup = next(n.id for n in self.nodes if n.id in seen or seen.add(n.id))
            raise NetworkValidationError(f"duplicate node id: {dup!r}")
        for n in self.nodes:
            if n.cardinality < 2:
                raise NetworkValidationError(
                    f"node {n.id!r} must have at least 2 values, got {n.cardinality}"
                )
            if len(set(n.values)) != n.cardinality:
                raise NetworkValidationError(f"node {n.id!r} has duplicate value labels")
            if n.id not in self.cpts:
                raise NetworkValidationError(f"node {n.id!r} has no conditional table")
        for node_id, cpt in self.cpts.items():
            if node_id not in self._by_id:
                raise NetworkValidationError(f"conditional table for unknown node {node_id!r}")
            for p in cpt.parent_order:
                if p not in self._by_id:
                    raise NetworkValidationError(
                        f"node {node_id!r} references unknown parent {p!r}"
                    )
            expected = tuple(self._by_id[p].cardinality for p in cpt.parent_order) + (
                self._by_id[node_id].cardinality,
            )
            if cpt.table.shape != expected:
                raise NetworkValidationError(
                    f"dimension mismatch for node {node_id!r}: table shape "
                    f"{cpt.table.shape} does not match parent/node cardinalities {expected}"
                )
            if np.any(cpt.table < 0) or np.any(cpt.table > 1 + ROW_SUM_TOLERANCE):
                raise NetworkValidationError(
                    f"conditional table for node {node_id!r} has entries outside [0, 1]"
                )
            sums = cpt.rows.sum(axis=1)
            bad = np.where(np.abs(sums - 1.0) > ROW_SUM_TOLERANCE)[0]
            if bad.size:
                raise NetworkValidationError(
                    f"row-sum violation in table for node {node_id!r}: row {int(bad[0])} "
                    f"sums to {sums[bad[0]]:.12g}"
                )

    def _topo_sort(self) -> tuple[str, ...]:
        indegree = {n.id: len(self.parents[n.id]) for n in self.nodes}
        ready = [n.id for n in self.nodes if indegree[n.id] == 0]
        order: list[str] = []
        while ready:
            node_id = ready.pop(0)
            order.append(node_id)
            for child in self.children[node_id]:
                indegree[child] -= 1
                if indegree[child] == 0:
                    ready.append(child)
        if len(order) != len(self.nodes):
            stuck = sorted(k for k, d in indegree.items() if d > 0)
            raise NetworkValidationError(f"cycle among nodes: {stuck}")
        return tuple(order)

    # -- serialization -------------------------------------------------

    def to_document(self) -> dict:
        return {
            "nodes": [
                {
                    "id": n.id,
                    "label": n.label,
                    "values": list(n.values),
                    "parents": list(self.cpts[n.id].parent_order),
                    "cpt": self.cpts[n.id].flat(),
                }
                for n in self.nodes
            ]
        }

    def to_json(self) -> str:
        return json.dumps(self.to_document(), indent=2)


@dataclass(frozen=True)
class Evidence:
    """Observed values: node id -> value index. At most one value per node."""

    observations: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "observations", dict(self.observations))

    def __len__(self) -> int:
        return len(self.observations)

    def __iter__(self):
        return iter(self.observations.items())

    def nodes(self) -> set[str]:
        return set(self.observations)

    def validate(self, net: BeliefNetwork) -> None:
        for node_id, value in self.observations.items():
            card = net.cardinality(node_id)
            if not 0 <= value < card:
                raise UnknownValueError(
                    f"value index {value} out of range for node {node_id!r} (cardinality {card})"
                )

    @classmethod
    def from_labels(cls, net: BeliefNetwork, observed: Mapping[str, str]) -> "Evidence":
        return cls({node: net.value_index(node, label) for node, label in observed.items()})

    def to_labels(self, net: BeliefNetwork) -> dict[str, str]:
        return {node: net.node(node).values[idx] for node, idx in self.observations.items()}


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise NetworkFormatError(message)


def network_from_document(doc: dict) -> BeliefNetwork:
    """Build a validated network from an already-parsed document."""
    _require(isinstance(doc, dict), "top-level value must be an object")
    _require("nodes" in doc, 'missing top-level "nodes" array')
    _require(isinstance(doc["nodes"], list), '"nodes" must be an array')
    nodes: list[NodeDef] = []
    cpts: dict[str, ConditionalTable] = {}
    cards: dict[str, int] = {}
    for i, entry in enumerate(doc["nodes"]):
        _require(isinstance(entry, dict), f"nodes[{i}] must be an object")
        for key in ("id", "values", "cpt"):
            _require(key in entry, f"nodes[{i}] missing {key!r}")
        node_id = entry["id"]
        _require(isinstance(node_id, str) and node_id != "", f"nodes[{i}].id must be a non-empty string")
        values = entry["values"]
        _require(
            isinstance(values, list) and all(isinstance(v, str) for v in values),
            f"nodes[{i}].values must be an array of strings",
        )
        nodes.append(NodeDef(id=node_id, label=str(entry.get("label", node_id)), values=tuple(values)))
        cards[node_id] = len(values)
    for i, entry in enumerate(doc["nodes"]):
        node_id = entry["id"]
        parents = tuple(entry.get("parents", []))
        _require(
            all(isinstance(p, str) for p in parents),
            f"nodes[{i}].parents must be an array of node ids",
        )
        flat = entry["cpt"]
        _require(
            isinstance(flat, list) and all(isinstance(x, (int, float)) for x in flat),
            f"nodes[{i}].cpt must be a flat array of numbers",
        )
        if any(p not in cards for p in parents):
            missing = next(p for p in parents if p not in cards)
            raise NetworkValidationError(f"node {node_id!r} references unknown parent {missing!r}")
        shape = tuple(cards[p] for p in parents) + (cards[node_id],)
        expected_size = int(np.prod(shape))
        if len(flat) != expected_size:
            raise NetworkValidationError(
                f"dimension mismatch for node {node_id!r}: cpt has {len(flat)} entries, "
                f"expected {expected_size}"
            )
        table = np.asarray(flat, dtype=np.float64).reshape(shape)
        cpts[node_id] = ConditionalTable(node=node_id, parent_order=parents, table=table)
    net = BeliefNetwork(nodes, cpts)
    # Rows passed the tolerance check; renormalize exactly so float drift
    # cannot compound through propagation.
    for node_id, cpt in net.cpts.items():
        rows = cpt.rows
        normalized = rows / rows.sum(axis=1, keepdims=True)
        net.cpts[node_id] = ConditionalTable(
            node=node_id, parent_order=cpt.parent_order, table=normalized.reshape(cpt.table.shape)
        )
    return net


def load_network(document: str) -> BeliefNetwork:
    """Parse and validate a JSON network document.

    Raises NetworkFormatError (with line/column) on malformed JSON or wrong
    field types, NetworkValidationError when a structural invariant fails.
    """
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(exc.msg, line=exc.lineno, column=exc.colno) from None
    return network_from_document(doc)


def load_evidence(document: str, net: BeliefNetwork) -> Evidence:
    """Parse an evidence document: a JSON object mapping node id -> value label."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(exc.msg, line=exc.lineno, column=exc.colno) from None
    _require(isinstance(doc, dict), "evidence document must be an object")
    _require(
        all(isinstance(v, str) for v in doc.values()),
        "evidence values must be value labels (strings)",
    )
    return Evidence.from_labels(net, doc)
