"""Brute-force enumeration oracle.

Every other engine in the package is checked against these functions. They
apply no factoring: the full joint table over all nodes is materialized and
summed directly, so results follow from the chain rule alone.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .errors import ImpossibleEvidenceError
from .network import BeliefNetwork, Evidence

# The dense joint has one entry per full assignment; refuse anything that
# could not be an oracle-scale network.
MAX_JOINT_ENTRIES = 100_000_000


def _value_index(net: BeliefNetwork, node_id: str, value) -> int:
    if isinstance(value, str):
        return net.value_index(node_id, value)
    card = net.cardinality(node_id)
    idx = int(value)
    if not 0 <= idx < card:
        raise ValueError(f"value index {idx} out of range for node {node_id!r}")
    return idx


def joint_probability(net: BeliefNetwork, assignment: Mapping[str, object]) -> float:
    """Probability of one full assignment: the product of selected CPT entries.

    ``assignment`` maps every node id to a value index or value label.
    """
    missing = [n.id for n in net.nodes if n.id not in assignment]
    if missing:
        raise ValueError(f"incomplete assignment, missing nodes: {missing}")
    indices = {node_id: _value_index(net, node_id, v) for node_id, v in assignment.items()}
    prob = 1.0
    for node in net.nodes:
        cpt = net.cpts[node.id]
        coords = tuple(indices[p] for p in cpt.parent_order) + (indices[node.id],)
        prob *= float(cpt.table[coords])
    return prob


def full_joint(net: BeliefNetwork) -> np.ndarray:
    """Dense joint table, one axis per node in declaration order."""
    axis = {n.id: i for i, n in enumerate(net.nodes)}
    shape = tuple(n.cardinality for n in net.nodes)
    size = int(np.prod(shape, dtype=np.int64))
    if size > MAX_JOINT_ENTRIES:
        raise ValueError(
            f"joint table would hold {size} entries; the enumeration oracle "
            "is limited to small networks"
        )
    joint = np.ones(shape)
    for node in net.nodes:
        cpt = net.cpts[node.id]
        scope = cpt.parent_order + (node.id,)
        perm = sorted(range(len(scope)), key=lambda k: axis[scope[k]])
        broadcast_shape = [1] * len(shape)
        for s in scope:
            broadcast_shape[axis[s]] = net.cardinality(s)
        joint = joint * np.transpose(cpt.table, perm).reshape(broadcast_shape)
    return joint


def _restrict(net: BeliefNetwork, joint: np.ndarray, evidence: Evidence) -> np.ndarray:
    evidence.validate(net)
    selector: list = [slice(None)] * len(net.nodes)
    for node_id, value in evidence:
        selector[net.node_index(node_id)] = value
    return joint[tuple(selector)]


def evidence_likelihood_oracle(net: BeliefNetwork, evidence: Evidence) -> float:
    """P(evidence) by summing the joint over all completions. 0 is legal."""
    return float(_restrict(net, full_joint(net), evidence).sum())


def enumerate_posterior(net: BeliefNetwork, query: str, evidence: Evidence) -> np.ndarray:
    """Posterior over the query node's values given evidence, by enumeration."""
    query_axis = net.node_index(query)
    if query in evidence.nodes():
        observed = dict(evidence.observations)[query]
        rest = Evidence({k: v for k, v in evidence if k != query})
        if evidence_likelihood_oracle(net, evidence) == 0.0:
            raise ImpossibleEvidenceError("evidence has probability zero")
        del rest
        dist = np.zeros(net.cardinality(query))
        dist[observed] = 1.0
        return dist
    joint = full_joint(net)
    # Evidence axes collapse to a point; surviving axes keep declaration
    # order, so the query axis index only shifts down.
    restricted = _restrict(net, joint, evidence)
    shift = sum(1 for node_id, _ in evidence if net.node_index(node_id) < query_axis)
    sum_axes = tuple(
        i for i in range(restricted.ndim) if i != query_axis - shift
    )
    unnormalized = restricted.sum(axis=sum_axes)
    total = float(unnormalized.sum())
    if total == 0.0:
        raise ImpossibleEvidenceError("evidence has probability zero")
    return unnormalized / total
