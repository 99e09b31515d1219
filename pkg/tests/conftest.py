import numpy as np
import pytest

from beliefforest import network_from_document
from beliefforest.synth import default_spec, generate


def random_network(rng, max_nodes=10, max_values=4, max_parents=3, zero_frac=0.0):
    """Small random network, built through the document path so the parser
    is exercised on every trial."""
    n = int(rng.integers(3, max_nodes + 1))
    cards = [int(rng.integers(2, max_values + 1)) for _ in range(n)]
    nodes = []
    for i in range(n):
        n_par = int(rng.integers(0, min(i, max_parents) + 1))
        if n_par:
            picks = rng.choice(i, size=n_par, replace=False)
            parents = [f"x{j}" for j in sorted(int(j) for j in picks)]
            parent_cards = [cards[int(j)] for j in sorted(int(j) for j in picks)]
        else:
            parents = []
            parent_cards = []
        n_rows = int(np.prod(parent_cards)) if parent_cards else 1
        flat = []
        for _ in range(n_rows):
            row = rng.gamma(1.0, 1.0, size=cards[i]) + 1e-3
            if zero_frac > 0.0:
                mask = rng.random(cards[i]) < zero_frac
                if mask.all():
                    mask[int(rng.integers(cards[i]))] = False
                row = np.where(mask, 0.0, row)
            flat.extend((row / row.sum()).tolist())
        nodes.append(
            {
                "id": f"x{i}",
                "values": [f"v{k}" for k in range(cards[i])],
                "parents": parents,
                "cpt": flat,
            }
        )
    return network_from_document({"nodes": nodes})


def random_evidence(rng, net, max_obs=3, exclude=()):
    """Random observation set as a node -> value-index map."""
    pool = [node.id for node in net.nodes if node.id not in set(exclude)]
    k = int(rng.integers(1, min(max_obs, len(pool)) + 1))
    picks = rng.choice(len(pool), size=k, replace=False)
    return {
        pool[int(j)]: int(rng.integers(net.cardinality(pool[int(j)])))
        for j in picks
    }


def root_nodes(net):
    return [node.id for node in net.nodes if not net.parents[node.id]]


TWO_NODE_DOC = {
    "nodes": [
        {"id": "D", "values": ["d1", "d2"], "parents": [], "cpt": [0.6, 0.4]},
        {
            "id": "F",
            "values": ["present", "absent"],
            "parents": ["D"],
            "cpt": [0.8, 0.2, 0.3, 0.7],
        },
    ]
}

# F is impossible under d2, G carries ordinary evidence: absorbing G then an
# F value that d-rows rule out exercises rollback paths.
ZERO_ROW_DOC = {
    "nodes": [
        {"id": "D", "values": ["d1", "d2"], "parents": [], "cpt": [0.6, 0.4]},
        {"id": "F", "values": ["t", "f"], "parents": ["D"], "cpt": [0.0, 1.0, 0.0, 1.0]},
        {"id": "G", "values": ["t", "f"], "parents": ["D"], "cpt": [0.8, 0.2, 0.3, 0.7]},
    ]
}


@pytest.fixture
def two_node_net():
    return network_from_document(TWO_NODE_DOC)


@pytest.fixture
def zero_row_net():
    return network_from_document(ZERO_ROW_DOC)


@pytest.fixture(scope="session")
def synth_net():
    return generate(default_spec())
