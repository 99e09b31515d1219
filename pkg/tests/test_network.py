import json

import numpy as np
import pytest

from beliefforest import (
    Evidence,
    NetworkFormatError,
    NetworkValidationError,
    UnknownNodeError,
    UnknownValueError,
    load_evidence,
    load_network,
    network_from_document,
)
from conftest import TWO_NODE_DOC, random_network


def test_document_round_trip():
    rng = np.random.default_rng(21)
    for _ in range(25):
        net = random_network(rng, zero_frac=0.1)
        again = network_from_document(net.to_document())
        assert [n.id for n in again.nodes] == [n.id for n in net.nodes]
        for node in net.nodes:
            assert again.parents[node.id] == net.parents[node.id]
            assert np.allclose(again.cpts[node.id].table, net.cpts[node.id].table)


def test_json_round_trip(two_node_net):
    again = load_network(two_node_net.to_json())
    assert again.to_document() == two_node_net.to_document()


def test_node_lookup(two_node_net):
    net = two_node_net
    assert net.node("D").values == ("d1", "d2")
    assert net.cardinality("F") == 2
    assert net.value_index("F", "absent") == 1
    assert net.node_index("F") == 1
    assert net.family("F") == ("D", "F")
    assert net.children["D"] == ("F",)
    assert "D" in net and "Z" not in net
    with pytest.raises(UnknownNodeError):
        net.node("Z")
    with pytest.raises(UnknownValueError):
        net.value_index("F", "maybe")


def test_topological_order():
    rng = np.random.default_rng(3)
    for _ in range(25):
        net = random_network(rng)
        seen = set()
        for node in net.topological_order:
            assert all(p in seen for p in net.parents[node])
            seen.add(node)
        assert seen == {n.id for n in net.nodes}


def test_rows_renormalized_exactly():
    doc = {
        "nodes": [
            {"id": "A", "values": ["a", "b"], "parents": [], "cpt": [0.3000000001, 0.7]},
        ]
    }
    net = network_from_document(doc)
    assert net.cpts["A"].table.sum() == 1.0


def test_row_sum_violation_rejected():
    doc = {
        "nodes": [
            {"id": "A", "values": ["a", "b"], "parents": [], "cpt": [0.3, 0.6]},
        ]
    }
    with pytest.raises(NetworkValidationError):
        network_from_document(doc)


def test_structural_validation_errors():
    base = TWO_NODE_DOC["nodes"]
    bad = [
        # duplicate node id
        {"nodes": base + [dict(base[0])]},
        # unknown parent
        {
            "nodes": [
                {"id": "A", "values": ["a", "b"], "parents": ["Q"], "cpt": [0.5, 0.5, 0.5, 0.5]},
            ]
        },
        # single-valued node
        {"nodes": [{"id": "A", "values": ["a"], "parents": [], "cpt": [1.0]}]},
        # repeated value label
        {"nodes": [{"id": "A", "values": ["a", "a"], "parents": [], "cpt": [0.5, 0.5]}]},
        # wrong table size
        {"nodes": [{"id": "A", "values": ["a", "b"], "parents": [], "cpt": [0.5, 0.3, 0.2]}]},
        # negative entry
        {"nodes": [{"id": "A", "values": ["a", "b"], "parents": [], "cpt": [1.2, -0.2]}]},
    ]
    for doc in bad:
        with pytest.raises((NetworkValidationError, NetworkFormatError)):
            network_from_document(doc)


def test_cycle_rejected():
    doc = {
        "nodes": [
            {"id": "A", "values": ["a", "b"], "parents": ["B"], "cpt": [0.5, 0.5, 0.5, 0.5]},
            {"id": "B", "values": ["a", "b"], "parents": ["A"], "cpt": [0.5, 0.5, 0.5, 0.5]},
        ]
    }
    with pytest.raises(NetworkValidationError):
        network_from_document(doc)


def test_malformed_json_reports_position():
    with pytest.raises(NetworkFormatError) as exc:
        load_network('{"nodes": [}')
    assert exc.value.line == 1
    assert exc.value.column is not None


def test_missing_fields_rejected():
    for doc in [
        {},
        {"nodes": "oops"},
        {"nodes": [{"values": ["a", "b"], "parents": [], "cpt": [0.5, 0.5]}]},
        {"nodes": [{"id": "A", "parents": [], "cpt": [0.5, 0.5]}]},
        {"nodes": [{"id": "A", "values": ["a", "b"], "parents": []}]},
    ]:
        with pytest.raises(NetworkFormatError):
            network_from_document(doc)


def test_parents_field_optional():
    net = network_from_document(
        {"nodes": [{"id": "A", "values": ["a", "b"], "cpt": [0.5, 0.5]}]}
    )
    assert net.parents["A"] == ()


def test_evidence_labels(two_node_net):
    ev = Evidence.from_labels(two_node_net, {"F": "present"})
    assert ev.observations == {"F": 0}
    assert ev.to_labels(two_node_net) == {"F": "present"}
    ev.validate(two_node_net)
    with pytest.raises(UnknownNodeError):
        Evidence.from_labels(two_node_net, {"Z": "present"})
    with pytest.raises(UnknownValueError):
        Evidence.from_labels(two_node_net, {"F": "sometimes"})
    with pytest.raises(UnknownValueError):
        Evidence({"F": 7}).validate(two_node_net)


def test_load_evidence(two_node_net):
    ev = load_evidence(json.dumps({"F": "absent"}), two_node_net)
    assert ev.observations == {"F": 1}
    with pytest.raises(NetworkFormatError):
        load_evidence("not json", two_node_net)
