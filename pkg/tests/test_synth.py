import numpy as np
import pytest

from beliefforest import PortionSpec, SyntheticSpec, feature_groups, generate, sample_cases
from beliefforest.synth import CASE_MAX_FEATURES, CASE_MIN_FEATURES, default_spec


def test_default_spec_shape(synth_net):
    net = synth_net
    assert net.nodes[0].id == "disease"
    assert net.cardinality("disease") == 63
    assert len(net.nodes) == 1 + 12 + 20 + 2
    for node in net.nodes[1:]:
        parents = net.parents[node.id]
        assert parents == () or parents[0] == "disease"


def test_generation_is_deterministic():
    spec = default_spec()
    assert generate(spec).to_json() == generate(spec).to_json()
    other = generate(default_spec(seed=8))
    assert other.to_json() != generate(spec).to_json()


def test_rows_are_proper_distributions(synth_net):
    for node in synth_net.nodes:
        rows = synth_net.cpts[node.id].rows
        assert np.all(rows > 0)
        assert np.allclose(rows.sum(axis=1), 1.0)


def test_portion_patterns():
    spec = SyntheticSpec(
        disease_cardinality=4,
        portions=(PortionSpec("chain", 5), PortionSpec("tree", 4), PortionSpec("isolated", 3)),
        independent_features=1,
        seed=3,
    )
    net = generate(spec)
    chain = [n.id for n in net.nodes[1:6]]
    for i, node in enumerate(chain):
        if i == 0:
            assert net.parents[node] == ("disease",)
        else:
            assert net.parents[node] == ("disease", chain[i - 1])
    tree = [n.id for n in net.nodes[6:10]]
    for i, node in enumerate(tree):
        parents = net.parents[node]
        if i == 0:
            assert parents == ("disease",)
        else:
            assert parents[0] == "disease" and parents[1] in tree[:i]
    for node in [n.id for n in net.nodes[10:13]]:
        assert net.parents[node] == ("disease",)
    assert net.parents[net.nodes[13].id] == ()


def test_pattern_validation():
    with pytest.raises(ValueError):
        PortionSpec("loopy", 4)
    with pytest.raises(ValueError):
        PortionSpec("chain", 0)
    with pytest.raises(ValueError):
        SyntheticSpec(disease_cardinality=1)


def test_spec_document_round_trip():
    spec = default_spec()
    again = SyntheticSpec.from_document(spec.to_document())
    assert again == spec
    assert SyntheticSpec.from_json(spec.to_json()) == spec


def test_feature_groups_partition(synth_net):
    groups = feature_groups(synth_net)
    sizes = sorted(len(g) for g in groups)
    assert sizes == [1] * 22 + [12]
    members = [f for g in groups for f in g]
    assert sorted(members) == sorted(n.id for n in synth_net.nodes[1:])


def test_case_sampling(synth_net):
    cases = sample_cases(synth_net, 20, seed=11)
    assert len(cases) == 20
    again = sample_cases(synth_net, 20, seed=11)
    assert cases == again
    assert cases != sample_cases(synth_net, 20, seed=12)
    order = {n.id: i for i, n in enumerate(synth_net.nodes)}
    groups = feature_groups(synth_net)
    touched_portions = set()
    for case in cases:
        observed = list(case.observations)
        assert CASE_MIN_FEATURES <= len(observed) <= CASE_MAX_FEATURES
        assert len(set(observed)) == len(observed)
        assert observed == sorted(observed, key=order.__getitem__)
        assert "disease" not in observed
        for node, value in case.observations.items():
            assert 0 <= value < synth_net.cardinality(node)
        for g, group in enumerate(groups):
            if set(group) & set(observed):
                touched_portions.add(g)
    # stratified sampling spreads cases over many portions
    assert len(touched_portions) >= 10
