import numpy as np
import pytest

from beliefforest import (
    BoundedEngine,
    ImpossibleEvidenceError,
    IntervalPosterior,
    RetentionPolicy,
    init_ensemble,
    network_from_document,
    select_cutset,
)
from beliefforest.bounded import bounded_absorb, refine
from conftest import random_evidence, random_network, root_nodes

# Prior heavily favors d1/d2 while the evidence points at d3, so any policy
# that drops d3 must flag the ranking as uncertain.
ADVERSARIAL_DOC = {
    "nodes": [
        {"id": "D", "values": ["d1", "d2", "d3"], "parents": [], "cpt": [0.5, 0.45, 0.05]},
        {
            "id": "F",
            "values": ["t", "f"],
            "parents": ["D"],
            "cpt": [0.01, 0.99, 0.01, 0.99, 0.99, 0.01],
        },
        {
            "id": "G",
            "values": ["t", "f"],
            "parents": ["D"],
            "cpt": [0.5, 0.5, 0.5, 0.5, 0.5, 0.5],
        },
    ]
}


def random_policy(rng, count):
    if rng.random() < 0.5:
        return RetentionPolicy.top_k(int(rng.integers(1, count + 1)))
    return RetentionPolicy.threshold(float(rng.uniform(0.0, 0.3)))


def absorb_plan(rng, net, member):
    """One to three observation batches avoiding the cutset member."""
    batches = []
    used = set([member])
    for _ in range(int(rng.integers(1, 4))):
        pool = [n.id for n in net.nodes if n.id not in used]
        if not pool:
            break
        node = pool[int(rng.integers(len(pool)))]
        used.add(node)
        batches.append({node: int(rng.integers(net.cardinality(node)))})
    return batches


def test_policy_validation():
    with pytest.raises(ValueError):
        RetentionPolicy.top_k(0)
    with pytest.raises(ValueError):
        RetentionPolicy.threshold(-0.1)
    with pytest.raises(ValueError):
        RetentionPolicy.threshold(1.0)
    with pytest.raises(ValueError):
        RetentionPolicy("bogus", 1.0)


def test_policy_selection():
    weights = np.array([0.5, 0.2, 0.2, 0.1])
    assert RetentionPolicy.top_k(2).select(weights).tolist() == [True, True, False, False]
    assert RetentionPolicy.top_k(99).select(weights).all()
    assert RetentionPolicy.threshold(0.2).select(weights).tolist() == [True, True, True, False]


def test_exact_posteriors_always_inside_bounds():
    rng = np.random.default_rng(70)
    trials = 0
    while trials < 40:
        net = random_network(rng, zero_frac=0.1)
        roots = root_nodes(net)
        root = roots[int(rng.integers(len(roots)))]
        engine = BoundedEngine(net, select_cutset(net, [root]))
        exact = init_ensemble(net, select_cutset(net, [root]))
        batches = absorb_plan(rng, net, root)
        ruled_out = False
        for batch in batches:
            try:
                interval = engine.bounded_absorb(batch, random_policy(rng, engine.instance_count))
            except (ImpossibleEvidenceError, ValueError):
                ruled_out = True
                break
            try:
                exact.absorb_evidence(batch)
            except ImpossibleEvidenceError:
                # retained instances cannot explain the evidence but skipped
                # ones might; the bounds must leave room for exactly that
                assert interval.rank_uncertain or not interval.retained.all()
                ruled_out = True
                break
            assert np.all(interval.lower >= 0)
            assert np.all(interval.upper <= 1 + 1e-12)
            assert np.all(interval.lower <= interval.upper + 1e-12)
            assert interval.contains(exact.cutset_posterior(), slack=1e-12)
        if not ruled_out:
            trials += 1


def test_refinement_nests_and_lands_on_exact_answer():
    rng = np.random.default_rng(71)
    for _ in range(20):
        net = random_network(rng)
        roots = root_nodes(net)
        root = roots[int(rng.integers(len(roots)))]
        cutset = select_cutset(net, [root])
        engine = BoundedEngine(net, cutset, RetentionPolicy.top_k(1))
        exact = init_ensemble(net, cutset)
        ev = random_evidence(rng, net, exclude=[root])
        interval = engine.bounded_absorb(ev)
        exact.absorb_evidence(ev)
        # refine one skipped instance at a time; bounds may only tighten
        while not interval.retained.all():
            target = int(np.flatnonzero(~interval.retained)[0])
            refined = engine.refine([target])
            assert np.all(refined.lower >= interval.lower - 1e-12)
            assert np.all(refined.upper <= interval.upper + 1e-12)
            assert refined.contains(exact.cutset_posterior(), slack=1e-12)
            interval = refined
        assert np.allclose(interval.lower, interval.upper, atol=1e-12)
        assert np.allclose(interval.lower, exact.cutset_posterior(), atol=1e-12)


def test_retain_all_collapses_to_points():
    rng = np.random.default_rng(72)
    for _ in range(15):
        net = random_network(rng)
        roots = root_nodes(net)
        root = roots[int(rng.integers(len(roots)))]
        cutset = select_cutset(net, [root])
        engine = BoundedEngine(net, cutset, RetentionPolicy.threshold(0.0))
        exact = init_ensemble(net, cutset)
        ev = random_evidence(rng, net, exclude=[root])
        interval = engine.bounded_absorb(ev)
        exact.absorb_evidence(ev)
        assert interval.retained.all()
        assert not interval.rank_uncertain
        assert np.allclose(interval.lower, interval.upper, atol=1e-12)
        assert np.allclose(interval.lower, exact.cutset_posterior(), atol=1e-12)


def test_message_count_proportional_to_retained_instances(synth_net):
    # evidence inside the chain portion, where propagation actually has to
    # pass messages between cliques
    structural = None
    counts = {}
    for k in (1, 7, 63):
        engine = BoundedEngine(synth_net, policy=RetentionPolicy.top_k(k))
        engine.bounded_absorb({"f05": 0})
        counts[k] = engine.last_messages
        touched = engine.last_touched
        per_instance = sum(
            engine.ensemble.conditioned_structure.components[c].structural_messages
            for c in touched
        )
        if structural is None:
            structural = per_instance
        assert engine.last_messages == per_instance * k
    assert structural > 0
    assert counts[7] == 7 * counts[1]
    assert counts[63] == 63 * counts[1]


def test_adversarial_skip_flags_ranking():
    net = network_from_document(ADVERSARIAL_DOC)
    engine = BoundedEngine(net, select_cutset(net, ["D"]), RetentionPolicy.top_k(2))
    interval = engine.bounded_absorb({"F": 0})
    assert interval.retained.tolist() == [True, True, False]
    assert interval.rank_uncertain
    # the skipped instance's upper bound beats every applied lower bound
    assert interval.upper[2] > interval.lower[:2].max()
    exact = init_ensemble(net, select_cutset(net, ["D"]))
    exact.absorb_evidence({"F": 0})
    assert interval.contains(exact.cutset_posterior())
    # refinement resolves the ranking and the warning
    refined = engine.refine([2])
    assert not refined.rank_uncertain
    assert np.allclose(refined.lower, exact.cutset_posterior(), atol=1e-12)


def test_uninformative_evidence_keeps_ranking_certain():
    net = network_from_document(ADVERSARIAL_DOC)
    engine = BoundedEngine(net, select_cutset(net, ["D"]), RetentionPolicy.top_k(2))
    interval = engine.bounded_absorb({"G": 0})
    # G says nothing, so the light prior tail cannot outrank the applied mass
    assert not interval.rank_uncertain


def test_impossible_evidence_for_everyone_rolls_back(zero_row_net):
    engine = BoundedEngine(
        zero_row_net, select_cutset(zero_row_net, ["D"]), RetentionPolicy.threshold(0.0)
    )
    mass = engine.mass.copy()
    with pytest.raises(ImpossibleEvidenceError):
        engine.bounded_absorb({"F": 0})
    assert np.array_equal(engine.mass, mass)
    assert engine.evidence == {}
    interval = engine.bounded_absorb({"G": 0})
    assert interval.retained.all()


def test_impossible_for_retained_leaves_skipped_open(zero_row_net):
    engine = BoundedEngine(
        zero_row_net, select_cutset(zero_row_net, ["D"]), RetentionPolicy.top_k(1)
    )
    interval = engine.bounded_absorb({"F": 0})
    # the applied instance is ruled out outright
    assert interval.lower[0] == 0.0 and interval.upper[0] == 0.0
    # the skipped instance may still explain the evidence as far as we know
    assert interval.upper[1] == 1.0
    assert interval.rank_uncertain
    # catching it up reveals the evidence was impossible everywhere
    with pytest.raises(ImpossibleEvidenceError):
        engine.refine([1])


def test_refine_validates_and_tolerates_noops(two_node_net):
    engine = BoundedEngine(
        two_node_net, select_cutset(two_node_net, ["D"]), RetentionPolicy.threshold(0.0)
    )
    engine.bounded_absorb({"F": 0})
    with pytest.raises(ValueError):
        engine.refine([2])
    before = engine.intervals()
    after = engine.refine([0, 1])
    assert np.array_equal(after.lower, before.lower)
    assert np.array_equal(after.upper, before.upper)


def test_zero_retention_is_rejected(two_node_net):
    engine = BoundedEngine(
        two_node_net, select_cutset(two_node_net, ["D"]), RetentionPolicy.threshold(0.9)
    )
    evidence = dict(engine.evidence)
    with pytest.raises(ValueError):
        engine.bounded_absorb({"F": 0})
    assert engine.evidence == evidence
    interval = engine.bounded_absorb({"F": 0}, RetentionPolicy.threshold(0.0))
    assert isinstance(interval, IntervalPosterior)


def test_module_level_wrappers(two_node_net):
    engine = BoundedEngine(two_node_net, select_cutset(two_node_net, ["D"]))
    interval = bounded_absorb(engine, {"F": 0})
    assert interval is engine.last_interval
    again = refine(engine, [0, 1])
    assert again is engine.last_interval
