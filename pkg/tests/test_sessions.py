import numpy as np
import pytest

from beliefforest import (
    CutsetMemberError,
    EvidenceConflictError,
    ImpossibleEvidenceError,
    ObservationNotFoundError,
    RetentionPolicy,
    UnknownValueError,
    network_from_document,
)
from beliefforest.sessions import DiagnosisSession, SessionStore
from conftest import TWO_NODE_DOC, ZERO_ROW_DOC


def make_session(mode="ad", doc=TWO_NODE_DOC, policy=None):
    net = network_from_document(doc)
    return DiagnosisSession("s0001", "tiny", net, mode, policy)


def ranked_probs(differential):
    return [round(e["p"], 12) for e in differential]


def test_modes_agree_on_the_differential(synth_net):
    sessions = [
        DiagnosisSession("s1", "synth", synth_net, "ctp"),
        DiagnosisSession("s2", "synth", synth_net, "ad"),
        DiagnosisSession("s3", "synth", synth_net, "bounded", RetentionPolicy.threshold(0.0)),
    ]
    for session in sessions:
        session.add_observation("f01", "v1")
        session.add_observation("f13", "v2")
    ctp, ad, bounded = (s.differential() for s in sessions)
    for a, b in zip(ctp, ad):
        assert a["diagnosis"] == b["diagnosis"]
        assert a["p"] == pytest.approx(b["p"], abs=1e-9)
    for a, c in zip(ad, bounded):
        assert a["diagnosis"] == c["diagnosis"]
        assert c["lower"] == pytest.approx(a["p"], abs=1e-9)
        assert c["upper"] == pytest.approx(a["p"], abs=1e-9)


def test_differential_is_ranked():
    session = make_session("ad")
    entries = session.differential()
    assert [e["diagnosis"] for e in entries] == ["d1", "d2"]
    assert entries[0]["p"] == pytest.approx(0.6)
    outcome = session.add_observation("F", "present")
    assert [e["diagnosis"] for e in outcome.differential] == ["d1", "d2"]
    assert outcome.differential[0]["p"] == pytest.approx(0.8)
    assert outcome.rank_uncertain is None


def test_observation_bookkeeping():
    session = make_session("ad")
    outcome = session.add_observation("F", "present")
    assert session.observed() == {"F": "present"}
    assert outcome.touched_portions
    snap = session.snapshot()
    assert snap["session_id"] == "s0001"
    assert snap["mode"] == "ad"
    assert snap["diagnosis"] == "D"
    assert snap["history"] == [{"feature": "F", "value": "present"}]
    assert "rank_uncertain" not in snap


def test_duplicate_and_unknown_observations():
    session = make_session("ad")
    with pytest.raises(UnknownValueError):
        session.add_observation("F", "blue")
    session.add_observation("F", "present")
    # any repeat observation conflicts, even at the same value
    with pytest.raises(EvidenceConflictError):
        session.add_observation("F", "present")
    with pytest.raises(EvidenceConflictError):
        session.add_observation("F", "absent")
    assert session.observed() == {"F": "present"}


def test_diagnosis_node_cannot_be_observed():
    for mode in ("ctp", "ad", "bounded"):
        session = make_session(mode)
        with pytest.raises(CutsetMemberError):
            session.add_observation("D", "d1")
        assert session.observed() == {}


def test_failed_observation_leaves_session_intact():
    for mode in ("ctp", "ad", "bounded"):
        session = make_session(mode, doc=ZERO_ROW_DOC,
                               policy=RetentionPolicy.threshold(0.0))
        session.add_observation("G", "t")
        before = session.differential()
        with pytest.raises(ImpossibleEvidenceError):
            session.add_observation("F", "t")
        assert session.differential() == before
        assert session.observed() == {"G": "t"}
        session.add_observation("F", "f")


def test_retraction_replays_history():
    session = make_session("ad", doc=ZERO_ROW_DOC)
    baseline = session.differential()
    session.add_observation("G", "t")
    after_g = session.differential()
    session.add_observation("F", "f")
    differential = session.retract_observation("F")
    assert ranked_probs(differential) == ranked_probs(after_g)
    assert session.observed() == {"G": "t"}
    session.retract_observation("G")
    assert ranked_probs(session.differential()) == ranked_probs(baseline)
    with pytest.raises(ObservationNotFoundError):
        session.retract_observation("G")


def test_retraction_in_bounded_mode_recomputes_bounds():
    session = make_session("bounded", policy=RetentionPolicy.top_k(1))
    session.add_observation("F", "present")
    session.retract_observation("F")
    entries = session.differential()
    assert all(e["retained"] for e in entries)
    assert entries[0]["lower"] == pytest.approx(0.6)


def test_bounded_session_reports_intervals_and_warning():
    doc = {
        "nodes": [
            {"id": "D", "values": ["d1", "d2", "d3"], "parents": [],
             "cpt": [0.5, 0.45, 0.05]},
            {"id": "F", "values": ["t", "f"], "parents": ["D"],
             "cpt": [0.01, 0.99, 0.01, 0.99, 0.99, 0.01]},
        ]
    }
    session = make_session("bounded", doc=doc, policy=RetentionPolicy.top_k(2))
    assert session.rank_uncertain() is False
    outcome = session.add_observation("F", "t")
    assert outcome.rank_uncertain is True
    entries = outcome.differential
    assert {e["diagnosis"] for e in entries if not e["retained"]} == {"d3"}
    assert session.snapshot()["rank_uncertain"] is True


def test_portions_listing(synth_net):
    session = DiagnosisSession("s9", "synth", synth_net, "ad")
    portions = session.portions()
    assert len(portions) == 23
    sizes = sorted(len(p["features"]) for p in portions)
    assert sizes[-1] == 12
    outcome = session.add_observation("f13", "v1")
    assert len(outcome.touched_portions) == 1
    touched = outcome.touched_portions[0]
    assert "f13" in dict((p["id"], p["features"]) for p in portions)[touched]


def test_invalid_mode_rejected(two_node_net):
    with pytest.raises(ValueError):
        DiagnosisSession("s1", "tiny", two_node_net, "magic")


def test_session_store():
    store = SessionStore()
    net = network_from_document(TWO_NODE_DOC)
    first = store.create("tiny", net, "ad")
    second = store.create("tiny", net, "ctp")
    assert first.session_id == "s0001"
    assert second.session_id == "s0002"
    assert store.get("s0001") is first
    assert store.lock_for("s0002") is not store.lock_for("s0001")
    with pytest.raises(KeyError):
        store.get("s9999")
