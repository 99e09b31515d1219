"""Interactive diagnosis sessions.

A session holds one inference engine over one network and absorbs
observations one at a time, keeping an ordered history. The diagnosis node
is the network's first-declared node by convention. Retraction rebuilds the
engine and replays the remaining history, so a session after any sequence of
observations and retractions always equals a fresh session with the same
evidence.

Modes: "ad" conditions on the diagnosis node, "ctp" propagates the whole
network, "bounded" conditions under a retention policy and answers with
intervals.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Optional

from .bounded import BoundedEngine, RetentionPolicy
from .conditioning import CutsetEnsemble, LoopCutset
from .errors import (
    CutsetMemberError,
    EvidenceConflictError,
    ObservationNotFoundError,
)
from .forest import CliqueForest
from .network import BeliefNetwork

MODES = ("ad", "ctp", "bounded")


@dataclass(frozen=True)
class ObservationOutcome:
    differential: list[dict]
    touched_portions: list[int]
    rank_uncertain: Optional[bool]


def _diagnosis_cutset(net: BeliefNetwork) -> LoopCutset:
    diagnosis = net.nodes[0].id
    return LoopCutset(members=(diagnosis,), instance_count=net.cardinality(diagnosis))


class DiagnosisSession:
    """One network, one engine, an ordered observation history."""

    def __init__(
        self,
        session_id: str,
        network_id: str,
        net: BeliefNetwork,
        mode: str = "ad",
        policy: Optional[RetentionPolicy] = None,
    ):
        if mode not in MODES:
            raise ValueError(f"unknown session mode: {mode!r}")
        self.session_id = session_id
        self.network_id = network_id
        self.network = net
        self.mode = mode
        self.policy = policy or RetentionPolicy.threshold()
        self.diagnosis = net.nodes[0].id
        self.history: list[tuple[str, str]] = []
        self._build_engine()

    def _build_engine(self) -> None:
        net = self.network
        if self.mode == "ctp":
            self.forest = CliqueForest.for_network(net)
            self.ensemble = None
            self.bounded = None
        elif self.mode == "ad":
            self.ensemble = CutsetEnsemble(net, _diagnosis_cutset(net))
            self.forest = None
            self.bounded = None
        else:
            self.bounded = BoundedEngine(net, _diagnosis_cutset(net), self.policy)
            self.ensemble = None
            self.forest = None

    # -- readout -----------------------------------------------------------

    def differential(self) -> list[dict]:
        """Ranked diagnosis posterior: point entries, or interval entries in
        bounded mode. Ties keep declaration order (stable sort)."""
        values = self.network.node(self.diagnosis).values
        if self.mode == "ctp":
            dist = self.forest.node_posterior(self.diagnosis)[0]
            entries = [
                {"diagnosis": v, "p": float(p)} for v, p in zip(values, dist)
            ]
            entries.sort(key=lambda e: -e["p"])
            return entries
        if self.mode == "ad":
            dist = self.ensemble.cutset_posterior()
            entries = [
                {"diagnosis": v, "p": float(p)} for v, p in zip(values, dist)
            ]
            entries.sort(key=lambda e: -e["p"])
            return entries
        interval = self.bounded.last_interval or self.bounded.intervals()
        entries = [
            {
                "diagnosis": v,
                "lower": float(interval.lower[i]),
                "upper": float(interval.upper[i]),
                "retained": bool(interval.retained[i]),
            }
            for i, v in enumerate(values)
        ]
        entries.sort(key=lambda e: -e["lower"])
        return entries

    def rank_uncertain(self) -> Optional[bool]:
        if self.mode != "bounded":
            return None
        interval = self.bounded.last_interval or self.bounded.intervals()
        return interval.rank_uncertain

    def portions(self) -> list[dict]:
        """Forest portions as the session's engine sees them: conditioned
        components for ad/bounded, whole-network components for ctp."""
        if self.mode == "ctp":
            structure = self.forest.structure
        elif self.mode == "ad":
            structure = self.ensemble.conditioned_structure
        else:
            structure = self.bounded.ensemble.conditioned_structure
        return [
            {"id": comp.index, "features": list(comp.nodes)}
            for comp in structure.components
        ]

    def observed(self) -> dict[str, str]:
        return dict(self.history)

    def snapshot(self) -> dict:
        doc = {
            "session_id": self.session_id,
            "network_id": self.network_id,
            "mode": self.mode,
            "diagnosis": self.diagnosis,
            "differential": self.differential(),
            "observed": self.observed(),
            "history": [
                {"feature": f, "value": v} for f, v in self.history
            ],
            "portions": self.portions(),
        }
        if self.mode == "bounded":
            doc["rank_uncertain"] = self.rank_uncertain()
        return doc

    # -- updates -----------------------------------------------------------

    def add_observation(self, feature: str, value: str) -> ObservationOutcome:
        """Absorb one observation. Failure of any kind leaves the session
        unchanged."""
        if feature in dict(self.history):
            raise EvidenceConflictError(
                f"feature {feature!r} is already observed in this session"
            )
        if feature == self.diagnosis:
            raise CutsetMemberError(
                f"node {feature!r} is the diagnosis node; observe features instead"
            )
        index = self.network.value_index(feature, value)
        if self.mode == "ctp":
            comp = self.forest.structure.component_of_node[feature]
            snap = self.forest.snapshot([comp])
            try:
                self.forest.enter_evidence({feature: index})
                report = self.forest.propagate()
            except Exception:
                self.forest.restore(snap)
                raise
            touched = list(report.touched_components)
            uncertain = None
        elif self.mode == "ad":
            self.ensemble.absorb_evidence({feature: index})
            touched = list(self.ensemble.propagation_summary().touched_components)
            uncertain = None
        else:
            self.bounded.bounded_absorb({feature: index})
            touched = list(self.bounded.last_touched)
            uncertain = self.bounded.last_interval.rank_uncertain
        self.history.append((feature, value))
        return ObservationOutcome(
            differential=self.differential(),
            touched_portions=touched,
            rank_uncertain=uncertain,
        )

    def retract_observation(self, feature: str) -> list[dict]:
        """Drop one observation and replay the rest in order."""
        observed = dict(self.history)
        if feature not in observed:
            raise ObservationNotFoundError(
                f"feature {feature!r} is not observed in this session"
            )
        remaining = [(f, v) for f, v in self.history if f != feature]
        self.history = []
        self._build_engine()
        for f, v in remaining:
            self.add_observation(f, v)
        return self.differential()


class SessionStore:
    """Thread-safe session registry. Each session is single-writer: calls on
    one session are serialized by its lock."""

    def __init__(self):
        self._lock = threading.Lock()
        self._sessions: dict[str, DiagnosisSession] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._counter = 0

    def create(
        self,
        network_id: str,
        net: BeliefNetwork,
        mode: str,
        policy: Optional[RetentionPolicy] = None,
    ) -> DiagnosisSession:
        with self._lock:
            self._counter += 1
            session_id = f"s{self._counter:04d}"
            session = DiagnosisSession(session_id, network_id, net, mode, policy)
            self._sessions[session_id] = session
            self._locks[session_id] = threading.Lock()
            return session

    def get(self, session_id: str) -> DiagnosisSession:
        with self._lock:
            if session_id not in self._sessions:
                raise KeyError(session_id)
            return self._sessions[session_id]

    def lock_for(self, session_id: str) -> threading.Lock:
        with self._lock:
            return self._locks[session_id]
