"""HTTP surface for diagnosis sessions.

JSON in and out. Error bodies are {"code", "message"}: 404 for unknown ids,
409 for conflicting observations, 422 for impossible evidence and invalid
documents. Endpoints are synchronous; per-session locks serialize writers.
"""

from __future__ import annotations

import threading
from typing import Literal, Optional

from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .bounded import RetentionPolicy
from .errors import (
    CutsetMemberError,
    EvidenceConflictError,
    ImpossibleEvidenceError,
    NetworkFormatError,
    NetworkValidationError,
    ObservationNotFoundError,
    UnknownNodeError,
    UnknownValueError,
)
from .network import BeliefNetwork, network_from_document
from .sessions import SessionStore


class NetworkStore:
    def __init__(self):
        self._lock = threading.Lock()
        self._networks: dict[str, BeliefNetwork] = {}
        self._counter = 0

    def register(self, net: BeliefNetwork, network_id: Optional[str] = None) -> str:
        with self._lock:
            if network_id is None:
                self._counter += 1
                network_id = f"n{self._counter:04d}"
            self._networks[network_id] = net
            return network_id

    def get(self, network_id: str) -> BeliefNetwork:
        with self._lock:
            return self._networks[network_id]

    def listing(self) -> list[dict]:
        with self._lock:
            items = list(self._networks.items())
        return [
            {
                "network_id": network_id,
                "node_count": len(net.nodes),
                "diagnosis": net.nodes[0].id,
                "diagnosis_values": list(net.nodes[0].values),
                "features": [n.id for n in net.nodes[1:]],
                "feature_values": {n.id: list(n.values) for n in net.nodes[1:]},
            }
            for network_id, net in items
        ]


class RetentionSpec(BaseModel):
    mode: Literal["threshold", "top_k"] = "threshold"
    value: float = 1e-4


class CreateSession(BaseModel):
    network_id: str
    mode: Literal["ad", "ctp", "bounded"] = "ad"
    retention: Optional[RetentionSpec] = None


class UploadNetwork(BaseModel):
    network_id: Optional[str] = None
    network: dict


class AddObservation(BaseModel):
    feature: str
    value: str


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message})


ERROR_MAP = [
    (EvidenceConflictError, 409, "conflict"),
    (ImpossibleEvidenceError, 422, "impossible_evidence"),
    (CutsetMemberError, 422, "invalid_observation"),
    (NetworkFormatError, 422, "invalid_network"),
    (NetworkValidationError, 422, "invalid_network"),
    (ObservationNotFoundError, 404, "not_observed"),
    (UnknownNodeError, 404, "unknown_node"),
    (UnknownValueError, 404, "unknown_value"),
]


def create_app(networks: Optional[dict[str, BeliefNetwork]] = None) -> FastAPI:
    app = FastAPI(title="diagnosis sessions", docs_url=None, redoc_url=None)
    store = NetworkStore()
    sessions = SessionStore()
    for network_id, net in (networks or {}).items():
        store.register(net, network_id)
    app.state.networks = store
    app.state.sessions = sessions

    for exc_type, status, code in ERROR_MAP:
        def handler(request, exc, status=status, code=code):
            return _error(status, code, str(exc))

        app.add_exception_handler(exc_type, handler)

    @app.exception_handler(RequestValidationError)
    def validation_handler(request, exc):
        return _error(422, "validation_error", str(exc))

    @app.get("/networks")
    def list_networks():
        return store.listing()

    @app.post("/networks", status_code=201)
    def upload_network(body: UploadNetwork):
        net = network_from_document(body.network)
        network_id = store.register(net, body.network_id)
        return {"network_id": network_id}

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSession):
        try:
            net = store.get(body.network_id)
        except KeyError:
            return _error(404, "unknown_network", f"no network {body.network_id!r}")
        policy = None
        if body.retention is not None:
            policy = RetentionPolicy(body.retention.mode, body.retention.value)
        session = sessions.create(body.network_id, net, body.mode, policy)
        return session.snapshot()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        try:
            session = sessions.get(session_id)
        except KeyError:
            return _error(404, "unknown_session", f"no session {session_id!r}")
        return session.snapshot()

    @app.post("/sessions/{session_id}/observations")
    def add_observation(session_id: str, body: AddObservation):
        try:
            session = sessions.get(session_id)
        except KeyError:
            return _error(404, "unknown_session", f"no session {session_id!r}")
        with sessions.lock_for(session_id):
            outcome = session.add_observation(body.feature, body.value)
        response = {
            "differential": outcome.differential,
            "touched_portions": outcome.touched_portions,
            "observed": session.observed(),
        }
        if outcome.rank_uncertain is not None:
            response["rank_uncertain"] = outcome.rank_uncertain
        return response

    @app.delete("/sessions/{session_id}/observations/{feature}")
    def retract_observation(session_id: str, feature: str):
        try:
            session = sessions.get(session_id)
        except KeyError:
            return _error(404, "unknown_session", f"no session {session_id!r}")
        with sessions.lock_for(session_id):
            differential = session.retract_observation(feature)
            return {
                "differential": differential,
                "observed": session.observed(),
            }

    return app
