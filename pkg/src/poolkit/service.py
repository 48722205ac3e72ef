"""HTTP service for the operator console and programmatic clients.

Sessions live in memory behind per-session locks (result recording is
single-writer) and are persisted as append-only JSONL event logs when a
store directory is configured; any session state is reconstructible by
replaying its log.  All errors come back as {code, message, context}.
"""

from __future__ import annotations

import json
import threading
import uuid
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import adaptive, bloom, bp, fileformats, mitm, model, oracle
from .types import (
    CapacityError,
    DesignMatrix,
    DimensionError,
    ExhaustedError,
    GroupTestError,
    NoPlausibleExplanationError,
    PoolingConstraints,
    PosteriorSummary,
    Prior,
    ProtocolError,
    StaleCacheError,
    TestCharacteristics,
    TestOutcome,
    ValidationError,
)

__all__ = ["create_app", "SessionStore"]


def _error_payload(code: str, message: str, context: dict | None = None) -> dict:
    return {"code": code, "message": message, "context": context or {}}


# Most specific classes first: the handler walks this in order.
_STATUS = {
    ExhaustedError: (409, "exhausted"),
    ProtocolError: (409, "protocol"),
    ValidationError: (400, "validation"),
    DimensionError: (400, "dimension"),
    CapacityError: (400, "capacity"),
    StaleCacheError: (409, "stale-cache"),
    NoPlausibleExplanationError: (422, "no-plausible-explanation"),
}


class ConstraintsBody(BaseModel):
    max_pool_size: int | None = None
    max_splits_per_sample: int | None = None

    def to_constraints(self) -> PoolingConstraints:
        return PoolingConstraints(max_pool_size=self.max_pool_size,
                                  max_splits_per_sample=self.max_splits_per_sample)


class SessionCreateBody(BaseModel):
    n: int
    m: int
    tpr: float
    tnr: float
    priors: list[float] | None = None
    prevalence: float | None = None
    constraints: ConstraintsBody = Field(default_factory=ConstraintsBody)


class ResultBody(BaseModel):
    observed: int


class DesignBody(BaseModel):
    n: int
    m: int
    rows: list[str]


class DecodeBody(BaseModel):
    design: DesignBody
    outcome: str
    method: str
    params: dict = Field(default_factory=dict)


class BloomDesignBody(BaseModel):
    n: int
    m: int
    prevalence: float
    seed: int = 0


class SessionStore:
    """In-memory sessions with optional append-only JSONL persistence."""

    def __init__(self, store_dir: str | None = None):
        self._sessions: dict[str, adaptive.AdaptiveSession] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        self._store_dir = Path(store_dir) if store_dir else None
        if self._store_dir:
            self._store_dir.mkdir(parents=True, exist_ok=True)
            self._replay_all()

    def _log_path(self, session_id: str) -> Path | None:
        if self._store_dir is None:
            return None
        return self._store_dir / f"{session_id}.jsonl"

    def _append_event(self, session_id: str, event: dict) -> None:
        path = self._log_path(session_id)
        if path is None:
            return
        with open(path, "a") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")

    def _replay_all(self) -> None:
        for path in sorted(self._store_dir.glob("*.jsonl")):
            events = [json.loads(ln) for ln in path.read_text().splitlines() if ln.strip()]
            if not events:
                continue
            session = self._session_from_events(events)
            self._sessions[session.session_id] = session
            self._locks[session.session_id] = threading.Lock()

    @staticmethod
    def _session_from_events(events: list[dict]) -> adaptive.AdaptiveSession:
        head = events[0]
        session = adaptive.start_session(
            head["session_id"],
            Prior(head["priors"]),
            TestCharacteristics(tpr=head["tpr"], tnr=head["tnr"]),
            head["m"],
            PoolingConstraints(
                max_pool_size=head["constraints"].get("max_pool_size"),
                max_splits_per_sample=head["constraints"].get("max_splits_per_sample")),
        )
        for event in events[1:]:
            session = adaptive.record_result(session, event["observed"])
        return session

    def create(self, body: SessionCreateBody) -> adaptive.AdaptiveSession:
        if body.priors is not None:
            prior = Prior(body.priors)
            if prior.n != body.n:
                raise DimensionError(f"{len(body.priors)} priors for n={body.n}")
        elif body.prevalence is not None:
            prior = Prior.uniform(body.n, body.prevalence)
        else:
            raise ValidationError("provide either priors or prevalence")
        session_id = uuid.uuid4().hex
        chars = TestCharacteristics(tpr=body.tpr, tnr=body.tnr)
        session = adaptive.start_session(session_id, prior, chars, body.m,
                                         body.constraints.to_constraints())
        with self._registry_lock:
            self._sessions[session_id] = session
            self._locks[session_id] = threading.Lock()
        self._append_event(session_id, {
            "type": "created", "session_id": session_id, "n": body.n, "m": body.m,
            "tpr": body.tpr, "tnr": body.tnr, "priors": list(prior.probs),
            "constraints": body.constraints.model_dump(),
        })
        return session

    def get(self, session_id: str) -> adaptive.AdaptiveSession:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise ProtocolError(f"unknown session {session_id!r}") from None

    def record(self, session_id: str, observed: int) -> adaptive.AdaptiveSession:
        lock = self._locks.get(session_id)
        if lock is None:
            raise ProtocolError(f"unknown session {session_id!r}")
        with lock:
            session = adaptive.record_result(self._sessions[session_id], observed)
            self._sessions[session_id] = session
        self._append_event(session_id, {"type": "result", "observed": observed})
        return session


def _session_payload(session: adaptive.AdaptiveSession) -> dict:
    ml_secret, confidence = model.ml_decode(session.posterior)
    return {
        "session_id": session.session_id,
        "n": session.n,
        "m": session.initial_tests,
        "tpr": session.chars.tpr,
        "tnr": session.chars.tnr,
        "remaining_tests": session.remaining_tests,
        "recommended_design": str(session.recommended) if session.recommended else None,
        "marginals": [float(x) for x in session.posterior.marginals()],
        "history": [{"design": str(d), "observed": o} for d, o in session.history],
        "entropy_bits": model.entropy(session.posterior),
        "ml_secret": str(ml_secret),
        "confidence": confidence,
    }


def _summary_payload(summary: PosteriorSummary) -> dict:
    payload = {
        "marginals": [float(x) for x in summary.marginals],
        "ml_secret": str(summary.ml_secret),
        "confidence": summary.confidence,
    }
    if summary.error_bound is not None:
        payload["error_bound"] = summary.error_bound
    if summary.evidence_mass is not None:
        payload["evidence_mass"] = summary.evidence_mass
    if summary.converged is not None:
        payload["converged"] = summary.converged
    return payload


def create_app(store_dir: str | None = None,
               console_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="poolkit", version="0.1.0")
    # The operator console may be served from another origin.
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    store = SessionStore(store_dir)
    app.state.store = store
    if console_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/console", StaticFiles(directory=console_dir, html=True),
                  name="console")

    @app.exception_handler(GroupTestError)
    async def _handle_domain_error(request: Request, exc: GroupTestError):
        for klass, (status, code) in _STATUS.items():
            if isinstance(exc, klass):
                context = {}
                if isinstance(exc, NoPlausibleExplanationError):
                    context = {
                        "epsilon": exc.epsilon,
                        "stored_codes": exc.stored_codes,
                        "plausible_corruptions": exc.plausible_corruptions,
                    }
                return JSONResponse(status_code=status,
                                    content=_error_payload(code, str(exc), context))
        return JSONResponse(status_code=400,
                            content=_error_payload("domain", str(exc)))

    @app.post("/v1/sessions")
    def create_session(body: SessionCreateBody):
        return _session_payload(store.create(body))

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str):
        return _session_payload(store.get(session_id))

    @app.post("/v1/sessions/{session_id}/results")
    def post_result(session_id: str, body: ResultBody):
        return _session_payload(store.record(session_id, body.observed))

    @app.post("/v1/decode")
    def decode(body: DecodeBody):
        design = DesignMatrix(body.design.rows)
        if design.n != body.design.n or design.m != body.design.m:
            raise DimensionError("design rows disagree with the declared n, m")
        outcome = TestOutcome(body.outcome)
        chars = TestCharacteristics(
            tpr=float(body.params.get("tpr", 0.99)),
            tnr=float(body.params.get("tnr", 0.9)))
        prior = Prior(body.params["priors"]) if "priors" in body.params \
            else Prior.uniform(design.n, float(body.params.get("prevalence", 0.001)))
        if body.method == "exact":
            summary = oracle.exact_posterior(prior, design, outcome, chars)
        elif body.method == "mitm":
            epsilon = float(body.params.get("epsilon", mitm.DEFAULT_EPSILON))
            table = mitm.mitm_preprocess(design, prior.as_array(), epsilon)
            answer = mitm.mitm_query(table, outcome, chars)
            payload = _summary_payload(answer.to_posterior_summary())
            payload["interval_width"] = answer.interval_width
            payload["branch"] = answer.branch
            return payload
        elif body.method == "bp":
            params = bp.BPParams(
                max_iters=int(body.params.get("max_iters", 200)),
                damping=float(body.params.get("damping", 0.5)),
                tol=float(body.params.get("tol", 1e-8)))
            summary = bp.bp_posterior(design, chars, prior, outcome, params)
        elif body.method == "perfect":
            _, layout = fileformats.design_from_text(body.params["design_text"]) \
                if "design_text" in body.params else (None, None)
            if layout is None:
                raise ValidationError(
                    "perfect decoding needs params.design_text with a bloom block")
            suspects = bloom.perfect_decode(layout, outcome)
            return {"labels": ["suspect" if s else "negative" for s in suspects]}
        else:
            raise ValidationError(f"unknown decode method {body.method!r}")
        return _summary_payload(summary)

    @app.post("/v1/designs/bloom")
    def design_bloom(body: BloomDesignBody):
        plan = bloom.plan_dimensions(body.n, body.m, body.prevalence)
        layout = bloom.build_layout(body.n, plan.g, plan.b, body.seed)
        matrix = layout.to_design_matrix()
        return {
            "g": plan.g,
            "b": plan.b,
            "m_used": plan.m_used,
            "unused_tests": plan.unused_tests,
            "seed": body.seed,
            "permutations": [[int(x) for x in row] for row in layout.permutations],
            "rows": [str(r) for r in matrix.rows],
            "design_text": fileformats.design_to_text(matrix, layout),
        }

    return app
