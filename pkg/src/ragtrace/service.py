"""HTTP API: corpus management, sessions, async explanation jobs, results.

Long perturbation sweeps run as background jobs with polled progress so the
interactive client never blocks on a request timeout. Result payloads are
canonical JSON with no volatile fields: re-running a finished job against the
warm cache reproduces byte-identical bytes.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from . import combinations as comb
from . import permutations as perm
from .assignment import AttentionProfile, optimal_permutations, v_shaped_profile
from .errors import InvalidInput, NoResults, RagtraceError
from .model import (
    ContextSequence,
    CounterfactualKind,
    Query,
    RelevanceMethod,
)
from .oracle import CallCounter, HttpOracle, HttpOracleConfig, MockOracle, OracleGateway
from .retrieval import Bm25Index, Bm25Params, build_index_from_jsonl
from .serialize import (
    canonical_dumps,
    counterfactual_payload,
    insight_payload,
    ranked_payload,
    session_payload,
)
from .store import Store, StoreCache

_STATUS_BY_CODE = {
    "invalid_input": 400,
    "empty_query": 400,
    "duplicate_id": 400,
    "empty_corpus": 400,
    "length_mismatch": 400,
    "undefined_correlation": 400,
    "non_square_matrix": 400,
    "non_finite_entry": 400,
    "infeasible_matrix": 400,
    "unknown_id": 404,
    "no_results": 404,
    "context_too_large": 422,
    "k_too_large": 422,
    "unsupported_capability": 422,
    "oracle_unavailable": 502,
    "oracle_malformed_response": 502,
}

_PROGRESS_STRIDE = 16


@dataclass(frozen=True)
class ServiceConfig:
    index_path: str = "ragtrace.index.json"
    store_path: str = "ragtrace.db"
    max_combination_k: int = 20
    max_permutation_k: int = 8
    default_max_perturbations: int = 1000
    oracle_concurrency: int = 4
    job_workers: int = 2
    http_timeout: float = 60.0
    oracles: tuple[dict, ...] = ()

    @classmethod
    def load(cls, config_file: str | None = None,
             env: Mapping[str, str] | None = None) -> "ServiceConfig":
        """Defaults, overlaid by a JSON config file, overlaid by RAGTRACE_* env vars."""
        env = os.environ if env is None else env
        values: dict[str, Any] = {}
        if config_file:
            values.update(json.loads(Path(config_file).read_text(encoding="utf-8")))
        mapping = {
            "RAGTRACE_INDEX_PATH": ("index_path", str),
            "RAGTRACE_STORE_PATH": ("store_path", str),
            "RAGTRACE_MAX_COMBINATION_K": ("max_combination_k", int),
            "RAGTRACE_MAX_PERMUTATION_K": ("max_permutation_k", int),
            "RAGTRACE_MAX_PERTURBATIONS": ("default_max_perturbations", int),
            "RAGTRACE_ORACLE_CONCURRENCY": ("oracle_concurrency", int),
            "RAGTRACE_JOB_WORKERS": ("job_workers", int),
            "RAGTRACE_HTTP_TIMEOUT": ("http_timeout", float),
        }
        for var, (key, cast) in mapping.items():
            if var in env:
                values[key] = cast(env[var])
        if "oracles" in values:
            values["oracles"] = tuple(values["oracles"])
        return cls(**values)


class ServiceState:
    def __init__(self, config: ServiceConfig):
        self.config = config
        self.store = Store(config.store_path)
        self.cache = StoreCache(self.store)
        self.index: Bm25Index | None = None
        if Path(config.index_path).exists():
            self.index = Bm25Index.load(config.index_path)
        self.oracle_semaphore = threading.Semaphore(config.oracle_concurrency)
        self.gateways: dict[str, OracleGateway] = {}
        self.gateway_lock = threading.Lock()
        self.executor = ThreadPoolExecutor(max_workers=config.job_workers)
        for spec in config.oracles:
            self.register_oracle(spec)

    def register_oracle(self, spec: dict[str, Any]) -> str:
        oracle_id = spec.get("oracle_id")
        kind = spec.get("kind")
        if not oracle_id or kind not in ("mock", "http"):
            raise InvalidInput("oracle spec needs oracle_id and kind 'mock' or 'http'")
        if kind == "mock" and "fixture" not in spec:
            raise InvalidInput("mock oracle spec needs a fixture")
        if kind == "http" and "endpoint" not in spec:
            raise InvalidInput("http oracle spec needs an endpoint")
        self._build_oracle(oracle_id, spec)  # validate before persisting
        self.store.put_oracle(oracle_id, spec)
        with self.gateway_lock:
            self.gateways.pop(oracle_id, None)
        return oracle_id

    def _build_oracle(self, oracle_id: str, spec: dict[str, Any]):
        if spec["kind"] == "mock":
            fixture = dict(spec["fixture"])
            fixture["oracle_id"] = oracle_id
            return MockOracle.from_fixture(fixture)
        endpoint = spec["endpoint"]
        config = HttpOracleConfig(
            url=endpoint["url"],
            model=endpoint.get("model", "default"),
            api_key=endpoint.get("api_key") or os.environ.get(endpoint.get("api_key_env", "")),
            timeout=endpoint.get("timeout", self.config.http_timeout),
            supports_attention=endpoint.get("supports_attention", False),
            max_context_chars=endpoint.get("max_context_chars", 1_000_000),
        )
        return HttpOracle(oracle_id, config)

    def gateway_for(self, oracle_id: str) -> OracleGateway:
        with self.gateway_lock:
            gateway = self.gateways.get(oracle_id)
            if gateway is None:
                spec = self.store.get_oracle(oracle_id)
                gateway = OracleGateway(self._build_oracle(oracle_id, spec), self.cache,
                                        semaphore=self.oracle_semaphore)
                self.gateways[oracle_id] = gateway
        return gateway

    def require_index(self) -> Bm25Index:
        if self.index is None:
            raise InvalidInput("no corpus indexed yet; POST /corpus first")
        return self.index

    def context_for(self, session: dict[str, Any]) -> ContextSequence:
        return ContextSequence.from_jsonable(session["context"])


def _new_id(prefix: str) -> str:
    return f"{prefix}-{uuid.uuid4().hex[:12]}"


def _scoring(value: str | None) -> RelevanceMethod:
    if value is None:
        return RelevanceMethod.RETRIEVAL_SCORE
    try:
        return RelevanceMethod(value)
    except ValueError:
        raise InvalidInput(f"unknown scoring method {value!r}") from None


def _request_int(body: Mapping[str, Any], key: str, default: int) -> int:
    value = body.get(key, default)
    try:
        return int(value)
    except (TypeError, ValueError):
        raise InvalidInput(f"field {key!r} must be an integer", value=value) from None


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig.load()
    state = ServiceState(config)
    app = FastAPI(title="ragtrace", version="0.1.0")
    app.state.engine = state

    @app.exception_handler(RagtraceError)
    async def domain_error_handler(request: Request, exc: RagtraceError):
        status = _STATUS_BY_CODE.get(exc.code, 500)
        return JSONResponse(status_code=status, content=exc.payload())

    @app.post("/corpus")
    async def ingest_corpus(request: Request):
        body = (await request.body()).decode("utf-8")
        index = build_index_from_jsonl(body.splitlines())
        index.save(config.index_path)
        state.index = index
        return {"document_count": index.doc_count}

    @app.get("/oracles")
    def list_oracles():
        entries = []
        for row in state.store.list_oracles():
            spec = row["spec"]
            source = spec["fixture"] if spec["kind"] == "mock" else spec["endpoint"]
            entries.append({
                "oracle_id": row["oracle_id"],
                "kind": spec["kind"],
                "capabilities": {
                    "supports_attention": (bool(source.get("salience"))
                                           if spec["kind"] == "mock"
                                           else source.get("supports_attention", False)),
                    "max_context_chars": source.get("max_context_chars", 1_000_000),
                },
            })
        return {"oracles": entries}

    @app.post("/oracles")
    async def register_oracle(request: Request):
        spec = await request.json()
        oracle_id = state.register_oracle(spec)
        return {"oracle_id": oracle_id}

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        body = await request.json()
        query_text = body.get("query_text", "")
        top_k = _request_int(body, "top_k", 5)
        oracle_id = body.get("oracle_id", "")
        index = state.require_index()
        state.store.get_oracle(oracle_id)  # referential integrity
        gateway = state.gateway_for(oracle_id)
        query = Query(query_text)
        docs = index.retrieve(query, Bm25Params(top_k=top_k))
        if not docs:
            raise NoResults("retrieval returned no documents", query=query_text)
        ctx = ContextSequence(query=query, sources=tuple(docs))
        baseline_full = gateway.evaluate(query, ctx.sources)
        baseline_empty = gateway.evaluate(query, ())
        session = session_payload(
            session_id=_new_id("s"),
            ctx=ctx,
            oracle_id=oracle_id,
            created_at=datetime.now(timezone.utc).isoformat(),
            baseline_full=baseline_full,
            baseline_empty=baseline_empty,
        )
        state.store.put_session(session)
        return session

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return state.store.get_session(session_id)

    @app.post("/sessions/{session_id}/insights", status_code=202)
    async def run_insight_job(session_id: str, request: Request):
        body = await request.json()
        family = body.get("family")
        if family not in ("combination", "permutation", "optimal_permutation"):
            raise InvalidInput(f"unknown insight family {family!r}")
        return _submit_job(state, session_id, "insight", body)

    @app.post("/sessions/{session_id}/counterfactuals", status_code=202)
    async def run_counterfactual_job(session_id: str, request: Request):
        body = await request.json()
        kind = body.get("kind")
        try:
            CounterfactualKind(kind)
        except ValueError:
            raise InvalidInput(f"unknown counterfactual kind {kind!r}") from None
        return _submit_job(state, session_id, "counterfactual", body)

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        return state.store.get_job(job_id)

    @app.get("/results/{result_id}")
    def get_result(result_id: str):
        payload = state.store.get_result(result_id)
        return Response(content=canonical_dumps(payload), media_type="application/json")

    return app


def _submit_job(state: ServiceState, session_id: str, kind: str,
                request_body: dict[str, Any]) -> dict[str, Any]:
    session = state.store.get_session(session_id)  # raises UnknownId
    job = {
        "job_id": _new_id("j"),
        "session_id": session["session_id"],
        "kind": kind,
        "request": request_body,
        "state": "pending",
        "progress": {"evaluated": 0, "total": 0},
        "result_ref": None,
        "error": None,
        "oracle_calls": 0,
    }
    state.store.put_job(job)
    state.executor.submit(_run_job, state, job["job_id"])
    return job


def _run_job(state: ServiceState, job_id: str) -> None:
    store = state.store
    job = store.get_job(job_id)
    counter = CallCounter()
    latest = {"evaluated": 0, "total": 0}

    def set_progress(evaluated: int, total: int, force: bool = False) -> None:
        latest["evaluated"], latest["total"] = evaluated, total
        if not force and evaluated % _PROGRESS_STRIDE != 0:
            return

        def mutate(j):
            j["progress"] = {"evaluated": evaluated, "total": total}
            j["oracle_calls"] = counter.count

        store.update_job(job_id, mutate)

    try:
        store.update_job(job_id, lambda j: j.update(state="running"))
        session = store.get_session(job["session_id"])
        ctx = state.context_for(session)
        gateway = state.gateway_for(session["oracle_id"])
        payload = _execute(state, job, ctx, gateway, counter, set_progress)
        result_id = _new_id("r")
        store.put_result(result_id, payload)

        def finish(j):
            j["state"] = "done"
            j["result_ref"] = result_id
            j["progress"] = dict(latest)
            j["oracle_calls"] = counter.count

        store.update_job(job_id, finish)
        session["results"].append(result_id)
        store.put_session(session)
    except RagtraceError as exc:

        def fail(j):
            j["state"] = "failed"
            j["error"] = exc.payload()
            j["oracle_calls"] = counter.count

        store.update_job(job_id, fail)
    except Exception as exc:  # pragma: no cover - defensive

        def fail_unexpected(j):
            j["state"] = "failed"
            j["error"] = {"code": "internal_error", "message": str(exc), "details": {}}

        store.update_job(job_id, fail_unexpected)


def _execute(state: ServiceState, job: dict[str, Any], ctx: ContextSequence,
             gateway: OracleGateway, counter: CallCounter, set_progress) -> dict[str, Any]:
    body = job["request"]
    config = state.config

    def on_progress(evaluated: int, total: int) -> None:
        set_progress(evaluated, total, force=evaluated in (0, total))

    if job["kind"] == "counterfactual":
        kind = CounterfactualKind(body["kind"])
        max_perturbations = _request_int(body, "max_perturbations",
                                         config.default_max_perturbations)
        if kind is CounterfactualKind.REORDERING:
            search = perm.find_permutation_counterfactual(
                ctx, gateway,
                perm.PermutationSearchConfig(
                    max_perturbations=max_perturbations,
                    seed=_request_int(body, "seed", 0),
                    max_exhaustive_k=config.max_permutation_k,
                ),
                on_progress=on_progress, counter=counter,
            )
        else:
            direction = (comb.SearchDirection.TOP_DOWN
                         if kind is CounterfactualKind.TOP_DOWN_REMOVAL
                         else comb.SearchDirection.BOTTOM_UP)
            search = comb.find_combination_counterfactual(
                ctx, gateway,
                comb.CombinationSearchConfig(
                    direction=direction,
                    target_answer=body.get("target_answer"),
                    max_perturbations=max_perturbations,
                    scoring=_scoring(body.get("scoring")),
                    seed=_request_int(body, "seed", 0),
                    max_exhaustive_k=config.max_combination_k,
                ),
                on_progress=on_progress, counter=counter,
            )
        return counterfactual_payload(kind, search)

    family = body["family"]
    if family == "combination":
        insight = comb.combination_insights(
            ctx, gateway,
            comb.CombinationSearchConfig(
                scoring=_scoring(body.get("scoring")),
                sample_size=body.get("sample_size"),
                seed=_request_int(body, "seed", 0),
                max_exhaustive_k=config.max_combination_k,
            ),
            on_progress=on_progress, counter=counter,
        )
        return insight_payload(family, insight)
    if family == "permutation":
        insight = perm.permutation_insights(
            ctx, gateway,
            perm.PermutationSearchConfig(
                sample_size=body.get("sample_size"),
                seed=_request_int(body, "seed", 0),
                max_exhaustive_k=config.max_permutation_k,
            ),
            on_progress=on_progress, counter=counter,
        )
        return insight_payload(family, insight)

    # optimal permutations: rank, then evaluate each ordering's answer
    s = _request_int(body, "s", 1)
    relevance = comb.scoring_relevance(ctx, gateway, _scoring(body.get("scoring")), counter)
    profile = (AttentionProfile(tuple(body["profile"])) if body.get("profile")
               else v_shaped_profile(ctx.k))
    ranked = optimal_permutations(ctx, relevance, profile, s)
    set_progress(0, len(ranked), force=True)
    answers = []
    for i, assignment in enumerate(ranked, start=1):
        record = gateway.evaluate(ctx.query, assignment.permutation.apply(ctx.sources), counter)
        answers.append(record.with_perturbation(assignment.permutation))
        set_progress(i, len(ranked), force=True)
    return ranked_payload(ranked, answers)
