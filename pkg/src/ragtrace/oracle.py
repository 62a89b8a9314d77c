"""Answer-oracle gateway: prompt assembly, pluggable oracles, and caching.

An oracle maps (query, ordered sources) to an answer string. Two kinds ship:
a deterministic rule-based mock (the test and demo backbone) and a remote
JSON-over-HTTP chat-completion client sent at temperature 0. The gateway in
front of them caches evaluations by exact ordered doc-id list, coalesces
duplicate in-flight requests, and counts real oracle invocations.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from concurrent.futures import Future
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Protocol, Sequence

import httpx

from .errors import (
    ContextTooLarge,
    InvalidInput,
    OracleMalformedResponse,
    OracleUnavailable,
    UnsupportedCapability,
)
from .model import (
    AnswerRecord,
    Combination,
    Query,
    RelevanceMethod,
    RelevanceVector,
    SourceDocument,
    normalize_answer,
)

PROMPT_INSTRUCTION = (
    "Answer the question using only the information in the numbered sources "
    "below. Reply with the answer alone."
)
SYSTEM_MESSAGE = "You are a question answering system."


@dataclass(frozen=True)
class PromptText:
    text: str


@dataclass(frozen=True)
class OracleCapabilities:
    supports_attention: bool = False
    max_context_chars: int = 1_000_000

    def __post_init__(self):
        if self.max_context_chars < 1:
            raise InvalidInput("max_context_chars must be positive")


@dataclass(frozen=True)
class EvaluationKey:
    """Identity of one oracle evaluation; equal keys must hit the same cache entry."""

    query_id: str
    ordered_doc_ids: tuple[str, ...]
    oracle_id: str

    def digest(self) -> str:
        blob = json.dumps(
            [self.query_id, list(self.ordered_doc_ids), self.oracle_id],
            ensure_ascii=False, separators=(",", ":"),
        )
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def build_prompt(query: Query, selected: Sequence[SourceDocument],
                 max_context_chars: int | None = None) -> PromptText:
    """Assemble the deterministic prompt: instruction, delimited sources, question.

    Byte-identical output for identical inputs; permuting ``selected`` moves
    whole source blocks without changing their content.
    """
    parts = [PROMPT_INSTRUCTION, ""]
    for ordinal, doc in enumerate(selected, start=1):
        parts.append(f"[SOURCE {ordinal} BEGIN]")
        parts.append(doc.text)
        parts.append(f"[SOURCE {ordinal} END]")
        parts.append("")
    parts.append(f"Question: {query.text}")
    text = "\n".join(parts)
    if max_context_chars is not None and len(text) > max_context_chars:
        raise ContextTooLarge(
            "prompt exceeds the oracle context limit",
            length=len(text), limit=max_context_chars,
        )
    return PromptText(text=text)


@dataclass(frozen=True)
class OracleReply:
    answer: str
    salience: dict[str, float] | None = None


class Oracle(Protocol):
    oracle_id: str
    capabilities: OracleCapabilities

    def complete(self, query: Query, selected: Sequence[SourceDocument],
                 prompt: PromptText) -> OracleReply: ...


@dataclass(frozen=True)
class MockRule:
    """First-match-wins predicate over the ordered doc-id list.

    ``requires`` must all be present, ``forbids`` must all be absent, and each
    ``position_equals`` entry pins one position (negative positions count from
    the end) to a doc_id.
    """

    answer: str
    requires: frozenset[str] = frozenset()
    forbids: frozenset[str] = frozenset()
    position_equals: tuple[tuple[int, str], ...] = ()

    def matches(self, ordered_ids: Sequence[str]) -> bool:
        present = set(ordered_ids)
        if not self.requires <= present:
            return False
        if self.forbids & present:
            return False
        n = len(ordered_ids)
        for pos, doc_id in self.position_equals:
            idx = pos if pos >= 0 else n + pos
            if not 0 <= idx < n or ordered_ids[idx] != doc_id:
                return False
        return True

    @classmethod
    def from_jsonable(cls, data: dict[str, Any]) -> "MockRule":
        return cls(
            answer=data["answer"],
            requires=frozenset(data.get("requires", ())),
            forbids=frozenset(data.get("forbids", ())),
            position_equals=tuple(sorted(
                (int(p), d) for p, d in data.get("position_equals", {}).items())),
        )


class MockOracle:
    """Deterministic oracle configured as an ordered rule list with a default."""

    def __init__(self, oracle_id: str, default_answer: str,
                 rules: Sequence[MockRule] = (),
                 salience: dict[str, float] | None = None,
                 max_context_chars: int = 1_000_000):
        self.oracle_id = oracle_id
        self.default_answer = default_answer
        self.rules = tuple(rules)
        self.salience = dict(salience) if salience else None
        self.capabilities = OracleCapabilities(
            supports_attention=self.salience is not None,
            max_context_chars=max_context_chars,
        )

    def answer_for(self, ordered_ids: Sequence[str]) -> str:
        for rule in self.rules:
            if rule.matches(ordered_ids):
                return rule.answer
        return self.default_answer

    def complete(self, query: Query, selected: Sequence[SourceDocument],
                 prompt: PromptText) -> OracleReply:
        ordered_ids = [d.doc_id for d in selected]
        answer = self.answer_for(ordered_ids)
        salience = None
        if self.salience is not None and selected:
            missing = [d.doc_id for d in selected if d.doc_id not in self.salience]
            if missing:
                raise InvalidInput("mock salience does not cover sources", missing=missing)
            salience = {d.doc_id: self.salience[d.doc_id] for d in selected}
        return OracleReply(answer=answer, salience=salience)

    @classmethod
    def from_fixture(cls, data: dict[str, Any]) -> "MockOracle":
        return cls(
            oracle_id=data.get("oracle_id", "mock"),
            default_answer=data["default_answer"],
            rules=tuple(MockRule.from_jsonable(r) for r in data.get("rules", ())),
            salience=data.get("salience"),
            max_context_chars=data.get("max_context_chars", 1_000_000),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "MockOracle":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInput(f"cannot read oracle fixture: {exc}", path=str(path)) from exc
        return cls.from_fixture(data)


@dataclass(frozen=True)
class HttpOracleConfig:
    url: str
    model: str
    api_key: str | None = None
    timeout: float = 60.0
    retries: int = 3
    backoff: float = 0.5
    supports_attention: bool = False
    max_context_chars: int = 1_000_000


class HttpOracle:
    """Chat-completion client: system + user message, temperature 0, one choice.

    The response may carry an optional ``source_salience`` array aligned with
    the prompt's source order; absent salience means attention-based scoring
    is unsupported for this oracle.
    """

    def __init__(self, oracle_id: str, config: HttpOracleConfig,
                 transport: httpx.BaseTransport | None = None):
        self.oracle_id = oracle_id
        self.config = config
        self.capabilities = OracleCapabilities(
            supports_attention=config.supports_attention,
            max_context_chars=config.max_context_chars,
        )
        headers = {}
        if config.api_key:
            headers["Authorization"] = f"Bearer {config.api_key}"
        self._client = httpx.Client(timeout=config.timeout, headers=headers, transport=transport)

    def complete(self, query: Query, selected: Sequence[SourceDocument],
                 prompt: PromptText) -> OracleReply:
        body = {
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": SYSTEM_MESSAGE},
                {"role": "user", "content": prompt.text},
            ],
            "temperature": 0,
        }
        last_error: Exception | None = None
        for attempt in range(self.config.retries):
            try:
                response = self._client.post(self.config.url, json=body)
            except httpx.HTTPError as exc:
                last_error = exc
                if attempt + 1 < self.config.retries:
                    time.sleep(self.config.backoff * (2 ** attempt))
                continue
            if response.status_code >= 500:
                last_error = OracleUnavailable(
                    f"oracle returned status {response.status_code}",
                    status=response.status_code,
                )
                if attempt + 1 < self.config.retries:
                    time.sleep(self.config.backoff * (2 ** attempt))
                continue
            if response.status_code != 200:
                raise OracleUnavailable(
                    f"oracle returned status {response.status_code}",
                    status=response.status_code,
                )
            return self._parse(response, selected)
        raise OracleUnavailable(f"oracle unreachable after {self.config.retries} attempts",
                                cause=str(last_error))

    def _parse(self, response: httpx.Response, selected: Sequence[SourceDocument]) -> OracleReply:
        try:
            data = response.json()
            content = data["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError) as exc:
            raise OracleMalformedResponse(f"cannot parse oracle response: {exc}") from exc
        if not isinstance(content, str):
            raise OracleMalformedResponse("oracle answer is not a string")
        salience = None
        raw_salience = data.get("source_salience")
        if raw_salience is not None:
            if not isinstance(raw_salience, list) or len(raw_salience) != len(selected):
                raise OracleMalformedResponse("source_salience does not align with sources")
            salience = {d.doc_id: float(w) for d, w in zip(selected, raw_salience)}
        return OracleReply(answer=content, salience=salience)


class EvaluationCache(Protocol):
    def get(self, digest: str) -> dict[str, Any] | None: ...

    def put(self, digest: str, payload: dict[str, Any]) -> None: ...


class MemoryCache:
    def __init__(self):
        self._data: dict[str, str] = {}
        self._lock = threading.Lock()

    def get(self, digest: str) -> dict[str, Any] | None:
        with self._lock:
            blob = self._data.get(digest)
        return json.loads(blob) if blob is not None else None

    def put(self, digest: str, payload: dict[str, Any]) -> None:
        blob = json.dumps(payload, ensure_ascii=False, sort_keys=True)
        with self._lock:
            self._data.setdefault(digest, blob)


class CallCounter:
    """Thread-safe tally of real oracle invocations (cache hits excluded)."""

    def __init__(self):
        self._count = 0
        self._lock = threading.Lock()

    def increment(self) -> None:
        with self._lock:
            self._count += 1

    @property
    def count(self) -> int:
        with self._lock:
            return self._count


class OracleGateway:
    """Caching front for one oracle.

    Evaluations are keyed by (query id, exact ordered doc-id list, oracle id):
    combinations and permutations of the same sources never share an entry.
    Duplicate concurrent requests for one key coalesce into a single oracle
    call, and total in-flight oracle calls are capped.
    """

    def __init__(self, oracle: Oracle, cache: EvaluationCache | None = None,
                 max_concurrency: int = 4, semaphore: threading.Semaphore | None = None):
        self.oracle = oracle
        self.cache = cache if cache is not None else MemoryCache()
        self.calls = CallCounter()
        self._semaphore = semaphore if semaphore is not None else threading.Semaphore(max_concurrency)
        self._inflight: dict[str, Future] = {}
        self._inflight_lock = threading.Lock()

    def key_for(self, query: Query, selected: Sequence[SourceDocument]) -> EvaluationKey:
        return EvaluationKey(
            query_id=query.id,
            ordered_doc_ids=tuple(d.doc_id for d in selected),
            oracle_id=self.oracle.oracle_id,
        )

    def evaluate(self, query: Query, selected: Sequence[SourceDocument],
                 counter: CallCounter | None = None) -> AnswerRecord:
        """Answer for the exact ordered source list, served from cache when known."""
        payload = self._evaluate_payload(query, selected, counter)
        return AnswerRecord.from_jsonable(payload["record"])

    def attention_salience(self, query: Query, selected: Sequence[SourceDocument],
                           counter: CallCounter | None = None) -> RelevanceVector:
        """Per-source attention mass, normalized to sum to 1 across sources."""
        if not self.oracle.capabilities.supports_attention:
            raise UnsupportedCapability(
                "oracle does not report attention salience",
                oracle_id=self.oracle.oracle_id,
            )
        payload = self._evaluate_payload(query, selected, counter)
        salience = payload.get("salience")
        if not salience:
            raise UnsupportedCapability(
                "oracle reply carried no salience values",
                oracle_id=self.oracle.oracle_id,
            )
        total = sum(salience.values())
        if total <= 0:
            raise UnsupportedCapability("oracle salience mass is zero")
        return RelevanceVector(
            method=RelevanceMethod.ATTENTION_SALIENCE,
            scores={doc_id: mass / total for doc_id, mass in salience.items()},
            normalized=True,
        )

    def _evaluate_payload(self, query: Query, selected: Sequence[SourceDocument],
                          counter: CallCounter | None) -> dict[str, Any]:
        digest = self.key_for(query, selected).digest()
        cached = self.cache.get(digest)
        if cached is not None:
            return cached

        with self._inflight_lock:
            future = self._inflight.get(digest)
            if future is None:
                future = Future()
                self._inflight[digest] = future
                owner = True
            else:
                owner = False

        if not owner:
            return future.result()

        try:
            cached = self.cache.get(digest)
            if cached is None:
                cached = self._call_oracle(query, selected, counter)
                self.cache.put(digest, cached)
            future.set_result(cached)
            return cached
        except BaseException as exc:
            future.set_exception(exc)
            raise
        finally:
            with self._inflight_lock:
                self._inflight.pop(digest, None)

    def _call_oracle(self, query: Query, selected: Sequence[SourceDocument],
                     counter: CallCounter | None) -> dict[str, Any]:
        prompt = build_prompt(query, selected, self.oracle.capabilities.max_context_chars)
        with self._semaphore:
            reply = self.oracle.complete(query, selected, prompt)
        self.calls.increment()
        if counter is not None:
            counter.increment()
        record = AnswerRecord(
            raw=reply.answer,
            normalized=normalize_answer(reply.answer),
            perturbation=Combination(d.doc_id for d in selected),
            oracle_calls_used=1,
        )
        return {"record": record.to_jsonable(), "salience": reply.salience}
