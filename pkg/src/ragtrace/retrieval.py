"""BM25 inverted index: corpus ingestion, ranked retrieval, relevance shares.

Scoring uses the Robertson formulation with IDF(t) = ln(1 + (N - df + 0.5) /
(df + 0.5)) and term saturation tf*(k1+1) / (tf + k1*(1 - b + b*len/avglen)).
Tokenization is Unicode lowercase alphanumeric word splitting with no stemming
and no stopwords, so a corpus indexes identically on every run.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, TextIO

from .errors import AllZeroScores, DuplicateId, EmptyCorpus, EmptyQuery, InvalidInput
from .model import ContextSequence, Query, RelevanceMethod, RelevanceVector, SourceDocument

INDEX_MAGIC = "ragtrace.bm25-index"
INDEX_VERSION = 1

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class CorpusRecord:
    id: str
    contents: str

    def __post_init__(self):
        if not self.id:
            raise InvalidInput("corpus record id is empty")
        if not self.contents:
            raise InvalidInput("corpus record contents are empty", id=self.id)


@dataclass(frozen=True)
class Bm25Params:
    """Scoring knobs; k1 saturates term frequency, b scales length normalization."""

    k1: float = 0.9
    b: float = 0.4
    top_k: int = 10

    def __post_init__(self):
        if self.k1 <= 0:
            raise InvalidInput("k1 must be positive", k1=self.k1)
        if not 0.0 <= self.b <= 1.0:
            raise InvalidInput("b must lie in [0, 1]", b=self.b)
        if self.top_k < 1:
            raise InvalidInput("top_k must be positive", top_k=self.top_k)


def load_corpus_jsonl(lines: Iterable[str]) -> Iterator[CorpusRecord]:
    """Parse one JSON object per line; blank lines are skipped."""
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"malformed JSON on line {lineno}: {exc.msg}", line=lineno) from exc
        if not isinstance(data, dict) or "id" not in data or "contents" not in data:
            raise InvalidInput(f"line {lineno} needs 'id' and 'contents' fields", line=lineno)
        yield CorpusRecord(id=str(data["id"]), contents=str(data["contents"]))


class Bm25Index:
    """Immutable term/document statistics plus the raw document texts."""

    def __init__(self, doc_ids: list[str], contents: dict[str, str],
                 doc_lens: dict[str, int], postings: dict[str, dict[str, int]]):
        self.doc_ids = list(doc_ids)
        self.contents = dict(contents)
        self.doc_lens = dict(doc_lens)
        self.postings = {t: dict(tfs) for t, tfs in postings.items()}
        self.doc_count = len(self.doc_ids)
        total = sum(self.doc_lens.values())
        self.avg_doc_len = total / self.doc_count if self.doc_count else 0.0

    @classmethod
    def build(cls, corpus: Iterable[CorpusRecord]) -> "Bm25Index":
        doc_ids: list[str] = []
        contents: dict[str, str] = {}
        doc_lens: dict[str, int] = {}
        postings: dict[str, dict[str, int]] = {}
        for record in corpus:
            if record.id in contents:
                raise DuplicateId(f"duplicate corpus id {record.id!r}", id=record.id)
            tokens = tokenize(record.contents)
            doc_ids.append(record.id)
            contents[record.id] = record.contents
            doc_lens[record.id] = len(tokens)
            for term, tf in Counter(tokens).items():
                postings.setdefault(term, {})[record.id] = tf
        if not doc_ids:
            raise EmptyCorpus("corpus stream is empty")
        return cls(doc_ids, contents, doc_lens, postings)

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))

    def term_score(self, term: str, tf: int, doc_len: int, params: Bm25Params) -> float:
        norm = params.k1 * (1.0 - params.b + params.b * doc_len / self.avg_doc_len)
        return self.idf(term) * tf * (params.k1 + 1.0) / (tf + norm)

    def score(self, doc_id: str, query_terms: list[str], params: Bm25Params) -> float:
        doc_len = self.doc_lens[doc_id]
        total = 0.0
        for term in query_terms:
            tf = self.postings.get(term, {}).get(doc_id, 0)
            if tf:
                total += self.term_score(term, tf, doc_len, params)
        return total

    def retrieve(self, query: Query, params: Bm25Params) -> list[SourceDocument]:
        """Rank documents by descending score; zero-score documents are dropped.

        Equal scores break ties by ascending doc_id, so a given corpus, query,
        and parameter set always yields the identical list.
        """
        terms = tokenize(query.text)
        if not terms:
            raise EmptyQuery("query has no tokens", query=query.text)
        candidates: set[str] = set()
        for term in set(terms):
            candidates.update(self.postings.get(term, ()))
        scored = [(self.score(doc_id, terms, params), doc_id) for doc_id in candidates]
        scored = [(s, d) for s, d in scored if s > 0.0]
        scored.sort(key=lambda pair: (-pair[0], pair[1]))
        return [SourceDocument(doc_id=d, text=self.contents[d], retrieval_score=s)
                for s, d in scored[: params.top_k]]

    def save(self, path: str | Path) -> None:
        payload = {
            "magic": INDEX_MAGIC,
            "version": INDEX_VERSION,
            "doc_ids": self.doc_ids,
            "contents": self.contents,
            "doc_lens": self.doc_lens,
            "postings": self.postings,
        }
        Path(path).write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Bm25Index":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInput(f"cannot read index file: {exc}", path=str(path)) from exc
        if not isinstance(payload, dict) or payload.get("magic") != INDEX_MAGIC:
            raise InvalidInput("file is not an index", path=str(path))
        if payload.get("version") != INDEX_VERSION:
            raise InvalidInput("unsupported index version", version=payload.get("version"))
        return cls(payload["doc_ids"], payload["contents"], payload["doc_lens"], payload["postings"])


def build_index(corpus: Iterable[CorpusRecord]) -> Bm25Index:
    return Bm25Index.build(corpus)


def build_index_from_jsonl(source: TextIO | Iterable[str]) -> Bm25Index:
    return Bm25Index.build(load_corpus_jsonl(source))


def retrieve(index: Bm25Index, query: Query, params: Bm25Params) -> list[SourceDocument]:
    return index.retrieve(query, params)


def make_context(query: Query, docs: list[SourceDocument]) -> ContextSequence:
    return ContextSequence(query=query, sources=tuple(docs))


def relative_relevance(ctx: ContextSequence) -> RelevanceVector:
    """Each source's share of the total retrieval score within the context."""
    total = sum(d.retrieval_score for d in ctx.sources)
    if total <= 0.0:
        raise AllZeroScores("all retrieval scores are zero")
    return RelevanceVector(
        method=RelevanceMethod.RETRIEVAL_SCORE,
        scores={d.doc_id: d.retrieval_score / total for d in ctx.sources},
        normalized=True,
    )
