"""Shared domain vocabulary: queries, sources, contexts, answers, perturbations.

All types are immutable values after construction and safe to share between
threads. Each carries ``to_jsonable``/``from_jsonable`` with stable field
names; permutations serialize as plain integer arrays.
"""

from __future__ import annotations

import hashlib
import unicodedata
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable, Sequence, Union

from .errors import InvalidInput

SUM_TOLERANCE = 1e-9


def normalize_answer(raw: str) -> str:
    """Canonicalize an oracle answer for comparison.

    Lowercases, removes all Unicode punctuation (categories P*), collapses
    internal whitespace runs to single spaces, and trims the ends. Idempotent.
    """
    lowered = raw.lower()
    kept = "".join(ch for ch in lowered if not unicodedata.category(ch).startswith("P"))
    return " ".join(kept.split())


def answers_equal(a: str, b: str) -> bool:
    """True iff the two answers are identical after normalization."""
    return normalize_answer(a) == normalize_answer(b)


class RelevanceMethod(str, Enum):
    RETRIEVAL_SCORE = "retrieval_score"
    ATTENTION_SALIENCE = "attention_salience"


class CounterfactualKind(str, Enum):
    TOP_DOWN_REMOVAL = "top_down_removal"
    BOTTOM_UP_RETENTION = "bottom_up_retention"
    REORDERING = "reordering"


class RuleKind(str, Enum):
    REQUIRED_SOURCES = "required_sources"
    FIXED_POSITIONS = "fixed_positions"


@dataclass(frozen=True)
class Query:
    """A natural-language question with an opaque unique id."""

    text: str
    id: str = ""

    def __post_init__(self):
        if not self.text.strip():
            raise InvalidInput("query text is empty")
        if not self.id:
            digest = hashlib.sha256(self.text.encode("utf-8")).hexdigest()[:16]
            object.__setattr__(self, "id", f"q-{digest}")

    def to_jsonable(self) -> dict[str, Any]:
        return {"id": self.id, "text": self.text}

    @classmethod
    def from_jsonable(cls, data: dict[str, Any]) -> "Query":
        return cls(text=data["text"], id=data["id"])


@dataclass(frozen=True)
class SourceDocument:
    """One retrievable knowledge source."""

    doc_id: str
    text: str
    retrieval_score: float = 0.0

    def __post_init__(self):
        if not self.doc_id:
            raise InvalidInput("doc_id is empty")
        if not self.text:
            raise InvalidInput("document text is empty", doc_id=self.doc_id)
        if self.retrieval_score < 0:
            raise InvalidInput("retrieval_score is negative", doc_id=self.doc_id)

    def to_jsonable(self) -> dict[str, Any]:
        return {"doc_id": self.doc_id, "text": self.text, "retrieval_score": self.retrieval_score}

    @classmethod
    def from_jsonable(cls, data: dict[str, Any]) -> "SourceDocument":
        return cls(doc_id=data["doc_id"], text=data["text"], retrieval_score=data["retrieval_score"])


@dataclass(frozen=True)
class ContextSequence:
    """The ordered sequence of sources handed to the oracle for a query."""

    query: Query
    sources: tuple[SourceDocument, ...]
    k: int = -1

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        if self.k == -1:
            object.__setattr__(self, "k", len(self.sources))
        if self.k != len(self.sources):
            raise InvalidInput("k does not match the number of sources", k=self.k)
        if self.k < 1:
            raise InvalidInput("a context needs at least one source")
        ids = [d.doc_id for d in self.sources]
        if len(set(ids)) != len(ids):
            raise InvalidInput("duplicate doc_ids in context")

    @property
    def doc_ids(self) -> tuple[str, ...]:
        return tuple(d.doc_id for d in self.sources)

    def to_jsonable(self) -> dict[str, Any]:
        return {
            "query": self.query.to_jsonable(),
            "sources": [d.to_jsonable() for d in self.sources],
            "k": self.k,
        }

    @classmethod
    def from_jsonable(cls, data: dict[str, Any]) -> "ContextSequence":
        return cls(
            query=Query.from_jsonable(data["query"]),
            sources=tuple(SourceDocument.from_jsonable(d) for d in data["sources"]),
            k=data["k"],
        )


@dataclass(frozen=True)
class RelevanceVector:
    """Per-source relevance shares within one context."""

    method: RelevanceMethod
    scores: dict[str, float]
    normalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "scores", dict(self.scores))
        for doc_id, value in self.scores.items():
            if value < 0:
                raise InvalidInput("relevance scores must be non-negative", doc_id=doc_id)
        if self.normalized:
            total = sum(self.scores.values())
            if abs(total - 1.0) > SUM_TOLERANCE:
                raise InvalidInput("normalized scores must sum to 1", total=total)

    def check_covers(self, ctx: ContextSequence) -> None:
        if set(self.scores) != set(ctx.doc_ids):
            raise InvalidInput("relevance vector does not cover the context exactly")

    def to_jsonable(self) -> dict[str, Any]:
        return {"method": self.method.value, "scores": dict(self.scores), "normalized": self.normalized}

    @classmethod
    def from_jsonable(cls, data: dict[str, Any]) -> "RelevanceVector":
        return cls(
            method=RelevanceMethod(data["method"]),
            scores=data["scores"],
            normalized=data["normalized"],
        )


@dataclass(frozen=True)
class Combination:
    """A subset of a context's sources; membership only, order comes from D_q."""

    member_ids: frozenset[str]

    def __init__(self, member_ids: Iterable[str] = ()):
        object.__setattr__(self, "member_ids", frozenset(member_ids))

    def __len__(self) -> int:
        return len(self.member_ids)

    def members_in_order(self, ctx: ContextSequence) -> tuple[SourceDocument, ...]:
        """Members in their original context order."""
        extra = self.member_ids - set(ctx.doc_ids)
        if extra:
            raise InvalidInput("combination members not in context", extra=sorted(extra))
        return tuple(d for d in ctx.sources if d.doc_id in self.member_ids)

    def complement_in_order(self, ctx: ContextSequence) -> tuple[SourceDocument, ...]:
        """Non-members in their original context order."""
        return tuple(d for d in ctx.sources if d.doc_id not in self.member_ids)

    def to_jsonable(self) -> dict[str, Any]:
        return {"member_ids": sorted(self.member_ids)}

    @classmethod
    def from_jsonable(cls, data: dict[str, Any]) -> "Combination":
        return cls(data["member_ids"])


@dataclass(frozen=True)
class Permutation:
    """A reordering of k context positions; order[rank] = original index."""

    order: tuple[int, ...]

    def __init__(self, order: Iterable[int]):
        object.__setattr__(self, "order", tuple(order))
        if sorted(self.order) != list(range(len(self.order))):
            raise InvalidInput("permutation is not a bijection on 0..k-1", order=list(self.order))

    def __len__(self) -> int:
        return len(self.order)

    @classmethod
    def identity(cls, k: int) -> "Permutation":
        return cls(range(k))

    def is_identity(self) -> bool:
        return self.order == tuple(range(len(self.order)))

    def apply(self, items: Sequence) -> tuple:
        """Reorder a sequence: result position r holds items[order[r]]."""
        if len(items) != len(self.order):
            raise InvalidInput("sequence length does not match permutation size")
        return tuple(items[i] for i in self.order)

    def inverse(self) -> "Permutation":
        inv = [0] * len(self.order)
        for rank, original in enumerate(self.order):
            inv[original] = rank
        return Permutation(inv)

    def compose(self, other: "Permutation") -> "Permutation":
        """Composition such that apply(compose(p, q), xs) == apply(p, apply(q, xs))."""
        if len(other) != len(self):
            raise InvalidInput("cannot compose permutations of different sizes")
        return Permutation(other.order[i] for i in self.order)

    def to_jsonable(self) -> list[int]:
        return list(self.order)

    @classmethod
    def from_jsonable(cls, data: list[int]) -> "Permutation":
        return cls(data)


Perturbation = Union[Combination, Permutation]


def perturbation_to_jsonable(p: Perturbation) -> Any:
    return p.to_jsonable()


def perturbation_from_jsonable(data: Any) -> Perturbation:
    if isinstance(data, list):
        return Permutation.from_jsonable(data)
    return Combination.from_jsonable(data)


@dataclass(frozen=True)
class AnswerRecord:
    """A normalized oracle answer plus the exact perturbation that produced it."""

    raw: str
    normalized: str
    perturbation: Perturbation
    oracle_calls_used: int = 0

    def __post_init__(self):
        if self.normalized != normalize_answer(self.raw):
            raise InvalidInput("normalized answer does not match normalize(raw)")
        if self.oracle_calls_used < 0:
            raise InvalidInput("oracle_calls_used is negative")

    @classmethod
    def from_raw(cls, raw: str, perturbation: Perturbation, oracle_calls_used: int = 0) -> "AnswerRecord":
        return cls(raw=raw, normalized=normalize_answer(raw), perturbation=perturbation,
                   oracle_calls_used=oracle_calls_used)

    def with_perturbation(self, perturbation: Perturbation) -> "AnswerRecord":
        return AnswerRecord(raw=self.raw, normalized=self.normalized, perturbation=perturbation,
                            oracle_calls_used=self.oracle_calls_used)

    def to_jsonable(self) -> dict[str, Any]:
        return {
            "raw": self.raw,
            "normalized": self.normalized,
            "perturbation": perturbation_to_jsonable(self.perturbation),
            "oracle_calls_used": self.oracle_calls_used,
        }

    @classmethod
    def from_jsonable(cls, data: dict[str, Any]) -> "AnswerRecord":
        return cls(
            raw=data["raw"],
            normalized=data["normalized"],
            perturbation=perturbation_from_jsonable(data["perturbation"]),
            oracle_calls_used=data["oracle_calls_used"],
        )


@dataclass(frozen=True)
class Counterfactual:
    """A minimal perturbation that flips the baseline answer."""

    kind: CounterfactualKind
    perturbation: Perturbation
    original_answer: AnswerRecord
    new_answer: AnswerRecord
    perturbations_tested: int
    similarity: float | None = None

    def __post_init__(self):
        if self.new_answer.normalized == self.original_answer.normalized:
            raise InvalidInput("counterfactual answer does not differ from the original")
        if self.perturbations_tested < 1:
            raise InvalidInput("perturbations_tested must be positive")
        if self.kind is CounterfactualKind.REORDERING:
            if self.similarity is None or not (-1.0 <= self.similarity < 1.0):
                raise InvalidInput("reordering counterfactuals need similarity in [-1, 1)")
        elif self.similarity is not None:
            raise InvalidInput("similarity only applies to reordering counterfactuals")

    def to_jsonable(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "perturbation": perturbation_to_jsonable(self.perturbation),
            "original_answer": self.original_answer.to_jsonable(),
            "new_answer": self.new_answer.to_jsonable(),
            "perturbations_tested": self.perturbations_tested,
            "similarity": self.similarity,
        }

    @classmethod
    def from_jsonable(cls, data: dict[str, Any]) -> "Counterfactual":
        return cls(
            kind=CounterfactualKind(data["kind"]),
            perturbation=perturbation_from_jsonable(data["perturbation"]),
            original_answer=AnswerRecord.from_jsonable(data["original_answer"]),
            new_answer=AnswerRecord.from_jsonable(data["new_answer"]),
            perturbations_tested=data["perturbations_tested"],
            similarity=data["similarity"],
        )


@dataclass(frozen=True)
class AnswerRule:
    """A mined regularity shared by every perturbation that yielded an answer.

    ``required_ids`` is empty (RequiredSources) or ``fixed_positions`` is empty
    (FixedPositions) when no rule was found.
    """

    answer: str
    kind: RuleKind
    required_ids: frozenset[str] = frozenset()
    fixed_positions: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "required_ids", frozenset(self.required_ids))
        object.__setattr__(self, "fixed_positions",
                           tuple(sorted((int(p), d) for p, d in dict(self.fixed_positions).items()))
                           if isinstance(self.fixed_positions, dict)
                           else tuple(sorted((int(p), d) for p, d in self.fixed_positions)))

    @property
    def is_empty(self) -> bool:
        return not self.required_ids and not self.fixed_positions

    def positions_map(self) -> dict[int, str]:
        return dict(self.fixed_positions)

    def to_jsonable(self) -> dict[str, Any]:
        return {
            "answer": self.answer,
            "kind": self.kind.value,
            "required_ids": sorted(self.required_ids),
            "fixed_positions": {str(p): d for p, d in self.fixed_positions},
        }

    @classmethod
    def from_jsonable(cls, data: dict[str, Any]) -> "AnswerRule":
        return cls(
            answer=data["answer"],
            kind=RuleKind(data["kind"]),
            required_ids=frozenset(data["required_ids"]),
            fixed_positions=tuple((int(p), d) for p, d in data["fixed_positions"].items()),
        )


class SearchOutcome(str, Enum):
    """How a counterfactual search ended.

    NOT_FOUND means the candidate space was exhausted without a flip;
    BUDGET_EXHAUSTED means the perturbation budget ran out with candidates
    left untested, so a counterfactual may still exist.
    """

    FOUND = "found"
    NOT_FOUND = "not_found"
    BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass(frozen=True)
class CounterfactualSearchResult:
    outcome: SearchOutcome
    baseline: AnswerRecord
    counterfactual: Counterfactual | None
    perturbations_tested: int
    oracle_calls: int = 0

    def __post_init__(self):
        if (self.outcome is SearchOutcome.FOUND) != (self.counterfactual is not None):
            raise InvalidInput("FOUND results carry a counterfactual; others do not")

    def to_jsonable(self) -> dict[str, Any]:
        return {
            "outcome": self.outcome.value,
            "baseline": self.baseline.to_jsonable(),
            "counterfactual": None if self.counterfactual is None else self.counterfactual.to_jsonable(),
            "perturbations_tested": self.perturbations_tested,
        }

    @classmethod
    def from_jsonable(cls, data: dict[str, Any]) -> "CounterfactualSearchResult":
        return cls(
            outcome=SearchOutcome(data["outcome"]),
            baseline=AnswerRecord.from_jsonable(data["baseline"]),
            counterfactual=None if data["counterfactual"] is None
            else Counterfactual.from_jsonable(data["counterfactual"]),
            perturbations_tested=data["perturbations_tested"],
        )


@dataclass(frozen=True)
class PerturbationInsight:
    """Grouped answers, their proportions, and mined rules over a perturbation set."""

    groups: dict[str, tuple[Perturbation, ...]]
    proportions: dict[str, float]
    rules: tuple[AnswerRule, ...]
    total_evaluated: int

    def __post_init__(self):
        object.__setattr__(self, "groups", {a: tuple(ps) for a, ps in self.groups.items()})
        object.__setattr__(self, "proportions", dict(self.proportions))
        object.__setattr__(self, "rules", tuple(self.rules))
        if self.total_evaluated < 1:
            raise InvalidInput("total_evaluated must be positive")
        if sum(len(ps) for ps in self.groups.values()) != self.total_evaluated:
            raise InvalidInput("group sizes do not sum to total_evaluated")
        if abs(sum(self.proportions.values()) - 1.0) > SUM_TOLERANCE:
            raise InvalidInput("proportions do not sum to 1")

    def to_jsonable(self) -> dict[str, Any]:
        return {
            "groups": {a: [perturbation_to_jsonable(p) for p in ps] for a, ps in self.groups.items()},
            "proportions": dict(self.proportions),
            "rules": [r.to_jsonable() for r in self.rules],
            "total_evaluated": self.total_evaluated,
        }

    @classmethod
    def from_jsonable(cls, data: dict[str, Any]) -> "PerturbationInsight":
        return cls(
            groups={a: tuple(perturbation_from_jsonable(p) for p in ps)
                    for a, ps in data["groups"].items()},
            proportions=data["proportions"],
            rules=tuple(AnswerRule.from_jsonable(r) for r in data["rules"]),
            total_evaluated=data["total_evaluated"],
        )
