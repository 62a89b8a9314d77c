"""Canonical JSON for result payloads, shared by the HTTP service and the CLI.

Payloads contain only deterministic fields (no timestamps, no call counts),
so re-running a job against the same cache reproduces byte-identical output.
"""

from __future__ import annotations

import json
from typing import Any, Sequence

from .assignment import RankedAssignment
from .model import (
    AnswerRecord,
    ContextSequence,
    CounterfactualKind,
    CounterfactualSearchResult,
    PerturbationInsight,
)


def canonical_dumps(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def insight_payload(family: str, insight: PerturbationInsight) -> dict[str, Any]:
    return {"family": family, "insight": insight.to_jsonable()}


def counterfactual_payload(kind: CounterfactualKind,
                           result: CounterfactualSearchResult) -> dict[str, Any]:
    payload = result.to_jsonable()
    payload["kind"] = kind.value
    return payload


def ranked_payload(ranked: Sequence[RankedAssignment],
                   answers: Sequence[AnswerRecord] | None = None) -> dict[str, Any]:
    """Optimal-permutation listing, optionally with each ordering's evaluated answer."""
    entries = []
    for i, assignment in enumerate(ranked):
        entry = assignment.to_jsonable()
        if answers is not None:
            entry["answer"] = answers[i].to_jsonable()
        entries.append(entry)
    return {"family": "optimal_permutation", "ranked": entries}


def session_payload(session_id: str, ctx: ContextSequence, oracle_id: str,
                    created_at: str, baseline_full: AnswerRecord,
                    baseline_empty: AnswerRecord,
                    results: Sequence[str] = ()) -> dict[str, Any]:
    return {
        "session_id": session_id,
        "query": ctx.query.to_jsonable(),
        "context": ctx.to_jsonable(),
        "oracle_id": oracle_id,
        "created_at": created_at,
        "baseline_full": baseline_full.to_jsonable(),
        "baseline_empty": baseline_empty.to_jsonable(),
        "results": list(results),
    }
