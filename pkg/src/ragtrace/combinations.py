"""Combination analysis: presence counterfactuals, insights, and rule mining.

Candidate subsets are visited in increasing size; equal-size subsets in
decreasing relevance-mass order (sum of the per-source relevance shares),
removing or retaining the most relevant mass first. Retained sources always
keep their original context order, isolating presence effects from order
effects.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from itertools import combinations as iter_combinations
from typing import Callable, Iterator

from .errors import ContextTooLarge, InvalidInput
from .model import (
    AnswerRecord,
    AnswerRule,
    Combination,
    ContextSequence,
    Counterfactual,
    CounterfactualKind,
    CounterfactualSearchResult,
    PerturbationInsight,
    RelevanceMethod,
    RelevanceVector,
    RuleKind,
    SearchOutcome,
)
from .oracle import CallCounter, OracleGateway
from .retrieval import relative_relevance

ProgressFn = Callable[[int, int], None]

EXHAUSTIVE_K_LIMIT = 20


class SearchDirection(str, Enum):
    TOP_DOWN = "top_down"
    BOTTOM_UP = "bottom_up"


@dataclass(frozen=True)
class CombinationSearchConfig:
    direction: SearchDirection = SearchDirection.TOP_DOWN
    target_answer: str | None = None
    max_perturbations: int = 1000
    scoring: RelevanceMethod = RelevanceMethod.RETRIEVAL_SCORE
    sample_size: int | None = None
    seed: int = 0
    max_exhaustive_k: int = EXHAUSTIVE_K_LIMIT

    def __post_init__(self):
        if self.max_perturbations < 1:
            raise InvalidInput("max_perturbations must be positive")
        if self.sample_size is not None and self.sample_size < 2:
            raise InvalidInput("sample_size must be at least 2 (empty and full sets are forced)")


def scoring_relevance(ctx: ContextSequence, gateway: OracleGateway,
                      scoring: RelevanceMethod,
                      counter: CallCounter | None = None) -> RelevanceVector:
    """Relevance shares per the chosen scoring method."""
    if scoring is RelevanceMethod.RETRIEVAL_SCORE:
        return relative_relevance(ctx)
    return gateway.attention_salience(ctx.query, ctx.sources, counter)


def enumerate_combinations_ordered(ctx: ContextSequence, relevance: RelevanceVector,
                                   max_k: int = EXHAUSTIVE_K_LIMIT) -> Iterator[Combination]:
    """Yield all 2^k subsets: sizes ascending, relevance mass descending within a size.

    Equal (size, mass) ties break lexicographically on the member doc-id
    sequence so enumeration order is total and reproducible.
    """
    relevance.check_covers(ctx)
    if ctx.k > max_k:
        raise ContextTooLarge(
            "too many sources for exhaustive combination enumeration",
            k=ctx.k, limit=max_k,
        )
    ids = ctx.doc_ids
    weights = [relevance.scores[d] for d in ids]
    for size in range(ctx.k + 1):
        sized = []
        for picks in iter_combinations(range(ctx.k), size):
            mass = sum(weights[i] for i in picks)
            member_ids = tuple(ids[i] for i in picks)
            sized.append((-mass, member_ids))
        sized.sort()
        for _, member_ids in sized:
            yield Combination(member_ids)


def _ordered_subset_key(ctx: ContextSequence, relevance: RelevanceVector,
                        combo: Combination) -> tuple:
    members = tuple(d for d in ctx.doc_ids if d in combo.member_ids)
    mass = sum(relevance.scores[d] for d in members)
    return (len(members), -mass, members)


def find_combination_counterfactual(ctx: ContextSequence, gateway: OracleGateway,
                                    config: CombinationSearchConfig,
                                    on_progress: ProgressFn | None = None,
                                    counter: CallCounter | None = None,
                                    ) -> CounterfactualSearchResult:
    """Search removal sets (top-down) or retention sets (bottom-up) for a flip.

    The baseline is the full-context answer for top-down and the empty-context
    answer for bottom-up. Candidates are nonempty subsets in enumeration
    order; the first whose answer differs from the baseline (and matches
    ``target_answer`` when set) wins.
    """
    counter = counter if counter is not None else CallCounter()
    top_down = config.direction is SearchDirection.TOP_DOWN
    baseline_docs = ctx.sources if top_down else ()
    baseline = gateway.evaluate(ctx.query, baseline_docs, counter)

    relevance = scoring_relevance(ctx, gateway, config.scoring, counter)
    total_candidates = (1 << ctx.k) - 1
    budget = min(config.max_perturbations, total_candidates)
    if on_progress:
        on_progress(0, budget + 1)

    tested = 0
    for combo in enumerate_combinations_ordered(ctx, relevance, config.max_exhaustive_k):
        if len(combo) == 0:
            continue
        if tested >= config.max_perturbations:
            return CounterfactualSearchResult(
                outcome=SearchOutcome.BUDGET_EXHAUSTED, baseline=baseline,
                counterfactual=None, perturbations_tested=tested,
                oracle_calls=counter.count,
            )
        selected = combo.complement_in_order(ctx) if top_down else combo.members_in_order(ctx)
        record = gateway.evaluate(ctx.query, selected, counter)
        tested += 1
        if on_progress:
            on_progress(tested + 1, budget + 1)
        if _is_flip(record, baseline, config.target_answer):
            kind = (CounterfactualKind.TOP_DOWN_REMOVAL if top_down
                    else CounterfactualKind.BOTTOM_UP_RETENTION)
            counterfactual = Counterfactual(
                kind=kind,
                perturbation=combo,
                original_answer=baseline,
                new_answer=record.with_perturbation(combo),
                perturbations_tested=tested,
            )
            return CounterfactualSearchResult(
                outcome=SearchOutcome.FOUND, baseline=baseline,
                counterfactual=counterfactual, perturbations_tested=tested,
                oracle_calls=counter.count,
            )
    return CounterfactualSearchResult(
        outcome=SearchOutcome.NOT_FOUND, baseline=baseline,
        counterfactual=None, perturbations_tested=tested,
        oracle_calls=counter.count,
    )


def _is_flip(record: AnswerRecord, baseline: AnswerRecord, target: str | None) -> bool:
    if record.normalized == baseline.normalized:
        return False
    return target is None or record.normalized == target


def sample_combinations(k: int, sample_size: int, seed: int) -> list[int]:
    """Distinct subset bitmasks, uniform without replacement; empty and full forced."""
    space = 1 << k
    if sample_size > space:
        raise InvalidInput("sample_size exceeds the number of subsets",
                           sample_size=sample_size, subsets=space)
    rng = random.Random(seed)
    chosen = {0, space - 1}
    while len(chosen) < sample_size:
        chosen.add(rng.getrandbits(k))
    return sorted(chosen)


def combination_insights(ctx: ContextSequence, gateway: OracleGateway,
                         config: CombinationSearchConfig,
                         on_progress: ProgressFn | None = None,
                         counter: CallCounter | None = None) -> PerturbationInsight:
    """Group subset answers, with one required-sources rule mined per answer.

    Evaluates every subset, or a seeded uniform sample of ``sample_size``
    distinct subsets with the empty and full sets always included.
    """
    counter = counter if counter is not None else CallCounter()
    relevance = scoring_relevance(ctx, gateway, config.scoring, counter)
    if config.sample_size is None:
        combos = list(enumerate_combinations_ordered(ctx, relevance, config.max_exhaustive_k))
    else:
        masks = sample_combinations(ctx.k, config.sample_size, config.seed)
        ids = ctx.doc_ids
        combos = [Combination(ids[i] for i in range(ctx.k) if mask >> i & 1) for mask in masks]
        combos.sort(key=lambda c: _ordered_subset_key(ctx, relevance, c))

    groups: dict[str, list[Combination]] = {}
    total = len(combos)
    if on_progress:
        on_progress(0, total)
    for done, combo in enumerate(combos, start=1):
        record = gateway.evaluate(ctx.query, combo.members_in_order(ctx), counter)
        groups.setdefault(record.normalized, []).append(combo)
        if on_progress:
            on_progress(done, total)

    rules = tuple(mine_combination_rule(answer, members) for answer, members in groups.items())
    return PerturbationInsight(
        groups={answer: tuple(members) for answer, members in groups.items()},
        proportions={answer: len(members) / total for answer, members in groups.items()},
        rules=rules,
        total_evaluated=total,
    )


def mine_combination_rule(answer: str, combos: list[Combination]) -> AnswerRule:
    """Sources present in every combination that yielded the answer.

    An empty intersection is reported as an empty rule ("no rule found").
    """
    if not combos:
        raise InvalidInput("cannot mine a rule from zero combinations")
    required = frozenset.intersection(*(c.member_ids for c in combos))
    return AnswerRule(answer=answer, kind=RuleKind.REQUIRED_SOURCES, required_ids=required)
