"""Permutation analysis: order counterfactuals, insights, and position rules.

Counterfactual candidates are every non-identity ordering of the context,
visited in decreasing rank correlation against the original order, so the
first flip found is the most similar ordering that changes the answer.
Sampling draws independent seeded shuffles in O(k) swaps each.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from itertools import permutations as iter_permutations
from typing import Callable, Sequence

from .errors import InvalidInput, KTooLarge, LengthMismatch, UndefinedCorrelation
from .model import (
    AnswerRule,
    ContextSequence,
    Counterfactual,
    CounterfactualKind,
    CounterfactualSearchResult,
    Permutation,
    PerturbationInsight,
    RuleKind,
    SearchOutcome,
)
from .oracle import CallCounter, OracleGateway

ProgressFn = Callable[[int, int], None]

EXHAUSTIVE_K_LIMIT = 8


@dataclass(frozen=True)
class PermutationSearchConfig:
    max_perturbations: int = 1000
    sample_size: int | None = None
    seed: int = 0
    max_exhaustive_k: int = EXHAUSTIVE_K_LIMIT

    def __post_init__(self):
        if self.max_perturbations < 1:
            raise InvalidInput("max_perturbations must be positive")
        if self.sample_size is not None and self.sample_size < 1:
            raise InvalidInput("sample_size must be positive")


def kendall_tau(p: Permutation, reference: Permutation) -> float:
    """Rank correlation: (concordant - discordant) / (k*(k-1)/2) over item pairs."""
    k = len(p)
    if len(reference) != k:
        raise LengthMismatch("permutations differ in length",
                             left=k, right=len(reference))
    if k < 2:
        raise UndefinedCorrelation("rank correlation needs at least two items", k=k)
    pos_p = p.inverse().order
    pos_r = reference.inverse().order
    concordant = 0
    discordant = 0
    for a in range(k):
        for b in range(a + 1, k):
            lhs = pos_p[a] - pos_p[b]
            rhs = pos_r[a] - pos_r[b]
            if (lhs > 0) == (rhs > 0):
                concordant += 1
            else:
                discordant += 1
    return (concordant - discordant) / (k * (k - 1) / 2)


def candidates_by_similarity(k: int) -> list[tuple[Permutation, float]]:
    """All non-identity permutations, most similar to the original order first.

    Ties in correlation break lexicographically on the order array.
    """
    identity = Permutation.identity(k)
    scored = []
    for order in iter_permutations(range(k)):
        perm = Permutation(order)
        if perm.is_identity():
            continue
        scored.append((perm, kendall_tau(perm, identity)))
    scored.sort(key=lambda item: (-item[1], item[0].order))
    return scored


def find_permutation_counterfactual(ctx: ContextSequence, gateway: OracleGateway,
                                    config: PermutationSearchConfig,
                                    on_progress: ProgressFn | None = None,
                                    counter: CallCounter | None = None,
                                    ) -> CounterfactualSearchResult:
    """Most-similar reordering of the full context that changes the answer."""
    if ctx.k > config.max_exhaustive_k:
        raise KTooLarge("too many sources for exhaustive permutation generation",
                        k=ctx.k, limit=config.max_exhaustive_k)
    counter = counter if counter is not None else CallCounter()
    baseline = gateway.evaluate(ctx.query, ctx.sources, counter)
    if ctx.k < 2:
        return CounterfactualSearchResult(
            outcome=SearchOutcome.NOT_FOUND, baseline=baseline,
            counterfactual=None, perturbations_tested=0, oracle_calls=counter.count,
        )

    candidates = candidates_by_similarity(ctx.k)
    budget = min(config.max_perturbations, len(candidates))
    if on_progress:
        on_progress(0, budget + 1)
    tested = 0
    for perm, tau in candidates:
        if tested >= config.max_perturbations:
            return CounterfactualSearchResult(
                outcome=SearchOutcome.BUDGET_EXHAUSTED, baseline=baseline,
                counterfactual=None, perturbations_tested=tested,
                oracle_calls=counter.count,
            )
        record = gateway.evaluate(ctx.query, perm.apply(ctx.sources), counter)
        tested += 1
        if on_progress:
            on_progress(tested + 1, budget + 1)
        if record.normalized != baseline.normalized:
            counterfactual = Counterfactual(
                kind=CounterfactualKind.REORDERING,
                perturbation=perm,
                original_answer=baseline,
                new_answer=record.with_perturbation(perm),
                perturbations_tested=tested,
                similarity=tau,
            )
            return CounterfactualSearchResult(
                outcome=SearchOutcome.FOUND, baseline=baseline,
                counterfactual=counterfactual, perturbations_tested=tested,
                oracle_calls=counter.count,
            )
    return CounterfactualSearchResult(
        outcome=SearchOutcome.NOT_FOUND, baseline=baseline,
        counterfactual=None, perturbations_tested=tested, oracle_calls=counter.count,
    )


class PermutationSampler:
    """Seeded Fisher-Yates shuffles; ``swaps`` counts every swap performed."""

    def __init__(self, seed: int):
        self._rng = random.Random(seed)
        self.swaps = 0

    def draw(self, k: int) -> Permutation:
        order = list(range(k))
        for i in range(k - 1, 0, -1):
            j = self._rng.randint(0, i)
            order[i], order[j] = order[j], order[i]
            self.swaps += 1
        return Permutation(order)


def sample_permutations(k: int, s: int, seed: int) -> list[Permutation]:
    """s independent uniform shuffles of 0..k-1; duplicates are possible."""
    if k < 1 or s < 1:
        raise InvalidInput("k and s must be positive", k=k, s=s)
    sampler = PermutationSampler(seed)
    return [sampler.draw(k) for _ in range(s)]


def permutation_insights(ctx: ContextSequence, gateway: OracleGateway,
                         config: PermutationSearchConfig,
                         on_progress: ProgressFn | None = None,
                         counter: CallCounter | None = None) -> PerturbationInsight:
    """Group answers over all k! orderings or a seeded sample of them.

    Sampled duplicates count toward proportions but each distinct ordering is
    evaluated once through the cache.
    """
    counter = counter if counter is not None else CallCounter()
    if config.sample_size is None:
        if ctx.k > config.max_exhaustive_k:
            raise KTooLarge("too many sources for exhaustive permutation insights",
                            k=ctx.k, limit=config.max_exhaustive_k)
        perms = [Permutation(order) for order in iter_permutations(range(ctx.k))]
    else:
        perms = sample_permutations(ctx.k, config.sample_size, config.seed)

    groups: dict[str, list[Permutation]] = {}
    total = len(perms)
    if on_progress:
        on_progress(0, total)
    for done, perm in enumerate(perms, start=1):
        record = gateway.evaluate(ctx.query, perm.apply(ctx.sources), counter)
        groups.setdefault(record.normalized, []).append(perm)
        if on_progress:
            on_progress(done, total)

    rules = tuple(mine_permutation_rule(answer, members, ctx)
                  for answer, members in groups.items())
    return PerturbationInsight(
        groups={answer: tuple(members) for answer, members in groups.items()},
        proportions={answer: len(members) / total for answer, members in groups.items()},
        rules=rules,
        total_evaluated=total,
    )


def mine_permutation_rule(answer: str, perms: Sequence[Permutation],
                          ctx: ContextSequence) -> AnswerRule:
    """Positions that hold the same source in every permutation for the answer."""
    if not perms:
        raise InvalidInput("cannot mine a rule from zero permutations")
    k = len(perms[0].order)
    fixed: dict[int, str] = {}
    for position in range(k):
        sources_at = {perm.order[position] for perm in perms}
        if len(sources_at) == 1:
            fixed[position] = ctx.sources[next(iter(sources_at))].doc_id
    return AnswerRule(answer=answer, kind=RuleKind.FIXED_POSITIONS, fixed_positions=fixed)
