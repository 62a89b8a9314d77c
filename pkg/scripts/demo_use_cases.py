#!/usr/bin/env python3
"""Run the three built-in demo scenarios end to end and print their findings.

Each scenario builds its BM25 index, retrieves the context, and runs the
analyses a workbench user would request: combination insights, counterfactual
searches, and (for the first scenario) optimal permutations.
"""

from ragtrace.assignment import optimal_permutations, v_shaped_profile
from ragtrace.combinations import (
    CombinationSearchConfig,
    SearchDirection,
    combination_insights,
    find_combination_counterfactual,
)
from ragtrace.fixtures import SCENARIOS
from ragtrace.model import ContextSequence, Query
from ragtrace.oracle import OracleGateway
from ragtrace.permutations import (
    PermutationSearchConfig,
    find_permutation_counterfactual,
    permutation_insights,
)
from ragtrace.retrieval import Bm25Index, Bm25Params, relative_relevance


def banner(text: str) -> None:
    print(f"\n=== {text} " + "=" * max(0, 60 - len(text)))


def show_insight(insight) -> None:
    rules = {r.answer: r for r in insight.rules}
    for answer, group in insight.groups.items():
        rule = rules[answer]
        if rule.required_ids:
            rule_text = "requires " + ", ".join(sorted(rule.required_ids))
        elif rule.fixed_positions:
            rule_text = "; ".join(f"position {p} = {d}" for p, d in rule.fixed_positions)
        else:
            rule_text = "no rule found"
        share = insight.proportions[answer]
        print(f"  {answer:<20} {share:6.1%}  ({len(group):>4} perturbations)  {rule_text}")


def load(name: str):
    scenario = SCENARIOS[name]()
    index = Bm25Index.build(scenario.corpus)
    query = Query(scenario.query_text)
    docs = index.retrieve(query, Bm25Params(top_k=scenario.top_k))
    ctx = ContextSequence(query=query, sources=tuple(docs))
    gateway = OracleGateway(scenario.mock_oracle())
    return scenario, ctx, gateway


def use_case_ambiguous() -> None:
    scenario, ctx, gateway = load("big_three")
    banner(f"use case 1: {scenario.query_text}")
    print("retrieved:", ", ".join(d.doc_id for d in ctx.sources))
    print("full-context answer:", gateway.evaluate(ctx.query, ctx.sources).raw)

    print("\ncombination insights (exhaustive):")
    show_insight(combination_insights(ctx, gateway, CombinationSearchConfig()))

    result = find_permutation_counterfactual(ctx, gateway, PermutationSearchConfig())
    cf = result.counterfactual
    print(f"\nreordering counterfactual: order {list(cf.perturbation.order)}, "
          f"tau {cf.similarity:.2f}, answer now {cf.new_answer.raw!r}")

    ranked = optimal_permutations(ctx, relative_relevance(ctx), v_shaped_profile(ctx.k), 3)
    print("\noptimal orderings for the V-shaped attention profile:")
    for r in ranked:
        print(f"  rank {r.rank}: order {list(r.permutation.order)} score {r.score:.4f}")


def use_case_inconsistent() -> None:
    scenario, ctx, gateway = load("us_open")
    banner(f"use case 2: {scenario.query_text}")
    print("full-context answer:", gateway.evaluate(ctx.query, ctx.sources).raw)
    result = find_permutation_counterfactual(ctx, gateway, PermutationSearchConfig())
    cf = result.counterfactual
    moved_to = cf.perturbation.order.index(ctx.k - 1)
    print(f"moving the last document to position {moved_to} flips the answer to "
          f"{cf.new_answer.raw!r} (tau {cf.similarity:.2f})")


def use_case_timeline() -> None:
    scenario, ctx, gateway = load("timeline")
    banner(f"use case 3: {scenario.query_text}")
    print("full-context answer:", gateway.evaluate(ctx.query, ctx.sources).raw)

    config = CombinationSearchConfig(direction=SearchDirection.BOTTOM_UP,
                                     target_answer="5", max_perturbations=1 << ctx.k)
    result = find_combination_counterfactual(ctx, gateway, config)
    cited = sorted(result.counterfactual.perturbation.member_ids)
    print("bottom-up citation, minimal supporting documents:", ", ".join(cited))

    insight = permutation_insights(ctx, gateway,
                                   PermutationSearchConfig(sample_size=200, seed=0))
    print("sampled permutation insights:")
    show_insight(insight)


def main() -> None:
    use_case_ambiguous()
    use_case_inconsistent()
    use_case_timeline()


if __name__ == "__main__":
    main()
