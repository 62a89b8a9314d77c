"""Counterfactual context explanations for retrieval-augmented answer oracles."""

from .assignment import (
    AssignmentCostMatrix,
    AttentionProfile,
    RankedAssignment,
    optimal_permutations,
    solve_best_assignment,
    solve_s_best_assignments,
    v_shaped_profile,
)
from .combinations import (
    CombinationSearchConfig,
    SearchDirection,
    combination_insights,
    enumerate_combinations_ordered,
    find_combination_counterfactual,
    mine_combination_rule,
)
from .model import (
    AnswerRecord,
    AnswerRule,
    Combination,
    ContextSequence,
    Counterfactual,
    CounterfactualKind,
    CounterfactualSearchResult,
    Permutation,
    PerturbationInsight,
    Query,
    RelevanceMethod,
    RelevanceVector,
    RuleKind,
    SearchOutcome,
    SourceDocument,
    answers_equal,
    normalize_answer,
)
from .oracle import (
    HttpOracle,
    HttpOracleConfig,
    MockOracle,
    MockRule,
    OracleGateway,
    build_prompt,
)
from .permutations import (
    PermutationSampler,
    PermutationSearchConfig,
    find_permutation_counterfactual,
    kendall_tau,
    mine_permutation_rule,
    permutation_insights,
    sample_permutations,
)
from .retrieval import (
    Bm25Index,
    Bm25Params,
    CorpusRecord,
    build_index,
    relative_relevance,
    retrieve,
)

__version__ = "0.1.0"
