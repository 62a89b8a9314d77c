import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ragtrace.errors import InvalidInput
from ragtrace.model import (
    AnswerRecord,
    AnswerRule,
    Combination,
    Counterfactual,
    CounterfactualKind,
    Permutation,
    PerturbationInsight,
    Query,
    RelevanceMethod,
    RelevanceVector,
    RuleKind,
    answers_equal,
    normalize_answer,
    perturbation_from_jsonable,
)
from conftest import make_ctx


class TestNormalizeAnswer:
    def test_trim_lower_punctuation(self):
        assert normalize_answer("  Roger Federer. ") == "roger federer"

    def test_empty(self):
        assert normalize_answer("") == ""

    def test_digits_untouched(self):
        assert normalize_answer("5") == "5"

    def test_whitespace_runs_collapse(self):
        assert normalize_answer("a \t\n b") == "a b"

    def test_unicode_punctuation(self):
        assert normalize_answer("«Iga Świątek»!") == "iga świątek"

    @given(st.text())
    def test_idempotent(self, text):
        once = normalize_answer(text)
        assert normalize_answer(once) == once

    @given(st.text())
    def test_no_uppercase_no_edge_whitespace(self, text):
        out = normalize_answer(text)
        assert out == out.strip()
        # symbols like math-alphabet capitals have no lowercase mapping;
        # the contract is that lowercasing is a fixed point of the output
        assert out == out.lower()


class TestAnswersEqual:
    def test_case_and_punctuation_invariance(self):
        assert answers_equal("Novak Djokovic", "novak djokovic!")

    def test_distinct_answers(self):
        assert not answers_equal("iga swiatek", "coco gauff")

    def test_empty_reflexive(self):
        assert answers_equal("", "")

    @given(st.text())
    def test_reflexive(self, text):
        assert answers_equal(text, text)

    @given(st.text(), st.text())
    def test_symmetric(self, a, b):
        assert answers_equal(a, b) == answers_equal(b, a)

    @given(st.text(), st.text(), st.text())
    def test_transitive(self, a, b, c):
        if answers_equal(a, b) and answers_equal(b, c):
            assert answers_equal(a, c)


class TestPermutation:
    def test_bijection_enforced(self):
        with pytest.raises(InvalidInput):
            Permutation([0, 0, 1])

    @given(st.permutations(list(range(6))))
    def test_inverse_composition_is_identity(self, order):
        p = Permutation(order)
        assert p.compose(p.inverse()).is_identity()
        assert p.inverse().compose(p).is_identity()

    def test_apply(self):
        p = Permutation([2, 0, 1])
        assert p.apply(("a", "b", "c")) == ("c", "a", "b")

    def test_serializes_as_integer_array(self):
        p = Permutation([1, 0])
        assert p.to_jsonable() == [1, 0]
        assert perturbation_from_jsonable(json.loads(json.dumps(p.to_jsonable()))) == p


class TestCombination:
    def test_full_set_in_order_reconstructs_context(self):
        ctx = make_ctx(["x", "y", "z"])
        combo = Combination(["z", "x", "y"])
        assert combo.members_in_order(ctx) == ctx.sources

    def test_empty_is_legal(self):
        ctx = make_ctx(["x", "y"])
        combo = Combination()
        assert combo.members_in_order(ctx) == ()
        assert combo.complement_in_order(ctx) == ctx.sources

    def test_member_outside_context_rejected(self):
        ctx = make_ctx(["x"])
        with pytest.raises(InvalidInput):
            Combination(["nope"]).members_in_order(ctx)


class TestContextSequence:
    def test_duplicate_ids_rejected(self):
        with pytest.raises(InvalidInput):
            make_ctx(["a", "a"])

    def test_k_matches_sources(self):
        ctx = make_ctx(["a", "b"])
        assert ctx.k == 2

    def test_empty_query_rejected(self):
        with pytest.raises(InvalidInput):
            Query("   ")

    def test_json_round_trip(self):
        ctx = make_ctx(["a", "b"])
        from ragtrace.model import ContextSequence
        assert ContextSequence.from_jsonable(json.loads(json.dumps(ctx.to_jsonable()))) == ctx


class TestRelevanceVector:
    def test_normalized_sum_checked(self):
        with pytest.raises(InvalidInput):
            RelevanceVector(RelevanceMethod.RETRIEVAL_SCORE, {"a": 0.6, "b": 0.6}, normalized=True)

    def test_coverage_check(self):
        ctx = make_ctx(["a", "b"])
        vec = RelevanceVector(RelevanceMethod.RETRIEVAL_SCORE, {"a": 1.0}, normalized=True)
        with pytest.raises(InvalidInput):
            vec.check_covers(ctx)


class TestAnswerRecord:
    def test_normalized_must_match(self):
        with pytest.raises(InvalidInput):
            AnswerRecord(raw="Hi!", normalized="hi!", perturbation=Combination())

    def test_from_raw(self):
        record = AnswerRecord.from_raw("Hi There. ", Combination(["a"]), 1)
        assert record.normalized == "hi there"
        data = json.loads(json.dumps(record.to_jsonable()))
        assert AnswerRecord.from_jsonable(data) == record


class TestCounterfactual:
    def _records(self):
        original = AnswerRecord.from_raw("yes", Combination(["a", "b"]))
        new = AnswerRecord.from_raw("no", Combination(["a"]))
        return original, new

    def test_answers_must_differ(self):
        original, _ = self._records()
        with pytest.raises(InvalidInput):
            Counterfactual(kind=CounterfactualKind.TOP_DOWN_REMOVAL,
                           perturbation=Combination(["b"]),
                           original_answer=original, new_answer=original,
                           perturbations_tested=1)

    def test_reordering_needs_similarity_below_one(self):
        original, new = self._records()
        with pytest.raises(InvalidInput):
            Counterfactual(kind=CounterfactualKind.REORDERING,
                           perturbation=Permutation([1, 0]),
                           original_answer=original, new_answer=new,
                           perturbations_tested=1, similarity=1.0)

    def test_round_trip(self):
        original, new = self._records()
        cf = Counterfactual(kind=CounterfactualKind.REORDERING,
                            perturbation=Permutation([1, 0]),
                            original_answer=original, new_answer=new,
                            perturbations_tested=3, similarity=-0.5)
        data = json.loads(json.dumps(cf.to_jsonable()))
        assert Counterfactual.from_jsonable(data) == cf


class TestPerturbationInsight:
    def test_invariants(self):
        groups = {"a": (Combination(["x"]),), "b": (Combination(), Combination(["y"]))}
        insight = PerturbationInsight(
            groups=groups,
            proportions={"a": 1 / 3, "b": 2 / 3},
            rules=(AnswerRule(answer="a", kind=RuleKind.REQUIRED_SOURCES,
                              required_ids=frozenset(["x"])),),
            total_evaluated=3,
        )
        assert abs(sum(insight.proportions.values()) - 1.0) <= 1e-9
        data = json.loads(json.dumps(insight.to_jsonable()))
        assert PerturbationInsight.from_jsonable(data) == insight

    def test_group_sizes_must_match_total(self):
        with pytest.raises(InvalidInput):
            PerturbationInsight(groups={"a": (Combination(),)}, proportions={"a": 1.0},
                                rules=(), total_evaluated=2)
