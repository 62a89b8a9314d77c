import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ragtrace.errors import AllZeroScores, DuplicateId, EmptyCorpus, EmptyQuery, InvalidInput
from ragtrace.model import Query, RelevanceMethod
from ragtrace.retrieval import (
    Bm25Index,
    Bm25Params,
    CorpusRecord,
    load_corpus_jsonl,
    relative_relevance,
    tokenize,
)
from conftest import make_ctx

TOY = [
    CorpusRecord("a", "federer wins the match today"),
    CorpusRecord("b", "nadal plays on clay courts"),
    CorpusRecord("c", "djokovic receives the award ceremony"),
]


class TestBuild:
    def test_average_doc_length(self):
        index = Bm25Index.build(TOY)
        assert index.doc_count == 3
        expected = sum(len(tokenize(r.contents)) for r in TOY) / 3
        assert index.avg_doc_len == pytest.approx(expected)

    def test_duplicate_id(self):
        with pytest.raises(DuplicateId):
            Bm25Index.build([CorpusRecord("d1", "x"), CorpusRecord("d1", "y")])

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpus):
            Bm25Index.build([])


class TestRetrieve:
    def test_unmatched_query_gives_empty_list(self):
        index = Bm25Index.build(TOY)
        assert index.retrieve(Query("zebra"), Bm25Params()) == []

    def test_matching_document_ranks_first(self):
        index = Bm25Index.build(TOY)
        docs = index.retrieve(Query("federer wins"), Bm25Params(top_k=3))
        assert docs[0].doc_id == "a"
        assert all(d.retrieval_score <= docs[0].retrieval_score for d in docs)

    def test_top_k_cut(self):
        corpus = [CorpusRecord(f"d{i}", "common token " + "pad " * i) for i in range(5)]
        index = Bm25Index.build(corpus)
        docs = index.retrieve(Query("common token"), Bm25Params(top_k=2))
        assert len(docs) == 2
        full = index.retrieve(Query("common token"), Bm25Params(top_k=5))
        assert [d.doc_id for d in docs] == [d.doc_id for d in full[:2]]

    def test_empty_query(self):
        index = Bm25Index.build(TOY)
        with pytest.raises(EmptyQuery):
            index.retrieve(Query("... !!"), Bm25Params())

    def test_scores_non_increasing_and_deterministic(self):
        corpus = [CorpusRecord(f"d{i}", f"shared term plus word{i} filler") for i in range(6)]
        index = Bm25Index.build(corpus)
        first = index.retrieve(Query("shared term word3"), Bm25Params(top_k=6))
        second = index.retrieve(Query("shared term word3"), Bm25Params(top_k=6))
        assert first == second
        scores = [d.retrieval_score for d in first]
        assert scores == sorted(scores, reverse=True)

    def test_tie_break_by_doc_id(self):
        corpus = [CorpusRecord("zz", "same words here"), CorpusRecord("aa", "same words here")]
        index = Bm25Index.build(corpus)
        docs = index.retrieve(Query("same words"), Bm25Params())
        assert [d.doc_id for d in docs] == ["aa", "zz"]

    @given(st.integers(min_value=1, max_value=30))
    def test_term_frequency_monotonicity(self, tf):
        index = Bm25Index.build(TOY)
        params = Bm25Params()
        low = index.term_score("federer", tf, doc_len=10, params=params)
        high = index.term_score("federer", tf + 1, doc_len=10, params=params)
        assert high >= low


class TestPersistence:
    def test_round_trip(self, tmp_path):
        index = Bm25Index.build(TOY)
        path = tmp_path / "toy.index.json"
        index.save(path)
        loaded = Bm25Index.load(path)
        q = Query("federer wins the match")
        assert loaded.retrieve(q, Bm25Params()) == index.retrieve(q, Bm25Params())

    def test_magic_header_checked(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"magic": "nope"}')
        with pytest.raises(InvalidInput):
            Bm25Index.load(path)


class TestCorpusJsonl:
    def test_parse(self):
        records = list(load_corpus_jsonl(['{"id": "a", "contents": "x"}', "", '{"id": "b", "contents": "y"}']))
        assert [r.id for r in records] == ["a", "b"]

    def test_malformed_line_reports_number(self):
        with pytest.raises(InvalidInput) as excinfo:
            list(load_corpus_jsonl(['{"id": "a", "contents": "x"}', "{broken"]))
        assert excinfo.value.details["line"] == 2


class TestRelativeRelevance:
    def test_proportional(self):
        ctx = make_ctx(["a", "b", "c"], [2.0, 1.0, 1.0])
        vec = relative_relevance(ctx)
        assert vec.scores == pytest.approx({"a": 0.5, "b": 0.25, "c": 0.25})
        assert vec.method is RelevanceMethod.RETRIEVAL_SCORE
        assert vec.normalized

    def test_single_element(self):
        ctx = make_ctx(["a"], [3.0])
        assert relative_relevance(ctx).scores == {"a": 1.0}

    def test_all_zero(self):
        ctx = make_ctx(["a", "b"], [0.0, 0.0])
        with pytest.raises(AllZeroScores):
            relative_relevance(ctx)

    @given(st.lists(st.floats(min_value=0.001, max_value=100), min_size=1, max_size=8))
    def test_sums_to_one_and_preserves_argmax(self, raw):
        ids = [f"d{i}" for i in range(len(raw))]
        ctx = make_ctx(ids, raw)
        vec = relative_relevance(ctx)
        assert abs(sum(vec.scores.values()) - 1.0) <= 1e-9
        best_raw = max(range(len(raw)), key=lambda i: raw[i])
        best_norm = max(vec.scores, key=vec.scores.get)
        assert vec.scores[best_norm] == pytest.approx(raw[best_raw] / sum(raw))

    def test_matches_hand_computed_bm25(self):
        # one-term query, evaluated against the declared scoring formula
        index = Bm25Index.build(TOY)
        params = Bm25Params()
        docs = index.retrieve(Query("federer"), Bm25Params(top_k=1))
        n, df = 3, 1
        idf = math.log(1 + (n - df + 0.5) / (df + 0.5))
        doc_len = index.doc_lens["a"]
        expected = idf * 1 * (params.k1 + 1) / (1 + params.k1 * (1 - params.b + params.b * doc_len / index.avg_doc_len))
        assert docs[0].retrieval_score == pytest.approx(expected)
