import pytest

from ragtrace.model import ContextSequence, Query, SourceDocument


def make_ctx(doc_ids, scores=None, query="what is the answer"):
    scores = scores or [1.0 - 0.05 * i for i in range(len(doc_ids))]
    sources = tuple(
        SourceDocument(doc_id=d, text=f"text of {d}", retrieval_score=s)
        for d, s in zip(doc_ids, scores)
    )
    return ContextSequence(query=Query(query), sources=sources)


@pytest.fixture
def ctx3():
    return make_ctx(["A", "B", "C"], [0.5, 0.3, 0.2])


@pytest.fixture
def ctx5():
    return make_ctx([f"d{i}" for i in range(1, 6)])
