import json
import threading

import httpx
import pytest

from ragtrace.errors import (
    ContextTooLarge,
    OracleMalformedResponse,
    OracleUnavailable,
    UnsupportedCapability,
)
from ragtrace.model import Combination, Query, RelevanceMethod
from ragtrace.oracle import (
    CallCounter,
    EvaluationKey,
    HttpOracle,
    HttpOracleConfig,
    MockOracle,
    MockRule,
    OracleGateway,
    build_prompt,
)


class TestBuildPrompt:
    def test_empty_context(self):
        q = Query("what now")
        prompt = build_prompt(q, [])
        assert "what now" in prompt.text
        assert "SOURCE" not in prompt.text

    def test_order_changes_blocks_not_content(self, ctx3):
        a, b, c = ctx3.sources
        p1 = build_prompt(ctx3.query, [a, b])
        p2 = build_prompt(ctx3.query, [b, a])
        assert p1 != p2
        assert sorted(p1.text.splitlines()) == sorted(p2.text.splitlines())

    def test_each_source_exactly_once_in_order(self, ctx3):
        prompt = build_prompt(ctx3.query, ctx3.sources).text
        positions = [prompt.index(d.text) for d in ctx3.sources]
        assert positions == sorted(positions)
        for i, d in enumerate(ctx3.sources, start=1):
            assert prompt.count(d.text) == 1
            assert f"[SOURCE {i} BEGIN]" in prompt
            assert f"[SOURCE {i} END]" in prompt
        assert prompt.count(ctx3.query.text) == 1

    def test_deterministic(self, ctx3):
        assert build_prompt(ctx3.query, ctx3.sources) == build_prompt(ctx3.query, ctx3.sources)

    def test_context_too_large(self, ctx3):
        with pytest.raises(ContextTooLarge):
            build_prompt(ctx3.query, ctx3.sources, max_context_chars=10)


class TestMockOracle:
    def test_rule_order_first_match_wins(self):
        oracle = MockOracle("m", "fallback", rules=[
            MockRule(answer="first", requires=frozenset({"a"})),
            MockRule(answer="second", requires=frozenset({"a", "b"})),
        ])
        assert oracle.answer_for(["a", "b"]) == "first"
        assert oracle.answer_for(["b"]) == "fallback"

    def test_forbids(self):
        oracle = MockOracle("m", "no", rules=[
            MockRule(answer="yes", requires=frozenset({"a"}), forbids=frozenset({"b"})),
        ])
        assert oracle.answer_for(["a"]) == "yes"
        assert oracle.answer_for(["a", "b"]) == "no"

    def test_position_rules_with_negative_index(self):
        oracle = MockOracle("m", "other", rules=[
            MockRule(answer="ends", position_equals=((-1, "z"),)),
        ])
        assert oracle.answer_for(["a", "z"]) == "ends"
        assert oracle.answer_for(["z", "a"]) == "other"
        assert oracle.answer_for([]) == "other"

    def test_fixture_round_trip(self, tmp_path):
        fixture = {
            "oracle_id": "fx",
            "default_answer": "d",
            "rules": [{"requires": ["a"], "forbids": ["b"],
                       "position_equals": {"0": "a"}, "answer": "r"}],
        }
        path = tmp_path / "fx.json"
        path.write_text(json.dumps(fixture))
        oracle = MockOracle.from_file(path)
        assert oracle.answer_for(["a", "c"]) == "r"
        assert oracle.answer_for(["c", "a"]) == "d"


class TestGatewayCache:
    def test_cache_contract(self, ctx3):
        oracle = MockOracle("m", "hello")
        gateway = OracleGateway(oracle)
        first = gateway.evaluate(ctx3.query, ctx3.sources)
        second = gateway.evaluate(ctx3.query, ctx3.sources)
        assert first == second
        assert first.oracle_calls_used == 1
        assert gateway.calls.count == 1

    def test_distinct_orderings_get_distinct_keys(self, ctx3):
        a, b, c = ctx3.sources
        key1 = EvaluationKey("q", ("a", "b"), "m")
        key2 = EvaluationKey("q", ("b", "a"), "m")
        assert key1.digest() != key2.digest()
        oracle = MockOracle("m", "x", rules=[MockRule(answer="y", position_equals=((0, "B"),))])
        gateway = OracleGateway(oracle)
        r1 = gateway.evaluate(ctx3.query, (a, b))
        r2 = gateway.evaluate(ctx3.query, (b, a))
        assert r1.normalized == "x" and r2.normalized == "y"
        assert gateway.calls.count == 2

    def test_counter_tracks_misses_only(self, ctx3):
        gateway = OracleGateway(MockOracle("m", "hi"))
        counter = CallCounter()
        gateway.evaluate(ctx3.query, ctx3.sources, counter)
        gateway.evaluate(ctx3.query, ctx3.sources, counter)
        gateway.evaluate(ctx3.query, (), counter)
        assert counter.count == 2

    def test_record_perturbation_is_selected_combination(self, ctx3):
        gateway = OracleGateway(MockOracle("m", "hi"))
        record = gateway.evaluate(ctx3.query, ctx3.sources[:2])
        assert record.perturbation == Combination(["A", "B"])

    def test_concurrent_duplicate_requests_coalesce(self, ctx3):
        entered = []
        barrier = threading.Barrier(4, timeout=5)

        class SlowOracle(MockOracle):
            def complete(self, query, selected, prompt):
                entered.append(1)
                return super().complete(query, selected, prompt)

        gateway = OracleGateway(SlowOracle("m", "hi"))
        results = []

        def work():
            barrier.wait()
            results.append(gateway.evaluate(ctx3.query, ctx3.sources))

        threads = [threading.Thread(target=work) for _ in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(results) == 4
        assert all(r == results[0] for r in results)
        assert gateway.calls.count == len(entered) <= 2  # near-simultaneous misses may race the cache put


class TestAttentionSalience:
    def test_pass_through_of_configured_values(self, ctx3):
        oracle = MockOracle("m", "x", salience={"A": 0.6, "B": 0.3, "C": 0.1})
        gateway = OracleGateway(oracle)
        vec = gateway.attention_salience(ctx3.query, ctx3.sources)
        assert vec.method is RelevanceMethod.ATTENTION_SALIENCE
        assert vec.scores == pytest.approx({"A": 0.6, "B": 0.3, "C": 0.1})

    def test_normalizes_to_one(self, ctx3):
        oracle = MockOracle("m", "x", salience={"A": 6, "B": 3, "C": 1})
        vec = OracleGateway(oracle).attention_salience(ctx3.query, ctx3.sources)
        assert sum(vec.scores.values()) == pytest.approx(1.0)

    def test_single_source(self, ctx3):
        oracle = MockOracle("m", "x", salience={"A": 42.0})
        vec = OracleGateway(oracle).attention_salience(ctx3.query, ctx3.sources[:1])
        assert vec.scores == {"A": 1.0}

    def test_capability_gate(self, ctx3):
        gateway = OracleGateway(MockOracle("m", "x"))
        with pytest.raises(UnsupportedCapability):
            gateway.attention_salience(ctx3.query, ctx3.sources)


def _http_oracle(handler, retries=3, supports_attention=False):
    transport = httpx.MockTransport(handler)
    config = HttpOracleConfig(url="http://oracle.test/v1/chat/completions", model="m",
                              retries=retries, backoff=0.0,
                              supports_attention=supports_attention)
    return HttpOracle("remote", config, transport=transport)


class TestHttpOracle:
    def test_round_trip(self, ctx3):
        seen = {}

        def handler(request):
            seen["body"] = json.loads(request.content)
            return httpx.Response(200, json={"choices": [{"message": {"content": "The Answer."}}]})

        gateway = OracleGateway(_http_oracle(handler))
        record = gateway.evaluate(ctx3.query, ctx3.sources)
        assert record.normalized == "the answer"
        assert seen["body"]["temperature"] == 0
        assert seen["body"]["messages"][1]["role"] == "user"
        assert ctx3.query.text in seen["body"]["messages"][1]["content"]

    def test_retries_then_unavailable(self, ctx3):
        attempts = []

        def handler(request):
            attempts.append(1)
            raise httpx.ConnectError("boom", request=request)

        oracle = _http_oracle(handler)
        with pytest.raises(OracleUnavailable):
            oracle.complete(ctx3.query, ctx3.sources, build_prompt(ctx3.query, ctx3.sources))
        assert len(attempts) == 3

    def test_transient_failure_recovers(self, ctx3):
        attempts = []

        def handler(request):
            attempts.append(1)
            if len(attempts) < 3:
                return httpx.Response(503)
            return httpx.Response(200, json={"choices": [{"message": {"content": "ok"}}]})

        gateway = OracleGateway(_http_oracle(handler))
        assert gateway.evaluate(ctx3.query, ctx3.sources).normalized == "ok"
        assert len(attempts) == 3

    def test_malformed_response(self, ctx3):
        def handler(request):
            return httpx.Response(200, json={"unexpected": True})

        oracle = _http_oracle(handler)
        with pytest.raises(OracleMalformedResponse):
            oracle.complete(ctx3.query, ctx3.sources, build_prompt(ctx3.query, ctx3.sources))

    def test_salience_field(self, ctx3):
        def handler(request):
            return httpx.Response(200, json={
                "choices": [{"message": {"content": "ok"}}],
                "source_salience": [0.5, 0.25, 0.25],
            })

        gateway = OracleGateway(_http_oracle(handler, supports_attention=True))
        vec = gateway.attention_salience(ctx3.query, ctx3.sources)
        assert vec.scores == pytest.approx({"A": 0.5, "B": 0.25, "C": 0.25})

    def test_misaligned_salience_rejected(self, ctx3):
        def handler(request):
            return httpx.Response(200, json={
                "choices": [{"message": {"content": "ok"}}],
                "source_salience": [1.0],
            })

        oracle = _http_oracle(handler, supports_attention=True)
        with pytest.raises(OracleMalformedResponse):
            oracle.complete(ctx3.query, ctx3.sources, build_prompt(ctx3.query, ctx3.sources))
