import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from ragtrace.cli import main
from ragtrace.fixtures import big_three_scenario, timeline_scenario

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def big_three_index(tmp_path, runner):
    index_path = tmp_path / "bt.index.json"
    result = runner.invoke(main, ["index", "--corpus", str(FIXTURES / "big_three.corpus.jsonl"),
                                  "--index", str(index_path)])
    assert result.exit_code == 0
    return index_path


def _explain(runner, index_path, *extra):
    scenario = big_three_scenario()
    return runner.invoke(main, [
        "explain", "--index", str(index_path),
        "--question", scenario.query_text,
        "--oracle-fixture", str(FIXTURES / "big_three.oracle.json"),
        *extra,
    ])


class TestIndexCommand:
    def test_counts_documents(self, tmp_path, runner):
        result = runner.invoke(main, ["index", "--corpus", str(FIXTURES / "big_three.corpus.jsonl"),
                                      "--index", str(tmp_path / "i.json")])
        assert result.exit_code == 0
        assert "indexed 5 documents" in result.output

    def test_empty_corpus_fails(self, tmp_path, runner):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        result = runner.invoke(main, ["index", "--corpus", str(empty),
                                      "--index", str(tmp_path / "i.json")])
        assert result.exit_code == 1
        assert "empty_corpus" in result.output

    def test_malformed_line_reports_number(self, tmp_path, runner):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"id": "a", "contents": "x"}\n{oops\n')
        result = runner.invoke(main, ["index", "--corpus", str(bad),
                                      "--index", str(tmp_path / "i.json")])
        assert result.exit_code == 1
        assert "line 2" in result.output


class TestAskCommand:
    def test_full_context_answer(self, runner, big_three_index):
        scenario = big_three_scenario()
        result = runner.invoke(main, ["ask", "--index", str(big_three_index),
                                      "--question", scenario.query_text,
                                      "--oracle-fixture", str(FIXTURES / "big_three.oracle.json")])
        assert result.exit_code == 0
        assert "answer: Roger Federer" in result.output
        assert result.output.index("d1") < result.output.index("d2")


class TestExplainCommand:
    def test_usage_error_without_family_or_kind(self, runner, big_three_index):
        result = _explain(runner, big_three_index)
        assert result.exit_code == 2

    def test_missing_oracle_flag(self, runner, big_three_index):
        scenario = big_three_scenario()
        result = runner.invoke(main, ["explain", "--index", str(big_three_index),
                                      "--question", scenario.query_text,
                                      "--family", "combination"])
        assert result.exit_code == 2

    def test_combination_table_lists_rule(self, runner, big_three_index):
        result = _explain(runner, big_three_index, "--family", "combination",
                          "--exhaustive", "--output", "table")
        assert result.exit_code == 0
        federer_line = next(line for line in result.output.splitlines()
                            if line.startswith("roger federer"))
        assert "requires d1" in federer_line

    def test_reordering_counterfactual(self, runner, big_three_index):
        result = _explain(runner, big_three_index, "--kind", "reordering",
                          "--output", "json")
        assert result.exit_code == 0
        payload = json.loads(result.output)
        assert payload["outcome"] == "found"
        assert payload["counterfactual"]["perturbation"] == [1, 0, 2, 3, 4]
        assert payload["counterfactual"]["similarity"] == pytest.approx(0.8)

    def test_json_schema_matches_service_serializer(self, runner, big_three_index):
        result = _explain(runner, big_three_index, "--family", "combination",
                          "--output", "json")
        payload = json.loads(result.output)
        assert set(payload) == {"family", "insight"}
        assert set(payload["insight"]) == {"groups", "proportions", "rules", "total_evaluated"}

    def test_byte_identical_json_across_runs(self, runner, big_three_index):
        args = ["--family", "combination", "--sample-size", "10", "--seed", "3",
                "--output", "json"]
        first = _explain(runner, big_three_index, *args)
        second = _explain(runner, big_three_index, *args)
        assert first.output == second.output

    def test_limit_exit_code(self, tmp_path, runner):
        index_path = tmp_path / "tl.index.json"
        runner.invoke(main, ["index", "--corpus", str(FIXTURES / "timeline.corpus.jsonl"),
                             "--index", str(index_path)])
        scenario = timeline_scenario()
        result = runner.invoke(main, [
            "explain", "--index", str(index_path),
            "--question", scenario.query_text, "--top-k", "10",
            "--oracle-fixture", str(FIXTURES / "timeline.oracle.json"),
            "--family", "permutation", "--exhaustive",
        ])
        assert result.exit_code == 4  # k=10 exceeds the exhaustive permutation limit

    def test_oracle_failure_exit_code(self, runner, big_three_index):
        scenario = big_three_scenario()
        result = runner.invoke(main, [
            "explain", "--index", str(big_three_index),
            "--question", scenario.query_text,
            "--oracle-url", "http://127.0.0.1:1/unreachable",
            "--family", "combination",
        ])
        assert result.exit_code == 3


class TestSampleCommand:
    def test_seeded_json(self, runner):
        first = runner.invoke(main, ["sample", "--k", "4", "--s", "3", "--seed", "9",
                                     "--output", "json"])
        second = runner.invoke(main, ["sample", "--k", "4", "--s", "3", "--seed", "9",
                                      "--output", "json"])
        assert first.exit_code == 0
        assert first.output == second.output
        payload = json.loads(first.output)
        assert len(payload["permutations"]) == 3
        for order in payload["permutations"]:
            assert sorted(order) == [0, 1, 2, 3]


class TestOptimalCommand:
    def test_ranked_json(self, runner, big_three_index):
        scenario = big_three_scenario()
        result = runner.invoke(main, [
            "optimal", "--index", str(big_three_index),
            "--question", scenario.query_text,
            "--oracle-fixture", str(FIXTURES / "big_three.oracle.json"),
            "--s", "3", "--evaluate", "--output", "json",
        ])
        assert result.exit_code == 0
        payload = json.loads(result.output)
        assert [e["rank"] for e in payload["ranked"]] == [1, 2, 3]
        assert all("answer" in e for e in payload["ranked"])

    def test_custom_profile(self, runner, big_three_index):
        scenario = big_three_scenario()
        result = runner.invoke(main, [
            "optimal", "--index", str(big_three_index),
            "--question", scenario.query_text,
            "--oracle-fixture", str(FIXTURES / "big_three.oracle.json"),
            "--s", "1", "--profile", "1.0,0.9,0.8,0.7,0.6", "--output", "json",
        ])
        assert result.exit_code == 0
        payload = json.loads(result.output)
        # monotone decreasing profile with decreasing relevance: identity is optimal
        assert payload["ranked"][0]["permutation"] == [0, 1, 2, 3, 4]
