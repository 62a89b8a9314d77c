#!/usr/bin/env python3
"""Record real service payloads for the frontend contract tests.

Runs the three demo scenarios through an in-process service instance and
writes every payload the web workbench renders (sessions, insight results,
counterfactual results, ranked orderings, job states) under
frontend/tests/fixtures/.
"""

import json
import tempfile
import time
from pathlib import Path

from fastapi.testclient import TestClient

from ragtrace.fixtures import SCENARIOS
from ragtrace.serialize import canonical_dumps
from ragtrace.service import ServiceConfig, create_app

OUT_DIR = Path(__file__).resolve().parent.parent / "frontend" / "tests" / "fixtures"


def wait(client, job):
    while True:
        job = client.get(f"/jobs/{job['job_id']}").json()
        if job["state"] in ("done", "failed"):
            return job
        time.sleep(0.02)


def run_job(client, path, body):
    job = wait(client, client.post(path, json=body).json())
    result = None
    if job["state"] == "done":
        result = client.get(f"/results/{job['result_ref']}").json()
    return job, result


def record(name, payload):
    path = OUT_DIR / f"{name}.json"
    path.write_text(canonical_dumps(payload), encoding="utf-8")
    print(f"wrote {path.relative_to(OUT_DIR.parent.parent)}")


def load_scenario(client, scenario):
    jsonl = "\n".join(json.dumps({"id": r.id, "contents": r.contents})
                      for r in scenario.corpus)
    client.post("/corpus", content=jsonl)
    client.post("/oracles", json={"oracle_id": scenario.oracle_fixture["oracle_id"],
                                  "kind": "mock", "fixture": scenario.oracle_fixture})
    return client.post("/sessions", json={
        "query_text": scenario.query_text,
        "top_k": scenario.top_k,
        "oracle_id": scenario.oracle_fixture["oracle_id"],
    }).json()


def main() -> None:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        config = ServiceConfig(index_path=f"{tmp}/idx.json", store_path=f"{tmp}/store.db")
        client = TestClient(create_app(config))

        # use case 1: ambiguous answers
        scenario = SCENARIOS["big_three"]()
        session = load_scenario(client, scenario)
        record("big_three.session", session)
        base = f"/sessions/{session['session_id']}"
        job, result = run_job(client, f"{base}/insights", {"family": "combination"})
        record("big_three.job_done", job)
        record("big_three.insight_combination", result)
        _, result = run_job(client, f"{base}/counterfactuals", {"kind": "reordering"})
        record("big_three.counterfactual_reordering", result)
        _, result = run_job(client, f"{base}/counterfactuals", {"kind": "top_down_removal"})
        record("big_three.counterfactual_topdown", result)
        _, result = run_job(client, f"{base}/insights",
                            {"family": "optimal_permutation", "s": 3})
        record("big_three.optimal", result)

        # distinct terminal states: not-found vs budget-exhausted, plus a failed job
        client.post("/oracles", json={"oracle_id": "constant", "kind": "mock",
                                      "fixture": {"default_answer": "always the same"}})
        constant_session = client.post("/sessions", json={
            "query_text": scenario.query_text, "top_k": 5, "oracle_id": "constant"}).json()
        cbase = f"/sessions/{constant_session['session_id']}"
        _, result = run_job(client, f"{cbase}/counterfactuals", {"kind": "reordering"})
        record("constant.counterfactual_not_found", result)
        _, result = run_job(client, f"{cbase}/counterfactuals",
                            {"kind": "top_down_removal", "max_perturbations": 3})
        record("constant.counterfactual_budget_exhausted", result)

        # use case 2: inconsistent sources
        scenario = SCENARIOS["us_open"]()
        session = load_scenario(client, scenario)
        record("us_open.session", session)
        base = f"/sessions/{session['session_id']}"
        _, result = run_job(client, f"{base}/counterfactuals", {"kind": "reordering"})
        record("us_open.counterfactual_reordering", result)

        # use case 3: timeline
        scenario = SCENARIOS["timeline"]()
        session = load_scenario(client, scenario)
        record("timeline.session", session)
        base = f"/sessions/{session['session_id']}"
        _, result = run_job(client, f"{base}/insights",
                            {"family": "permutation", "sample_size": 200, "seed": 0})
        record("timeline.insight_permutation", result)
        _, result = run_job(client, f"{base}/counterfactuals",
                            {"kind": "bottom_up_retention", "target_answer": "5",
                             "max_perturbations": 1024})
        record("timeline.counterfactual_bottomup", result)
        job, _ = run_job(client, f"{base}/insights", {"family": "permutation"})
        record("timeline.job_failed", job)  # exhaustive k=10 exceeds the limit


if __name__ == "__main__":
    main()
