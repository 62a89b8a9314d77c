"""Command-line front door: index building, one-shot questions, explanations.

The CLI links the explainer modules directly (no running service needed) and
emits the same JSON payloads the HTTP service stores, so scripted runs and
service runs are interchangeable. Exit codes: 2 usage, 3 oracle failure,
4 size/limit violations.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import combinations as comb
from . import permutations as perm
from .assignment import AttentionProfile, optimal_permutations, v_shaped_profile
from .errors import (
    ContextTooLarge,
    KTooLarge,
    OracleMalformedResponse,
    OracleUnavailable,
    RagtraceError,
    UnsupportedCapability,
)
from .model import ContextSequence, CounterfactualKind, Query, RelevanceMethod
from .oracle import HttpOracle, HttpOracleConfig, MockOracle, OracleGateway
from .retrieval import Bm25Index, Bm25Params, build_index_from_jsonl
from .serialize import canonical_dumps, counterfactual_payload, insight_payload, ranked_payload

_EXIT_ORACLE = 3
_EXIT_LIMIT = 4

_LIMIT_ERRORS = (KTooLarge, ContextTooLarge)
_ORACLE_ERRORS = (OracleUnavailable, OracleMalformedResponse, UnsupportedCapability)

_KIND_BY_FLAG = {
    "topdown": CounterfactualKind.TOP_DOWN_REMOVAL,
    "bottomup": CounterfactualKind.BOTTOM_UP_RETENTION,
    "reordering": CounterfactualKind.REORDERING,
}


def _fail(err: RagtraceError) -> None:
    click.echo(f"error [{err.code}]: {err.message}", err=True)
    if isinstance(err, _LIMIT_ERRORS):
        sys.exit(_EXIT_LIMIT)
    if isinstance(err, _ORACLE_ERRORS):
        sys.exit(_EXIT_ORACLE)
    sys.exit(1)


def _load_gateway(fixture: str | None, url: str | None, model: str) -> OracleGateway:
    if (fixture is None) == (url is None):
        raise click.UsageError("provide exactly one of --oracle-fixture or --oracle-url")
    if fixture is not None:
        oracle = MockOracle.from_file(fixture)
    else:
        oracle = HttpOracle("http-oracle", HttpOracleConfig(url=url, model=model))
    return OracleGateway(oracle)


def _load_context(index_path: str, question: str, top_k: int) -> ContextSequence:
    index = Bm25Index.load(index_path)
    query = Query(question)
    docs = index.retrieve(query, Bm25Params(top_k=top_k))
    if not docs:
        raise RagtraceError("retrieval returned no documents")
    return ContextSequence(query=query, sources=tuple(docs))


def _emit(payload: dict, output: str) -> None:
    if output == "json" or (output == "auto" and not sys.stdout.isatty()):
        click.echo(canonical_dumps(payload), nl=False)
    else:
        _render_table(payload)


def _render_table(payload: dict) -> None:
    if "insight" in payload:
        insight = payload["insight"]
        click.echo(f"{'ANSWER':<24} {'SHARE':>7} {'COUNT':>6}  RULE")
        rules = {r["answer"]: r for r in insight["rules"]}
        for answer, group in insight["groups"].items():
            rule = rules.get(answer, {})
            if rule.get("required_ids"):
                rule_text = "requires " + ", ".join(rule["required_ids"])
            elif rule.get("fixed_positions"):
                pairs = sorted(rule["fixed_positions"].items(), key=lambda kv: int(kv[0]))
                rule_text = "; ".join(f"position {p} = {d}" for p, d in pairs)
            else:
                rule_text = "no rule found"
            share = insight["proportions"][answer]
            click.echo(f"{answer:<24} {share:>6.1%} {len(group):>6}  {rule_text}")
        click.echo(f"total evaluated: {insight['total_evaluated']}")
    elif "ranked" in payload:
        click.echo(f"{'RANK':<5} {'SCORE':>10}  ORDER{'':<18} ANSWER")
        for entry in payload["ranked"]:
            order = ",".join(str(i) for i in entry["permutation"])
            answer = entry.get("answer", {}).get("normalized", "")
            click.echo(f"{entry['rank']:<5} {entry['score']:>10.4f}  [{order}]{'':<12} {answer}")
    elif "outcome" in payload:
        click.echo(f"kind: {payload['kind']}")
        click.echo(f"outcome: {payload['outcome']}")
        click.echo(f"baseline answer: {payload['baseline']['normalized']}")
        click.echo(f"perturbations tested: {payload['perturbations_tested']}")
        cf = payload.get("counterfactual")
        if cf:
            click.echo(f"new answer: {cf['new_answer']['normalized']}")
            pert = cf["perturbation"]
            if isinstance(pert, list):
                click.echo(f"reordering: {pert} (similarity {cf['similarity']:.4f})")
            else:
                click.echo(f"flip set: {', '.join(pert['member_ids'])}")
    else:
        click.echo(canonical_dumps(payload), nl=False)


@click.group()
def main():
    """Explain a retrieval-augmented oracle's answers via context perturbations."""


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--index", "index_path", required=True, type=click.Path())
def index(corpus_path: str, index_path: str):
    """Build and persist a BM25 index from a JSONL corpus."""
    try:
        with open(corpus_path, "r", encoding="utf-8") as handle:
            built = build_index_from_jsonl(handle)
        built.save(index_path)
    except RagtraceError as err:
        _fail(err)
    click.echo(f"indexed {built.doc_count} documents")


_oracle_options = [
    click.option("--oracle-fixture", type=click.Path(exists=True), default=None,
                 help="Deterministic mock oracle JSON fixture."),
    click.option("--oracle-url", default=None, help="Chat-completion endpoint URL."),
    click.option("--oracle-model", default="default", help="Model name for HTTP oracles."),
]


def oracle_options(fn):
    for option in reversed(_oracle_options):
        fn = option(fn)
    return fn


@main.command()
@click.option("--index", "index_path", required=True, type=click.Path(exists=True))
@click.option("--question", required=True)
@click.option("--top-k", default=5, show_default=True)
@oracle_options
def ask(index_path, question, top_k, oracle_fixture, oracle_url, oracle_model):
    """Retrieve a context and print the oracle's full-context answer."""
    try:
        gateway = _load_gateway(oracle_fixture, oracle_url, oracle_model)
        ctx = _load_context(index_path, question, top_k)
        record = gateway.evaluate(ctx.query, ctx.sources)
    except RagtraceError as err:
        _fail(err)
    for rank, doc in enumerate(ctx.sources, start=1):
        click.echo(f"[{rank}] {doc.doc_id} (score {doc.retrieval_score:.4f})")
    click.echo(f"answer: {record.raw}")


@main.command()
@click.option("--index", "index_path", required=True, type=click.Path(exists=True))
@click.option("--question", required=True)
@click.option("--top-k", default=5, show_default=True)
@click.option("--family", type=click.Choice(["combination", "permutation"]), default=None,
              help="Run answer-distribution insights for this perturbation family.")
@click.option("--kind", type=click.Choice(sorted(_KIND_BY_FLAG)), default=None,
              help="Run a counterfactual search of this kind.")
@click.option("--exhaustive", is_flag=True, help="Evaluate the full perturbation space.")
@click.option("--sample-size", type=int, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--max-perturbations", type=int, default=1000, show_default=True)
@click.option("--target-answer", default=None)
@click.option("--scoring", type=click.Choice([m.value for m in RelevanceMethod]),
              default=RelevanceMethod.RETRIEVAL_SCORE.value, show_default=True)
@click.option("--output", type=click.Choice(["auto", "json", "table"]), default="auto")
@oracle_options
def explain(index_path, question, top_k, family, kind, exhaustive, sample_size, seed,
            max_perturbations, target_answer, scoring, output,
            oracle_fixture, oracle_url, oracle_model):
    """Run insights and/or a counterfactual search for a question."""
    if family is None and kind is None:
        raise click.UsageError("choose --family for insights, --kind for a counterfactual, or both")
    if exhaustive and sample_size is not None:
        raise click.UsageError("--exhaustive and --sample-size are mutually exclusive")
    try:
        gateway = _load_gateway(oracle_fixture, oracle_url, oracle_model)
        ctx = _load_context(index_path, question, top_k)
        if family == "combination":
            insight = comb.combination_insights(ctx, gateway, comb.CombinationSearchConfig(
                scoring=RelevanceMethod(scoring), sample_size=sample_size, seed=seed))
            _emit(insight_payload(family, insight), output)
        elif family == "permutation":
            insight = perm.permutation_insights(ctx, gateway, perm.PermutationSearchConfig(
                sample_size=sample_size, seed=seed))
            _emit(insight_payload(family, insight), output)
        if kind is not None:
            cf_kind = _KIND_BY_FLAG[kind]
            if cf_kind is CounterfactualKind.REORDERING:
                search = perm.find_permutation_counterfactual(
                    ctx, gateway, perm.PermutationSearchConfig(
                        max_perturbations=max_perturbations, seed=seed))
            else:
                direction = (comb.SearchDirection.TOP_DOWN
                             if cf_kind is CounterfactualKind.TOP_DOWN_REMOVAL
                             else comb.SearchDirection.BOTTOM_UP)
                search = comb.find_combination_counterfactual(
                    ctx, gateway, comb.CombinationSearchConfig(
                        direction=direction, target_answer=target_answer,
                        max_perturbations=max_perturbations,
                        scoring=RelevanceMethod(scoring), seed=seed))
            _emit(counterfactual_payload(cf_kind, search), output)
    except RagtraceError as err:
        _fail(err)


@main.command()
@click.option("--k", type=int, required=True)
@click.option("--s", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output", type=click.Choice(["auto", "json", "table"]), default="auto")
def sample(k, s, seed, output):
    """Draw s seeded uniform permutations of k positions."""
    try:
        perms = perm.sample_permutations(k, s, seed)
    except RagtraceError as err:
        _fail(err)
    payload = {"k": k, "s": s, "seed": seed,
               "permutations": [p.to_jsonable() for p in perms]}
    if output == "table" or (output == "auto" and sys.stdout.isatty()):
        for p in perms:
            click.echo(",".join(str(i) for i in p.order))
    else:
        click.echo(canonical_dumps(payload), nl=False)


@main.command()
@click.option("--index", "index_path", required=True, type=click.Path(exists=True))
@click.option("--question", required=True)
@click.option("--top-k", default=5, show_default=True)
@click.option("--s", type=int, default=1, show_default=True)
@click.option("--profile", "profile_csv", default=None,
              help="Comma-separated position weights; defaults to the V-shaped preset.")
@click.option("--scoring", type=click.Choice([m.value for m in RelevanceMethod]),
              default=RelevanceMethod.RETRIEVAL_SCORE.value, show_default=True)
@click.option("--evaluate/--no-evaluate", "evaluate_answers", default=False,
              help="Also ask the oracle for each ranked ordering's answer.")
@click.option("--output", type=click.Choice(["auto", "json", "table"]), default="auto")
@oracle_options
def optimal(index_path, question, top_k, s, profile_csv, scoring, evaluate_answers, output,
            oracle_fixture, oracle_url, oracle_model):
    """Rank the s orderings that best match relevance to position attention."""
    try:
        gateway = _load_gateway(oracle_fixture, oracle_url, oracle_model)
        ctx = _load_context(index_path, question, top_k)
        relevance = comb.scoring_relevance(ctx, gateway, RelevanceMethod(scoring))
        if profile_csv:
            profile = AttentionProfile(tuple(float(x) for x in profile_csv.split(",")))
        else:
            profile = v_shaped_profile(ctx.k)
        ranked = optimal_permutations(ctx, relevance, profile, s)
        answers = None
        if evaluate_answers:
            answers = [gateway.evaluate(ctx.query, r.permutation.apply(ctx.sources))
                              .with_perturbation(r.permutation)
                       for r in ranked]
        _emit(ranked_payload(ranked, answers), output)
    except RagtraceError as err:
        _fail(err)


if __name__ == "__main__":
    main()
