"""Built-in demo scenarios: a corpus, a mock oracle, and a canonical context each.

Three tennis-flavored scenarios ship with the package:

* ``big_three`` — a subjective "best player" question where one match-wins
  document at the front of the context drives the answer.
* ``us_open`` — slightly inconsistent championship documents where the only
  up-to-date document loses its influence when moved toward the middle.
* ``timeline`` — one document per year; the oracle's numeric answer counts
  how many of the five supporting documents are present.

The mock rules operate on doc ids and positions, so the scenarios are exact
and reproducible; corpus texts are written so BM25 retrieval reproduces each
scenario's canonical context order.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations as iter_combinations

from .model import ContextSequence, Query, SourceDocument
from .oracle import MockOracle
from .retrieval import CorpusRecord


@dataclass(frozen=True)
class DemoScenario:
    name: str
    query_text: str
    top_k: int
    corpus: tuple[CorpusRecord, ...]
    oracle_fixture: dict

    def mock_oracle(self) -> MockOracle:
        return MockOracle.from_fixture(self.oracle_fixture)

    def context(self) -> ContextSequence:
        """Canonical context: corpus order with strictly decreasing scores."""
        k = self.top_k
        sources = tuple(
            SourceDocument(doc_id=rec.id, text=rec.contents,
                           retrieval_score=round(1.0 - 0.05 * i, 4))
            for i, rec in enumerate(self.corpus[:k])
        )
        return ContextSequence(query=Query(self.query_text), sources=sources)


_BIG_THREE_DOCS = (
    ("d1", "Best tennis player of the Big Three ranked by total match wins: "
           "Roger Federer is first at 369 match wins."),
    ("d2", "Best tennis player of the Big Three ranked by Grand Slam singles trophies: "
           "Novak Djokovic is first, holding more major championship trophies than either "
           "rival athlete."),
    ("d3", "Best tennis player of the Big Three ranked by weeks at number one: "
           "Novak Djokovic is first, having spent more total weeks atop world rankings "
           "than any rival across several distinct eras."),
    ("d4", "Best tennis player of the Big Three ranked by head to head meetings: "
           "Novak Djokovic is first, edging both rivals across hard courts, clay courts, "
           "and grass courts in countless matchups spanning nearly two full decades together."),
    ("d5", "Best tennis player of the Big Three ranked by career tournament titles: "
           "Roger Federer is first for many observers, collecting dozens upon dozens, 103 "
           "total, across grass courts, hard courts, and indoor arenas over twenty seasons, "
           "a remarkable haul that some still consider unmatched today."),
)

_US_OPEN_DOCS = (
    ("d1", "US Open women singles championship notes: Bianca Andreescu won the 2019 title."),
    ("d2", "US Open women singles championship notes: Naomi Osaka won the 2020 title, "
           "closing out her final match in straight sets."),
    ("d3", "US Open women singles championship notes: Emma Raducanu won the 2021 title "
           "as a qualifier, never dropping a set during her entire tournament run, an "
           "astonishing feat."),
    ("d4", "US Open women singles championship notes: Iga Swiatek won the 2022 title, "
           "beating Ons Jabeur in a two set final before finishing that season atop world "
           "rankings by an enormous points margin overall."),
    ("d5", "US Open women singles championship notes: Coco Gauff won the 2023 title, "
           "recovering after losing an opening set in her final match and becoming, at "
           "nineteen, America's newest major champion, celebrated widely as a breakthrough "
           "moment for a rising generation of tennis stars."),
)

_AWARD_YEARS = (
    (2010, "Rafael Nadal"),
    (2011, "Novak Djokovic"),
    (2012, "Novak Djokovic"),
    (2013, "Rafael Nadal"),
    (2014, "Novak Djokovic"),
    (2015, "Novak Djokovic"),
    (2016, "Andy Murray"),
    (2017, "Rafael Nadal"),
    (2018, "Novak Djokovic"),
    (2019, "Rafael Nadal"),
)

DJOKOVIC_YEAR_IDS = tuple(f"y{year}" for year, who in _AWARD_YEARS if who == "Novak Djokovic")


def _timeline_rules() -> list[dict]:
    """One requires-rule per nonempty subset of the five supporting documents.

    Evaluated largest-first, so the first match counts how many supporting
    documents are present.
    """
    rules = []
    for size in range(len(DJOKOVIC_YEAR_IDS), 0, -1):
        for subset in iter_combinations(DJOKOVIC_YEAR_IDS, size):
            rules.append({"requires": list(subset), "answer": str(size)})
    return rules


def big_three_scenario() -> DemoScenario:
    """Subjective question; the answer follows whichever source opens the context."""
    corpus = tuple(CorpusRecord(id=i, contents=text) for i, text in _BIG_THREE_DOCS)
    fixture = {
        "oracle_id": "big-three",
        "default_answer": "Novak Djokovic",
        "rules": [
            {"position_equals": {"0": "d1"}, "answer": "Roger Federer"},
        ],
    }
    return DemoScenario(
        name="big_three",
        query_text="Who is the best tennis player of the Big Three?",
        top_k=5,
        corpus=corpus,
        oracle_fixture=fixture,
    )


def us_open_scenario() -> DemoScenario:
    """Inconsistent sources; the up-to-date last document only counts at the ends."""
    corpus = tuple(CorpusRecord(id=i, contents=text) for i, text in _US_OPEN_DOCS)
    fixture = {
        "oracle_id": "us-open",
        "default_answer": "Iga Swiatek",
        "rules": [
            {"position_equals": {"-1": "d5"}, "answer": "Coco Gauff"},
            {"position_equals": {"0": "d5"}, "answer": "Coco Gauff"},
        ],
    }
    return DemoScenario(
        name="us_open",
        query_text="Who won the most recent US Open women singles championship?",
        top_k=5,
        corpus=corpus,
        oracle_fixture=fixture,
    )


def timeline_scenario() -> DemoScenario:
    """Ten yearly documents; the answer counts the supporting years present."""
    corpus = tuple(
        CorpusRecord(
            id=f"y{year}",
            contents=(f"In {year} the tennis Player of the Year award was won by {who}." +
                      " The season review praised the winner." * (year - 2010)),
        )
        for year, who in _AWARD_YEARS
    )
    fixture = {
        "oracle_id": "timeline",
        "default_answer": "0",
        "rules": _timeline_rules(),
    }
    return DemoScenario(
        name="timeline",
        query_text="How many times did Novak Djokovic win the Player of the Year award"
                   " between 2010 and 2019?",
        top_k=10,
        corpus=corpus,
        oracle_fixture=fixture,
    )


SCENARIOS = {
    "big_three": big_three_scenario,
    "us_open": us_open_scenario,
    "timeline": timeline_scenario,
}


def get_scenario(name: str) -> DemoScenario:
    try:
        return SCENARIOS[name]()
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
