#!/usr/bin/env python3
"""Regenerate the demo fixture files under fixtures/ from the built-in scenarios."""

import json
from pathlib import Path

from ragtrace.fixtures import SCENARIOS

OUT_DIR = Path(__file__).resolve().parent.parent / "fixtures"


def main() -> None:
    OUT_DIR.mkdir(exist_ok=True)
    for name, build in SCENARIOS.items():
        scenario = build()
        corpus_path = OUT_DIR / f"{name}.corpus.jsonl"
        oracle_path = OUT_DIR / f"{name}.oracle.json"
        with corpus_path.open("w", encoding="utf-8") as handle:
            for record in scenario.corpus:
                handle.write(json.dumps({"id": record.id, "contents": record.contents},
                                        ensure_ascii=False) + "\n")
        oracle_path.write_text(json.dumps(scenario.oracle_fixture, indent=2,
                                          ensure_ascii=False) + "\n", encoding="utf-8")
        print(f"wrote {corpus_path.name} and {oracle_path.name}")


if __name__ == "__main__":
    main()
