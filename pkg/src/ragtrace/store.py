"""Single-file sqlite persistence: sessions, jobs, results, oracles, eval cache.

One connection guarded by a lock keeps writes atomic across the service's
worker threads; job updates go through ``update_job`` so state can only move
forward and progress counters never decrease.
"""

from __future__ import annotations

import json
import sqlite3
import threading
from pathlib import Path
from typing import Any, Callable

from .errors import InvalidInput, UnknownId

_JOB_STATE_RANK = {"pending": 0, "running": 1, "done": 2, "failed": 2}

_SCHEMA = """
CREATE TABLE IF NOT EXISTS kv_sessions (id TEXT PRIMARY KEY, payload TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS kv_jobs     (id TEXT PRIMARY KEY, payload TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS kv_results  (id TEXT PRIMARY KEY, payload TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS kv_oracles  (id TEXT PRIMARY KEY, payload TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS eval_cache  (digest TEXT PRIMARY KEY, payload TEXT NOT NULL);
"""


class Store:
    def __init__(self, path: str | Path):
        self._conn = sqlite3.connect(str(path), check_same_thread=False)
        self._lock = threading.RLock()
        with self._lock:
            self._conn.executescript(_SCHEMA)
            self._conn.commit()

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    def _put(self, table: str, key: str, payload: dict[str, Any]) -> None:
        blob = json.dumps(payload, ensure_ascii=False, sort_keys=True)
        with self._lock:
            self._conn.execute(
                f"INSERT OR REPLACE INTO {table} (id, payload) VALUES (?, ?)", (key, blob))
            self._conn.commit()

    def _get(self, table: str, key: str) -> dict[str, Any] | None:
        with self._lock:
            row = self._conn.execute(
                f"SELECT payload FROM {table} WHERE id = ?", (key,)).fetchone()
        return json.loads(row[0]) if row else None

    def _all(self, table: str) -> list[dict[str, Any]]:
        with self._lock:
            rows = self._conn.execute(f"SELECT payload FROM {table} ORDER BY id").fetchall()
        return [json.loads(r[0]) for r in rows]

    # sessions
    def put_session(self, session: dict[str, Any]) -> None:
        self._put("kv_sessions", session["session_id"], session)

    def get_session(self, session_id: str) -> dict[str, Any]:
        session = self._get("kv_sessions", session_id)
        if session is None:
            raise UnknownId(f"unknown session {session_id!r}", session_id=session_id)
        return session

    # jobs
    def put_job(self, job: dict[str, Any]) -> None:
        self._put("kv_jobs", job["job_id"], job)

    def get_job(self, job_id: str) -> dict[str, Any]:
        job = self._get("kv_jobs", job_id)
        if job is None:
            raise UnknownId(f"unknown job {job_id!r}", job_id=job_id)
        return job

    def update_job(self, job_id: str, mutate: Callable[[dict[str, Any]], None]) -> dict[str, Any]:
        """Apply a mutation atomically; rejects backward state or progress moves."""
        with self._lock:
            job = self.get_job(job_id)
            before_state = job["state"]
            before_evaluated = job["progress"]["evaluated"]
            mutate(job)
            if _JOB_STATE_RANK[job["state"]] < _JOB_STATE_RANK[before_state]:
                raise InvalidInput("job state cannot move backward",
                                   was=before_state, now=job["state"])
            if job["progress"]["evaluated"] < before_evaluated:
                job["progress"]["evaluated"] = before_evaluated
            self.put_job(job)
            return job

    # results
    def put_result(self, result_id: str, payload: dict[str, Any]) -> None:
        self._put("kv_results", result_id, {"result_id": result_id, "payload": payload})

    def get_result(self, result_id: str) -> dict[str, Any]:
        wrapped = self._get("kv_results", result_id)
        if wrapped is None:
            raise UnknownId(f"unknown result {result_id!r}", result_id=result_id)
        return wrapped["payload"]

    # oracle registrations
    def put_oracle(self, oracle_id: str, spec: dict[str, Any]) -> None:
        self._put("kv_oracles", oracle_id, {"oracle_id": oracle_id, "spec": spec})

    def get_oracle(self, oracle_id: str) -> dict[str, Any]:
        entry = self._get("kv_oracles", oracle_id)
        if entry is None:
            raise UnknownId(f"unknown oracle {oracle_id!r}", oracle_id=oracle_id)
        return entry["spec"]

    def list_oracles(self) -> list[dict[str, Any]]:
        return self._all("kv_oracles")


class StoreCache:
    """EvaluationCache backed by the store's eval_cache table."""

    def __init__(self, store: Store):
        self._store = store

    def get(self, digest: str) -> dict[str, Any] | None:
        with self._store._lock:
            row = self._store._conn.execute(
                "SELECT payload FROM eval_cache WHERE digest = ?", (digest,)).fetchone()
        return json.loads(row[0]) if row else None

    def put(self, digest: str, payload: dict[str, Any]) -> None:
        blob = json.dumps(payload, ensure_ascii=False, sort_keys=True)
        with self._store._lock:
            self._store._conn.execute(
                "INSERT OR IGNORE INTO eval_cache (digest, payload) VALUES (?, ?)",
                (digest, blob))
            self._store._conn.commit()
