"""Exception types shared across the engine, service, and CLI.

Every error carries a stable machine-readable ``code`` so the HTTP layer and
the CLI can emit uniform ``{code, message, details}`` payloads.
"""

from __future__ import annotations

from typing import Any


class RagtraceError(Exception):
    """Base class for all domain errors."""

    code = "internal_error"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def payload(self) -> dict[str, Any]:
        return {"code": self.code, "message": self.message, "details": self.details}


class InvalidInput(RagtraceError):
    code = "invalid_input"


class DuplicateId(RagtraceError):
    code = "duplicate_id"


class EmptyCorpus(RagtraceError):
    code = "empty_corpus"


class EmptyQuery(RagtraceError):
    code = "empty_query"


class NoResults(RagtraceError):
    code = "no_results"


class AllZeroScores(RagtraceError):
    code = "all_zero_scores"


class ContextTooLarge(RagtraceError):
    """Raised when a context exceeds a size limit (chars or source count)."""

    code = "context_too_large"


class KTooLarge(RagtraceError):
    """Exhaustive permutation modes refuse contexts beyond the hard limit."""

    code = "k_too_large"


class LengthMismatch(RagtraceError):
    code = "length_mismatch"


class UndefinedCorrelation(RagtraceError):
    """Rank correlation is undefined for fewer than two items."""

    code = "undefined_correlation"


class NonSquareMatrix(RagtraceError):
    code = "non_square_matrix"


class NonFiniteEntry(RagtraceError):
    code = "non_finite_entry"


class InfeasibleMatrix(RagtraceError):
    """No perfect matching exists under the current forbidden-pair set."""

    code = "infeasible_matrix"


class UnsupportedCapability(RagtraceError):
    code = "unsupported_capability"


class OracleUnavailable(RagtraceError):
    code = "oracle_unavailable"


class OracleMalformedResponse(RagtraceError):
    code = "oracle_malformed_response"


class UnknownId(RagtraceError):
    """Referenced session, job, result, or oracle does not exist."""

    code = "unknown_id"
