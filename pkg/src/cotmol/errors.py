"""Exception hierarchy.

Every domain failure raised by the library derives from :class:`CotmolError`,
which the CLI maps to exit code 1.
"""

from __future__ import annotations


class CotmolError(Exception):
    """Base class for all domain errors."""


class InvalidTrace(CotmolError, ValueError):
    pass


class MalformedAnswer(CotmolError, ValueError):
    pass


class ParseError(CotmolError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateId(CotmolError, ValueError):
    def __init__(self, trace_id: str):
        self.trace_id = trace_id
        super().__init__(f"duplicate trace id {trace_id!r}")


class UnparsableVerdict(CotmolError, ValueError):
    def __init__(self, raw: str):
        self.raw = raw
        super().__init__(f"could not parse behavior verdict from response: {raw[:200]!r}")


class AnnotationFailed(CotmolError):
    def __init__(self, edge_index: int, cause: BaseException | None = None):
        self.edge_index = edge_index
        self.cause = cause
        super().__init__(f"annotation failed on edge {edge_index}: {cause}")


class ShapeError(CotmolError, ValueError):
    pass


class EmptyCorpus(CotmolError, ValueError):
    pass


class NotErgodic(CotmolError, ValueError):
    pass


class DegenerateCorrelation(CotmolError, ValueError):
    pass


class InsufficientData(CotmolError, ValueError):
    pass


class BadConfig(CotmolError, ValueError):
    pass


class DegenerateGeometry(CotmolError, ValueError):
    pass


class MissingAttention(CotmolError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class AssumptionViolated(CotmolError, ValueError):
    pass


class NoPath(CotmolError, ValueError):
    pass


class NotADag(CotmolError, ValueError):
    pass


class ClientError(CotmolError):
    """Base for failures of the chat-completion capability."""


class ClientExhausted(ClientError):
    def __init__(self, attempts: int, last: BaseException | None = None):
        self.attempts = attempts
        self.last = last
        super().__init__(f"gave up after {attempts} attempts: {last}")


class ClientRejected(ClientError):
    def __init__(self, status: int, body: str = ""):
        self.status = status
        self.body = body
        super().__init__(f"request rejected with HTTP {status}: {body[:200]}")


class ReplayMiss(ClientError, KeyError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"prompt {key[:16]}... not found in replay log")

    def __str__(self) -> str:
        return str(self.args[0])
