from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Diagnostic:
    """A single well-formedness finding.

    ``code`` is a short category (``tree``, ``group-size``, ``reference``,
    ``pseudo-state``, ``type``, ``mapping`` ...) so callers can filter.
    """

    code: str
    location: str
    message: str

    def __str__(self) -> str:
        return f"{self.location}: [{self.code}] {self.message}"


class RuntimeFault(Exception):
    """Raised when executing a machine hits an undefined behaviour."""

    kind = "fault"


class DivisionByZero(RuntimeFault):
    kind = "division-by-zero"


class NonDeterminism(RuntimeFault):
    kind = "non-determinism"


class LivelockDetected(RuntimeFault):
    kind = "livelock"


class DeadEnd(RuntimeFault):
    """A choice or junction was entered with no enabled outgoing transition."""

    kind = "dead-end"
