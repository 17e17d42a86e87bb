"""Domain types shared by the search strategies, backends, and harness."""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from typing import Any, Mapping

STRATEGIES = ("b", "d", "d-plus", "combined")
STATUSES = ("proved", "exhausted", "gave-up", "timed-out")

# Failure reasons carried by ApplyOutcome.
PROVER_ERROR = "prover-error"
NO_PROGRESS = "no-progress"
GIVE_UP = "give-up"
BACKEND_TIMEOUT = "backend-timeout"

_IDENT_RE = re.compile(r"[A-Za-z0-9_']+")


class ConfigError(ValueError):
    """Invalid search or run configuration."""


def canonicalize_state(raw: str) -> str:
    """Normalize a tactic-state text so that equal states compare equal.

    CRLF becomes LF, trailing whitespace is stripped per line, leading and
    trailing blank lines are dropped, and interior runs of blank lines
    collapse to a single blank line. Idempotent.
    """
    text = raw.replace("\r\n", "\n").replace("\r", "\n")
    lines: list[str] = []
    for line in text.split("\n"):
        line = line.rstrip()
        if line == "" and lines and lines[-1] == "":
            continue
        lines.append(line)
    while lines and lines[0] == "":
        del lines[0]
    while lines and lines[-1] == "":
        del lines[-1]
    return "\n".join(lines)


def state_digest(text: str) -> str:
    """Stable 64-bit hex digest of a canonical state text."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def is_giveup(tactic: "Tactic | str") -> bool:
    """True iff the tactic contains `sorry` as a standalone identifier.

    Identifier characters include letters, digits, underscore, and prime, so
    names like `my_sorry_lemma` or `sorry'` do not count as giving up.
    """
    text = tactic.text if isinstance(tactic, Tactic) else tactic
    return "sorry" in _IDENT_RE.findall(text)


@dataclass(frozen=True)
class Theorem:
    """One unit of evaluation: a named formal statement to prove.

    `env` is an opaque backend descriptor (a file locator for live provers,
    a lookup key for simulated ones); backends fall back to `name` when it
    is absent.
    """

    name: str
    statement: str
    source: str = ""
    topic: str | None = None
    env: str | None = None

    def __post_init__(self) -> None:
        if not self.name.strip():
            raise ValueError("theorem name must be non-empty")
        if not self.statement.strip():
            raise ValueError(f"theorem {self.name!r}: statement must be non-empty")

    @property
    def lookup_key(self) -> str:
        return self.env if self.env else self.name


@dataclass(frozen=True)
class TacticState:
    """Canonical text of the prover's current hypotheses and goals.

    The text is canonicalized on construction; two states are equal exactly
    when their canonical texts are equal.
    """

    text: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "text", canonicalize_state(self.text))

    @property
    def id(self) -> str:
        return state_digest(self.text)


@dataclass(frozen=True)
class Tactic:
    """One generated proof step plus the ordinal of the call that produced it."""

    text: str
    call_index: int = 0

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("tactic text must be non-empty after trimming")


@dataclass(frozen=True)
class ApplyOutcome:
    """Result of sending one tactic to the prover.

    kind is "proved", "new-state", or "failed"; failures carry a reason from
    {prover-error, no-progress, give-up, backend-timeout} and may carry a
    backend message.
    """

    kind: str
    state: TacticState | None = None
    reason: str | None = None
    message: str = ""

    @classmethod
    def proved(cls) -> "ApplyOutcome":
        return cls(kind="proved")

    @classmethod
    def new_state(cls, state: TacticState) -> "ApplyOutcome":
        return cls(kind="new-state", state=state)

    @classmethod
    def failed(cls, reason: str, message: str = "") -> "ApplyOutcome":
        return cls(kind="failed", reason=reason, message=message)

    @property
    def is_proved(self) -> bool:
        return self.kind == "proved"

    @property
    def is_new_state(self) -> bool:
        return self.kind == "new-state"

    @property
    def is_failed(self) -> bool:
        return self.kind == "failed"

    def describe(self) -> str:
        if self.is_failed:
            return f"{self.reason}: {self.message}" if self.message else str(self.reason)
        return self.kind


@dataclass(frozen=True)
class SearchConfig:
    """Hyperparameters for one search run.

    n is the number of tactic samples requested per step (breadth), k the
    number of attempts per theorem (depth restarts), temperature the
    generator diversity knob, and timeout_secs the per-theorem budget. The
    depth strategies require n == 1; the breadth strategy ignores k.
    """

    strategy: str = "b"
    n: int = 64
    k: int = 1
    temperature: float = 1.4
    timeout_secs: float = 600.0
    max_steps_per_attempt: int = 50
    max_depth: int | None = None
    few_shot: tuple[tuple[str, str], ...] = ()
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.temperature <= 0:
            raise ConfigError("temperature must be > 0")
        if self.timeout_secs <= 0:
            raise ConfigError("timeout_secs must be > 0")
        if self.max_steps_per_attempt < 1:
            raise ConfigError("max_steps_per_attempt must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1 when set")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.strategy in ("d", "d-plus") and self.n != 1:
            raise ConfigError(f"strategy {self.strategy!r} requires n == 1, got n={self.n}")

    def summary(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "strategy": self.strategy,
            "n": self.n,
            "k": self.k,
            "temperature": self.temperature,
            "timeout_secs": self.timeout_secs,
        }
        if self.strategy in ("d", "d-plus"):
            out["max_steps_per_attempt"] = self.max_steps_per_attempt
        if self.max_depth is not None:
            out["max_depth"] = self.max_depth
        return out


def _state_key(state: "TacticState | str") -> str:
    return state.text if isinstance(state, TacticState) else canonicalize_state(state)


def _tactic_key(tactic: "Tactic | str") -> str:
    return (tactic.text if isinstance(tactic, Tactic) else tactic).strip()


class BadSet:
    """Failed tactics keyed by the canonical state where they failed.

    Confined to a single theorem's search; never shared across theorems or
    workers, so no locking. Recording is idempotent and insertion order is
    preserved per state.
    """

    def __init__(self) -> None:
        self._entries: dict[str, dict[str, None]] = {}

    def record(self, state: TacticState | str, tactic: Tactic | str) -> None:
        self._entries.setdefault(_state_key(state), {})[_tactic_key(tactic)] = None

    def is_blocked(self, state: TacticState | str, tactic: Tactic | str) -> bool:
        return _tactic_key(tactic) in self._entries.get(_state_key(state), ())

    def tactics_for(self, state: TacticState | str) -> tuple[str, ...]:
        return tuple(self._entries.get(_state_key(state), ()))

    def snapshot(self) -> dict[str, list[str]]:
        return {state: list(tactics) for state, tactics in self._entries.items()}

    def __len__(self) -> int:
        return sum(len(tactics) for tactics in self._entries.values())

    def __bool__(self) -> bool:
        return bool(self._entries)


@dataclass(frozen=True)
class ProofResult:
    """Per-theorem outcome of one search.

    status is one of {proved, exhausted, gave-up, timed-out}; proof is
    non-empty exactly when status is proved. generator_calls counts round
    trips to the tactic generator, prover_interactions counts tactics sent
    to the prover. note carries a diagnostic when a backend error ended the
    search early.
    """

    theorem: str
    status: str
    proof: tuple[str, ...] = ()
    attempts_used: int = 0
    generator_calls: int = 0
    prover_interactions: int = 0
    wall_time: float = 0.0
    strategy: Mapping[str, Any] = field(default_factory=dict)
    note: str = ""

    def __post_init__(self) -> None:
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}; expected one of {STATUSES}")
        if (self.status == "proved") != bool(self.proof):
            raise ValueError("status 'proved' must coincide with a non-empty proof")

    @property
    def proved(self) -> bool:
        return self.status == "proved"
