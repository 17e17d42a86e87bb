"""Prover backend contract and the deterministic scenario backend.

A prover backend opens one session per theorem, applies tactics to explicit
states, and closes the session. Tactic-level failures come back as
ApplyOutcome.failed(...); infrastructure problems raise ProverError
subclasses.
"""

from __future__ import annotations

import logging
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, runtime_checkable

import yaml

from .core import (
    ApplyOutcome,
    NO_PROGRESS,
    PROVER_ERROR,
    TacticState,
    Tactic,
    Theorem,
    canonicalize_state,
)

logger = logging.getLogger(__name__)

UNKNOWN_TACTIC_MESSAGE = "unknown tactic"


class ProverError(Exception):
    """Base class for prover infrastructure failures."""


class TheoremNotFound(ProverError):
    """The backend cannot resolve the theorem's environment descriptor."""


class BackendUnavailable(ProverError):
    """The prover process or endpoint cannot be reached."""


class SessionClosed(ProverError):
    """An operation was issued on a closed session."""


class ScenarioError(ProverError):
    """A scenario document is malformed."""


class DuplicateTheorem(ScenarioError):
    """Two scenario theorems share a name."""


@dataclass
class ProverSession:
    """Interaction handle for one theorem; unusable after close."""

    session_id: str
    theorem: Theorem
    initial_state: TacticState
    open: bool = True


@runtime_checkable
class ProverBackend(Protocol):
    def open_session(self, theorem: Theorem) -> ProverSession: ...

    def apply_tactic(self, session: ProverSession, state: TacticState, tactic: Tactic) -> ApplyOutcome: ...

    def close_session(self, session: ProverSession) -> None: ...


# A transition outcome is ("proved", ""), ("error", message) or
# ("state", canonical_text).
Transition = tuple[str, str]


@dataclass
class ScenarioTheorem:
    name: str
    initial_state: str
    transitions: dict[tuple[str, str], Transition] = field(default_factory=dict)
    delays_ms: dict[tuple[str, str], float] = field(default_factory=dict)


@dataclass
class Scenario:
    """A table-driven stand-in for a live prover.

    All state texts are canonical. Unknown (state, tactic) pairs resolve to
    an "unknown tactic" error, so only interesting transitions need listing.
    """

    theorems: dict[str, ScenarioTheorem] = field(default_factory=dict)

    def add(self, theorem: ScenarioTheorem) -> None:
        if theorem.name in self.theorems:
            raise DuplicateTheorem(f"duplicate theorem {theorem.name!r}")
        self.theorems[theorem.name] = theorem

    def __len__(self) -> int:
        return len(self.theorems)


def _canonical_or_warn(text: str, where: str) -> str:
    canonical = canonicalize_state(text)
    if canonical != text:
        logger.warning("non-canonical state %s; normalized at load time", where)
    return canonical


def _parse_outcome(raw: object, where: str) -> Transition:
    if raw == "proved":
        return ("proved", "")
    if isinstance(raw, dict) and len(raw) == 1:
        key, value = next(iter(raw.items()))
        if key == "error":
            return ("error", str(value))
        if key == "state":
            return ("state", _canonical_or_warn(str(value), where))
    raise ScenarioError(
        f"{where}: outcome must be 'proved', {{error: <msg>}}, or {{state: <text>}}, got {raw!r}"
    )


def scenario_from_obj(doc: object, origin: str = "<scenario>") -> Scenario:
    """Build a Scenario from an already-parsed document (top-level list)."""
    if not isinstance(doc, list):
        raise ScenarioError(f"{origin}: expected a top-level list of theorems")
    scenario = Scenario()
    for idx, item in enumerate(doc):
        where = f"{origin}: theorem #{idx}"
        if not isinstance(item, dict):
            raise ScenarioError(f"{where}: expected a mapping")
        try:
            name = str(item["name"])
            initial = str(item["initial_state"])
        except KeyError as exc:
            raise ScenarioError(f"{where}: missing field {exc}") from None
        theorem = ScenarioTheorem(
            name=name,
            initial_state=_canonical_or_warn(initial, f"{where} initial_state"),
        )
        for tdx, entry in enumerate(item.get("transitions") or []):
            twhere = f"{where} ({name}) transition #{tdx}"
            if not isinstance(entry, dict):
                raise ScenarioError(f"{twhere}: expected a mapping")
            try:
                state = _canonical_or_warn(str(entry["state"]), twhere)
                tactic = str(entry["tactic"]).strip()
                outcome = _parse_outcome(entry["outcome"], twhere)
            except KeyError as exc:
                raise ScenarioError(f"{twhere}: missing field {exc}") from None
            theorem.transitions[(state, tactic)] = outcome
            if "delay_ms" in entry:
                theorem.delays_ms[(state, tactic)] = float(entry["delay_ms"])
        if theorem.name in scenario.theorems:
            raise DuplicateTheorem(f"{origin}: duplicate theorem {theorem.name!r}")
        scenario.add(theorem)
    return scenario


def load_scenario(path: str | Path) -> Scenario:
    """Load a scenario document from a YAML file.

    Raises ScenarioError with line/column information on parse errors and
    DuplicateTheorem on repeated names. Non-canonical state texts are fixed
    up with a warning.
    """
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        position = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ScenarioError(f"{path}: parse error{position}: {exc}") from exc
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    return scenario_from_obj(doc if doc is not None else [], origin=str(path))


class ScenarioProver:
    """Deterministic prover over a Scenario; safe for concurrent sessions."""

    def __init__(self, scenario: Scenario):
        self._scenario = scenario
        self._live: set[str] = set()
        self._lock = threading.Lock()

    @property
    def live_sessions(self) -> int:
        with self._lock:
            return len(self._live)

    def open_session(self, theorem: Theorem) -> ProverSession:
        entry = self._scenario.theorems.get(theorem.lookup_key)
        if entry is None:
            raise TheoremNotFound(f"no scenario entry for {theorem.lookup_key!r}")
        session = ProverSession(
            session_id=uuid.uuid4().hex,
            theorem=theorem,
            initial_state=TacticState(entry.initial_state),
        )
        with self._lock:
            self._live.add(session.session_id)
        return session

    def apply_tactic(self, session: ProverSession, state: TacticState, tactic: Tactic) -> ApplyOutcome:
        if not session.open:
            raise SessionClosed(f"session for {session.theorem.name!r} is closed")
        entry = self._scenario.theorems[session.theorem.lookup_key]
        key = (state.text, tactic.text.strip())
        delay = entry.delays_ms.get(key)
        if delay:
            time.sleep(delay / 1000.0)
        outcome = entry.transitions.get(key)
        if outcome is None:
            return ApplyOutcome.failed(PROVER_ERROR, UNKNOWN_TACTIC_MESSAGE)
        kind, payload = outcome
        if kind == "proved":
            return ApplyOutcome.proved()
        if kind == "error":
            return ApplyOutcome.failed(PROVER_ERROR, payload)
        new_state = TacticState(payload)
        if new_state == state:
            return ApplyOutcome.failed(NO_PROGRESS)
        return ApplyOutcome.new_state(new_state)

    def close_session(self, session: ProverSession) -> None:
        session.open = False
        with self._lock:
            self._live.discard(session.session_id)
