"""Adapter for a live prover spoken to over a line-delimited JSON protocol.

One JSON object per line on the bridge subprocess's stdin/stdout. Requests
carry {id, op, ...} with op in {"init", "apply", "close"}; responses carry
{id, status, ...} with status in {"open", "proved", "error"}. Responses are
matched to requests by id, so out-of-order or unsolicited lines are
tolerated. State identity on the wire is the canonical-state digest
(TacticState.id); both ends derive it from the state text.
"""

from __future__ import annotations

import json
import logging
import shlex
import subprocess
import threading
import uuid

from .core import ApplyOutcome, BACKEND_TIMEOUT, PROVER_ERROR, NO_PROGRESS, TacticState, Tactic, Theorem
from .prover import BackendUnavailable, ProverSession, SessionClosed, TheoremNotFound

logger = logging.getLogger(__name__)


class _Waiter:
    __slots__ = ("event", "response")

    def __init__(self) -> None:
        self.event = threading.Event()
        self.response: dict | None = None


class WireProver:
    """Drives a prover bridge subprocess over the line protocol.

    Multiple sessions may issue requests concurrently; a reader thread
    dispatches responses by id. Per-call timeouts surface as
    failed(backend-timeout) outcomes on apply and as BackendUnavailable on
    init.
    """

    def __init__(self, command: str | list[str], per_call_timeout_secs: float = 60.0):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise BackendUnavailable(f"cannot start prover bridge {argv!r}: {exc}") from exc
        self._timeout = per_call_timeout_secs
        self._write_lock = threading.Lock()
        self._pending_lock = threading.Lock()
        self._pending: dict[int, _Waiter] = {}
        self._next_id = 0
        self._closed = False
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    # -- protocol plumbing ------------------------------------------------

    def _read_loop(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            line = line.strip()
            if not line:
                continue
            try:
                message = json.loads(line)
            except json.JSONDecodeError:
                logger.warning("dropping unparseable bridge line: %.120s", line)
                continue
            with self._pending_lock:
                waiter = self._pending.pop(message.get("id"), None)
            if waiter is None:
                logger.debug("dropping response for unknown id %r", message.get("id"))
                continue
            waiter.response = message
            waiter.event.set()
        # EOF: fail everything still in flight.
        with self._pending_lock:
            pending, self._pending = self._pending, {}
        for waiter in pending.values():
            waiter.event.set()

    def _request(self, payload: dict, timeout: float | None) -> dict | None:
        """Send one request and wait for its response; None on timeout/EOF."""
        with self._pending_lock:
            self._next_id += 1
            request_id = self._next_id
            waiter = _Waiter()
            self._pending[request_id] = waiter
        payload = {"id": request_id, **payload}
        line = json.dumps(payload, ensure_ascii=False)
        try:
            with self._write_lock:
                assert self._proc.stdin is not None
                self._proc.stdin.write(line + "\n")
                self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            with self._pending_lock:
                self._pending.pop(request_id, None)
            raise BackendUnavailable(f"prover bridge is gone: {exc}") from exc
        if not waiter.event.wait(timeout if timeout is not None else self._timeout):
            with self._pending_lock:
                self._pending.pop(request_id, None)
            return None
        return waiter.response

    # -- backend contract --------------------------------------------------

    def open_session(self, theorem: Theorem) -> ProverSession:
        response = self._request(
            {
                "op": "init",
                "theorem": {
                    "name": theorem.name,
                    "statement": theorem.statement,
                    "env": theorem.lookup_key,
                },
            },
            timeout=None,
        )
        if response is None:
            raise BackendUnavailable(f"no init response for {theorem.name!r}")
        if response.get("status") == "error":
            raise TheoremNotFound(response.get("message", f"cannot init {theorem.name!r}"))
        state = response.get("state")
        if response.get("status") != "open" or not isinstance(state, str):
            raise BackendUnavailable(f"malformed init response: {response!r}")
        return ProverSession(
            session_id=uuid.uuid4().hex,
            theorem=theorem,
            initial_state=TacticState(state),
        )

    def apply_tactic(self, session: ProverSession, state: TacticState, tactic: Tactic) -> ApplyOutcome:
        if not session.open:
            raise SessionClosed(f"session for {session.theorem.name!r} is closed")
        response = self._request(
            {"op": "apply", "state_id": state.id, "tactic": tactic.text},
            timeout=None,
        )
        if response is None:
            if self._proc.poll() is not None:
                raise BackendUnavailable("prover bridge exited")
            return ApplyOutcome.failed(BACKEND_TIMEOUT, f"no response within {self._timeout:.0f}s")
        status = response.get("status")
        if status == "proved":
            return ApplyOutcome.proved()
        if status == "open" and isinstance(response.get("state"), str):
            new_state = TacticState(response["state"])
            if new_state == state:
                return ApplyOutcome.failed(NO_PROGRESS)
            return ApplyOutcome.new_state(new_state)
        return ApplyOutcome.failed(PROVER_ERROR, str(response.get("message", "")))

    def close_session(self, session: ProverSession) -> None:
        if not session.open:
            return
        session.open = False
        try:
            # Short wait: the ack is best-effort (payload ignored).
            self._request({"op": "close"}, timeout=5.0)
        except BackendUnavailable:
            pass

    def shutdown(self) -> None:
        """Terminate the bridge subprocess."""
        if self._closed:
            return
        self._closed = True
        try:
            if self._proc.stdin:
                self._proc.stdin.close()
        except OSError:
            pass
        try:
            self._proc.wait(timeout=5.0)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait(timeout=5.0)

    def __enter__(self) -> "WireProver":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.shutdown()
