"""Translation agents: a deterministic built-in toy model and clients for
external agents speaking the line-delimited wire protocol (see protocol.md).

The toy model realizes the SI/offline style contrast: the SI style maps the
source prefix token by token and drops function words; the offline style
keeps them and moves verbs toward the end of the sentence, recomputing from
scratch for every prefix so that early hypotheses are unstable.
"""

from __future__ import annotations

import json
import os
import selectors
import socket
import subprocess
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .core import AgentRequest, Hypothesis, canonical_json
from .errors import AgentError, ConfigError, DataError, ProtocolError

PROTOCOL_VERSION = 1

BUILTIN_TOY = "builtin_toy"
EXTERNAL_PROCESS = "external_process"
EXTERNAL_SOCKET = "external_socket"

SI_STYLE = "si"
OFFLINE_STYLE = "off"


@dataclass(frozen=True)
class ToyLexicon:
    """Word-by-word lexicon driving the toy translator.

    entries maps each source token to its target form; an empty target means
    the token contributes nothing in either style. function_words are dropped
    by the SI style only. verbs are the tokens the offline style moves toward
    the end, by at most reorder_window positions.
    """

    entries: Mapping[str, str]
    function_words: frozenset[str] = frozenset()
    verbs: frozenset[str] = frozenset()
    reorder_window: int = 2

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", dict(self.entries))
        object.__setattr__(self, "function_words", frozenset(self.function_words))
        object.__setattr__(self, "verbs", frozenset(self.verbs))
        if self.reorder_window < 0:
            raise ValueError("reorder_window must be >= 0")

    def lookup(self, token: str) -> str:
        """Target form for a source token; unknown tokens get a visible UNK form."""
        try:
            return self.entries[token]
        except KeyError:
            return f"UNK[{token}]"

    @classmethod
    def from_file(cls, path: str | Path) -> "ToyLexicon":
        path = Path(path)
        if not path.exists():
            raise DataError(f"lexicon file not found: {path}")
        try:
            rec = json.loads(path.read_text(encoding="utf-8"))
            return cls(
                entries=rec["entries"],
                function_words=frozenset(rec.get("function_words", ())),
                verbs=frozenset(rec.get("verbs", ())),
                reorder_window=rec.get("reorder_window", 2),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad lexicon file {path}: {exc}") from exc


def _reorder_verbs_late(pairs: list[tuple[str, bool]], window: int) -> list[str]:
    """Bubble each verb rightward past following non-verbs, window steps max."""
    toks = list(pairs)
    for i in range(len(toks) - 1, -1, -1):
        if not toks[i][1]:
            continue
        j = i
        while j + 1 < len(toks) and not toks[j + 1][1] and j - i < window:
            toks[j], toks[j + 1] = toks[j + 1], toks[j]
            j += 1
    return [tok for tok, _ in toks]


def toy_translate(prefix: Sequence[str], style: str, lexicon: ToyLexicon) -> Hypothesis:
    """Translate a source prefix in the requested style.

    SI output is monotonic and prefix-stable; offline output is recomputed
    from scratch per prefix with verb-late reordering.
    """
    if style not in (SI_STYLE, OFFLINE_STYLE):
        raise AgentError(f"unknown toy style {style!r}")
    if style == SI_STYLE:
        tokens = [
            lexicon.lookup(tok)
            for tok in prefix
            if tok not in lexicon.function_words and lexicon.lookup(tok) != ""
        ]
    else:
        mapped = [
            (lexicon.lookup(tok), tok in lexicon.verbs)
            for tok in prefix
            if lexicon.lookup(tok) != ""
        ]
        tokens = _reorder_verbs_late(mapped, lexicon.reorder_window)
    return Hypothesis(tokens=tuple(tokens), segments_consumed=len(prefix))


def constrain_to_committed(
    hypothesis: Sequence[str], committed: Sequence[str]
) -> tuple[str, ...]:
    """Continue from a committed prefix the hypothesis no longer extends.

    Keeps the committed tokens and appends the hypothesis tokens not already
    accounted for by them (multiset difference, hypothesis order preserved).
    """
    hypothesis = tuple(hypothesis)
    committed = tuple(committed)
    if hypothesis[: len(committed)] == committed:
        return hypothesis
    budget = Counter(committed)
    tail = []
    for tok in hypothesis:
        if budget[tok] > 0:
            budget[tok] -= 1
        else:
            tail.append(tok)
    return committed + tuple(tail)


class Agent:
    """Synchronous hypothesis provider driven by the session engine."""

    def reset(self) -> None:
        """Clear per-utterance state before a new session."""

    def hypothesize(self, request: AgentRequest) -> tuple[str, ...]:
        raise NotImplementedError

    def close(self) -> None:
        """Release any transport resources."""


class BuiltinToyAgent(Agent):
    """In-process deterministic toy translator.

    The forced prefix selects the output style via the tag table agreed at
    construction; an empty forced prefix falls back to default_style.
    """

    def __init__(
        self,
        lexicon: ToyLexicon,
        tags: Mapping[str, Sequence[str]] | None = None,
        default_style: str = OFFLINE_STYLE,
    ) -> None:
        self.lexicon = lexicon
        tags = tags if tags is not None else {SI_STYLE: ("<si>",), OFFLINE_STYLE: ("<off>",)}
        self._styles_by_forms = {tuple(forms): style for style, forms in tags.items()}
        self.default_style = default_style

    def hypothesize(self, request: AgentRequest) -> tuple[str, ...]:
        if request.forced_prefix:
            try:
                style = self._styles_by_forms[request.forced_prefix]
            except KeyError:
                raise AgentError(
                    f"forced prefix {list(request.forced_prefix)} does not match "
                    f"any agreed style tag"
                ) from None
        else:
            style = self.default_style
        base = toy_translate(request.source_prefix, style, self.lexicon).tokens
        base = constrain_to_committed(base, request.committed)
        return request.forced_prefix + base


@dataclass(frozen=True)
class AgentHandle:
    """Where an agent lives and how to reach it; exactly one transport."""

    kind: str
    lexicon_path: str | None = None
    command: tuple[str, ...] = ()
    host: str | None = None
    port: int | None = None
    timeout_s: float = 30.0
    default_style: str = OFFLINE_STYLE

    def __post_init__(self) -> None:
        object.__setattr__(self, "command", tuple(self.command))
        if self.kind == BUILTIN_TOY:
            if not self.lexicon_path:
                raise ConfigError("builtin toy agent requires a lexicon path")
            if self.command or self.host is not None:
                raise ConfigError("builtin toy agent takes no transport settings")
        elif self.kind == EXTERNAL_PROCESS:
            if not self.command:
                raise ConfigError("external process agent requires a command")
            if self.host is not None or self.port is not None:
                raise ConfigError("external process agent takes no socket settings")
        elif self.kind == EXTERNAL_SOCKET:
            if self.host is None or self.port is None:
                raise ConfigError("external socket agent requires host and port")
            if self.command:
                raise ConfigError("external socket agent takes no command")
        else:
            raise ConfigError(f"unknown agent kind {self.kind!r}")


def connect(handle: AgentHandle, tags: Mapping[str, Sequence[str]] | None = None) -> Agent:
    """Turn a handle into a live agent, performing the handshake if remote."""
    if handle.kind == BUILTIN_TOY:
        lexicon = ToyLexicon.from_file(handle.lexicon_path)
        return BuiltinToyAgent(lexicon, tags=tags, default_style=handle.default_style)
    if handle.kind == EXTERNAL_PROCESS:
        return ExternalProcessAgent(handle.command, tags=tags, timeout_s=handle.timeout_s)
    return ExternalSocketAgent(
        handle.host, handle.port, tags=tags, timeout_s=handle.timeout_s
    )


# ---------------------------------------------------------------------------
# Wire protocol client (newline-delimited JSON records, UTF-8).
# ---------------------------------------------------------------------------

class _PipeChannel:
    """Line framing over a subprocess stdin/stdout pair with read timeouts."""

    def __init__(self, proc: subprocess.Popen, timeout_s: float) -> None:
        self._proc = proc
        self._timeout_s = timeout_s
        self._buf = b""
        self._sel = selectors.DefaultSelector()
        self._sel.register(proc.stdout, selectors.EVENT_READ)

    def send_line(self, line: bytes) -> None:
        try:
            self._proc.stdin.write(line + b"\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolError(f"agent process pipe closed: {exc}") from exc

    def recv_line(self) -> bytes:
        while b"\n" not in self._buf:
            if not self._sel.select(self._timeout_s):
                raise ProtocolError(
                    f"agent did not respond within {self._timeout_s} s"
                )
            chunk = os.read(self._proc.stdout.fileno(), 65536)
            if not chunk:
                raise ProtocolError("agent process closed its output stream")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line

    def close(self) -> None:
        self._sel.close()
        proc = self._proc
        for stream in (proc.stdin, proc.stdout):
            try:
                stream.close()
            except OSError:
                pass
        try:
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()


class _SocketChannel:
    """Line framing over a TCP connection."""

    def __init__(self, sock: socket.socket, timeout_s: float) -> None:
        self._sock = sock
        self._sock.settimeout(timeout_s)
        self._timeout_s = timeout_s
        self._buf = b""

    def send_line(self, line: bytes) -> None:
        try:
            self._sock.sendall(line + b"\n")
        except OSError as exc:
            raise ProtocolError(f"agent socket closed: {exc}") from exc

    def recv_line(self) -> bytes:
        while b"\n" not in self._buf:
            try:
                chunk = self._sock.recv(65536)
            except socket.timeout:
                raise ProtocolError(
                    f"agent did not respond within {self._timeout_s} s"
                ) from None
            if not chunk:
                raise ProtocolError("agent closed the connection")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


class _WireAgent(Agent):
    """Shared request/response logic for both external transports."""

    def __init__(self, tags: Mapping[str, Sequence[str]] | None) -> None:
        tags = tags if tags is not None else {SI_STYLE: ("<si>",), OFFLINE_STYLE: ("<off>",)}
        self._tags = {style: list(forms) for style, forms in tags.items()}
        self._channel = None  # set by subclass before handshake

    def _roundtrip(self, message: dict) -> dict:
        self._channel.send_line(encode_message(message))
        reply = decode_message(self._channel.recv_line())
        if reply.get("type") == "ERROR":
            raise ProtocolError(
                f"agent error {reply.get('code', '?')}: {reply.get('message', '')}"
            )
        return reply

    def _handshake(self) -> None:
        reply = self._roundtrip(
            {"type": "INIT", "version": PROTOCOL_VERSION, "tags": self._tags}
        )
        if reply.get("type") != "READY":
            raise ProtocolError(f"expected READY after INIT, got {reply.get('type')!r}")
        if reply.get("version") != PROTOCOL_VERSION:
            raise ProtocolError(
                f"protocol version mismatch: harness speaks {PROTOCOL_VERSION}, "
                f"agent speaks {reply.get('version')!r}"
            )

    def reset(self) -> None:
        reply = self._roundtrip({"type": "RESET"})
        if reply.get("type") != "READY":
            raise ProtocolError(f"expected READY after RESET, got {reply.get('type')!r}")

    def hypothesize(self, request: AgentRequest) -> tuple[str, ...]:
        reply = self._roundtrip(
            {
                "type": "HYPOTHESIZE",
                "source_prefix": list(request.source_prefix),
                "forced_prefix": list(request.forced_prefix),
                "committed": list(request.committed),
            }
        )
        if reply.get("type") != "HYPOTHESIS":
            raise ProtocolError(
                f"expected HYPOTHESIS, got {reply.get('type')!r}"
            )
        tokens = reply.get("tokens")
        if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
            raise ProtocolError("HYPOTHESIS tokens must be a list of strings")
        return tuple(tokens)

    def close(self) -> None:
        if self._channel is None:
            return
        try:
            self._channel.send_line(encode_message({"type": "BYE"}))
            self._channel.recv_line()
        except ProtocolError:
            pass
        finally:
            self._channel.close()
            self._channel = None


class ExternalProcessAgent(_WireAgent):
    """Client for an agent subprocess speaking the protocol on stdin/stdout."""

    def __init__(
        self,
        command: Sequence[str],
        tags: Mapping[str, Sequence[str]] | None = None,
        timeout_s: float = 30.0,
    ) -> None:
        super().__init__(tags)
        try:
            self._proc = subprocess.Popen(
                list(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
            )
        except OSError as exc:
            raise AgentError(f"failed to start agent {list(command)}: {exc}") from exc
        self._channel = _PipeChannel(self._proc, timeout_s)
        self._handshake()


class ExternalSocketAgent(_WireAgent):
    """Client for an agent reachable over TCP."""

    def __init__(
        self,
        host: str,
        port: int,
        tags: Mapping[str, Sequence[str]] | None = None,
        timeout_s: float = 30.0,
    ) -> None:
        super().__init__(tags)
        try:
            sock = socket.create_connection((host, port), timeout=timeout_s)
        except OSError as exc:
            raise AgentError(f"failed to connect to {host}:{port}: {exc}") from exc
        self._channel = _SocketChannel(sock, timeout_s)
        self._handshake()


def encode_message(message: dict) -> bytes:
    """Canonical wire encoding: compact JSON, sorted keys, raw UTF-8."""
    return canonical_json(message).encode("utf-8")


def decode_message(line: bytes) -> dict:
    try:
        message = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"malformed message from agent: {exc}") from exc
    if not isinstance(message, dict) or "type" not in message:
        raise ProtocolError("agent message must be an object with a 'type' field")
    return message


def golden_transcript_dir() -> Path:
    """Directory with the frozen wire-protocol transcripts."""
    return Path(__file__).parent / "data" / "golden"


def fixture_dir() -> Path:
    """Directory with the bundled toy lexicon and corpus."""
    return Path(__file__).parent / "data" / "fixtures"
