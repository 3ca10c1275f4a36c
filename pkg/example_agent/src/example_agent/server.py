"""Line-delimited protocol server: INIT/HYPOTHESIZE/RESET/BYE over a stream.

One JSON object per line, UTF-8. Replies are canonical JSON (sorted keys,
compact separators, unescaped non-ASCII) so conforming sessions are
byte-reproducible. Malformed input gets an ERROR reply and the session
continues.
"""

from __future__ import annotations

import json
import socket
from typing import BinaryIO, Callable, Sequence

from .model import continue_from

PROTOCOL_VERSION = 1

Model = Callable[[Sequence[str], str], list[str]]

BAD_MESSAGE = "message is not a JSON object with a type field"
HYPOTHESIZE_FIELDS = ("source_prefix", "forced_prefix", "committed")


def dumps(message: dict) -> str:
    return json.dumps(message, ensure_ascii=False, separators=(",", ":"), sort_keys=True)


def error(code: str, message: str) -> dict:
    return {"type": "ERROR", "code": code, "message": message}


class AgentSession:
    """Protocol state machine for one connection."""

    def __init__(self, model: Model, default_style: str = "off") -> None:
        self.model = model
        self.default_style = default_style
        self.initialized = False
        self.styles_by_forms: dict[tuple[str, ...], str] = {}

    def handle_line(self, line: str) -> dict:
        try:
            message = json.loads(line)
        except json.JSONDecodeError:
            return error("bad_message", BAD_MESSAGE)
        if not isinstance(message, dict) or not isinstance(message.get("type"), str):
            return error("bad_message", BAD_MESSAGE)
        kind = message["type"]
        if kind == "INIT":
            return self._init(message)
        if kind == "BYE":
            return {"type": "BYE"}
        if kind == "RESET":
            if not self.initialized:
                return error("not_ready", "INIT required before this message")
            return {"type": "READY", "version": PROTOCOL_VERSION}
        if kind == "HYPOTHESIZE":
            if not self.initialized:
                return error("not_ready", "INIT required before this message")
            return self._hypothesize(message)
        return error("unsupported", f"unknown message type: {kind}")

    def _init(self, message: dict) -> dict:
        if message.get("version") != PROTOCOL_VERSION:
            return error(
                "version_mismatch", f"agent speaks protocol version {PROTOCOL_VERSION}"
            )
        tags = message.get("tags")
        if not isinstance(tags, dict):
            return error("bad_message", "INIT requires a tags object")
        self.styles_by_forms = {
            tuple(forms): style for style, forms in tags.items()
        }
        self.initialized = True
        return {"type": "READY", "version": PROTOCOL_VERSION}

    def _hypothesize(self, message: dict) -> dict:
        for field in HYPOTHESIZE_FIELDS:
            value = message.get(field)
            if not isinstance(value, list) or not all(isinstance(t, str) for t in value):
                return error(
                    "bad_message",
                    "HYPOTHESIZE requires source_prefix, forced_prefix, committed",
                )
        forced = tuple(message["forced_prefix"])
        if forced:
            style = self.styles_by_forms.get(forced)
            if style is None:
                return error(
                    "bad_message", "forced prefix does not match any agreed style tag"
                )
        else:
            style = self.default_style
        hypothesis = self.model(message["source_prefix"], style)
        hypothesis = continue_from(hypothesis, message["committed"])
        return {"type": "HYPOTHESIS", "tokens": list(forced) + hypothesis}


def serve_stream(reader: BinaryIO, writer: BinaryIO, session: AgentSession) -> None:
    """Serve one session until BYE or end of input."""
    for raw in reader:
        line = raw.decode("utf-8", errors="replace").rstrip("\n")
        reply = session.handle_line(line)
        writer.write((dumps(reply) + "\n").encode("utf-8"))
        writer.flush()
        if reply.get("type") == "BYE":
            return


def serve_socket(port: int, session: AgentSession, host: str = "127.0.0.1") -> None:
    """Accept a single connection and serve it."""
    with socket.create_server((host, port)) as server:
        conn, _ = server.accept()
        with conn:
            reader = conn.makefile("rb")
            writer = conn.makefile("wb")
            serve_stream(reader, writer, session)
