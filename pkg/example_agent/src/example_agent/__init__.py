"""Reference external agent for the simulharness wire protocol.

Wraps any callable (source_tokens, style) -> target_tokens model behind the
INIT/HYPOTHESIZE/RESET/BYE message loop, with forced-prefix and
committed-constraint support. Ships with a deterministic reorder model; see
model.py for the callable contract to plug in a real one.
"""

from .model import EchoModel, ReorderModel, continue_from
from .server import AgentSession, serve_socket, serve_stream

__all__ = [
    "AgentSession",
    "EchoModel",
    "ReorderModel",
    "continue_from",
    "serve_socket",
    "serve_stream",
]
