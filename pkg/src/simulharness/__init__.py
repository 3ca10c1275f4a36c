"""Model-agnostic simultaneous translation harness.

Streaming decoding policies (Local Agreement, wait-k) with style-tag
controlled output, latency metrics (AL, ATD), quality metrics (BLEU, length
ratio), repetition-removal post-processing, and training-data preparation,
all verifiable end-to-end with a built-in deterministic toy translator.
"""

from .core import (
    AgentRequest,
    Hypothesis,
    ReadEvent,
    SessionLog,
    TimedSegment,
    TimedUtterance,
    WriteEvent,
    run_session,
)
from .policies import PolicyConfig, StyleTagChoice

__version__ = "0.1.0"

__all__ = [
    "AgentRequest",
    "Hypothesis",
    "PolicyConfig",
    "ReadEvent",
    "SessionLog",
    "StyleTagChoice",
    "TimedSegment",
    "TimedUtterance",
    "WriteEvent",
    "run_session",
    "__version__",
]
