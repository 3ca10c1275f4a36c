"""Incremental decoding policies: Local Agreement and wait-k.

Both policies maintain a committed output prefix that only ever grows.
Local Agreement commits the longest common prefix of the last n full
hypotheses; wait-k reads k segments, then commits one token per read.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Sequence

from .errors import ConfigError

if TYPE_CHECKING:
    from .core import AgentRequest, Hypothesis

LOCAL_AGREEMENT = "local_agreement"
WAIT_K = "wait_k"


@dataclass(frozen=True)
class PolicyConfig:
    kind: str
    la_n: int = 2
    k: int = 1
    max_output_tokens: int = 512

    def __post_init__(self) -> None:
        if self.kind not in (LOCAL_AGREEMENT, WAIT_K):
            raise ConfigError(f"unknown policy kind {self.kind!r}")
        if self.la_n < 2:
            raise ConfigError(f"la_n must be >= 2, got {self.la_n}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.max_output_tokens < 1:
            raise ConfigError("max_output_tokens must be >= 1")


@dataclass(frozen=True)
class StyleTagChoice:
    """Which style tag to force-decode, and its exact tokenized form."""

    tag: str  # "si" | "off" | "none"
    tag_token_forms: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.tag not in ("si", "off", "none"):
            raise ConfigError(f"unknown style tag {self.tag!r}")
        object.__setattr__(self, "tag_token_forms", tuple(self.tag_token_forms))
        if self.tag == "none" and self.tag_token_forms:
            raise ConfigError("style 'none' takes no tag tokens")
        if self.tag != "none" and not self.tag_token_forms:
            raise ConfigError(f"style {self.tag!r} requires tag token forms")

    @classmethod
    def si(cls, forms: Sequence[str] = ("<si>",)) -> "StyleTagChoice":
        return cls(tag="si", tag_token_forms=tuple(forms))

    @classmethod
    def offline(cls, forms: Sequence[str] = ("<off>",)) -> "StyleTagChoice":
        return cls(tag="off", tag_token_forms=tuple(forms))

    @classmethod
    def none(cls) -> "StyleTagChoice":
        return cls(tag="none")


@dataclass(frozen=True)
class PolicyState:
    """Committed prefix plus policy-specific memory for one session."""

    config: PolicyConfig
    committed: tuple[str, ...] = ()
    history: tuple[tuple[str, ...], ...] = ()  # recent hypotheses, newest last
    last_hypothesis: tuple[str, ...] | None = None
    prefix_conflict: bool = False


def initial_state(config: PolicyConfig) -> PolicyState:
    return PolicyState(config=config)


def _is_prefix(prefix: Sequence[str], seq: Sequence[str]) -> bool:
    return len(prefix) <= len(seq) and tuple(seq[: len(prefix)]) == tuple(prefix)


def longest_common_prefix(seqs: Sequence[Sequence[str]]) -> tuple[str, ...]:
    if not seqs:
        return ()
    first = seqs[0]
    limit = min(len(s) for s in seqs)
    out = []
    for i in range(limit):
        tok = first[i]
        if all(s[i] == tok for s in seqs[1:]):
            out.append(tok)
        else:
            break
    return tuple(out)


def la_step(state: PolicyState, new_hypothesis: "Hypothesis") -> tuple[tuple[str, ...], PolicyState]:
    """Commit the agreed prefix of the last la_n hypotheses, minus committed.

    With fewer than la_n hypotheses nothing is committed. If the agreed
    prefix no longer extends the committed output the step commits nothing
    and flags the conflict; committed tokens are never retracted.
    """
    n = state.config.la_n
    hyp = tuple(new_hypothesis.tokens)
    history = (state.history + (hyp,))[-n:]
    state = replace(state, history=history, last_hypothesis=hyp)
    if len(history) < n:
        return (), state
    agreed = longest_common_prefix(history)
    if not _is_prefix(state.committed, agreed):
        return (), replace(state, prefix_conflict=True)
    delta = agreed[len(state.committed):]
    if delta:
        state = replace(state, committed=state.committed + delta)
    return delta, state


def wait_k_step(
    state: PolicyState, segments_read: int, hypothesis: "Hypothesis"
) -> tuple[tuple[str, ...], PolicyState]:
    """Commit one new token per segment once k segments have been read."""
    hyp = tuple(hypothesis.tokens)
    state = replace(state, last_hypothesis=hyp)
    if segments_read < state.config.k:
        return (), state
    if not _is_prefix(state.committed, hyp):
        return (), replace(state, prefix_conflict=True)
    if len(hyp) <= len(state.committed):
        return (), state
    delta = (hyp[len(state.committed)],)
    return delta, replace(state, committed=state.committed + delta)


def step(
    state: PolicyState, hypothesis: "Hypothesis", segments_read: int
) -> tuple[tuple[str, ...], PolicyState]:
    if state.config.kind == LOCAL_AGREEMENT:
        return la_step(state, hypothesis)
    return wait_k_step(state, segments_read, hypothesis)


def final_flush(state: PolicyState) -> tuple[tuple[str, ...], PolicyState]:
    """Emit the remaining tail of the last hypothesis beyond the committed prefix.

    An empty or conflicting final hypothesis flushes nothing; the committed
    output stands as-is.
    """
    hyp = state.last_hypothesis
    if hyp is None or not _is_prefix(state.committed, hyp):
        if hyp is not None:
            state = replace(state, prefix_conflict=True)
        return (), state
    delta = tuple(hyp[len(state.committed):])
    if delta:
        state = replace(state, committed=state.committed + delta)
    return delta, state


def apply_forced_prefix(request: "AgentRequest", style: StyleTagChoice) -> "AgentRequest":
    """Attach the style tag's token forms as the request's forced prefix.

    The forced tokens are decoded first by the agent and stripped from the
    hypothesis before the policy sees it, so they never reach the output.
    """
    from .core import AgentRequest

    if style.tag == "none":
        return request
    return AgentRequest(
        source_prefix=request.source_prefix,
        forced_prefix=style.tag_token_forms,
        committed=request.committed,
    )
