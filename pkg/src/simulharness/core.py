"""Domain types and the streaming session engine.

A session replays the timed segments of one utterance against a decoding
policy and a translation agent, recording every read and every committed
token with its simulated timestamp. Computation time is idealized to zero:
writes happen at the end time of the most recent read.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence, Union

from .errors import AgentError, DataError, PolicyDivergenceError

if TYPE_CHECKING:
    from .agents import Agent
    from .policies import PolicyConfig, StyleTagChoice


def canonical_json(obj) -> str:
    """Serialize with a byte-stable layout (sorted keys, no spaces, raw UTF-8)."""
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"), sort_keys=True)


@dataclass(frozen=True)
class TimedSegment:
    """A fixed time span of source speech and the tokens that end inside it."""

    index: int
    duration_ms: int
    payload: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"segment index must be >= 0, got {self.index}")
        if self.duration_ms <= 0:
            raise ValueError(f"segment duration must be positive, got {self.duration_ms}")
        object.__setattr__(self, "payload", tuple(self.payload))


@dataclass(frozen=True)
class TimedUtterance:
    """One source utterance as ordered timed segments plus per-style references."""

    id: str
    segments: tuple[TimedSegment, ...]
    ref_si: tuple[str, ...] | None = None
    ref_off: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise ValueError(f"utterance {self.id!r} has no segments")
        for pos, seg in enumerate(self.segments):
            if seg.index != pos:
                raise ValueError(
                    f"utterance {self.id!r}: segment indices must be contiguous "
                    f"from 0, found {seg.index} at position {pos}"
                )
        if self.ref_si is not None:
            object.__setattr__(self, "ref_si", tuple(self.ref_si))
        if self.ref_off is not None:
            object.__setattr__(self, "ref_off", tuple(self.ref_off))

    @property
    def total_ms(self) -> int:
        return sum(seg.duration_ms for seg in self.segments)

    @property
    def source_tokens(self) -> tuple[str, ...]:
        return tuple(tok for seg in self.segments for tok in seg.payload)

    def reference(self, style: str) -> tuple[str, ...] | None:
        return self.ref_si if style == "si" else self.ref_off


@dataclass(frozen=True)
class Hypothesis:
    """A full target-side hypothesis generated from a source prefix."""

    tokens: tuple[str, ...]
    segments_consumed: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))


@dataclass(frozen=True)
class AgentRequest:
    """One hypothesis request: source prefix, forced tokens, committed constraint."""

    source_prefix: tuple[str, ...]
    forced_prefix: tuple[str, ...] = ()
    committed: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "source_prefix", tuple(self.source_prefix))
        object.__setattr__(self, "forced_prefix", tuple(self.forced_prefix))
        object.__setattr__(self, "committed", tuple(self.committed))


@dataclass(frozen=True)
class ReadEvent:
    segment_index: int
    end_time_ms: int


@dataclass(frozen=True)
class WriteEvent:
    token: str
    emit_time_ms: int


Event = Union[ReadEvent, WriteEvent]


@dataclass
class SessionLog:
    """Ordered read/write record of one session; input to the latency metrics.

    segment_token_counts carries the per-segment payload sizes so input-token
    end times can be reconstructed from the log alone.
    """

    events: list[Event] = field(default_factory=list)
    source_total_ms: int = 0
    segment_token_counts: tuple[int, ...] = ()
    finished: bool = False

    def reads(self) -> list[ReadEvent]:
        return [e for e in self.events if isinstance(e, ReadEvent)]

    def writes(self) -> list[WriteEvent]:
        return [e for e in self.events if isinstance(e, WriteEvent)]

    def committed_tokens(self) -> tuple[str, ...]:
        return tuple(e.token for e in self.events if isinstance(e, WriteEvent))

    def input_token_end_times(self) -> list[float]:
        """End time of every input token, segment spans evenly subdivided."""
        ends: list[float] = []
        start = 0
        for read, count in zip(self.reads(), self.segment_token_counts):
            dur = read.end_time_ms - start
            for pos in range(1, count + 1):
                ends.append(start + dur * pos / count)
            start = read.end_time_ms
        return ends

    def validate(self) -> None:
        """Raise ValueError if any SessionLog invariant is violated."""
        last_t = 0
        last_read_t = None
        expected_idx = 0
        for ev in self.events:
            t = ev.end_time_ms if isinstance(ev, ReadEvent) else ev.emit_time_ms
            if t < last_t:
                raise ValueError("event timestamps must be non-decreasing")
            last_t = t
            if isinstance(ev, ReadEvent):
                if ev.segment_index != expected_idx:
                    raise ValueError("reads must appear in segment order")
                expected_idx += 1
                last_read_t = ev.end_time_ms
            else:
                if last_read_t is None:
                    raise ValueError("write before any read")
                if ev.emit_time_ms != last_read_t:
                    raise ValueError(
                        "write timestamp must equal the most recent read time"
                    )
        if self.events and last_t > self.source_total_ms:
            raise ValueError("event timestamp exceeds total source duration")
        reads = self.reads()
        if reads and reads[-1].end_time_ms > self.source_total_ms:
            raise ValueError("read beyond total source duration")
        if len(self.segment_token_counts) < len(reads):
            raise ValueError("missing segment token counts")

    def to_record(self) -> dict:
        evs = []
        for ev in self.events:
            if isinstance(ev, ReadEvent):
                evs.append({"t": "read", "segment": ev.segment_index, "ms": ev.end_time_ms})
            else:
                evs.append({"t": "write", "token": ev.token, "ms": ev.emit_time_ms})
        return {
            "events": evs,
            "source_total_ms": self.source_total_ms,
            "segment_token_counts": list(self.segment_token_counts),
            "finished": self.finished,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_record())

    @classmethod
    def from_record(cls, rec: dict) -> "SessionLog":
        events: list[Event] = []
        for ev in rec["events"]:
            if ev["t"] == "read":
                events.append(ReadEvent(ev["segment"], ev["ms"]))
            else:
                events.append(WriteEvent(ev["token"], ev["ms"]))
        return cls(
            events=events,
            source_total_ms=rec["source_total_ms"],
            segment_token_counts=tuple(rec["segment_token_counts"]),
            finished=rec["finished"],
        )


def run_session(
    utterance: TimedUtterance,
    policy: "PolicyConfig",
    agent: "Agent",
    style: "StyleTagChoice",
) -> SessionLog:
    """Replay one utterance through a policy/agent pair.

    After every read the agent produces a full hypothesis for the source
    prefix so far; the policy decides which new tokens to commit. After the
    final read the remaining tail of the last hypothesis is flushed in one
    step. The returned log satisfies all SessionLog invariants.
    """
    from . import policies

    log = SessionLog(
        source_total_ms=utterance.total_ms,
        segment_token_counts=tuple(len(s.payload) for s in utterance.segments),
    )
    state = policies.initial_state(policy)
    forced = style.tag_token_forms
    source_prefix: list[str] = []
    now = 0

    def emit(tokens: Sequence[str], at: int) -> None:
        for tok in tokens:
            log.events.append(WriteEvent(tok, at))
        if len(log.writes()) > policy.max_output_tokens:
            raise PolicyDivergenceError(
                f"utterance {utterance.id!r}: emitted more than "
                f"{policy.max_output_tokens} tokens; aborting session"
            )

    for seg in utterance.segments:
        now += seg.duration_ms
        log.events.append(ReadEvent(seg.index, now))
        source_prefix.extend(seg.payload)
        request = AgentRequest(
            source_prefix=tuple(source_prefix),
            forced_prefix=forced,
            committed=tuple(state.committed),
        )
        try:
            raw = tuple(agent.hypothesize(request))
        except AgentError as exc:
            raise AgentError(
                f"utterance {utterance.id!r}, segment {seg.index}: {exc}"
            ) from exc
        if raw[: len(forced)] != forced:
            raise AgentError(
                f"utterance {utterance.id!r}, segment {seg.index}: hypothesis "
                f"does not start with the forced prefix {list(forced)}"
            )
        hyp = Hypothesis(tokens=raw[len(forced):], segments_consumed=seg.index + 1)
        new_tokens, state = policies.step(state, hyp, segments_read=seg.index + 1)
        emit(new_tokens, now)

    new_tokens, state = policies.final_flush(state)
    emit(new_tokens, utterance.total_ms)
    log.finished = True
    return log


# ---------------------------------------------------------------------------
# Corpus file format: one utterance per line, self-describing JSON record.
# ---------------------------------------------------------------------------

def utterance_to_record(utt: TimedUtterance) -> dict:
    return {
        "id": utt.id,
        "segments": [
            {"duration_ms": seg.duration_ms, "tokens": list(seg.payload)}
            for seg in utt.segments
        ],
        "ref_si": list(utt.ref_si) if utt.ref_si is not None else None,
        "ref_off": list(utt.ref_off) if utt.ref_off is not None else None,
    }


def utterance_from_record(rec: dict) -> TimedUtterance:
    try:
        segments = tuple(
            TimedSegment(index=i, duration_ms=s["duration_ms"], payload=tuple(s["tokens"]))
            for i, s in enumerate(rec["segments"])
        )
        return TimedUtterance(
            id=rec["id"],
            segments=segments,
            ref_si=tuple(rec["ref_si"]) if rec.get("ref_si") is not None else None,
            ref_off=tuple(rec["ref_off"]) if rec.get("ref_off") is not None else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"bad utterance record ({rec.get('id', '?')!r}): {exc}") from exc


def load_corpus(path: str | Path) -> list[TimedUtterance]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"corpus file not found: {path}")
    utterances = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            utterances.append(utterance_from_record(rec))
    return utterances


def write_corpus(path: str | Path, utterances: Iterable[TimedUtterance]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for utt in utterances:
            fh.write(canonical_json(utterance_to_record(utt)) + "\n")
