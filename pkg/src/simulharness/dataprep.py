"""Corpus ingestion and training-mixture construction.

Covers alignment filtering, the five fine-tuning data conditions (offline
only, SI only, mixed, mixed with style tags, mixed with style tags and SI
upsampling), and prefix-to-prefix pair extraction from growing source
prefixes against a full-sentence translation agent.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .agents import Agent
from .core import AgentRequest, TimedUtterance, canonical_json
from .errors import AgentError, DataError
from .policies import StyleTagChoice, longest_common_prefix
from .textproc import OFF_TAG, SI_TAG, TagSpec, prepend_tag

OFFLINE_FT = "offline_ft"
SI_FT = "si_ft"
MIXED_FT = "mixed_ft"
MIXED_FT_STYLE = "mixed_ft_style"
MIXED_FT_STYLE_UP = "mixed_ft_style_up"

CONDITIONS = (OFFLINE_FT, SI_FT, MIXED_FT, MIXED_FT_STYLE, MIXED_FT_STYLE_UP)

_TAGGED_CONDITIONS = (MIXED_FT_STYLE, MIXED_FT_STYLE_UP)


@dataclass(frozen=True)
class CorpusExample:
    """One (source, target, style-origin) training triple."""

    id: str
    source: tuple[str, ...]
    target: str
    origin: str  # "si" | "off"
    split: str  # "train" | "dev" | "test"
    times_ms: tuple[int, ...] | None = None  # per-token source durations

    def __post_init__(self) -> None:
        object.__setattr__(self, "source", tuple(self.source))
        if self.times_ms is not None:
            object.__setattr__(self, "times_ms", tuple(self.times_ms))
        if self.origin not in ("si", "off"):
            raise ValueError(f"origin must be 'si' or 'off', got {self.origin!r}")
        if self.split not in ("train", "dev", "test"):
            raise ValueError(f"bad split {self.split!r}")
        if not self.target:
            raise ValueError(f"example {self.id!r} has an empty target")

    @property
    def fully_timed(self) -> bool:
        return self.times_ms is not None and len(self.times_ms) == len(self.source)


def example_to_record(ex: CorpusExample) -> dict:
    return {
        "id": ex.id,
        "source": list(ex.source),
        "target": ex.target,
        "origin": ex.origin,
        "split": ex.split,
        "times_ms": list(ex.times_ms) if ex.times_ms is not None else None,
    }


def example_from_record(rec: dict) -> CorpusExample:
    try:
        return CorpusExample(
            id=rec["id"],
            source=tuple(rec["source"]),
            target=rec["target"],
            origin=rec["origin"],
            split=rec["split"],
            times_ms=tuple(rec["times_ms"]) if rec.get("times_ms") is not None else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"bad example record ({rec.get('id', '?')!r}): {exc}") from exc


def load_examples(path: str | Path) -> list[CorpusExample]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"examples file not found: {path}")
    out = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            out.append(example_from_record(rec))
    return out


def write_examples(path: str | Path, examples: Iterable[CorpusExample]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(canonical_json(example_to_record(ex)) + "\n")


def filter_unaligned(examples: Sequence[CorpusExample]) -> list[CorpusExample]:
    """Keep only examples whose source tokens all carry timing information.

    Retained examples pass through untouched.
    """
    return [ex for ex in examples if ex.fully_timed]


@dataclass(frozen=True)
class MixtureConfig:
    condition: str
    upsample_factor: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.condition not in CONDITIONS:
            raise ValueError(f"unknown mixture condition {self.condition!r}")
        if self.upsample_factor < 1:
            raise ValueError(f"upsample_factor must be >= 1, got {self.upsample_factor}")


def upsample_factor(n_offline: int, n_si: int) -> int:
    """Integer repetition factor that balances SI volume against offline."""
    if n_si <= 0:
        raise ValueError("no SI examples to upsample")
    return max(1, round(n_offline / n_si))


@dataclass
class MixtureResult:
    lines: list[str]
    manifest: dict


def _mixture_line(ex: CorpusExample, tag: TagSpec | None) -> str:
    target = prepend_tag(ex.target, tag) if tag is not None else ex.target
    return " ".join(ex.source) + "\t" + target


def build_mixture(
    examples: Sequence[CorpusExample],
    config: MixtureConfig,
    si_tag: TagSpec = SI_TAG,
    off_tag: TagSpec = OFF_TAG,
) -> MixtureResult:
    """Assemble one training condition into tab-separated source/target lines.

    Styles-tagged conditions prepend the origin's tag to each target; the
    upsampled condition additionally repeats every SI example
    config.upsample_factor times. Line order is a seeded permutation.
    """
    offline = [ex for ex in examples if ex.origin == "off"]
    si = [ex for ex in examples if ex.origin == "si"]

    needs_off = config.condition in (OFFLINE_FT, MIXED_FT, MIXED_FT_STYLE, MIXED_FT_STYLE_UP)
    needs_si = config.condition in (SI_FT, MIXED_FT, MIXED_FT_STYLE, MIXED_FT_STYLE_UP)
    if needs_off and not offline:
        raise DataError(f"condition {config.condition!r} needs offline examples")
    if needs_si and not si:
        raise DataError(f"condition {config.condition!r} needs SI examples")

    tagged = config.condition in _TAGGED_CONDITIONS
    si_repeat = config.upsample_factor if config.condition == MIXED_FT_STYLE_UP else 1

    lines: list[str] = []
    n_off_lines = n_si_lines = 0
    if needs_off:
        for ex in offline:
            lines.append(_mixture_line(ex, off_tag if tagged else None))
        n_off_lines = len(offline)
    if needs_si:
        for _ in range(si_repeat):
            for ex in si:
                lines.append(_mixture_line(ex, si_tag if tagged else None))
        n_si_lines = len(si) * si_repeat

    random.Random(config.seed).shuffle(lines)
    manifest = {
        "condition": config.condition,
        "upsample_factor": config.upsample_factor,
        "seed": config.seed,
        "line_counts": {
            "offline": n_off_lines,
            "si": n_si_lines,
            "total": len(lines),
        },
    }
    return MixtureResult(lines=lines, manifest=manifest)


def write_mixture(
    path: str | Path, result: MixtureResult, manifest_path: str | Path | None = None
) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for line in result.lines:
            fh.write(line + "\n")
    manifest_path = (
        Path(manifest_path) if manifest_path is not None else path.with_suffix(".manifest.json")
    )
    manifest_path.write_text(canonical_json(result.manifest) + "\n", encoding="utf-8")


def extract_prefix_pairs(
    utterance: TimedUtterance,
    agent: Agent,
    style: StyleTagChoice,
) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    """Prefix-to-prefix pairs from one utterance via intermediate translations.

    For each growing source prefix the agent's full hypothesis is compared
    against the full-sentence translation; the pair keeps the part both
    agree on. Pairs with an empty target or a target that does not strictly
    extend the previously emitted one are skipped.
    """
    forced = style.tag_token_forms
    prefix: list[str] = []
    hypotheses: list[tuple[str, ...]] = []
    for seg in utterance.segments:
        prefix.extend(seg.payload)
        raw = tuple(
            agent.hypothesize(
                AgentRequest(source_prefix=tuple(prefix), forced_prefix=forced)
            )
        )
        if raw[: len(forced)] != forced:
            raise AgentError(
                f"utterance {utterance.id!r}, segment {seg.index}: hypothesis "
                f"does not start with the forced prefix"
            )
        hypotheses.append(raw[len(forced):])

    full = hypotheses[-1]
    pairs: list[tuple[tuple[str, ...], tuple[str, ...]]] = []
    last_target: tuple[str, ...] | None = None
    source_prefix: list[str] = []
    for seg, hyp in zip(utterance.segments, hypotheses):
        source_prefix.extend(seg.payload)
        target = longest_common_prefix([hyp, full])
        if not target:
            continue
        if last_target is not None and not (
            len(target) > len(last_target) and target[: len(last_target)] == last_target
        ):
            continue
        pairs.append((tuple(source_prefix), target))
        last_target = target
    return pairs


def extract_corpus_prefix_pairs(
    utterances: Sequence[TimedUtterance],
    agent: Agent,
    style: StyleTagChoice,
    on_error: str = "skip",
) -> dict[str, list[tuple[tuple[str, ...], tuple[str, ...]]]]:
    """Run prefix extraction per utterance, ordered by utterance id.

    Agent failures discard that utterance's partial results; with
    on_error="raise" they abort instead.
    """
    results: dict[str, list[tuple[tuple[str, ...], tuple[str, ...]]]] = {}
    for utt in sorted(utterances, key=lambda u: u.id):
        agent.reset()
        try:
            results[utt.id] = extract_prefix_pairs(utt, agent, style)
        except AgentError:
            if on_error == "raise":
                raise
            results[utt.id] = []
    return results


def prefix_pairs_to_lines(
    pairs_by_id: dict[str, list[tuple[tuple[str, ...], tuple[str, ...]]]],
) -> list[str]:
    """Tab-separated training lines (token sequences space-joined)."""
    lines = []
    for utt_id in sorted(pairs_by_id):
        for source, target in pairs_by_id[utt_id]:
            lines.append(" ".join(source) + "\t" + " ".join(target))
    return lines
