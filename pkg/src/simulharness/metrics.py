"""Latency metrics (AL, ATD) over session logs and quality metrics (corpus
BLEU, length ratio, length-difference histogram) over hypotheses/references.

All functions here are pure: the same inputs give bit-identical outputs.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .core import SessionLog

BLEU_ORDER = 4
HIST_BUCKET_WIDTH = 5
HIST_CLAMP = 50


def average_lagging(log: SessionLog, ref_len: int) -> float | None:
    """Average Lagging in milliseconds.

    AL = (1/tau) * sum_{i=1..tau} [ d_i - (i-1) * total / ref_len ], where
    d_i is the source time consumed when output token i was written and tau
    is the index of the first token written at or after the full source
    duration (the output length if no such token exists). Empty output has
    no defined value and yields None. Negative results are returned as-is.
    """
    if ref_len <= 0:
        raise ValueError(f"ref_len must be positive, got {ref_len}")
    delays = [w.emit_time_ms for w in log.writes()]
    if not delays:
        return None
    total = log.source_total_ms
    tau = len(delays)
    for i, d in enumerate(delays, 1):
        if d >= total:
            tau = i
            break
    gamma = total / ref_len
    return sum(delays[i - 1] - (i - 1) * gamma for i in range(1, tau + 1)) / tau


def average_token_delay(log: SessionLog) -> float | None:
    """Average Token Delay in milliseconds.

    ATD = (1/|Y|) * sum_j [ T_out(y_j) - T_in(x_a(j)) ] with a(j) =
    min(j, r(j)), where r(j) counts the input tokens fully read when y_j was
    written and T_in subdivides each segment's span evenly across its tokens.
    A write that precedes every completed input token is measured from time
    zero. Empty output yields None.
    """
    writes = log.writes()
    if not writes:
        return None
    in_ends = log.input_token_end_times()
    total_delay = 0.0
    read_count = 0
    for j, w in enumerate(writes, 1):
        while read_count < len(in_ends) and in_ends[read_count] <= w.emit_time_ms:
            read_count += 1
        a = min(j, read_count)
        t_in = in_ends[a - 1] if a >= 1 else 0.0
        total_delay += w.emit_time_ms - t_in
    return total_delay / len(writes)


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(
    hypotheses: Sequence[Sequence[str]], references: Sequence[Sequence[str]]
) -> float:
    """Corpus-level BLEU on the 0..100 scale.

    Geometric mean of clipped n-gram precisions for n = 1..4 times the
    brevity penalty exp(1 - ref_len/hyp_len) applied when the hypothesis side
    is shorter. Any zero precision (including orders with no n-grams at all)
    gives 0. No smoothing.
    """
    if len(hypotheses) != len(references):
        raise ValueError(
            f"hypothesis/reference count mismatch: {len(hypotheses)} vs {len(references)}"
        )
    if not hypotheses:
        raise ValueError("empty corpus")
    hyp_len = sum(len(h) for h in hypotheses)
    ref_len = sum(len(r) for r in references)
    if hyp_len == 0:
        return 0.0
    log_sum = 0.0
    for n in range(1, BLEU_ORDER + 1):
        clipped = 0
        total = 0
        for hyp, ref in zip(hypotheses, references):
            counts = _ngram_counts(hyp, n)
            if not counts:
                continue
            ref_counts = _ngram_counts(ref, n)
            total += sum(counts.values())
            clipped += sum(min(c, ref_counts[g]) for g, c in counts.items())
        if clipped == 0 or total == 0:
            return 0.0
        log_sum += math.log(clipped / total)
    brevity = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * brevity * math.exp(log_sum / BLEU_ORDER)


def length_ratio(hypotheses: Sequence[str], references: Sequence[str]) -> float:
    """Total hypothesis characters over total reference characters."""
    if len(hypotheses) != len(references):
        raise ValueError("hypothesis/reference count mismatch")
    if not hypotheses:
        raise ValueError("empty corpus")
    ref_chars = sum(len(r) for r in references)
    if ref_chars == 0:
        raise ValueError("references have zero total length")
    return sum(len(h) for h in hypotheses) / ref_chars


def length_diff_histogram(
    hypotheses: Sequence[str],
    references: Sequence[str],
    bucket_width: int = HIST_BUCKET_WIDTH,
    clamp: int = HIST_CLAMP,
) -> dict:
    """Bucketed counts of per-sentence character-length differences.

    Differences (hyp - ref) are clamped to [-clamp, clamp] and counted into
    buckets of the given width; the top edge falls into the last bucket.
    """
    if len(hypotheses) != len(references):
        raise ValueError("hypothesis/reference count mismatch")
    n_buckets = (2 * clamp) // bucket_width
    counts = [0] * n_buckets
    for hyp, ref in zip(hypotheses, references):
        diff = max(-clamp, min(clamp, len(hyp) - len(ref)))
        idx = min((diff + clamp) // bucket_width, n_buckets - 1)
        counts[idx] += 1
    return {"lo": -clamp, "hi": clamp, "bucket_width": bucket_width, "counts": counts}


@dataclass
class LatencyReport:
    al_ms: float | None
    atd_ms: float | None
    al_tokens: float | None = None
    per_sentence: list[dict] = field(default_factory=list)


@dataclass
class QualityReport:
    bleu: float
    length_ratio: float
    length_diff_histogram: dict = field(default_factory=dict)


@dataclass
class MetricReport:
    """Per (system, segment size) metric record, serializable for plotting."""

    system: str
    segment_ms: int
    al_ms: float | None
    atd_ms: float | None
    bleu: float
    length_ratio: float
    al_tokens: float | None = None
    per_sentence: list[dict] = field(default_factory=list)
    length_diff_histogram: dict = field(default_factory=dict)

    FLAT_FIELDS = ("system", "segment_ms", "al_ms", "atd_ms", "bleu", "length_ratio")

    def flat_record(self) -> dict:
        return {name: getattr(self, name) for name in self.FLAT_FIELDS}

    def to_record(self) -> dict:
        rec = self.flat_record()
        rec.update(
            al_tokens=self.al_tokens,
            per_sentence=self.per_sentence,
            length_diff_histogram=self.length_diff_histogram,
        )
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "MetricReport":
        return cls(
            system=rec["system"],
            segment_ms=rec["segment_ms"],
            al_ms=rec["al_ms"],
            atd_ms=rec["atd_ms"],
            bleu=rec["bleu"],
            length_ratio=rec["length_ratio"],
            al_tokens=rec.get("al_tokens"),
            per_sentence=rec.get("per_sentence", []),
            length_diff_histogram=rec.get("length_diff_histogram", {}),
        )


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def reports_to_csv(reports: Sequence[MetricReport]) -> str:
    """Flat CSV, one row per (system, segment size); floats keep full precision."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(MetricReport.FLAT_FIELDS)
    for report in reports:
        writer.writerow(
            _format_value(report.flat_record()[name]) for name in MetricReport.FLAT_FIELDS
        )
    return out.getvalue()


def reports_from_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    parsed = []
    for row in rows:
        rec = {"system": row["system"], "segment_ms": int(row["segment_ms"])}
        for name in ("al_ms", "atd_ms", "bleu", "length_ratio"):
            rec[name] = float(row[name]) if row[name] != "" else None
        parsed.append(rec)
    return parsed


def reports_to_jsonl(reports: Sequence[MetricReport]) -> str:
    from .core import canonical_json

    return "".join(canonical_json(r.to_record()) + "\n" for r in reports)


def reports_from_jsonl(text: str) -> list[MetricReport]:
    return [
        MetricReport.from_record(json.loads(line))
        for line in text.splitlines()
        if line.strip()
    ]
