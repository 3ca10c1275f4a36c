"""Command-line orchestration: corpus evaluation sweeps, mixture preparation,
prefix extraction, post-processing, and the external-scorer file exchange.

Exit codes: 0 success, 1 configuration error, 2 agent/protocol error,
3 data error.
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import agents, dataprep, metrics, textproc
from .core import (
    SessionLog,
    TimedSegment,
    TimedUtterance,
    canonical_json,
    load_corpus,
    run_session,
)
from .errors import (
    AgentError,
    ConfigError,
    DataError,
    HarnessError,
    PolicyDivergenceError,
)
from .policies import LOCAL_AGREEMENT, WAIT_K, PolicyConfig, StyleTagChoice

DEFAULT_SEGMENT_SIZES = (200, 400, 600, 800, 1000)


@dataclass
class RunConfig:
    """Everything one evaluation sweep needs."""

    corpus: str
    out_dir: str
    agent: agents.AgentHandle
    policy: PolicyConfig
    style: StyleTagChoice
    segment_sizes_ms: tuple[int, ...] = DEFAULT_SEGMENT_SIZES
    rmrep_brackets: bool = False
    rmrep_trigram: bool = False
    al_gamma: str = "hyp"  # "hyp" | "ref": length used in the AL lag term
    system: str = "run"
    seed: int = 0
    si_tag_forms: tuple[str, ...] = ("<si>",)
    off_tag_forms: tuple[str, ...] = ("<off>",)

    def __post_init__(self) -> None:
        if not self.segment_sizes_ms:
            raise ConfigError("segment_sizes_ms must be non-empty")
        if any(s <= 0 for s in self.segment_sizes_ms):
            raise ConfigError("segment sizes must be positive")
        if self.al_gamma not in ("hyp", "ref"):
            raise ConfigError(f"al_gamma must be 'hyp' or 'ref', got {self.al_gamma!r}")

    @property
    def tags(self) -> dict[str, tuple[str, ...]]:
        return {"si": tuple(self.si_tag_forms), "off": tuple(self.off_tag_forms)}


def resegment_utterance(utterance: TimedUtterance, segment_ms: int) -> TimedUtterance:
    """Regroup a token-timed utterance into fixed-size chunks.

    Requires one token per input segment. A token lands in the chunk that
    contains its end time; chunk boundaries sit at exact multiples of
    segment_ms and the last chunk absorbs the remainder. Chunks with no
    token keep their time span and an empty payload.
    """
    if segment_ms <= 0:
        raise ConfigError(f"segment size must be positive, got {segment_ms}")
    if any(len(seg.payload) != 1 for seg in utterance.segments):
        raise DataError(
            f"utterance {utterance.id!r} is not token-timed "
            f"(every segment must carry exactly one token)"
        )
    total = utterance.total_ms
    n_chunks = -(-total // segment_ms)  # ceil
    payloads: list[list[str]] = [[] for _ in range(n_chunks)]
    end = 0
    for seg in utterance.segments:
        end += seg.duration_ms
        chunk = -(-end // segment_ms) - 1
        payloads[chunk].extend(seg.payload)
    segments = []
    for i in range(n_chunks):
        duration = segment_ms if i < n_chunks - 1 else total - segment_ms * (n_chunks - 1)
        segments.append(TimedSegment(index=i, duration_ms=duration, payload=tuple(payloads[i])))
    return TimedUtterance(
        id=utterance.id,
        segments=tuple(segments),
        ref_si=utterance.ref_si,
        ref_off=utterance.ref_off,
    )


def _token_clock_unit(utterance: TimedUtterance) -> int | None:
    """Uniform per-token segment duration, if the utterance is token-clocked."""
    durations = {seg.duration_ms for seg in utterance.segments}
    sizes = {len(seg.payload) for seg in utterance.segments}
    if len(durations) == 1 and sizes == {1}:
        return durations.pop()
    return None


@dataclass
class SessionOutcome:
    utterance: TimedUtterance
    log: SessionLog
    raw_tokens: tuple[str, ...]
    final_tokens: tuple[str, ...]


def _reference_tokens(utt: TimedUtterance, style: StyleTagChoice) -> tuple[str, ...]:
    ref = utt.ref_si if style.tag == "si" else utt.ref_off
    if ref is None:
        raise DataError(
            f"utterance {utt.id!r} lacks the reference needed for style "
            f"{style.tag!r}"
        )
    return ref


def evaluate(config: RunConfig) -> list[metrics.MetricReport]:
    """Run the full sweep and write report files into the output directory.

    One MetricReport per segment size. Latency metrics come from the raw
    session logs; quality metrics use the post-processed output when the
    repetition filters are enabled.
    """
    corpus = load_corpus(config.corpus)
    if not corpus:
        raise DataError(f"corpus {config.corpus!r} is empty")
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    agent = agents.connect(config.agent, tags=config.tags)
    reports = []
    try:
        for segment_ms in config.segment_sizes_ms:
            outcomes = []
            for utt in corpus:
                chunked = resegment_utterance(utt, segment_ms)
                agent.reset()
                log = run_session(chunked, config.policy, agent, config.style)
                raw = log.committed_tokens()
                final = textproc.apply_repetition_filters(
                    raw, brackets=config.rmrep_brackets, trigram=config.rmrep_trigram
                )
                outcomes.append(SessionOutcome(chunked, log, raw, final))
            reports.append(_assemble_report(config, segment_ms, outcomes))
            _write_exchange_files(out_dir, config, segment_ms, outcomes)
    finally:
        agent.close()

    (out_dir / "report.csv").write_text(metrics.reports_to_csv(reports), encoding="utf-8")
    (out_dir / "report.jsonl").write_text(metrics.reports_to_jsonl(reports), encoding="utf-8")
    return reports


def _latency_report(
    config: RunConfig, outcomes: Sequence[SessionOutcome]
) -> metrics.LatencyReport:
    per_sentence = []
    al_values = []
    atd_values = []
    al_token_values = []
    for outcome in outcomes:
        if config.al_gamma == "ref":
            gamma_len = len(_reference_tokens(outcome.utterance, config.style))
        else:
            gamma_len = len(outcome.raw_tokens)
        al = (
            metrics.average_lagging(outcome.log, gamma_len)
            if gamma_len > 0
            else None
        )
        atd = metrics.average_token_delay(outcome.log)
        unit = _token_clock_unit(outcome.utterance)
        al_tok = al / unit if al is not None and unit else None
        per_sentence.append(
            {
                "id": outcome.utterance.id,
                "al_ms": al,
                "atd_ms": atd,
                "al_tokens": al_tok,
                "output_len": len(outcome.final_tokens),
            }
        )
        if al is not None:
            al_values.append(al)
        if atd is not None:
            atd_values.append(atd)
        if al_tok is not None:
            al_token_values.append(al_tok)
    return metrics.LatencyReport(
        al_ms=sum(al_values) / len(al_values) if al_values else None,
        atd_ms=sum(atd_values) / len(atd_values) if atd_values else None,
        al_tokens=(
            sum(al_token_values) / len(al_token_values) if al_token_values else None
        ),
        per_sentence=per_sentence,
    )


def _quality_report(
    config: RunConfig, outcomes: Sequence[SessionOutcome]
) -> metrics.QualityReport:
    hyps = [outcome.final_tokens for outcome in outcomes]
    refs = [_reference_tokens(outcome.utterance, config.style) for outcome in outcomes]
    hyp_texts = [textproc.detokenize(h) for h in hyps]
    ref_texts = [textproc.detokenize(r) for r in refs]
    return metrics.QualityReport(
        bleu=metrics.corpus_bleu(hyps, refs),
        length_ratio=metrics.length_ratio(hyp_texts, ref_texts),
        length_diff_histogram=metrics.length_diff_histogram(hyp_texts, ref_texts),
    )


def _assemble_report(
    config: RunConfig, segment_ms: int, outcomes: Sequence[SessionOutcome]
) -> metrics.MetricReport:
    latency = _latency_report(config, outcomes)
    quality = _quality_report(config, outcomes)
    return metrics.MetricReport(
        system=config.system,
        segment_ms=segment_ms,
        al_ms=latency.al_ms,
        atd_ms=latency.atd_ms,
        bleu=quality.bleu,
        length_ratio=quality.length_ratio,
        al_tokens=latency.al_tokens,
        per_sentence=latency.per_sentence,
        length_diff_histogram=quality.length_diff_histogram,
    )


def _write_exchange_files(
    out_dir: Path, config: RunConfig, segment_ms: int, outcomes: Sequence[SessionOutcome]
) -> None:
    """Hypothesis/reference text files for external scorers, one per size."""
    hyp_path = out_dir / f"hyp.{segment_ms}ms.txt"
    with hyp_path.open("w", encoding="utf-8") as fh:
        for outcome in outcomes:
            fh.write(textproc.detokenize(outcome.final_tokens) + "\n")
    ref_path = out_dir / "ref.txt"
    with ref_path.open("w", encoding="utf-8") as fh:
        for outcome in outcomes:
            ref = _reference_tokens(outcome.utterance, config.style)
            fh.write(textproc.detokenize(ref) + "\n")


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: A003 - argparse API
        raise ConfigError(message)


def _pick(*values):
    """First value that was actually provided."""
    for value in values:
        if value is not None:
            return value
    return None


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    cfg_path = Path(path)
    if not cfg_path.exists():
        raise ConfigError(f"config file not found: {cfg_path}")
    try:
        cfg = json.loads(cfg_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"bad config file {cfg_path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config file {cfg_path} must hold a JSON object")
    return cfg


def _add_agent_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--agent",
        choices=[agents.BUILTIN_TOY, agents.EXTERNAL_PROCESS, agents.EXTERNAL_SOCKET],
        default=None,
    )
    parser.add_argument("--lexicon", help="toy lexicon JSON (builtin agent)")
    parser.add_argument(
        "--agent-cmd", help="external agent command line (shell-quoted string)"
    )
    parser.add_argument("--host", help="external agent host")
    parser.add_argument("--port", type=int, help="external agent port")
    parser.add_argument("--agent-timeout", type=float, default=None)
    parser.add_argument(
        "--default-style",
        choices=[agents.SI_STYLE, agents.OFFLINE_STYLE],
        default=None,
        help="toy style when no tag is forced",
    )


def _agent_handle(args: argparse.Namespace, cfg: dict | None = None) -> agents.AgentHandle:
    block = (cfg or {}).get("agent", {})
    command = _pick(
        tuple(shlex.split(args.agent_cmd)) if args.agent_cmd else None,
        tuple(block["command"]) if block.get("command") else None,
        (),
    )
    return agents.AgentHandle(
        kind=_pick(args.agent, block.get("kind"), agents.BUILTIN_TOY),
        lexicon_path=_pick(args.lexicon, block.get("lexicon")),
        command=command,
        host=_pick(args.host, block.get("host")),
        port=_pick(args.port, block.get("port")),
        timeout_s=_pick(args.agent_timeout, block.get("timeout_s"), 30.0),
        default_style=_pick(args.default_style, block.get("default_style"), agents.OFFLINE_STYLE),
    )


def _add_policy_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--policy", choices=[LOCAL_AGREEMENT, WAIT_K], default=None)
    parser.add_argument("--la-n", type=int, default=None)
    parser.add_argument("--k", type=int, default=None)
    parser.add_argument("--max-output-tokens", type=int, default=None)


def _policy_config(args: argparse.Namespace, cfg: dict | None = None) -> PolicyConfig:
    block = (cfg or {}).get("policy", {})
    return PolicyConfig(
        kind=_pick(args.policy, block.get("kind"), LOCAL_AGREEMENT),
        la_n=_pick(args.la_n, block.get("la_n"), 2),
        k=_pick(args.k, block.get("k"), 1),
        max_output_tokens=_pick(args.max_output_tokens, block.get("max_output_tokens"), 512),
    )


def _add_style_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--style", choices=["si", "off", "none"], default=None)
    parser.add_argument(
        "--si-tag-tokens", nargs="+", default=None, help="token form of the SI tag"
    )
    parser.add_argument(
        "--off-tag-tokens", nargs="+", default=None, help="token form of the offline tag"
    )


def _tag_forms(args: argparse.Namespace, cfg: dict | None = None) -> tuple[tuple[str, ...], tuple[str, ...]]:
    tags = (cfg or {}).get("tags", {})
    si_forms = tuple(_pick(args.si_tag_tokens, tags.get("si"), ["<si>"]))
    off_forms = tuple(_pick(args.off_tag_tokens, tags.get("off"), ["<off>"]))
    return si_forms, off_forms


def _style_choice(args: argparse.Namespace, cfg: dict | None = None) -> StyleTagChoice:
    si_forms, off_forms = _tag_forms(args, cfg)
    style = _pick(args.style, (cfg or {}).get("style"), "none")
    if style == "si":
        return StyleTagChoice.si(si_forms)
    if style == "off":
        return StyleTagChoice.offline(off_forms)
    if style == "none":
        return StyleTagChoice.none()
    raise ConfigError(f"unknown style {style!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="simulharness", description=__doc__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_eval = sub.add_parser("evaluate", help="run a segment-size evaluation sweep")
    p_eval.add_argument("--config", help="run-config JSON; explicit flags override it")
    p_eval.add_argument("--corpus")
    p_eval.add_argument("--out")
    p_eval.add_argument(
        "--segment-sizes",
        default=None,
        help="comma-separated chunk sizes in ms",
    )
    p_eval.add_argument("--rmrep-brackets", action="store_true", default=None)
    p_eval.add_argument("--rmrep-trigram", action="store_true", default=None)
    p_eval.add_argument("--al-gamma", choices=["hyp", "ref"], default=None)
    p_eval.add_argument("--system", default=None)
    p_eval.add_argument("--seed", type=int, default=None)
    _add_agent_args(p_eval)
    _add_policy_args(p_eval)
    _add_style_args(p_eval)

    p_mix = sub.add_parser("prepare-mixture", help="build a training mixture file")
    p_mix.add_argument("--examples", required=True, help="corpus examples JSONL")
    p_mix.add_argument("--condition", required=True, choices=dataprep.CONDITIONS)
    p_mix.add_argument(
        "--upsample-factor",
        type=int,
        default=0,
        help="SI repetition factor; 0 derives it from the data sizes",
    )
    p_mix.add_argument("--seed", type=int, default=0)
    p_mix.add_argument("--out", required=True)
    p_mix.add_argument("--filter-unaligned", action="store_true")

    p_pa = sub.add_parser("extract-prefixes", help="extract prefix-to-prefix pairs")
    p_pa.add_argument("--corpus", required=True)
    p_pa.add_argument("--out", required=True)
    _add_agent_args(p_pa)
    _add_style_args(p_pa)

    p_post = sub.add_parser("postprocess", help="apply repetition removal to text")
    p_post.add_argument("--input", required=True, help="one tokenized sentence per line")
    p_post.add_argument("--out", required=True)
    p_post.add_argument("--rmrep-brackets", action="store_true")
    p_post.add_argument("--rmrep-trigram", action="store_true")

    p_score = sub.add_parser(
        "score-exchange", help="merge externally computed scores into a report"
    )
    p_score.add_argument("--report", required=True, help="report JSONL from evaluate")
    p_score.add_argument(
        "--scores", required=True, help="JSON {metric: {segment_ms: value}}"
    )
    p_score.add_argument("--out", required=True)
    return parser


def _cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _load_config_file(args.config)
    if args.segment_sizes is not None:
        try:
            sizes = tuple(int(s) for s in str(args.segment_sizes).split(",") if s != "")
        except ValueError as exc:
            raise ConfigError(f"bad --segment-sizes: {exc}") from exc
    else:
        sizes = tuple(cfg.get("segment_sizes_ms", DEFAULT_SEGMENT_SIZES))
    corpus = _pick(args.corpus, cfg.get("corpus"))
    out_dir = _pick(args.out, cfg.get("out"))
    if corpus is None or out_dir is None:
        raise ConfigError("evaluate needs --corpus and --out (flags or config file)")
    rmrep = cfg.get("rmrep", {})
    si_forms, off_forms = _tag_forms(args, cfg)
    config = RunConfig(
        corpus=corpus,
        out_dir=out_dir,
        agent=_agent_handle(args, cfg),
        policy=_policy_config(args, cfg),
        style=_style_choice(args, cfg),
        segment_sizes_ms=sizes,
        rmrep_brackets=bool(_pick(args.rmrep_brackets, rmrep.get("brackets"), False)),
        rmrep_trigram=bool(_pick(args.rmrep_trigram, rmrep.get("trigram"), False)),
        al_gamma=_pick(args.al_gamma, cfg.get("al_gamma"), "hyp"),
        system=_pick(args.system, cfg.get("system"), "run"),
        seed=_pick(args.seed, cfg.get("seed"), 0),
        si_tag_forms=si_forms,
        off_tag_forms=off_forms,
    )
    reports = evaluate(config)
    for report in reports:
        print(
            f"{report.system}\tsegment={report.segment_ms}ms\t"
            f"AL={report.al_ms}\tATD={report.atd_ms}\t"
            f"BLEU={report.bleu}\tlen_ratio={report.length_ratio}"
        )
    return 0


def _cmd_prepare_mixture(args: argparse.Namespace) -> int:
    examples = dataprep.load_examples(args.examples)
    if args.filter_unaligned:
        examples = dataprep.filter_unaligned(examples)
    factor = args.upsample_factor
    if factor == 0:
        n_off = sum(1 for ex in examples if ex.origin == "off")
        n_si = sum(1 for ex in examples if ex.origin == "si")
        factor = dataprep.upsample_factor(n_off, n_si) if n_si else 1
    config = dataprep.MixtureConfig(
        condition=args.condition, upsample_factor=factor, seed=args.seed
    )
    result = dataprep.build_mixture(examples, config)
    dataprep.write_mixture(args.out, result)
    print(canonical_json(result.manifest))
    return 0


def _cmd_extract_prefixes(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    style = _style_choice(args)
    si_forms, off_forms = _tag_forms(args)
    agent = agents.connect(_agent_handle(args), tags={"si": si_forms, "off": off_forms})
    try:
        pairs = dataprep.extract_corpus_prefix_pairs(corpus, agent, style)
    finally:
        agent.close()
    lines = dataprep.prefix_pairs_to_lines(pairs)
    with Path(args.out).open("w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")
    print(f"{len(lines)} pairs from {len(corpus)} utterances")
    return 0


def _cmd_postprocess(args: argparse.Namespace) -> int:
    in_path = Path(args.input)
    if not in_path.exists():
        raise DataError(f"input file not found: {in_path}")
    out_lines = []
    for line in in_path.read_text(encoding="utf-8").splitlines():
        tokens = line.split()
        filtered = textproc.apply_repetition_filters(
            tokens, brackets=args.rmrep_brackets, trigram=args.rmrep_trigram
        )
        out_lines.append(" ".join(filtered))
    Path(args.out).write_text("\n".join(out_lines) + "\n", encoding="utf-8")
    return 0


def _cmd_score_exchange(args: argparse.Namespace) -> int:
    report_path = Path(args.report)
    scores_path = Path(args.scores)
    if not report_path.exists():
        raise DataError(f"report file not found: {report_path}")
    if not scores_path.exists():
        raise DataError(f"scores file not found: {scores_path}")
    try:
        scores = json.loads(scores_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"bad scores file: {exc}") from exc
    out_lines = []
    for line in report_path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        for metric_name, by_size in scores.items():
            value = by_size.get(str(rec["segment_ms"]))
            if value is not None:
                rec[metric_name] = value
        out_lines.append(canonical_json(rec))
    Path(args.out).write_text("\n".join(out_lines) + "\n", encoding="utf-8")
    return 0


_COMMANDS = {
    "evaluate": _cmd_evaluate,
    "prepare-mixture": _cmd_prepare_mixture,
    "extract-prefixes": _cmd_extract_prefixes,
    "postprocess": _cmd_postprocess,
    "score-exchange": _cmd_score_exchange,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return _COMMANDS[args.cmd](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (AgentError, PolicyDivergenceError) as exc:
        print(f"agent error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except HarnessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
