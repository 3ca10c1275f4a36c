import json

import pytest

from simulharness.agents import fixture_dir
from simulharness.cli import main, resegment_utterance
from simulharness.core import TimedSegment, TimedUtterance, load_corpus
from simulharness.errors import ConfigError, DataError
from simulharness.metrics import reports_from_jsonl

from conftest import unit_utterance

LEXICON = str(fixture_dir() / "lexicon.json")
CORPUS = str(fixture_dir() / "corpus.jsonl")


class TestResegmentation:
    def test_exact_multiples(self):
        utt = unit_utterance(["a", "b", "c", "d"], duration_ms=200)
        out = resegment_utterance(utt, 400)
        assert [seg.payload for seg in out.segments] == [("a", "b"), ("c", "d")]
        assert [seg.duration_ms for seg in out.segments] == [400, 400]

    def test_boundary_token_goes_to_containing_chunk(self):
        # ends at 200/400: token ending exactly at 400 belongs to chunk (200,400]
        utt = unit_utterance(["a", "b"], duration_ms=200)
        out = resegment_utterance(utt, 200)
        assert [seg.payload for seg in out.segments] == [("a",), ("b",)]

    def test_remainder_chunk(self):
        utt = unit_utterance(["a", "b", "c"], duration_ms=300)
        out = resegment_utterance(utt, 400)
        assert [seg.duration_ms for seg in out.segments] == [400, 400, 100]
        assert [seg.payload for seg in out.segments] == [("a",), ("b",), ("c",)]
        assert out.total_ms == utt.total_ms

    def test_empty_chunks_preserved(self):
        utt = unit_utterance(["a"], duration_ms=500)
        out = resegment_utterance(utt, 200)
        assert [seg.payload for seg in out.segments] == [(), (), ("a",)]
        assert [seg.duration_ms for seg in out.segments] == [200, 200, 100]

    def test_chunk_larger_than_source(self):
        utt = unit_utterance(["a", "b"], duration_ms=200)
        out = resegment_utterance(utt, 5000)
        assert len(out.segments) == 1
        assert out.segments[0].payload == ("a", "b")
        assert out.segments[0].duration_ms == 400

    def test_requires_token_timed_input(self):
        utt = TimedUtterance(
            id="multi", segments=(TimedSegment(0, 400, ("a", "b")),)
        )
        with pytest.raises(DataError):
            resegment_utterance(utt, 200)

    def test_rejects_bad_size(self):
        utt = unit_utterance(["a"])
        with pytest.raises(ConfigError):
            resegment_utterance(utt, 0)

    def test_references_carried_over(self):
        utt = unit_utterance(["a"], ref_si=("x",), ref_off=("y",))
        out = resegment_utterance(utt, 1000)
        assert out.ref_si == ("x",) and out.ref_off == ("y",)


def run_evaluate(tmp_path, *extra):
    out_dir = tmp_path / "out"
    argv = [
        "evaluate",
        "--corpus", CORPUS,
        "--out", str(out_dir),
        "--agent", "builtin_toy",
        "--lexicon", LEXICON,
        "--style", "si",
        *extra,
    ]
    code = main(argv)
    return code, out_dir


class TestEvaluate:
    def test_default_sweep_writes_five_reports(self, tmp_path, capsys):
        code, out_dir = run_evaluate(tmp_path)
        assert code == 0
        reports = reports_from_jsonl((out_dir / "report.jsonl").read_text(encoding="utf-8"))
        assert [r.segment_ms for r in reports] == [200, 400, 600, 800, 1000]
        assert (out_dir / "report.csv").exists()
        assert (out_dir / "ref.txt").exists()
        assert (out_dir / "hyp.200ms.txt").exists()
        for report in reports:
            assert 0.0 <= report.bleu <= 100.0
            assert report.atd_ms is not None and report.atd_ms >= 0
            assert len(report.per_sentence) == len(load_corpus(CORPUS))

    def test_low_latency_sizes_accepted(self, tmp_path):
        code, out_dir = run_evaluate(tmp_path, "--segment-sizes", "120,160")
        assert code == 0
        reports = reports_from_jsonl((out_dir / "report.jsonl").read_text(encoding="utf-8"))
        assert [r.segment_ms for r in reports] == [120, 160]

    def test_empty_corpus_is_data_error(self, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("", encoding="utf-8")
        code = main(
            [
                "evaluate", "--corpus", str(empty), "--out", str(tmp_path / "o"),
                "--agent", "builtin_toy", "--lexicon", LEXICON,
            ]
        )
        assert code == 3

    def test_bad_flag_is_config_error(self, tmp_path):
        assert main(["evaluate", "--corpus", CORPUS, "--no-such-flag"]) == 1

    def test_bad_segment_sizes(self, tmp_path):
        code = main(
            [
                "evaluate", "--corpus", CORPUS, "--out", str(tmp_path / "o"),
                "--agent", "builtin_toy", "--lexicon", LEXICON,
                "--segment-sizes", "abc",
            ]
        )
        assert code == 1

    def test_missing_lexicon_is_config_error(self, tmp_path):
        code = main(
            ["evaluate", "--corpus", CORPUS, "--out", str(tmp_path / "o"), "--agent", "builtin_toy"]
        )
        assert code == 1

    def test_rmrep_flags_accepted(self, tmp_path):
        code, out_dir = run_evaluate(
            tmp_path, "--segment-sizes", "600", "--rmrep-brackets", "--rmrep-trigram"
        )
        assert code == 0

    def test_run_config_file(self, tmp_path):
        cfg = {
            "corpus": CORPUS,
            "out": str(tmp_path / "out"),
            "system": "cfg-run",
            "style": "off",
            "segment_sizes_ms": [400, 800],
            "rmrep": {"brackets": True, "trigram": False},
            "policy": {"kind": "wait_k", "k": 2, "max_output_tokens": 256},
            "agent": {"kind": "builtin_toy", "lexicon": LEXICON},
        }
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps(cfg), encoding="utf-8")
        assert main(["evaluate", "--config", str(cfg_path)]) == 0
        reports = reports_from_jsonl(
            (tmp_path / "out" / "report.jsonl").read_text(encoding="utf-8")
        )
        assert [r.segment_ms for r in reports] == [400, 800]
        assert all(r.system == "cfg-run" for r in reports)

    def test_flags_override_config_file(self, tmp_path):
        cfg = {
            "corpus": CORPUS,
            "out": str(tmp_path / "out"),
            "style": "si",
            "segment_sizes_ms": [400],
            "agent": {"kind": "builtin_toy", "lexicon": LEXICON},
        }
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps(cfg), encoding="utf-8")
        assert main(["evaluate", "--config", str(cfg_path), "--segment-sizes", "600"]) == 0
        reports = reports_from_jsonl(
            (tmp_path / "out" / "report.jsonl").read_text(encoding="utf-8")
        )
        assert [r.segment_ms for r in reports] == [600]

    def test_missing_config_file(self, tmp_path):
        assert main(["evaluate", "--config", str(tmp_path / "no.json")]) == 1

    def test_atd_never_decreases_with_chunk_size_for_offline_toy(self, tmp_path):
        code, out_dir = run_evaluate(tmp_path, "--style", "off")
        assert code == 0
        reports = reports_from_jsonl((out_dir / "report.jsonl").read_text(encoding="utf-8"))
        atds = [r.atd_ms for r in reports]
        assert all(later >= earlier for earlier, later in zip(atds, atds[1:]))


class TestPostprocess:
    def test_filters_applied(self, tmp_path):
        src = tmp_path / "in.txt"
        src.write_text("(拍手) こんにちは\na b c a b c a b c d\n", encoding="utf-8")
        out = tmp_path / "out.txt"
        code = main(
            ["postprocess", "--input", str(src), "--out", str(out),
             "--rmrep-brackets", "--rmrep-trigram"]
        )
        assert code == 0
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "こんにちは"
        assert lines[1] == "a b c a b c a b"

    def test_missing_input(self, tmp_path):
        assert main(["postprocess", "--input", str(tmp_path / "x"), "--out", str(tmp_path / "y")]) == 3


class TestPrepareMixture:
    def test_end_to_end(self, tmp_path, capsys):
        from simulharness.dataprep import CorpusExample, write_examples

        examples = [
            CorpusExample(id=f"o{i}", source=("a",), target=f"t{i}", origin="off", split="train")
            for i in range(6)
        ] + [
            CorpusExample(id=f"s{i}", source=("b",), target=f"u{i}", origin="si", split="train")
        for i in range(2)
        ]
        path = tmp_path / "ex.jsonl"
        write_examples(path, examples)
        out = tmp_path / "mix.tsv"
        code = main(
            ["prepare-mixture", "--examples", str(path), "--condition", "mixed_ft_style_up",
             "--out", str(out)]
        )
        assert code == 0
        # factor derived from sizes: round(6/2) = 3 -> 6 + 3*2 lines
        assert len(out.read_text(encoding="utf-8").splitlines()) == 12
        manifest = json.loads(out.with_suffix(".manifest.json").read_text(encoding="utf-8"))
        assert manifest["upsample_factor"] == 3

    def test_missing_examples_file(self, tmp_path):
        code = main(
            ["prepare-mixture", "--examples", str(tmp_path / "nope"), "--condition", "si_ft",
             "--out", str(tmp_path / "mix.tsv")]
        )
        assert code == 3


class TestExtractPrefixes:
    def test_end_to_end(self, tmp_path):
        out = tmp_path / "pairs.tsv"
        code = main(
            ["extract-prefixes", "--corpus", CORPUS, "--out", str(out),
             "--agent", "builtin_toy", "--lexicon", LEXICON, "--style", "si"]
        )
        assert code == 0
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines and all("\t" in line for line in lines)


class TestScoreExchange:
    def test_merge(self, tmp_path):
        code, out_dir = run_evaluate(tmp_path, "--segment-sizes", "600")
        scores = tmp_path / "scores.json"
        scores.write_text(json.dumps({"bleurt": {"600": 0.41}}), encoding="utf-8")
        merged = tmp_path / "merged.jsonl"
        code = main(
            ["score-exchange", "--report", str(out_dir / "report.jsonl"),
             "--scores", str(scores), "--out", str(merged)]
        )
        assert code == 0
        rec = json.loads(merged.read_text(encoding="utf-8").splitlines()[0])
        assert rec["bleurt"] == 0.41
        assert rec["segment_ms"] == 600

    def test_missing_scores(self, tmp_path):
        code, out_dir = run_evaluate(tmp_path, "--segment-sizes", "600")
        code = main(
            ["score-exchange", "--report", str(out_dir / "report.jsonl"),
             "--scores", str(tmp_path / "none.json"), "--out", str(tmp_path / "m.jsonl")]
        )
        assert code == 3
