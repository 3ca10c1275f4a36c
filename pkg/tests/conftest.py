import random

import pytest

from simulharness.agents import Agent, BuiltinToyAgent, ToyLexicon, fixture_dir
from simulharness.core import TimedSegment, TimedUtterance, load_corpus


@pytest.fixture(scope="session")
def fixture_lexicon() -> ToyLexicon:
    return ToyLexicon.from_file(fixture_dir() / "lexicon.json")


@pytest.fixture(scope="session")
def fixture_corpus():
    return load_corpus(fixture_dir() / "corpus.jsonl")


@pytest.fixture()
def toy_agent(fixture_lexicon) -> BuiltinToyAgent:
    return BuiltinToyAgent(fixture_lexicon)


# Paper example lexicon: "I bought a pen" with one verb and one empty article.
PEN_LEXICON = ToyLexicon(
    entries={"I": "watashi-wa", "bought": "katta", "a": "", "pen": "pen-o"},
    function_words=frozenset(),
    verbs=frozenset({"bought"}),
    reorder_window=2,
)


class EchoAgent(Agent):
    """Returns the source prefix as the hypothesis; prefix-stable by design."""

    def hypothesize(self, request):
        return request.forced_prefix + request.source_prefix


class RecordingAgent(Agent):
    """Wraps another agent and records the stripped hypotheses it returned."""

    def __init__(self, inner: Agent):
        self.inner = inner
        self.hypotheses = []
        self.requests = []

    def reset(self):
        self.inner.reset()

    def hypothesize(self, request):
        raw = self.inner.hypothesize(request)
        self.requests.append(request)
        self.hypotheses.append(tuple(raw[len(request.forced_prefix):]))
        return raw


def unit_utterance(tokens, duration_ms=200, utt_id="u", ref_si=None, ref_off=None):
    """One token per segment, uniform durations."""
    segments = tuple(
        TimedSegment(index=i, duration_ms=duration_ms, payload=(tok,))
        for i, tok in enumerate(tokens)
    )
    return TimedUtterance(id=utt_id, segments=segments, ref_si=ref_si, ref_off=ref_off)


def random_utterance(rng: random.Random, vocab, utt_id="u", max_tokens=12, max_per_segment=3):
    n = rng.randint(1, max_tokens)
    tokens = [rng.choice(vocab) for _ in range(n)]
    segments = []
    pos = 0
    idx = 0
    while pos < n:
        take = rng.randint(1, max_per_segment)
        payload = tuple(tokens[pos : pos + take])
        segments.append(
            TimedSegment(index=idx, duration_ms=rng.randrange(100, 520, 20), payload=payload)
        )
        pos += take
        idx += 1
    return TimedUtterance(id=utt_id, segments=tuple(segments))


def brute_force_lcp(seqs):
    """Oracle lcp: grow a candidate prefix and re-check every sequence."""
    if not seqs:
        return ()
    best = ()
    length = 0
    while True:
        length += 1
        if any(len(s) < length for s in seqs):
            break
        candidate = tuple(seqs[0][:length])
        if all(tuple(s[:length]) == candidate for s in seqs):
            best = candidate
        else:
            break
    return best
