#!/usr/bin/env python3
"""Regenerate the bundled toy lexicon and token-timed fixture corpus.

The corpus is built so the SI/offline latency contrast is robust across
chunk sizes: every source token maps to a non-empty target (no shared
drops that would let agreement commit through an unchanged hypothesis),
sentences carry two clause verbs each, and the reorder window exceeds the
sentence length so verbs ride the end of every offline prefix.
"""

import json
import random
from pathlib import Path

from simulharness.agents import ToyLexicon, toy_translate
from simulharness.core import TimedSegment, TimedUtterance, utterance_to_record, canonical_json

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "src" / "simulharness" / "data" / "fixtures"

LEXICON = {
    "entries": {
        "I": "watashi-wa", "we": "watashitachi-wa", "you": "anata-wa",
        "he": "kare-wa", "she": "kanojo-wa", "it": "sore-o",
        "bought": "katta", "read": "yonda", "saw": "mita", "gave": "watashita",
        "wrote": "kaita", "made": "tsukutta", "visited": "otozureta",
        "showed": "miseta", "explained": "setsumeishita", "finished": "oeta",
        "opened": "aketa", "found": "mitsuketa",
        "book": "hon-o", "pen": "pen-o", "letter": "tegami-o", "picture": "e-o",
        "movie": "eiga-o", "door": "doa-o", "window": "mado-o",
        "story": "hanashi-o", "report": "hokoku-o", "map": "chizu-o",
        "plan": "keikaku-o",
        "friend": "tomodachi-ni", "teacher": "sensei-ni",
        "student": "gakusei-ni", "sister": "imoto-ni",
        "library": "toshokan-de", "school": "gakko-de", "station": "eki-de",
        "park": "koen-de", "museum": "hakubutsukan-de",
        "yesterday": "kino", "today": "kyo", "morning": "asa-ni",
        "slowly": "yukkuri", "carefully": "teineini",
        "red": "akai", "new": "atarashii", "old": "furui", "long": "nagai",
        "short": "mijikai", "interesting": "omoshiroi", "famous": "yumeina",
        "small": "chiisana", "beautiful": "utsukushii", "young": "wakai",
        "big": "ookii", "green": "midorino", "white": "shiroi",
        "boring": "taikutsuna", "careful": "shinchona", "quiet": "shizukana",
        "heavy": "omoi", "broken": "kowareta", "smart": "kashikoi",
        "funny": "okashii",
        "and": "soshite", "my": "watashi-no",
        "the": "sono", "a": "aru", "an": "aru",
        "in": "nakade", "at": "nite", "to": "e", "of": "no",
        "very": "totemo", "really": "hontoni", "just": "chodo",
        "now": "ima", "this": "kono", "that": "ano",
    },
    "function_words": ["very", "really", "just", "now", "this", "that"],
    "verbs": [
        "bought", "read", "saw", "gave", "wrote", "made", "visited",
        "showed", "explained", "finished", "opened", "found",
    ],
    "reorder_window": 50,
}

SENTENCES = [
    "I bought a new red pen and read an interesting long book at the old station yesterday",
    "we saw a very famous movie and visited the beautiful big museum in the green park today",
    "she wrote a long beautiful letter and gave the old small map to a young student yesterday",
    "he opened the small white window and showed the new famous picture to my old friend today",
    "I read the short boring report and made a very careful plan at the quiet library yesterday",
    "we found an old heavy door and opened the broken red window at the small school today",
    "she explained the interesting long story and visited my young smart sister in the morning",
    "he bought a beautiful small picture and wrote a short funny story at the new museum yesterday",
    "we read a really long letter and showed the old green map to the young teacher today",
    "I found a small quiet park and saw an old white door at the big school yesterday",
]


def main() -> None:
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    (FIXTURE_DIR / "lexicon.json").write_text(
        json.dumps(LEXICON, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    lexicon = ToyLexicon(
        entries=LEXICON["entries"],
        function_words=frozenset(LEXICON["function_words"]),
        verbs=frozenset(LEXICON["verbs"]),
        reorder_window=LEXICON["reorder_window"],
    )
    rng = random.Random(828)
    lines = []
    for n, sentence in enumerate(SENTENCES):
        tokens = sentence.split()
        segments = tuple(
            TimedSegment(index=i, duration_ms=rng.randrange(160, 260, 20), payload=(tok,))
            for i, tok in enumerate(tokens)
        )
        utt = TimedUtterance(
            id=f"fixture-{n:03d}",
            segments=segments,
            ref_si=toy_translate(tokens, "si", lexicon).tokens,
            ref_off=toy_translate(tokens, "off", lexicon).tokens,
        )
        lines.append(canonical_json(utterance_to_record(utt)))
    (FIXTURE_DIR / "corpus.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(SENTENCES)} utterances to {FIXTURE_DIR}")


if __name__ == "__main__":
    main()
