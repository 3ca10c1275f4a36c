"""Rule-based translation models the agent serves.

A model is any callable taking (source_tokens, style) and returning target
tokens; style is "si" or "off". The default ReorderModel reads a lexicon
JSON file ({entries, function_words, verbs, reorder_window}) and mirrors
the harness's built-in toy translator token for token, so the two are
interchangeable in cross-checks.
"""

from __future__ import annotations

import json
from collections import Counter
from pathlib import Path
from typing import Sequence


class EchoModel:
    """Identity model used when no lexicon is configured."""

    def __call__(self, source: Sequence[str], style: str) -> list[str]:
        return list(source)


class ReorderModel:
    """Word-by-word translation with style-dependent ordering.

    SI style walks the source left to right, skipping function words and
    empty-mapped tokens. Offline style keeps function words and bubbles each
    verb toward the end of the prefix, at most reorder_window positions and
    never across another verb.
    """

    def __init__(
        self,
        entries: dict[str, str],
        function_words: set[str] | frozenset[str] = frozenset(),
        verbs: set[str] | frozenset[str] = frozenset(),
        reorder_window: int = 2,
    ) -> None:
        self.entries = dict(entries)
        self.function_words = set(function_words)
        self.verbs = set(verbs)
        self.reorder_window = reorder_window

    @classmethod
    def from_file(cls, path: str | Path) -> "ReorderModel":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            entries=data["entries"],
            function_words=set(data.get("function_words", ())),
            verbs=set(data.get("verbs", ())),
            reorder_window=data.get("reorder_window", 2),
        )

    def target_for(self, token: str) -> str:
        if token in self.entries:
            return self.entries[token]
        return f"UNK[{token}]"

    def __call__(self, source: Sequence[str], style: str) -> list[str]:
        if style == "si":
            return [
                self.target_for(tok)
                for tok in source
                if tok not in self.function_words and self.target_for(tok) != ""
            ]
        mapped = [
            [self.target_for(tok), tok in self.verbs]
            for tok in source
            if self.target_for(tok) != ""
        ]
        for i in range(len(mapped) - 1, -1, -1):
            if not mapped[i][1]:
                continue
            j = i
            while (
                j + 1 < len(mapped)
                and not mapped[j + 1][1]
                and j - i < self.reorder_window
            ):
                mapped[j], mapped[j + 1] = mapped[j + 1], mapped[j]
                j += 1
        return [tok for tok, _ in mapped]


def continue_from(hypothesis: Sequence[str], committed: Sequence[str]) -> list[str]:
    """Force the committed prefix, appending whatever the model adds beyond it.

    When the fresh hypothesis already extends the committed tokens it is
    returned as-is; otherwise the committed prefix is kept and the
    hypothesis tokens not already covered by it (multiset-wise) follow in
    their original order.
    """
    hypothesis = list(hypothesis)
    committed = list(committed)
    if hypothesis[: len(committed)] == committed:
        return hypothesis
    budget = Counter(committed)
    tail = []
    for tok in hypothesis:
        if budget[tok] > 0:
            budget[tok] -= 1
        else:
            tail.append(tok)
    return committed + tail
