"""Tokenization, style-tag handling, and repetition-removal post-processing."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

# Unicode ranges treated as CJK for the character-fallback tokenizer and
# for spacing decisions in detokenize().
_CJK_RANGES = (
    (0x3000, 0x303F),  # CJK punctuation
    (0x3040, 0x30FF),  # hiragana, katakana
    (0x31F0, 0x31FF),  # katakana extensions
    (0x4E00, 0x9FFF),  # unified ideographs
    (0xFF00, 0xFFEF),  # halfwidth/fullwidth forms
)


def _is_cjk_char(ch: str) -> bool:
    code = ord(ch)
    return any(lo <= code <= hi for lo, hi in _CJK_RANGES)


def _has_cjk(text: str) -> bool:
    return any(_is_cjk_char(ch) for ch in text)


@dataclass(frozen=True)
class TagSpec:
    """A style tag: its literal surface form and its tokenized form.

    token_forms is the token sequence the surface string turns into under
    whatever tokenizer the downstream model uses (a single token for models
    that know the tag, several subword pieces otherwise).
    """

    surface: str
    token_forms: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.surface:
            raise ValueError("tag surface must be non-empty")
        if not self.token_forms:
            raise ValueError("tag token_forms must be non-empty")


SI_TAG = TagSpec(surface="<si>", token_forms=("<si>",))
OFF_TAG = TagSpec(surface="<off>", token_forms=("<off>",))


def prepend_tag(target: str, tag: TagSpec) -> str:
    """Concatenate the tag surface directly before the target string."""
    if not target:
        raise ValueError("target must be non-empty")
    return tag.surface + target


def strip_tag(text: str, tag: TagSpec) -> str:
    """Inverse of prepend_tag; returns text unchanged if the tag is absent."""
    if text.startswith(tag.surface):
        return text[len(tag.surface):]
    return text


def strip_tag_tokens(tokens: Sequence[str], tag: TagSpec) -> tuple[str, ...]:
    """Drop a leading tag token_forms prefix from a token sequence."""
    forms = tag.token_forms
    if tuple(tokens[: len(forms)]) == forms:
        return tuple(tokens[len(forms):])
    return tuple(tokens)


def tokenize(text: str) -> tuple[str, ...]:
    """Whitespace tokenizer with per-character fallback for CJK runs.

    Whitespace-separated chunks are kept whole unless they contain CJK
    characters, in which case each CJK character becomes its own token and
    non-CJK runs inside the chunk stay together.
    """
    tokens: list[str] = []
    for chunk in text.split():
        if not _has_cjk(chunk):
            tokens.append(chunk)
            continue
        run = ""
        for ch in chunk:
            if _is_cjk_char(ch):
                if run:
                    tokens.append(run)
                    run = ""
                tokens.append(ch)
            else:
                run += ch
        if run:
            tokens.append(run)
    return tuple(tokens)


def detokenize(tokens: Iterable[str]) -> str:
    """Join tokens, inserting a space only between two non-CJK neighbours."""
    out: list[str] = []
    prev_cjk = True  # no leading space
    for tok in tokens:
        tok_cjk = _has_cjk(tok)
        if out and not prev_cjk and not tok_cjk:
            out.append(" ")
        out.append(tok)
        prev_cjk = tok_cjk
    return "".join(out)


_BRACKET_PAIRS = (("(", ")"), ("<", ">"), ("（", "）"), ("〈", "〉"))


def _bracket_state(token: str) -> tuple[bool, bool]:
    """Return (fully_wrapped, has_unbalanced_fragment) for one token."""
    fully_wrapped = any(
        len(token) >= 2 and token.startswith(op) and token.endswith(cl)
        for op, cl in _BRACKET_PAIRS
    )
    unbalanced = False
    for op, cl in _BRACKET_PAIRS:
        depth = 0
        for ch in token:
            if ch == op:
                depth += 1
            elif ch == cl:
                depth -= 1
                if depth < 0:
                    unbalanced = True
        if depth != 0:
            unbalanced = True
    return fully_wrapped, unbalanced


def remove_bracketed_tokens(tokens: Sequence[str]) -> tuple[str, ...]:
    """Drop tokens wrapped in () or <> and fragments of such wrapped units.

    A token is removed when it is fully enclosed in a bracket pair, or when
    it carries an unbalanced bracket character (a piece of a wrapped unit
    that was split across tokens).
    """
    kept = []
    for tok in tokens:
        fully_wrapped, unbalanced = _bracket_state(tok)
        if fully_wrapped or unbalanced:
            continue
        kept.append(tok)
    return tuple(kept)


def stop_on_repeated_trigram(tokens: Sequence[str], max_occurrences: int = 3) -> tuple[str, ...]:
    """Truncate the sequence before any 3-gram reaches its third occurrence.

    Occurrences are counted left to right as each 3-gram completes, and
    overlapping occurrences count separately. If no 3-gram reaches the
    threshold the input is returned unchanged.
    """
    counts: dict[tuple[str, str, str], int] = {}
    for i in range(2, len(tokens)):
        tri = (tokens[i - 2], tokens[i - 1], tokens[i])
        seen = counts.get(tri, 0) + 1
        if seen >= max_occurrences:
            return tuple(tokens[:i])
        counts[tri] = seen
    return tuple(tokens)


def apply_repetition_filters(
    tokens: Sequence[str],
    *,
    brackets: bool = True,
    trigram: bool = True,
) -> tuple[str, ...]:
    """Run the bracket filter then the trigram stop rule, per the toggles."""
    out = tuple(tokens)
    if brackets:
        out = remove_bracketed_tokens(out)
    if trigram:
        out = stop_on_repeated_trigram(out)
    return out
