#!/usr/bin/env python3
"""Regenerate the frozen wire-protocol transcripts.

Transcript format: lines starting with '>' are raw bytes sent to the agent,
lines starting with '<' are the exact bytes the agent must reply. Responses
for HYPOTHESIZE are computed with the builtin toy translator over the
bundled fixture lexicon, so a conforming agent is bit-compatible with it.
"""

from pathlib import Path

from simulharness.agents import BuiltinToyAgent, ToyLexicon, fixture_dir
from simulharness.core import AgentRequest, canonical_json

GOLDEN_DIR = Path(__file__).resolve().parent.parent / "src" / "simulharness" / "data" / "golden"

TAGS = {"si": ["<si>"], "off": ["<off>"]}
SUBWORD_TAGS = {"si": ["_<", "si", ">"], "off": ["_<", "off", ">"]}


def hyp_line(agent: BuiltinToyAgent, source, forced, committed) -> tuple[str, str]:
    request = {
        "type": "HYPOTHESIZE",
        "source_prefix": list(source),
        "forced_prefix": list(forced),
        "committed": list(committed),
    }
    tokens = agent.hypothesize(
        AgentRequest(source_prefix=source, forced_prefix=tuple(forced), committed=tuple(committed))
    )
    response = {"type": "HYPOTHESIS", "tokens": list(tokens)}
    return canonical_json(request), canonical_json(response)


def basic_session(agent: BuiltinToyAgent) -> list[str]:
    lines = []

    def x(req: str, resp: str) -> None:
        lines.append(">" + req)
        lines.append("<" + resp)

    x(
        canonical_json({"type": "INIT", "version": 1, "tags": TAGS}),
        canonical_json({"type": "READY", "version": 1}),
    )
    x(canonical_json({"type": "RESET"}), canonical_json({"type": "READY", "version": 1}))
    x(*hyp_line(agent, ("I",), ("<si>",), ()))
    x(*hyp_line(agent, ("I", "bought"), ("<si>",), ("watashi-wa",)))
    x(*hyp_line(agent, ("I", "bought", "a", "new", "pen"), ("<si>",), ("watashi-wa", "katta")))
    x(*hyp_line(agent, ("I", "bought", "a", "new", "pen"), ("<off>",), ()))
    # committed constraint the fresh hypothesis no longer extends
    x(*hyp_line(agent, ("I", "bought", "a", "new", "pen"), ("<off>",), ("watashi-wa", "katta")))
    # no forced prefix: agent falls back to its default style
    x(*hyp_line(agent, ("she", "read", "the", "book"), (), ()))
    x(canonical_json({"type": "RESET"}), canonical_json({"type": "READY", "version": 1}))
    x(*hyp_line(agent, ("we", "saw", "it"), ("<si>",), ()))
    x(canonical_json({"type": "BYE"}), canonical_json({"type": "BYE"}))
    return lines


def subword_session(agent: BuiltinToyAgent) -> list[str]:
    lines = []

    def x(req: str, resp: str) -> None:
        lines.append(">" + req)
        lines.append("<" + resp)

    x(
        canonical_json({"type": "INIT", "version": 1, "tags": SUBWORD_TAGS}),
        canonical_json({"type": "READY", "version": 1}),
    )
    x(*hyp_line(agent, ("I", "bought", "a", "pen"), ("_<", "si", ">"), ()))
    x(*hyp_line(agent, ("I", "bought", "a", "pen"), ("_<", "off", ">"), ()))
    x(canonical_json({"type": "BYE"}), canonical_json({"type": "BYE"}))
    return lines


def error_session() -> list[str]:
    def err(code: str, message: str) -> str:
        return canonical_json({"type": "ERROR", "code": code, "message": message})

    lines = []

    def x(req: str, resp: str) -> None:
        lines.append(">" + req)
        lines.append("<" + resp)

    x(
        canonical_json(
            {"type": "HYPOTHESIZE", "source_prefix": ["I"], "forced_prefix": [], "committed": []}
        ),
        err("not_ready", "INIT required before this message"),
    )
    x(
        canonical_json({"type": "INIT", "version": 2, "tags": TAGS}),
        err("version_mismatch", "agent speaks protocol version 1"),
    )
    x("this is not json", err("bad_message", "message is not a JSON object with a type field"))
    x(
        canonical_json({"payload": 1}),
        err("bad_message", "message is not a JSON object with a type field"),
    )
    x(
        canonical_json({"type": "INIT", "version": 1, "tags": TAGS}),
        canonical_json({"type": "READY", "version": 1}),
    )
    x(
        canonical_json({"type": "FOO"}),
        err("unsupported", "unknown message type: FOO"),
    )
    x(
        canonical_json({"type": "HYPOTHESIZE", "source_prefix": ["I"]}),
        err("bad_message", "HYPOTHESIZE requires source_prefix, forced_prefix, committed"),
    )
    x(
        canonical_json(
            {
                "type": "HYPOTHESIZE",
                "source_prefix": ["I"],
                "forced_prefix": ["<bad>"],
                "committed": [],
            }
        ),
        err("bad_message", "forced prefix does not match any agreed style tag"),
    )
    x(canonical_json({"type": "BYE"}), canonical_json({"type": "BYE"}))
    return lines


def main() -> None:
    GOLDEN_DIR.mkdir(parents=True, exist_ok=True)
    lexicon = ToyLexicon.from_file(fixture_dir() / "lexicon.json")
    agent = BuiltinToyAgent(lexicon, tags=TAGS)
    subword_agent = BuiltinToyAgent(lexicon, tags=SUBWORD_TAGS)
    for name, lines in [
        ("session_basic.txt", basic_session(agent)),
        ("session_subword_tags.txt", subword_session(subword_agent)),
        ("session_errors.txt", error_session()),
    ]:
        (GOLDEN_DIR / name).write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"wrote {GOLDEN_DIR / name}")


if __name__ == "__main__":
    main()
