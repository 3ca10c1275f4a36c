import io
import json
import os
import socket
import subprocess
import sys
import threading
import time
from pathlib import Path

from example_agent.model import ReorderModel
from example_agent.server import AgentSession, dumps, serve_socket, serve_stream

DATA = Path(__file__).parent / "data"
SRC = Path(__file__).parent.parent / "src"
GOLDEN = ["session_basic.txt", "session_subword_tags.txt", "session_errors.txt"]


def make_session() -> AgentSession:
    return AgentSession(ReorderModel.from_file(DATA / "lexicon.json"))


def init_line(version=1, tags=None) -> str:
    tags = tags if tags is not None else {"si": ["<si>"], "off": ["<off>"]}
    return dumps({"type": "INIT", "version": version, "tags": tags})


class TestSessionStateMachine:
    def test_init_then_ready(self):
        session = make_session()
        assert session.handle_line(init_line()) == {"type": "READY", "version": 1}

    def test_hypothesize_before_init(self):
        session = make_session()
        reply = session.handle_line(
            dumps({"type": "HYPOTHESIZE", "source_prefix": [], "forced_prefix": [], "committed": []})
        )
        assert reply["type"] == "ERROR" and reply["code"] == "not_ready"

    def test_version_mismatch(self):
        session = make_session()
        reply = session.handle_line(init_line(version=3))
        assert reply["code"] == "version_mismatch"
        assert not session.initialized

    def test_bad_json(self):
        session = make_session()
        assert session.handle_line("{ nope")["code"] == "bad_message"

    def test_unknown_type(self):
        session = make_session()
        session.handle_line(init_line())
        reply = session.handle_line(dumps({"type": "SING"}))
        assert reply == {
            "type": "ERROR", "code": "unsupported", "message": "unknown message type: SING",
        }

    def test_missing_fields(self):
        session = make_session()
        session.handle_line(init_line())
        reply = session.handle_line(dumps({"type": "HYPOTHESIZE", "source_prefix": ["I"]}))
        assert reply["code"] == "bad_message"

    def test_forced_prefix_selects_style(self):
        session = make_session()
        session.handle_line(init_line())
        source = ["I", "bought", "a", "pen"]
        si = session.handle_line(
            dumps({"type": "HYPOTHESIZE", "source_prefix": source,
                   "forced_prefix": ["<si>"], "committed": []})
        )
        off = session.handle_line(
            dumps({"type": "HYPOTHESIZE", "source_prefix": source,
                   "forced_prefix": ["<off>"], "committed": []})
        )
        assert si["tokens"][0] == "<si>" and off["tokens"][0] == "<off>"
        assert si["tokens"][1:] != off["tokens"][1:]

    def test_unknown_forced_prefix(self):
        session = make_session()
        session.handle_line(init_line())
        reply = session.handle_line(
            dumps({"type": "HYPOTHESIZE", "source_prefix": ["I"],
                   "forced_prefix": ["<zh>"], "committed": []})
        )
        assert reply["code"] == "bad_message"

    def test_hypothesis_begins_with_forced_then_committed(self):
        session = make_session()
        session.handle_line(init_line())
        reply = session.handle_line(
            dumps({"type": "HYPOTHESIZE", "source_prefix": ["I", "bought", "a", "pen"],
                   "forced_prefix": ["<off>"], "committed": ["watashi-wa", "katta"]})
        )
        assert reply["tokens"][:3] == ["<off>", "watashi-wa", "katta"]

    def test_reset_keeps_serving(self):
        session = make_session()
        session.handle_line(init_line())
        assert session.handle_line(dumps({"type": "RESET"})) == {"type": "READY", "version": 1}
        reply = session.handle_line(
            dumps({"type": "HYPOTHESIZE", "source_prefix": ["I"],
                   "forced_prefix": [], "committed": []})
        )
        assert reply["type"] == "HYPOTHESIS"

    def test_error_then_session_continues(self):
        session = make_session()
        session.handle_line("garbage")
        assert session.handle_line(init_line()) == {"type": "READY", "version": 1}


class TestServeStream:
    def run_lines(self, lines):
        reader = io.BytesIO(("\n".join(lines) + "\n").encode("utf-8"))
        writer = io.BytesIO()
        serve_stream(reader, writer, make_session())
        return writer.getvalue().decode("utf-8").splitlines()

    def test_bye_ends_session(self):
        replies = self.run_lines([init_line(), dumps({"type": "BYE"}), init_line()])
        assert len(replies) == 2
        assert json.loads(replies[-1]) == {"type": "BYE"}

    def test_replies_are_canonical_bytes(self):
        replies = self.run_lines([init_line()])
        assert replies == ['{"type":"READY","version":1}']


class TestGoldenConformance:
    def agent_cmd(self):
        env = dict(os.environ)
        env["PYTHONPATH"] = str(SRC) + os.pathsep + env.get("PYTHONPATH", "")
        return (
            [sys.executable, "-m", "example_agent", "--lexicon", str(DATA / "lexicon.json")],
            env,
        )

    def test_transcripts_byte_for_byte(self):
        for name in GOLDEN:
            lines = [
                line
                for line in (DATA / name).read_text(encoding="utf-8").splitlines()
                if line
            ]
            cmd, env = self.agent_cmd()
            proc = subprocess.Popen(
                cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL, env=env,
            )
            try:
                for req, expected in zip(lines[::2], lines[1::2]):
                    proc.stdin.write(req[1:].encode("utf-8") + b"\n")
                    proc.stdin.flush()
                    got = proc.stdout.readline().rstrip(b"\n")
                    assert got == expected[1:].encode("utf-8"), (name, req)
            finally:
                proc.stdin.close()
                proc.wait(timeout=10)

    def test_eof_without_bye_exits(self):
        cmd, env = self.agent_cmd()
        proc = subprocess.Popen(
            cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL, env=env,
        )
        proc.stdin.write(init_line().encode("utf-8") + b"\n")
        proc.stdin.close()
        assert proc.wait(timeout=10) == 0


class TestSocketMode:
    def test_single_connection_session(self):
        session = make_session()
        # pick a free port first
        probe = socket.socket()
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
        probe.close()
        thread = threading.Thread(target=serve_socket, args=(port, session), daemon=True)
        thread.start()
        deadline = time.monotonic() + 5
        conn = None
        while time.monotonic() < deadline:
            try:
                conn = socket.create_connection(("127.0.0.1", port), timeout=1)
                break
            except OSError:
                time.sleep(0.05)
        assert conn is not None
        with conn:
            conn.sendall((init_line() + "\n").encode("utf-8"))
            reader = conn.makefile("rb")
            assert reader.readline().rstrip(b"\n") == b'{"type":"READY","version":1}'
            conn.sendall((dumps({"type": "BYE"}) + "\n").encode("utf-8"))
            assert reader.readline().rstrip(b"\n") == b'{"type":"BYE"}'
        thread.join(timeout=5)
        assert not thread.is_alive()
