"""Entry point: serve the wire protocol on stdin/stdout or a TCP port."""

import argparse
import sys

from .model import EchoModel, ReorderModel
from .server import AgentSession, serve_socket, serve_stream


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="example-agent",
        description="Reference translation agent speaking the line-delimited protocol",
    )
    parser.add_argument("--lexicon", help="lexicon JSON; omit for an echo model")
    parser.add_argument(
        "--default-style", choices=["si", "off"], default="off",
        help="style used when no tag is forced",
    )
    parser.add_argument("--port", type=int, help="serve one TCP connection instead of stdio")
    args = parser.parse_args(argv)

    model = ReorderModel.from_file(args.lexicon) if args.lexicon else EchoModel()
    session = AgentSession(model, default_style=args.default_style)
    if args.port is not None:
        serve_socket(args.port, session)
    else:
        serve_stream(sys.stdin.buffer, sys.stdout.buffer, session)
    return 0


if __name__ == "__main__":
    sys.exit(main())
