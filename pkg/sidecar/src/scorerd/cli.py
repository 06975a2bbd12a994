"""scorerd command line: serve scorers over stdio or TCP."""

from __future__ import annotations

import argparse
import sys

from .backends import ModelError
from .server import ScorerService, SidecarConfig, serve_stdio, serve_tcp


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scorerd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    ps = sub.add_parser("serve", help="answer scorer requests")
    ps.add_argument("--verifier", default="builtin:overlap", help="builtin:overlap or hf:CHECKPOINT")
    ps.add_argument("--mlm", default="builtin:hashlm", help="builtin:hashlm or hf:CHECKPOINT")
    ps.add_argument("--proposer", default="builtin:copy", help="builtin:copy or hf:CHECKPOINT")
    ps.add_argument("--device", default="cpu")
    ps.add_argument("--max-len", type=int, default=256, help="claim+evidence token budget")
    ps.add_argument("--top-k", type=int, default=50, help="token proposal truncation")
    ps.add_argument("--bind", default=None, metavar="HOST:PORT", help="serve TCP instead of stdio")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = SidecarConfig(
        verifier=args.verifier,
        mlm=args.mlm,
        proposer=args.proposer,
        device=args.device,
        max_len=args.max_len,
        top_k=args.top_k,
    )
    try:
        service = ScorerService(config)
    except ModelError as exc:
        print(f"cannot resolve model slots: {exc}", file=sys.stderr)
        return 2
    if args.bind:
        host, _, port = args.bind.rpartition(":")
        serve_tcp(service, host or "127.0.0.1", int(port))
    else:
        serve_stdio(service)
    return 0


if __name__ == "__main__":
    sys.exit(main())
