"""scorer-bridge: score (query, document) pairs into a relevance TSV."""

from __future__ import annotations

import argparse
import sys

from .errors import BridgeError
from .scorers import load_scorer
from .scoring import score_pairs_file


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scorer-bridge",
        description="Score qid/docid/query/document TSV pairs with a "
                    "cross-encoder under max-passage aggregation.",
    )
    parser.add_argument("--pairs", required=True, help="input pairs TSV")
    parser.add_argument("--out", required=True, help="output scores TSV")
    parser.add_argument(
        "--model", required=True,
        help="transformers checkpoint (path or name), or 'overlap' for the "
             "deterministic lexical stand-in",
    )
    parser.add_argument("--passage-tokens", type=int, default=256,
                        help="whitespace tokens per passage window")
    parser.add_argument("--stride", type=int, default=128,
                        help="window stride in tokens (128 = 50%% overlap)")
    parser.add_argument("--max-length", type=int, default=512,
                        help="model-side truncation length")
    parser.add_argument("--batch-size", type=int, default=16)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scorer = load_scorer(args.model, max_length=args.max_length,
                             batch_size=args.batch_size)
        count = score_pairs_file(
            args.pairs, args.out, scorer,
            passage_tokens=args.passage_tokens, stride=args.stride,
        )
    except BridgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"scored {count} pairs -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
