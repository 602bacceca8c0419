"""Command-line entry point: embed a sample manifest into a .fst store."""

from __future__ import annotations

import argparse
import json
import sys

from .export import export
from .job import ExportError, ExportJob


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="fstexport")
    parser.add_argument("--manifest", required=True, help="JSON-lines of {key, dataset, image, text}")
    parser.add_argument("--out", required=True, help="output store path or stem")
    parser.add_argument("--provider", default="stub")
    parser.add_argument("--pooling", choices=["last_token", "mean_tokens"], default="last_token")
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--dim", type=int, default=64, help="stub provider output dimension")
    parser.add_argument("--seed", type=int, default=0, help="stub provider projection seed")
    parser.add_argument("--emit-logprobs", action="store_true",
                        help="stub provider: add pseudo log-prob aux channels")
    parser.add_argument("--provider-options", default=None,
                        help="JSON object of extra provider options")

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    options = {"dim": args.dim, "seed": args.seed, "emit_logprobs": args.emit_logprobs}
    if args.provider_options:
        options.update(json.loads(args.provider_options))

    try:
        summary = export(
            ExportJob(
                manifest_path=args.manifest,
                output_stem=args.out,
                provider_id=args.provider,
                provider_options=options,
                pooling=args.pooling,
                batch_size=args.batch_size,
            )
        )
    except (ExportError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    print(json.dumps(summary))
    return 0


if __name__ == "__main__":
    sys.exit(main())
