"""Command-line entry point for the curation pipeline.

Subcommands cover the full flow: ingest/synthesize feature stores, inspect
distribution gaps (mmd), train the proximity estimator, score pools, select
top-K manifests, and emit analysis reports. Results depend only on inputs
and --seed; --threads and --log-level never change any output byte.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import baselines, estimator, mmd, selection, store, synth
from .scores import read_score_table, write_score_table

log = logging.getLogger("proxsel")

_EPILOG = (
    "Reference settings: full-scale curation runs typically select the top "
    "1,200,000 samples (select --k 1200000); estimator training stops early "
    "at 0.90 validation accuracy by default."
)


def _write_json(path: str | Path, obj: dict) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def _provenance(args: argparse.Namespace, keys: list[str]) -> dict:
    # Only result-affecting parameters: paths, thread counts and log levels
    # are excluded so identical runs produce identical artifact bytes.
    out = {"seed": args.seed}
    for key in keys:
        out[key] = getattr(args, key)
    return out


def _cmd_ingest(args: argparse.Namespace) -> int:
    summary = store.ingest_jsonl(args.input, args.out)
    print(json.dumps(summary))
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    st = store.open_store(args.store)
    report = store.validate_store(st)
    payload = {"ok": report.ok, "count": st.count, "dim": st.dim, "issues": report.issues}
    if args.out:
        _write_json(args.out, payload)
    print(json.dumps(payload))
    return 0 if report.ok else 1


def _cmd_mmd(args: argparse.Namespace) -> int:
    groups: dict[str, list[np.ndarray]] = {}
    for path in args.store:
        st = store.open_store(path)
        labels = np.asarray(st.datasets)
        for label in sorted(set(st.datasets)):
            groups.setdefault(label, []).append(st.matrix(np.flatnonzero(labels == label)))
    named = [(label, np.vstack(parts)) for label, parts in groups.items()]
    config = mmd.MMDConfig(
        estimator_kind=mmd.UNBIASED if args.unbiased else mmd.BIASED,
        subsample_cap=args.subsample_cap,
        bandwidth_cap=args.bandwidth_cap,
        seed=args.seed,
    )
    matrix = mmd.pairwise_mmd_matrix(named, config)
    _write_json(args.out, matrix.to_json_dict())
    log.info("mmd matrix over %d groups written to %s", len(named), args.out)
    return 0


def _train_config(args: argparse.Namespace) -> estimator.TrainConfig:
    return estimator.TrainConfig(
        batch_size=args.batch_size,
        max_steps=args.max_steps,
        step_size=args.step_size,
        momentum=args.momentum,
        early_stop_accuracy=args.early_stop,
        val_fraction=args.val_fraction,
        eval_every=args.eval_every,
        standardize_features=args.standardize,
        seed=args.seed,
    )


def _cmd_train(args: argparse.Namespace) -> int:
    target = store.open_store(args.target)
    pool = store.open_store(args.pool)
    est, history = estimator.train_estimator(target, pool, _train_config(args))
    estimator.save_estimator(est, args.out)
    log.info(
        "trained in %d steps (early stop: %s, final val acc: %s)",
        history.steps_run,
        history.stopped_early,
        history.val_acc_curve[-1] if history.val_acc_curve else "n/a",
    )
    print(json.dumps({"steps_run": history.steps_run, "stopped_early": history.stopped_early}))
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    pool = store.open_store(args.pool)
    if args.method == "learned":
        if not args.est:
            raise ValueError("--method learned requires --est")
        est = estimator.load_estimator(args.est)
        table = estimator.score_store(est, pool, threads=args.threads)
    elif args.method == "avgdist":
        if not args.target:
            raise ValueError("--method avgdist requires --target")
        table = baselines.score_store_baseline(
            pool,
            "avg_distance",
            target_store=store.open_store(args.target),
            cap=args.cap,
            seed=args.seed,
        )
    elif args.method == "ppl":
        table = baselines.score_store_baseline(pool, "target_ppl")
    elif args.method == "dppl":
        table = baselines.score_store_baseline(pool, "delta_ppl")
    else:
        raise ValueError(f"unknown scoring method {args.method!r}")
    table.config = _provenance(args, ["method", "cap"])
    write_score_table(table, args.out)
    log.info("scored %d records with %s", len(table), table.scorer)
    return 0


def _cmd_select(args: argparse.Namespace) -> int:
    if args.k is None:
        raise ValueError("select requires --k (via flag or config file)")
    table = read_score_table(args.scores)
    manifest = selection.top_k_select(table, args.k, config=_provenance(args, ["k"]))
    selection.write_manifest(manifest, args.out)
    log.info("selected %d of %d records", len(manifest), manifest.pool_size)
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    if args.type == "composition":
        if not args.manifest:
            raise ValueError("--type composition requires --manifest")
        manifest = selection.read_manifest(args.manifest)
        payload = selection.mixture_composition(manifest).to_json_dict()
    elif args.type == "histogram":
        if not args.scores:
            raise ValueError("--type histogram requires --scores")
        table = read_score_table(args.scores)
        payload = selection.score_histogram(
            table, bins=args.bins, group_by_dataset=args.by_dataset
        )
    elif args.type == "shift":
        if not (args.scores and args.manifest):
            raise ValueError("--type shift requires --scores and --manifest")
        table = read_score_table(args.scores)
        manifest = selection.read_manifest(args.manifest)
        payload = selection.selection_shift_report(table, manifest, bins=args.bins)
    else:
        raise ValueError(f"unknown report type {args.type!r}")
    payload["config"] = _provenance(args, ["type", "bins"])
    _write_json(args.out, payload)
    return 0


def _cmd_diversity(args: argparse.Namespace) -> int:
    st = store.open_store(args.store)
    if args.manifest:
        manifest = selection.read_manifest(args.manifest)
        index = {int(rid): pos for pos, rid in enumerate(st.ids.tolist())}
        missing = [e.id for e in manifest.entries if e.id not in index]
        if missing:
            raise ValueError(f"manifest ids missing from store: {missing[:5]}")
        X = st.matrix(np.asarray([index[e.id] for e in manifest.entries]))
    else:
        X = st.matrix()
    cfg = selection.DiversityConfig(
        t=args.temperature,
        exact_threshold=args.exact_threshold,
        pair_samples=args.pair_samples,
        seed=args.seed,
    )
    value = selection.diversity(X, cfg)
    payload = {
        "diversity": value,
        "points": int(X.shape[0]),
        "config": _provenance(args, ["temperature", "exact_threshold", "pair_samples"]),
    }
    _write_json(args.out, payload)
    print(json.dumps({"diversity": value}))
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    if args.benchmark:
        if args.benchmark == "standard":
            target_spec, pool_spec = synth.standard_benchmark()
        else:
            target_spec, pool_spec = synth.multimodal_benchmark()
        summary = synth.write_mixture(pool_spec, args.out)
        if args.target_out:
            synth.write_mixture(target_spec, args.target_out)
    else:
        if not args.spec:
            raise ValueError("synth needs --spec or --benchmark")
        with open(args.spec, "r", encoding="utf-8") as fh:
            spec = synth.MixtureSpec.from_json_dict(json.load(fh))
        summary = synth.write_mixture(spec, args.out)
    print(json.dumps(summary))
    return 0


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="proxsel", epilog=_EPILOG)
    parser.add_argument("--seed", type=int, default=0, help="seed for every stochastic step")
    parser.add_argument("--threads", type=int, default=1, help="worker threads (wall time only)")
    parser.add_argument("--log-level", default="warning")
    parser.add_argument("--config", default=None, help="JSON file of option defaults")
    sub = parser.add_subparsers(dest="command", required=True)
    commands: dict[str, argparse.ArgumentParser] = {}

    p = commands["ingest"] = sub.add_parser("ingest", help="JSONL vector dump -> .fst store")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = commands["validate"] = sub.add_parser("validate", help="full-scan store validation")
    p.add_argument("--store", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_validate)

    p = commands["mmd"] = sub.add_parser("mmd", help="pairwise MMD matrix across dataset labels")
    p.add_argument("--store", action="append", required=True, help="repeatable store path")
    p.add_argument("--unbiased", action="store_true")
    p.add_argument("--subsample-cap", type=int, default=2000)
    p.add_argument("--bandwidth-cap", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_mmd)

    p = commands["train"] = sub.add_parser("train", help="train the proximity estimator")
    p.add_argument("--target", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--max-steps", type=int, default=1000)
    p.add_argument("--step-size", type=float, default=0.1)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--early-stop", type=float, default=0.90)
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--eval-every", type=int, default=5)
    p.add_argument("--standardize", action="store_true")
    p.set_defaults(func=_cmd_train)

    p = commands["score"] = sub.add_parser("score", help="score a pool with any scorer")
    p.add_argument("--pool", required=True)
    p.add_argument("--method", choices=["learned", "avgdist", "ppl", "dppl"], default="learned")
    p.add_argument("--est", default=None)
    p.add_argument("--target", default=None)
    p.add_argument("--cap", type=int, default=2000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_score)

    p = commands["select"] = sub.add_parser("select", help="top-K manifest from a score table")
    p.add_argument("--scores", required=True)
    p.add_argument("--k", type=int, default=None, help="required, via flag or config file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_select)

    p = commands["report"] = sub.add_parser("report", help="composition/histogram/shift reports")
    p.add_argument("--type", choices=["composition", "histogram", "shift"], required=True)
    p.add_argument("--scores", default=None)
    p.add_argument("--manifest", default=None)
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--by-dataset", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)

    p = commands["diversity"] = sub.add_parser("diversity", help="uniformity diversity of a store")
    p.add_argument("--store", required=True)
    p.add_argument("--manifest", default=None, help="restrict to manifest ids")
    p.add_argument("--temperature", type=float, default=2.0)
    p.add_argument("--exact-threshold", type=int, default=4096)
    p.add_argument("--pair-samples", type=int, default=200_000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_diversity)

    p = commands["synth"] = sub.add_parser("synth", help="generate a synthetic benchmark store")
    p.add_argument("--spec", default=None, help="mixture spec JSON")
    p.add_argument("--benchmark", choices=["standard", "multimodal"], default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--target-out", default=None)
    p.set_defaults(func=_cmd_synth)

    # --seed is also accepted after the subcommand; SUPPRESS keeps the
    # root-level value (or config default) when the flag is absent.
    for sp in commands.values():
        sp.add_argument("--seed", type=int, default=argparse.SUPPRESS, help=argparse.SUPPRESS)

    return parser, commands


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, commands = build_parser()

    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    pre_args, _ = pre.parse_known_args(argv)
    if pre_args.config:
        with open(pre_args.config, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            print("error: config file must hold a JSON object", file=sys.stderr)
            return 1
        parser.set_defaults(**{k: v for k, v in cfg.items() if k in ("seed", "threads", "log_level")})
        for sp in commands.values():
            dests = {a.dest for a in sp._actions}
            sp.set_defaults(**{k: v for k, v in cfg.items() if k in dests})

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING))
    try:
        return args.func(args)
    except (ValueError, store.StoreError, OSError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
