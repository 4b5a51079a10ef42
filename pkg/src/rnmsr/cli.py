"""Command-line entry point: ``rnmsr <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import fields
from pathlib import Path

from . import __version__, data, gbp, kernels, synth
from .baselines import ItemKNN, Pop
from .config import ConfigError, RunConfig, env_seed
from .diffcore.checkpoint import CheckpointError
from .metrics import DEFAULT_NS, evaluate_scorer
from .model import RNMSR, dump_attention
from .train import ablation_csv, run_ablation, train

log = logging.getLogger("rnmsr")


def _add_config_flags(p: argparse.ArgumentParser, keys=None) -> None:
    p.add_argument("--config", metavar="FILE", help="YAML file of key: value settings (flags win)")
    defaults = RunConfig()
    g = p.add_argument_group("settings")
    for f in fields(RunConfig):
        if keys is not None and f.name not in keys:
            continue
        flag = "--" + f.name.replace("_", "-")
        default = getattr(defaults, f.name)
        help_ = f"{RunConfig.HELP.get(f.name, '')} (default: {default})"
        if isinstance(default, bool):
            g.add_argument(flag, dest=f.name, action="store_const", const=True, default=None, help=help_)
        else:
            g.add_argument(flag, dest=f.name, type=type(default), default=None, metavar=f.name.upper(), help=help_)


def resolve_config(args) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(RunConfig.read_mapping(args.config))
    for key in RunConfig.keys():
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if "seed" not in values:
        values["seed"] = env_seed(0)
    return RunConfig.from_mapping(values)


def write_run(run_dir, command: str, argv, settings: dict) -> Path:
    """Write ``run.json``; a record from another command is kept and this one
    goes to ``<run_dir>/<command>/run.json`` instead."""
    d = Path(run_dir)
    prior = d / "run.json"
    if prior.exists():
        try:
            other = json.loads(prior.read_text()).get("command")
        except (ValueError, AttributeError):
            other = None
        if other != command:
            d = d / command
    d.mkdir(parents=True, exist_ok=True)
    record = {
        "command": command,
        "argv": list(argv),
        "version": __version__,
        "kernels": kernels.BACKEND,
        "time": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "settings": settings,
    }
    (d / "run.json").write_text(json.dumps(record, indent=2) + "\n")
    return d / "run.json"


# ------------------------------------------------------------------ commands


def cmd_synth(args, argv):
    seed = args.seed if args.seed is not None else env_seed(0)
    sessions = synth.synth_generate(
        args.n_sessions, args.n_items, args.repeat_rate, args.min_len, args.max_len, seed=seed, days=args.days
    )
    data.write_log(args.out, sessions)
    print(f"wrote {len(sessions)} sessions to {args.out} (repeat fraction {synth.repeat_fraction(sessions):.3f})")
    settings = {k: v for k, v in vars(args).items() if k != "func"}
    settings["seed"] = seed
    write_run(args.run_dir or Path(args.out).parent, "synth", argv, settings)


def cmd_preprocess(args, argv):
    cfg = resolve_config(args)
    sessions = data.ingest(args.log)
    ds = data.preprocess(
        sessions, holdout=cfg.holdout_days * data.DAY, valid_fraction=cfg.valid_fraction,
        seed=cfg.seed, min_count=cfg.min_item_count,
    )
    data.save_dataset(ds, args.out)
    print(f"items={ds.n_items} train={len(ds.train)} valid={len(ds.valid)} test={len(ds.test)} -> {args.out}")
    write_run(args.out, "preprocess", argv, {"log": args.log, "out": args.out, **cfg.to_dict()})


def _pairs_for_stats(path):
    p = Path(path)
    if p.is_dir():
        return data.read_pairs(p / "train.txt")
    with open(p, encoding="utf-8") as fh:
        first = next((ln for ln in fh if ln.strip() and not ln.startswith("#")), "")
    if first.count("\t") == 2:
        return [pair for s in data.ingest(p) if len(s) >= 2 for pair in data.sequence_split(s.items)]
    return data.read_pairs(p)


def cmd_stats(args, argv):
    stats = gbp.compute_stats(_pairs_for_stats(args.input), args.l_max)
    text = gbp.render_report(stats, fmt=args.format, l_max=args.l_max)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    write_run(args.run_dir or (Path(args.out).parent if args.out else "."), "stats", argv,
              {"input": args.input, "l_max": args.l_max, "format": args.format})


def cmd_train(args, argv):
    cfg = resolve_config(args)
    ds = data.load_dataset(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_run(out, "train", argv, {"data": args.data, **cfg.to_dict()})
    model, history = train(ds, cfg.train_config(), log_path=out / "train_log.jsonl", ckpt_path=out / "model.ckpt")
    for h in history:
        print(json.dumps(h))
    print(f"checkpoint: {out / 'model.ckpt'}")


def _emit_report(report, out, name):
    print(report.to_json())
    if out:
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        (d / f"{name}.json").write_text(report.to_json() + "\n")
        (d / f"{name}.csv").write_text(",".join(report.csv_header()) + "\n" + ",".join(report.csv_row()) + "\n")


def cmd_evaluate(args, argv):
    ds = data.load_dataset(args.data)
    pairs = {"train": ds.train, "valid": ds.valid, "test": ds.test}[args.split]
    ns = tuple(int(n) for n in args.ns.split(","))
    if args.baseline == "pop":
        scorer = Pop(ds.n_items).fit(ds.train)
    elif args.baseline == "itemknn":
        scorer = ItemKNN(ds.n_items, k=args.knn_k).fit(ds.train)
    else:
        if not args.checkpoint:
            raise ConfigError("evaluate needs --checkpoint or --baseline")
        model, _ = RNMSR.load(args.checkpoint)
        scorer = model.predict
    report = evaluate_scorer(scorer, pairs, ns)
    _emit_report(report, args.out, f"metrics_{args.baseline or 'rnmsr'}_{args.split}")
    write_run(args.run_dir or args.out or ".", "evaluate", argv,
              {k: v for k, v in vars(args).items() if k != "func"})


def cmd_ablate(args, argv):
    cfg = resolve_config(args)
    ds = data.load_dataset(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_run(out, "ablate", argv, {"data": args.data, **cfg.to_dict()})
    results = run_ablation(ds, cfg.train_config(), DEFAULT_NS)
    text = ablation_csv(results)
    (out / "ablation.csv").write_text(text)
    sys.stdout.write(text)


def _load_for_inference(args):
    model, meta = RNMSR.load(args.checkpoint)
    raw_ids = None
    vocab = None
    if args.data:
        ds = data.load_dataset(args.data)
        vocab, raw_ids = ds.item_vocab, ds.raw_ids()
    prefix = []
    for tok in args.items:
        if vocab is not None:
            if tok not in vocab:
                raise ConfigError(f"unknown item id {tok!r}")
            prefix.append(vocab[tok])
        else:
            prefix.append(int(tok))
    if not prefix:
        raise ConfigError("need at least one item")
    return model, prefix, raw_ids


def cmd_recommend(args, argv):
    model, prefix, raw_ids = _load_for_inference(args)
    for idx, p in model.recommend(prefix, args.topk):
        print(f"{raw_ids[idx] if raw_ids else idx}\t{p:.6f}")
    write_run(args.run_dir or ".", "recommend", argv, {k: v for k, v in vars(args).items() if k != "func"})


def cmd_dump_attention(args, argv):
    model, prefix, raw_ids = _load_for_inference(args)
    sys.stdout.write(dump_attention(model, prefix, raw_ids, viz_zero=args.viz_zero))
    write_run(args.run_dir or ".", "dump-attention", argv, {k: v for k, v in vars(args).items() if k != "func"})


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="rnmsr", description=__doc__, formatter_class=fmt)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("synth", help="generate a synthetic click log", formatter_class=fmt)
    p.add_argument("--out", required=True, help="output TSV log")
    p.add_argument("--n-sessions", type=int, default=2000)
    p.add_argument("--n-items", type=int, default=300)
    p.add_argument("--repeat-rate", type=float, default=0.3)
    p.add_argument("--min-len", type=int, default=2)
    p.add_argument("--max-len", type=int, default=8)
    p.add_argument("--days", type=int, default=10)
    p.add_argument("--seed", type=int, default=None, help="random seed (falls back to $RNMSR_SEED, then 0)")
    p.add_argument("--run-dir", default=None, help="where run.json goes (default: next to --out)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="filter, split and index a click log", formatter_class=fmt)
    p.add_argument("log", help="TSV log: session_id<TAB>item_id<TAB>timestamp")
    p.add_argument("--out", required=True, help="dataset directory")
    _add_config_flags(p, {"seed", "holdout_days", "valid_fraction", "min_item_count"})
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("stats", help="pattern repeat/explore statistics", formatter_class=fmt)
    p.add_argument("input", help="TSV log, pairs file, or dataset directory (uses train.txt)")
    p.add_argument("--l-max", type=int, default=gbp.DEFAULT_L_MAX)
    p.add_argument("--format", choices=("csv", "text"), default="csv")
    p.add_argument("--out", default=None, help="write the report here instead of stdout")
    p.add_argument("--run-dir", default=None)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train a model", formatter_class=fmt)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="run directory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="P/MRR/NDCG@N of a checkpoint or baseline", formatter_class=fmt)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--baseline", choices=("pop", "itemknn"), default=None)
    p.add_argument("--knn-k", type=int, default=100)
    p.add_argument("--split", choices=("train", "valid", "test"), default="test")
    p.add_argument("--ns", default=",".join(map(str, DEFAULT_NS)), help="comma-separated cutoffs")
    p.add_argument("--out", default=None, help="directory for metrics JSON/CSV")
    p.add_argument("--run-dir", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="train and test every ablation variant", formatter_class=fmt)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_ablate)

    for name, func, extra in (("recommend", cmd_recommend, True), ("dump-attention", cmd_dump_attention, False)):
        p = sub.add_parser(name, help="top-k next items" if extra else "attention weights for one prefix",
                           formatter_class=fmt)
        p.add_argument("items", nargs="+", help="prefix item ids, oldest first")
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--data", default=None, help="dataset directory, to map raw item ids")
        p.add_argument("--run-dir", default=None)
        if extra:
            p.add_argument("--topk", type=int, default=20)
        else:
            p.add_argument("--viz-zero", action="store_true", help="zero the session and item representations")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        args.func(args, argv)
    except (ConfigError, data.DataError, CheckpointError, synth.GenerationError, ValueError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "command": args.command}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
