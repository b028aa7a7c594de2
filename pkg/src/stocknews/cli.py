"""Command-line entry point: ``stocknews <subcommand> [options]``.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 all stocks failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .corpus import DataError
from .experiment import (
    METHODS,
    AllStocksFailed,
    ConfigError,
    ExperimentConfig,
    evaluate,
    format_report,
    load_config,
    parse_value,
    prepare,
    read_predictions,
    run_experiment,
    run_stock,
)
from .features import write_feature_csv
from .lexicon import LexiconError
from .model import TrainingDiverged, save_checkpoint
from .synth import SynthParams, synth

log = logging.getLogger("stocknews")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ALL_FAILED = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat 'key = value' experiment config file")
    for f in dataclasses.fields(ExperimentConfig):
        if f.name in ("out", "seed"):
            continue
        p.add_argument(f"--{f.name.replace('_', '-')}", dest=f"cfg_{f.name}", metavar="VALUE",
                       help=f"override config key {f.name}")


def _config_from_args(args) -> ExperimentConfig:
    overrides = {}
    for f in dataclasses.fields(ExperimentConfig):
        raw = getattr(args, f"cfg_{f.name}", None)
        if raw is not None:
            overrides[f.name] = parse_value(f.name, raw)
    if args.out is not None:
        overrides["out"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.config:
        return load_config(args.config, overrides)
    return ExperimentConfig(**overrides)


def cmd_synth(args) -> int:
    sp = SynthParams(days=args.days, stocks=args.stocks, signal=args.signal, news_rate=args.news_rate,
                     persistence=args.persistence, seed=args.seed or 0)
    data = synth(sp)
    paths = data.write(args.out or "synth")
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    print(f"achievable next-day accuracy: {sp.bayes_accuracy:.4f}")
    return EXIT_OK


def cmd_lexicon(args) -> int:
    cfg = _config_from_args(args)
    cfg.validate()
    prep = prepare(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    prep.lexicon.to_tsv(out / "lexicon.tsv")
    print(f"lexicon: {len(prep.lexicon)} tokens from {prep.lexicon.N} training documents -> {out / 'lexicon.tsv'}")
    return EXIT_OK


def cmd_featurize(args) -> int:
    cfg = _config_from_args(args)
    cfg.validate()
    prep = prepare(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_feature_csv([sd.features for sd in prep.stocks.values()], out / "features.csv")
    print(f"features for {len(prep.stocks)} stock(s) -> {out / 'features.csv'}")
    return EXIT_OK if prep.stocks else EXIT_ALL_FAILED


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    cfg.validate()
    prep = prepare(cfg)
    ckdir = Path(cfg.out) / "checkpoints"
    ckdir.mkdir(parents=True, exist_ok=True)
    order = cfg.stocks or list(prep.stocks)
    ok = 0
    for i, sid in enumerate(order):
        if sid not in prep.stocks:
            continue
        sd = prep.stocks[sid]
        try:
            res = run_stock(sd.features, sd.split_index, cfg, cfg.seed + i)
        except (ValueError, RuntimeError) as exc:
            log.error("stock %s: %s", sid, exc)
            continue
        save_checkpoint(ckdir / f"{sid}.ckpt", res.params,
                        dataclasses.asdict(cfg.train_config(cfg.seed + i)), cfg.seed + i)
        ok += 1
    print(f"trained {ok} model(s) -> {ckdir}")
    return EXIT_OK if ok else EXIT_ALL_FAILED


def cmd_evaluate(args) -> int:
    pred_dir = Path(args.out or "out") / "predictions"
    files = sorted(pred_dir.glob("*.csv"))
    if not files:
        raise DataError(f"no prediction files in {pred_dir}")
    print("stock  " + "  ".join(METHODS))
    for path in files:
        labels, preds = read_predictions(path)
        accs = [evaluate(preds[m], labels) for m in METHODS]
        print(f"{path.stem}  " + "  ".join(f"{a:.4f}" for a in accs))
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    report = run_experiment(cfg)
    sys.stdout.write(format_report(report))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stocknews", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="global seed")
        p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("synth", help="write a synthetic planted-signal dataset")
    common(p)
    p.add_argument("--days", type=int, default=600)
    p.add_argument("--stocks", type=int, default=20)
    p.add_argument("--signal", type=float, default=0.4)
    p.add_argument("--news-rate", type=float, default=0.5)
    p.add_argument("--persistence", type=int, default=1)
    p.set_defaults(func=cmd_synth)

    for name, func, help_ in (
        ("lexicon", cmd_lexicon, "build the polarity lexicon from training-window news"),
        ("featurize", cmd_featurize, "dump per-day returns, labels and histograms"),
        ("train", cmd_train, "train one RNN per stock and write checkpoints"),
        ("run", cmd_run, "end-to-end experiment with all three methods"),
    ):
        p = sub.add_parser(name, help=help_)
        common(p)
        _add_config_args(p)
        p.set_defaults(func=func)

    p = sub.add_parser("evaluate", help="accuracy table from a run's prediction CSVs")
    common(p)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AllStocksFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ALL_FAILED
    except (DataError, LexiconError, TrainingDiverged, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
