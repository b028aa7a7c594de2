"""End-to-end experiment: lexicon, features, three predictors, test accuracy."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import baseline as bl
from .corpus import AlignedSeries, DataError, Document, align, group_by_stock, load_news, load_prices
from .features import FeatureSequence, HistogramSpec, assemble, make_spec
from .lexicon import PolarityLexicon, build_lexicon, load_seeds
from .model import RnnDims, RnnParams, TrainConfig, forward, save_checkpoint, train

log = logging.getLogger(__name__)

METHODS = ("price+linear", "price+news+linear", "price+news+rnn")


class ConfigError(ValueError):
    pass


class AllStocksFailed(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    # inputs; an empty seeds path selects the bundled default seed words
    prices: str = ""
    news: str = ""
    seeds: str = ""
    # lexicon
    K: int = 100
    min_df: int = 5
    epsilon: float = 0.5
    exclude_seeds: bool = False
    # features
    L: int = 10
    hist_denominator: str = "in_vocab"
    # model
    H_r: int = 8
    H_f: int = 16
    H: int = 16
    lr: float = 0.01
    lr_decay: float = 0.95
    l2: float = 1e-4
    epochs: int = 50
    clip: float | None = 5.0
    bptt: int | None = 32
    l2_biases: bool = False
    # linear baselines
    svm_lam: float = 1e-3
    svm_epochs: int = 300
    svm_lr: float = 0.5
    # protocol
    split: float = 0.8
    stocks: list[str] = field(default_factory=list)
    out: str = "out"
    seed: int = 0

    def validate(self, check_files: bool = True) -> None:
        if not 0.0 < self.split < 1.0:
            raise ConfigError(f"split must lie in (0, 1), got {self.split}")
        if self.hist_denominator not in ("in_vocab", "all"):
            raise ConfigError("hist_denominator must be 'in_vocab' or 'all'")
        for name in ("K", "min_df", "L", "H_r", "H_f", "H"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.lr < 0 or self.l2 < 0 or self.epsilon <= 0:
            raise ConfigError("lr and l2 must be >= 0, epsilon > 0")
        if check_files:
            for name in ("prices", "news"):
                path = getattr(self, name)
                if not path:
                    raise ConfigError(f"no {name} file configured")
                if not Path(path).is_file():
                    raise ConfigError(f"{name} file not found: {path}")
            if self.seeds and not Path(self.seeds).is_file():
                raise ConfigError(f"seeds file not found: {self.seeds}")

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            lr=self.lr, lr_decay=self.lr_decay, l2=self.l2, epochs=self.epochs,
            seed=seed, clip=self.clip, bptt=self.bptt, l2_biases=self.l2_biases,
        )

    def dims(self) -> RnnDims:
        return RnnDims(L=self.L, H_r=self.H_r, H_f=self.H_f, H=self.H)

    def linear_hyper(self) -> bl.LinearHyperparams:
        return bl.LinearHyperparams(lam=self.svm_lam, epochs=self.svm_epochs, lr=self.svm_lr, seed=self.seed)


# ---------------------------------------------------------------------------
# config file: one "key = value" per line, "#" starts a comment


def _field_types() -> dict[str, str]:
    return {f.name: str(f.type) for f in dataclasses.fields(ExperimentConfig)}


def parse_value(key: str, raw: str) -> Any:
    types = _field_types()
    if key not in types:
        raise ConfigError(f"unknown config key {key!r}")
    kind = types[key]
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
        raw = raw[1:-1]
    try:
        if "None" in kind and raw.lower() in ("none", ""):
            return None
        if kind.startswith("bool"):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("float"):
            return float(raw)
        if kind.startswith("list"):
            return [s.strip() for s in raw.split(",") if s.strip()]
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r} (expected {kind})") from None


def load_config(path: str | Path, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    values: dict[str, Any] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        try:
            values[key] = parse_value(key, raw)
        except ConfigError as exc:
            raise ConfigError(f"{path}: line {lineno}: {exc}") from None
    values.update(overrides or {})
    return ExperimentConfig(**values)


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, list):
            v = ",".join(v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        elif v is None:
            v = "none"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# protocol pieces


@dataclass
class Split:
    index: int
    train: FeatureSequence
    test: FeatureSequence


def _slice(fs: FeatureSequence, a: int, b: int) -> FeatureSequence:
    return FeatureSequence(fs.stock_id, fs.dates[a:b], fs.returns[a:b], fs.histograms[a:b], fs.labels[a:b])


def split_index(n_labeled: int, fraction: float) -> int:
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    k = math.floor(fraction * n_labeled)
    if k < 1 or k >= n_labeled:
        raise ValueError(f"split of {n_labeled} labeled days at {fraction} leaves one side empty")
    return k


def split(features: FeatureSequence, fraction: float = 0.8) -> Split:
    """Chronological split of the labeled steps; the unlabeled final step is left out."""
    n = features.n_labeled
    k = split_index(n, fraction)
    return Split(k, _slice(features, 0, k), _slice(features, k, n))


def evaluate(predictions: Sequence[int], labels: Sequence[int]) -> float:
    p = np.asarray(predictions)
    c = np.asarray(labels)
    if p.shape != c.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {c.shape}")
    if p.size == 0:
        raise ValueError("nothing to evaluate")
    return float(np.count_nonzero(p == c)) / p.size


# ---------------------------------------------------------------------------
# the pipeline


@dataclass
class StockData:
    aligned: AlignedSeries
    split_index: int
    cutoff: Any  # date of the last training step
    features: FeatureSequence | None = None


@dataclass
class Prepared:
    config: ExperimentConfig
    stocks: dict[str, StockData]
    errors: dict[str, str]
    lexicon: PolarityLexicon
    spec: HistogramSpec


def training_documents(docs: Sequence[Document], cutoff) -> list[Document]:
    return [d for d in docs if d.date <= cutoff]


def prepare(cfg: ExperimentConfig) -> Prepared:
    """Load, align, build the shared lexicon on training-window news, featurize."""
    series = {s.stock_id: s for s in load_prices(cfg.prices)}
    all_docs = load_news(cfg.news)
    by_stock = group_by_stock(all_docs)
    seeds = load_seeds(cfg.seeds or None)
    wanted = cfg.stocks or list(series)

    stocks: dict[str, StockData] = {}
    errors: dict[str, str] = {}
    for sid in wanted:
        try:
            if sid not in series:
                raise DataError(f"unknown stock id {sid!r}")
            aligned = align(series[sid], by_stock.get(sid, []))
            if len(aligned) < 3:
                raise DataError(f"stock {sid}: need at least 3 trading days")
            n_labeled = len(aligned) - 2
            k = split_index(n_labeled, cfg.split)
            # feature step i is trading day i + 2 (1-based), i.e. aligned.days[i + 1]
            stocks[sid] = StockData(aligned, k, aligned.days[k].date)
        except (DataError, ValueError) as exc:
            errors[sid] = str(exc)
            log.error("stock %s: %s", sid, exc)
    if not stocks:
        raise AllStocksFailed("no stock survived loading and alignment")

    train_docs = [
        d for d in all_docs if d.stock_id in stocks and d.date <= stocks[d.stock_id].cutoff
    ]
    lexicon = build_lexicon(
        [d.tokens for d in train_docs], seeds, K=cfg.K, min_df=cfg.min_df,
        epsilon=cfg.epsilon, exclude_seeds=cfg.exclude_seeds,
    )
    spec = make_spec(lexicon, cfg.L)
    for sid, sd in list(stocks.items()):
        sd.features = assemble(sd.aligned, lexicon, spec, cfg.hist_denominator)
    return Prepared(cfg, stocks, errors, lexicon, spec)


@dataclass
class StockResult:
    stock_id: str
    n_train: int
    n_test: int
    test_dates: list
    labels: np.ndarray
    predictions: dict[str, np.ndarray]
    up_prob: np.ndarray
    accuracy: dict[str, float]
    news_days: int
    params: RnnParams
    next_day: tuple[int, float]


def run_stock(fs: FeatureSequence, k: int, cfg: ExperimentConfig, seed: int) -> StockResult:
    n = fs.n_labeled
    test_labels = fs.labels[k:n]
    preds: dict[str, np.ndarray] = {}

    hyper = cfg.linear_hyper()
    for method, with_news in (("price+linear", False), ("price+news+linear", True)):
        samples = bl.build_lag_samples(fs, with_news)
        tr = samples.subset(samples.steps < k)
        te = samples.subset(samples.steps >= k)
        if len(tr) == 0:
            raise ValueError(f"stock {fs.stock_id}: no baseline training samples before the split")
        model = bl.train_linear(tr, hyper)
        preds[method] = np.asarray(bl.predict_linear(model, te.X))

    params, _ = train(
        [(fs.returns[:k], fs.histograms[:k], fs.labels[:k])],
        cfg.train_config(seed),
        dims=cfg.dims(),
    )
    # one pass over the whole history: causal, so test steps see only days <= their own
    trace = forward(params, fs.returns, fs.histograms)
    up = trace.y[:, 1]
    preds["price+news+rnn"] = (trace.y[k:n, 1] > trace.y[k:n, 0]).astype(np.int64)
    last = trace.y[-1]
    next_day = (int(last[1] > last[0]), float(last[1]))

    acc = {m: evaluate(preds[m], test_labels) for m in METHODS}
    return StockResult(
        stock_id=fs.stock_id,
        n_train=k,
        n_test=n - k,
        test_dates=fs.dates[k:n],
        labels=test_labels,
        predictions=preds,
        up_prob=up[k:n],
        accuracy=acc,
        news_days=int(np.count_nonzero(fs.histograms.sum(axis=1) > 0)),
        params=params,
        next_day=next_day,
    )


def _mean(values: Sequence[float]) -> float | None:
    return math.fsum(values) / len(values) if values else None


def build_report(prep: Prepared, results: list[StockResult], errors: dict[str, str]) -> dict:
    cfg = prep.config
    lex = prep.lexicon
    per_stock = {
        r.stock_id: {
            "accuracy": r.accuracy,
            "n_train": r.n_train,
            "n_test": r.n_test,
            "news_days": r.news_days,
            "next_day": {"class": r.next_day[0], "up_prob": r.next_day[1]},
        }
        for r in results
    }
    groups: dict[str, list[StockResult]] = {"all": results}
    if len(results) >= 2:
        density = sorted(results, key=lambda r: (-r.news_days / (r.n_train + r.n_test + 1), r.stock_id))
        half = len(density) // 2
        groups["high_news"] = density[:half]
        groups["low_news"] = density[half:]
    means = {
        g: {m: _mean([r.accuracy[m] for r in rs]) for m in METHODS}
        for g, rs in groups.items()
    }
    return {
        "config": dataclasses.asdict(cfg),
        "lexicon": {
            "K": lex.K, "epsilon": lex.epsilon, "min_df": lex.min_df, "N": lex.N,
            "vocab_size": len(lex),
            "seeds_pos": list(lex.seeds.pos) if lex.seeds else [],
            "seeds_neg": list(lex.seeds.neg) if lex.seeds else [],
            "p_star": lex.p_star, "n_star": lex.n_star,
            "min_polarity": prep.spec.min_polarity, "max_polarity": prep.spec.max_polarity,
        },
        "methods": list(METHODS),
        "stocks": per_stock,
        "groups": {g: sorted(r.stock_id for r in rs) for g, rs in groups.items()},
        "means": means,
        "errors": errors,
    }


def format_report(report: dict) -> str:
    rows = [("stock", *report["methods"], "n_test")]
    for sid, s in report["stocks"].items():
        rows.append((sid, *[f"{s['accuracy'][m]:.4f}" for m in report["methods"]], str(s["n_test"])))
    for g, m in report["means"].items():
        rows.append((f"mean[{g}]", *[("-" if m[k] is None else f"{m[k]:.4f}") for k in report["methods"]], ""))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    for sid, err in report["errors"].items():
        lines.append(f"error[{sid}]: {err}")
    return "\n".join(lines) + "\n"


def write_predictions(result: StockResult, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "label", *METHODS, "rnn_up_prob"])
        for i, date in enumerate(result.test_dates):
            w.writerow([date.isoformat(), int(result.labels[i]),
                        *[int(result.predictions[m][i]) for m in METHODS],
                        repr(float(result.up_prob[i]))])


def read_predictions(path: str | Path) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    labels = np.array([int(r["label"]) for r in rows])
    return labels, {m: np.array([int(r[m]) for r in rows]) for m in METHODS}


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> dict:
    """Run every configured stock; per-stock failures are recorded, not raised."""
    cfg.validate()
    prep = prepare(cfg)
    errors = dict(prep.errors)
    results = []
    order = cfg.stocks or list(prep.stocks)
    for i, sid in enumerate(order):
        if sid not in prep.stocks:
            continue
        sd = prep.stocks[sid]
        try:
            results.append(run_stock(sd.features, sd.split_index, cfg, cfg.seed + i))
        except (ValueError, RuntimeError) as exc:
            errors[sid] = str(exc)
            log.error("stock %s: %s", sid, exc)
    report = build_report(prep, results, errors)
    if write:
        out = Path(cfg.out)
        (out / "predictions").mkdir(parents=True, exist_ok=True)
        (out / "checkpoints").mkdir(parents=True, exist_ok=True)
        prep.lexicon.to_tsv(out / "lexicon.tsv")
        for i, r in enumerate(results):
            write_predictions(r, out / "predictions" / f"{r.stock_id}.csv")
            save_checkpoint(
                out / "checkpoints" / f"{r.stock_id}.ckpt", r.params,
                dataclasses.asdict(cfg.train_config(cfg.seed + order.index(r.stock_id))),
                cfg.seed + order.index(r.stock_id),
            )
        (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
        (out / "report.txt").write_text(format_report(report), encoding="utf-8")
    if not results:
        raise AllStocksFailed("all stocks failed: " + "; ".join(f"{k}: {v}" for k, v in errors.items()))
    return report
