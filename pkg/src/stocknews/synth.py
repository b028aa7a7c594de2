"""Synthetic prices and news with a planted news-to-price signal.

Vocabulary: ``n_pos`` good-news tokens, ``n_neg`` bad-news tokens and
``n_neutral`` filler tokens. On each trading day, with probability
``news_rate``, a stock gets one or two documents built from one randomly
chosen cluster (plus filler). That news event sets a direction ``d`` for
the next ``persistence`` trading days: each such day closes in direction
``d`` with probability ``0.5 + signal`` and against it otherwise. A later
event overrides an earlier one. Days no event reaches move up or down with
equal probability.

The best achievable next-day accuracy for an observer who sees the news is
therefore::

    q = 1 - (1 - news_rate) ** persistence      # share of days under an event
    bayes = q * (0.5 + signal) + (1 - q) * 0.5

The first two tokens of each cluster are exported as seed words.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Document, PriceBar, PriceSeries, write_news, write_prices
from .lexicon import SeedSets, write_seeds


@dataclass
class SynthParams:
    days: int = 600
    stocks: int = 20
    signal: float = 0.4
    news_rate: float = 0.5
    persistence: int = 1
    n_pos: int = 20
    n_neg: int = 20
    n_neutral: int = 40
    signal_tokens: tuple[int, int] = (3, 6)
    filler_tokens: tuple[int, int] = (4, 9)
    seed: int = 0
    start: str = "2013-01-07"

    def __post_init__(self):
        if not 0.0 <= self.signal <= 0.5:
            raise ValueError("signal must lie in [0, 0.5]")
        if not 0.0 <= self.news_rate <= 1.0:
            raise ValueError("news_rate must lie in [0, 1]")
        if self.days < 3 or self.stocks < 1 or self.persistence < 1:
            raise ValueError("need days >= 3, stocks >= 1, persistence >= 1")
        if min(self.n_pos, self.n_neg) < 2:
            raise ValueError("each cluster needs at least 2 tokens for the seed file")

    @property
    def bayes_accuracy(self) -> float:
        q = 1.0 - (1.0 - self.news_rate) ** self.persistence
        return q * (0.5 + self.signal) + (1.0 - q) * 0.5


@dataclass
class SynthData:
    prices: list[PriceSeries]
    docs: list[Document]
    seeds: SeedSets
    pos_tokens: list[str]
    neg_tokens: list[str]
    neutral_tokens: list[str]
    # per stock: +1/-1 planted direction for each day, 0 where no event applies
    planted: dict[str, np.ndarray]

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"prices": out / "prices.csv", "news": out / "news.jsonl", "seeds": out / "seeds.txt"}
        write_prices(self.prices, paths["prices"])
        write_news(self.docs, paths["news"])
        write_seeds(self.seeds, paths["seeds"])
        return paths


def trading_days(start: dt.date, n: int) -> list[dt.date]:
    out, d = [], start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += dt.timedelta(days=1)
    return out


def synth(params: SynthParams | None = None) -> SynthData:
    p = params or SynthParams()
    rng = np.random.default_rng(p.seed)
    pos = [f"pos{i:02d}" for i in range(p.n_pos)]
    neg = [f"neg{i:02d}" for i in range(p.n_neg)]
    neu = [f"neu{i:02d}" for i in range(p.n_neutral)]
    dates = trading_days(dt.date.fromisoformat(p.start), p.days)

    prices, docs, planted = [], [], {}
    for s in range(p.stocks):
        sid = f"S{s:03d}"
        event = np.zeros(p.days, dtype=np.int64)
        direction = np.zeros(p.days, dtype=np.int64)
        for t in range(p.days):
            if rng.random() >= p.news_rate:
                continue
            d = 1 if rng.random() < 0.5 else -1
            event[t] = d
            cluster = pos if d > 0 else neg
            for k in range(int(rng.integers(1, 3))):
                n_sig = int(rng.integers(p.signal_tokens[0], p.signal_tokens[1]))
                n_fill = int(rng.integers(p.filler_tokens[0], p.filler_tokens[1]))
                toks = list(rng.choice(cluster, size=n_sig)) + (list(rng.choice(neu, size=n_fill)) if neu else [])
                rng.shuffle(toks)
                docs.append(Document(f"{sid}-{t:04d}-{k}", dates[t], sid, tuple(str(x) for x in toks)))
            direction[t + 1:t + 1 + p.persistence] = d

        close = float(rng.uniform(10, 100))
        bars = []
        for t in range(p.days):
            if t > 0:
                d = direction[t]
                if d == 0:
                    move = 1 if rng.random() < 0.5 else -1
                else:
                    move = d if rng.random() < 0.5 + p.signal else -d
                mag = abs(rng.normal(0.0, 0.015)) + 1e-4
                close = close * (1.0 + move * mag)
            open_ = close * (1.0 + rng.normal(0.0, 0.003))
            high = max(open_, close) * (1.0 + abs(rng.normal(0.0, 0.004)))
            bars.append(PriceBar(dates[t], float(open_), float(close), float(high), int(rng.integers(10_000, 1_000_000))))
        prices.append(PriceSeries(sid, tuple(bars)))
        planted[sid] = direction

    seeds = SeedSets(tuple(pos[:2]), tuple(neg[:2]))
    return SynthData(prices, docs, seeds, pos, neg, neu, planted)
