"""Numeric model inputs: daily polarity histograms, returns and up/down labels."""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import AlignedSeries, DataError


@dataclass(frozen=True)
class HistogramSpec:
    """Equal-width bins over ``[min_polarity, max_polarity]``.

    Bins are half-open ``[edge_j, edge_{j+1})`` except the last, which also
    includes ``max_polarity``. When the range collapses to a point every
    polarity falls into the first bin.
    """

    L: int
    min_polarity: float
    max_polarity: float

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("bin count L must be >= 1")
        if self.max_polarity < self.min_polarity:
            raise ValueError("max_polarity < min_polarity")

    @property
    def degenerate(self) -> bool:
        return self.max_polarity == self.min_polarity

    @property
    def edges(self) -> np.ndarray:
        # j / L rather than j * width / L: keeps edge j of L bins bit-equal to edge 2j of 2L bins
        span = self.max_polarity - self.min_polarity
        return np.array([self.min_polarity + (j / self.L) * span for j in range(self.L + 1)])

    def bin_index(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if self.degenerate:
            return np.zeros(values.shape, dtype=np.int64)
        idx = np.searchsorted(self.edges, values, side="right") - 1
        return np.clip(idx, 0, self.L - 1)


def make_spec(lexicon, L: int) -> HistogramSpec:
    values = list(_polarity_map(lexicon).values())
    if not values:
        raise ValueError("empty lexicon")
    return HistogramSpec(L, min(values), max(values))


def _polarity_map(lexicon) -> Mapping[str, float]:
    return getattr(lexicon, "polarity", lexicon)


def histogram(
    spec: HistogramSpec,
    lexicon,
    tokens: Sequence[str],
    denominator: str = "in_vocab",
) -> np.ndarray:
    """Fraction of a day's token occurrences per polarity bin.

    Out-of-vocabulary tokens are skipped. With ``denominator="all"`` they
    still count toward the total, so the vector can sum to less than one.
    """
    pol = _polarity_map(lexicon)
    vals = [pol[t] for t in tokens if t in pol]
    out = np.zeros(spec.L)
    if not vals:
        return out
    if denominator == "in_vocab":
        n = len(vals)
    elif denominator == "all":
        n = len(tokens)
    else:
        raise ValueError(f"unknown denominator {denominator!r}")
    np.add.at(out, spec.bin_index(vals), 1.0)
    return out / n


def returns(prices: Sequence[float]) -> np.ndarray:
    p = np.asarray(prices, dtype=np.float64)
    if p.size < 2:
        raise ValueError("need at least 2 prices")
    if np.any(p <= 0):
        raise ValueError("prices must be positive")
    return (p[1:] - p[:-1]) / p[:-1]


def labels(prices: Sequence[float]) -> np.ndarray:
    p = np.asarray(prices, dtype=np.float64)
    if p.size < 2:
        raise ValueError("need at least 2 prices")
    return (p[1:] > p[:-1]).astype(np.int64)


@dataclass
class FeatureSequence:
    """Per-step features for trading days 2..T of one stock.

    ``labels[i]`` is the direction of the day after ``dates[i]``; the last
    step has no such day, so ``labels`` is one shorter than ``returns``.
    """

    stock_id: str
    dates: list
    returns: np.ndarray
    histograms: np.ndarray
    labels: np.ndarray

    def __len__(self):
        return len(self.dates)

    @property
    def n_labeled(self) -> int:
        return len(self.labels)


def assemble(
    aligned: AlignedSeries,
    lexicon,
    spec: HistogramSpec,
    denominator: str = "in_vocab",
) -> FeatureSequence:
    if len(aligned) < 3:
        raise DataError(f"stock {aligned.stock_id}: need at least 3 trading days, got {len(aligned)}")
    closes = aligned.closes
    days = aligned.days[1:]
    hist = np.stack([histogram(spec, lexicon, d.news.tokens, denominator) for d in days])
    return FeatureSequence(
        stock_id=aligned.stock_id,
        dates=[d.date for d in days],
        returns=returns(closes),
        histograms=hist,
        labels=labels(closes)[1:],
    )


def write_feature_csv(seqs: Sequence[FeatureSequence], path: str | Path) -> None:
    seqs = list(seqs)
    L = seqs[0].histograms.shape[1] if seqs else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["stock_id", "date", "r", "c_next", *[f"x_{j + 1}" for j in range(L)]])
        for s in seqs:
            for i, date in enumerate(s.dates):
                c = str(int(s.labels[i])) if i < s.n_labeled else ""
                w.writerow([s.stock_id, date.isoformat(), repr(float(s.returns[i])), c,
                            *[repr(float(x)) for x in s.histograms[i]]])


def read_feature_csv(path: str | Path) -> list[FeatureSequence]:
    rows: dict[str, list[list[str]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        L = len(header) - 4
        for row in reader:
            rows.setdefault(row[0], []).append(row)
    out = []
    for sid, rs in rows.items():
        labeled = [int(r[3]) for r in rs if r[3] != ""]
        out.append(FeatureSequence(
            stock_id=sid,
            dates=[dt.date.fromisoformat(r[1]) for r in rs],
            returns=np.array([float(r[2]) for r in rs]),
            histograms=np.array([[float(x) for x in r[4:4 + L]] for r in rs]).reshape(len(rs), L),
            labels=np.array(labeled, dtype=np.int64),
        ))
    return out
