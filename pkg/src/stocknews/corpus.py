"""Price and news ingestion, plus per-stock alignment onto trading days."""

from __future__ import annotations

import bisect
import csv
import datetime as dt
import json
import logging
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

log = logging.getLogger(__name__)

PRICE_COLUMNS = ("stock_id", "date", "open", "close", "high", "volume")
NEWS_FIELDS = ("doc_id", "date", "stock_id", "tokens")


class DataError(ValueError):
    """Raised when an input file or record violates the data contract."""


@dataclass(frozen=True)
class PriceBar:
    date: dt.date
    open: float
    close: float
    high: float
    volume: int

    def __post_init__(self):
        if not (self.open > 0 and self.close > 0 and self.high > 0):
            raise DataError(f"{self.date}: prices must be positive")
        if self.high < max(self.open, self.close):
            raise DataError(f"{self.date}: high below open/close")
        if self.volume < 0:
            raise DataError(f"{self.date}: negative volume")


@dataclass(frozen=True)
class PriceSeries:
    stock_id: str
    bars: tuple[PriceBar, ...]

    def __post_init__(self):
        if len(self.bars) < 2:
            raise DataError(f"stock {self.stock_id}: need at least 2 bars, got {len(self.bars)}")
        for prev, cur in zip(self.bars, self.bars[1:]):
            if cur.date <= prev.date:
                raise DataError(
                    f"stock {self.stock_id}: dates not strictly increasing at {cur.date}"
                )

    @property
    def dates(self) -> list[dt.date]:
        return [b.date for b in self.bars]

    @property
    def closes(self) -> list[float]:
        return [b.close for b in self.bars]

    def __len__(self):
        return len(self.bars)


@dataclass(frozen=True)
class Document:
    doc_id: str
    date: dt.date
    stock_id: str
    tokens: tuple[str, ...]

    def __post_init__(self):
        if not self.tokens:
            raise DataError(f"document {self.doc_id}: empty token list")
        for tok in self.tokens:
            if not tok or any(ch.isspace() for ch in tok):
                raise DataError(f"document {self.doc_id}: bad token {tok!r}")


@dataclass(frozen=True)
class DailyNews:
    stock_id: str
    date: dt.date
    tokens: tuple[str, ...] = ()


@dataclass(frozen=True)
class AlignedDay:
    date: dt.date
    close: float
    news: DailyNews


@dataclass(frozen=True)
class AlignedSeries:
    stock_id: str
    days: tuple[AlignedDay, ...]
    dropped_docs: int = 0
    dropped_tokens: int = 0

    def __len__(self):
        return len(self.days)

    @property
    def closes(self) -> list[float]:
        return [d.close for d in self.days]


def _parse_date(text: str) -> dt.date:
    return dt.date.fromisoformat(text.strip())


def load_prices(path: str | Path) -> list[PriceSeries]:
    """Read the price CSV and return one date-sorted series per stock.

    Series come back ordered by first appearance of the stock in the file.
    """
    grouped: dict[str, list[PriceBar]] = defaultdict(list)
    seen: set[tuple[str, dt.date]] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != PRICE_COLUMNS:
            raise DataError(f"{path}: line 1: expected header {','.join(PRICE_COLUMNS)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(PRICE_COLUMNS):
                raise DataError(
                    f"{path}: line {lineno}: expected {len(PRICE_COLUMNS)} columns, got {len(row)}"
                )
            stock_id = row[0].strip()
            try:
                date = _parse_date(row[1])
                bar = PriceBar(
                    date=date,
                    open=float(row[2]),
                    close=float(row[3]),
                    high=float(row[4]),
                    volume=int(row[5]),
                )
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from None
            if not stock_id:
                raise DataError(f"{path}: line {lineno}: empty stock_id")
            if (stock_id, date) in seen:
                raise DataError(f"{path}: line {lineno}: duplicate date {date} for stock {stock_id}")
            seen.add((stock_id, date))
            grouped[stock_id].append(bar)
    return [
        PriceSeries(stock_id, tuple(sorted(bars, key=lambda b: b.date)))
        for stock_id, bars in grouped.items()
    ]


def load_news(path: str | Path) -> list[Document]:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: line {lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise DataError(f"{path}: line {lineno}: expected a JSON object")
            missing = [k for k in NEWS_FIELDS if k not in obj]
            if missing:
                raise DataError(f"{path}: line {lineno}: missing field(s) {', '.join(missing)}")
            if not all(isinstance(obj[k], str) for k in NEWS_FIELDS):
                raise DataError(f"{path}: line {lineno}: all fields must be strings")
            tokens = tuple(t for t in obj["tokens"].split(" ") if t)
            try:
                docs.append(
                    Document(obj["doc_id"], _parse_date(obj["date"]), obj["stock_id"], tokens)
                )
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from None
    return docs


def write_prices(series: Iterable[PriceSeries], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PRICE_COLUMNS)
        for s in series:
            for b in s.bars:
                writer.writerow(
                    [s.stock_id, b.date.isoformat(), repr(float(b.open)), repr(float(b.close)), repr(float(b.high)), b.volume]
                )


def write_news(docs: Iterable[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in docs:
            obj = {
                "doc_id": d.doc_id,
                "date": d.date.isoformat(),
                "stock_id": d.stock_id,
                "tokens": " ".join(d.tokens),
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def align(prices: PriceSeries, docs: Sequence[Document]) -> AlignedSeries:
    """Attach each trading day's news to the price series.

    A document dated on a non-trading day is credited to the next trading
    day; anything after the last trading day is dropped and counted.
    Same-day documents are concatenated in input order.
    """
    dates = prices.dates
    buckets: list[list[str]] = [[] for _ in dates]
    dropped_docs = dropped_tokens = 0
    for doc in docs:
        if doc.stock_id != prices.stock_id:
            raise DataError(
                f"document {doc.doc_id} belongs to {doc.stock_id}, not {prices.stock_id}"
            )
        idx = bisect.bisect_left(dates, doc.date)
        if idx == len(dates):
            dropped_docs += 1
            dropped_tokens += len(doc.tokens)
            continue
        buckets[idx].extend(doc.tokens)
    if dropped_docs:
        log.warning(
            "stock %s: dropped %d document(s) dated after the last trading day",
            prices.stock_id,
            dropped_docs,
        )
    days = tuple(
        AlignedDay(bar.date, bar.close, DailyNews(prices.stock_id, bar.date, tuple(toks)))
        for bar, toks in zip(prices.bars, buckets)
    )
    return AlignedSeries(prices.stock_id, days, dropped_docs, dropped_tokens)


def group_by_stock(docs: Iterable[Document]) -> dict[str, list[Document]]:
    out: dict[str, list[Document]] = defaultdict(list)
    for d in docs:
        out[d.stock_id].append(d)
    return dict(out)
