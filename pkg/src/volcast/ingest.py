"""Load, validate, and temporally align OHLCV series, news embeddings, and VIX.

Alignment is strict point-in-time: the news attached to trading day t is
whatever was published on calendar day t-1, and nothing else. Days with no
qualifying news carry a zero embedding and article count 0; days without a
VIX value are dropped. All loaders are pure functions over file contents,
so per-ticker ingestion can run in parallel freely.
"""

import csv
import json
import os
from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyIntersection,
    MalformedRecord,
    MalformedRow,
    MissingFile,
    NonMonotoneDates,
    VolcastError,
)

OHLCV_HEADER = ["date", "open", "high", "low", "close", "volume"]
VIX_HEADER = ["date", "vix"]

# trailing windows (in trading days) used downstream; panels shorter than
# lookback + horizon + RV_LAG_MONTHLY in any split are unusable
RV_LAG_WEEKLY = 5
RV_LAG_MONTHLY = 22


@dataclass(frozen=True)
class OhlcvBar:
    """One trading day's open/high/low/close/volume for one ticker."""

    date: date
    open: float
    high: float
    low: float
    close: float
    volume: float

    def violations(self) -> list[str]:
        out = []
        if not (self.low > 0):
            out.append("low must be positive")
        if self.high < self.low:
            out.append("high < low")
        if self.high < max(self.open, self.close):
            out.append("high below open/close")
        if self.low > min(self.open, self.close):
            out.append("low above open/close")
        if self.volume < 0:
            out.append("negative volume")
        return out


@dataclass(frozen=True)
class DailyNews:
    """Per-day news embedding plus article count, point-in-time stamped."""

    date: date
    embedding: np.ndarray
    article_count: int


@dataclass(frozen=True)
class CalendarMarker:
    day_of_week: int   # 0..4, Monday = 0
    day_of_month: int  # 1..31
    month: int         # 1..12

    @classmethod
    def from_date(cls, d: date) -> "CalendarMarker":
        return cls(day_of_week=d.weekday(), day_of_month=d.day, month=d.month)


@dataclass(frozen=True)
class SplitSpec:
    """Three disjoint chronological date ranges: train < val < test (inclusive)."""

    train: tuple[date, date]
    val: tuple[date, date]
    test: tuple[date, date]

    def __post_init__(self):
        for name, (lo, hi) in self.items():
            if lo > hi:
                raise VolcastError(f"split '{name}' has start after end")
        if not (self.train[1] < self.val[0] and self.val[1] < self.test[0]):
            raise VolcastError("splits must be disjoint and ordered train < val < test")

    def items(self):
        return [("train", self.train), ("val", self.val), ("test", self.test)]

    def tag(self, d: date) -> str | None:
        for name, (lo, hi) in self.items():
            if lo <= d <= hi:
                return name
        return None

    @classmethod
    def from_json(cls, path) -> "SplitSpec":
        with open(path) as f:
            raw = json.load(f)
        def rng(key):
            lo, hi = raw[key]
            return (date.fromisoformat(lo), date.fromisoformat(hi))
        return cls(train=rng("train"), val=rng("val"), test=rng("test"))


@dataclass(frozen=True)
class PanelRow:
    bar: OhlcvBar
    news: DailyNews
    vix: float
    marker: CalendarMarker
    split: str


@dataclass
class AlignedPanel:
    ticker: str
    rows: list[PanelRow]
    splits: SplitSpec
    news_dim: int

    def split_rows(self, split: str) -> list[PanelRow]:
        return [r for r in self.rows if r.split == split]


# ---------------------------------------------------------------------------
# loaders


def _open_checked(path):
    if not os.path.exists(path):
        raise MissingFile(str(path))
    return open(path, newline="")


def load_ohlcv(path, ticker: str | None = None) -> list[OhlcvBar]:
    """Parse and validate an OHLCV CSV; dates must be strictly increasing."""
    with _open_checked(path) as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != OHLCV_HEADER:
            raise MalformedRow(1, f"expected header {','.join(OHLCV_HEADER)}")
        bars = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 6:
                raise MalformedRow(lineno, f"expected 6 fields, got {len(row)}")
            try:
                bar = OhlcvBar(
                    date=date.fromisoformat(row[0]),
                    open=float(row[1]), high=float(row[2]),
                    low=float(row[3]), close=float(row[4]),
                    volume=float(row[5]),
                )
            except ValueError as e:
                raise MalformedRow(lineno, str(e)) from e
            problems = bar.violations()
            if problems:
                raise MalformedRow(lineno, "; ".join(problems))
            bars.append(bar)
    for prev, cur in zip(bars, bars[1:]):
        if cur.date <= prev.date:
            raise NonMonotoneDates(
                f"{ticker or path}: {cur.date} does not follow {prev.date}"
            )
    return bars


def load_vix(path) -> dict[date, float]:
    with _open_checked(path) as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != VIX_HEADER:
            raise MalformedRow(1, f"expected header {','.join(VIX_HEADER)}")
        out = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise MalformedRow(lineno, f"expected 2 fields, got {len(row)}")
            try:
                out[date.fromisoformat(row[0])] = float(row[1])
            except ValueError as e:
                raise MalformedRow(lineno, str(e)) from e
    return out


def load_news_embeddings(path) -> list[DailyNews]:
    """Parse the embedding file format: `dim=<d>` header, then `date,count,v0,...` records."""
    with _open_checked(path) as f:
        lines = [ln for ln in f.read().splitlines() if ln.strip()]
    if not lines:
        return []
    if not lines[0].startswith("dim="):
        raise MalformedRecord(f"{path}: first line must be 'dim=<d>'")
    try:
        dim = int(lines[0][4:])
    except ValueError as e:
        raise MalformedRecord(f"{path}: bad dim header {lines[0]!r}") from e
    if dim <= 0:
        raise MalformedRecord(f"{path}: dim must be positive")
    records = []
    seen_dates = set()
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 2 + dim:
            raise MalformedRecord(
                f"{path}: record for {parts[0] if parts else '?'} has "
                f"{len(parts) - 2} values, expected {dim}"
            )
        try:
            day = date.fromisoformat(parts[0])
            count = int(parts[1])
            vec = np.array([float(v) for v in parts[2:]])
        except ValueError as e:
            raise MalformedRecord(f"{path}: {ln[:60]}...: {e}") from e
        if count < 0:
            raise MalformedRecord(f"{path}: negative article count on {day}")
        if day in seen_dates:
            raise MalformedRecord(f"{path}: duplicate record for {day}")
        if count == 0 and np.any(vec != 0.0):
            raise MalformedRecord(f"{path}: zero-article day {day} has nonzero embedding")
        seen_dates.add(day)
        records.append(DailyNews(date=day, embedding=vec, article_count=count))
    records.sort(key=lambda r: r.date)
    return records


def save_news_embeddings(records: list[DailyNews], dim: int, path):
    """Write the embedding file format; values use fixed 12-decimal notation.

    Fixed-point keeps the file byte-stable across producers (this package and
    the standalone embedder tool) while round-tripping to the same doubles.
    """
    lines = [f"dim={dim}"]
    for r in sorted(records, key=lambda r: r.date):
        if len(r.embedding) != dim:
            raise DimensionMismatch(f"{r.date}: embedding has {len(r.embedding)} dims, not {dim}")
        vals = ",".join(f"{v:.12f}" for v in r.embedding)
        lines.append(f"{r.date.isoformat()},{r.article_count},{vals}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def save_ohlcv(bars: list[OhlcvBar], path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(OHLCV_HEADER)
        for b in bars:
            w.writerow([b.date.isoformat(), repr(float(b.open)), repr(float(b.high)),
                        repr(float(b.low)), repr(float(b.close)), repr(float(b.volume))])


def save_vix(series: dict[date, float], path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(VIX_HEADER)
        for d in sorted(series):
            w.writerow([d.isoformat(), repr(float(series[d]))])


# ---------------------------------------------------------------------------
# alignment


def align_panel(
    bars: list[OhlcvBar],
    news: list[DailyNews],
    vix: dict[date, float],
    splits: SplitSpec,
    ticker: str = "",
    news_dim: int | None = None,
    lookback: int = 12,
    horizon: int = 1,
    min_split_rows: int | None = None,
) -> AlignedPanel:
    """Join bars with strictly day-before news and same-day VIX, tagging splits.

    Tickers whose usable rows fall below lookback + horizon + RV_LAG_MONTHLY in
    any split are rejected outright: they cannot support a single window once
    the trailing volatility lags are taken. Pass min_split_rows to override
    (0 disables the check).
    """
    if not bars:
        raise EmptyIntersection("no bars to align")
    dims = {len(n.embedding) for n in news}
    if len(dims) > 1:
        raise DimensionMismatch(f"news embeddings have mixed dims {sorted(dims)}")
    if news_dim is None:
        if not dims:
            raise DimensionMismatch("news_dim is required when the news list is empty")
        news_dim = dims.pop()
    elif dims and dims != {news_dim}:
        raise DimensionMismatch(f"news dim {dims.pop()} != declared {news_dim}")

    by_date = {n.date: n for n in news}
    zero = np.zeros(news_dim)
    rows = []
    for bar in bars:
        if bar.date not in vix:
            continue
        split = splits.tag(bar.date)
        if split is None:
            continue
        attached = by_date.get(bar.date - timedelta(days=1))
        if attached is None:
            attached = DailyNews(date=bar.date - timedelta(days=1), embedding=zero, article_count=0)
        rows.append(PanelRow(
            bar=bar,
            news=attached,
            vix=vix[bar.date],
            marker=CalendarMarker.from_date(bar.date),
            split=split,
        ))
    if not rows:
        raise EmptyIntersection("no trading day survived the VIX/split join")
    panel = AlignedPanel(ticker=ticker, rows=rows, splits=splits, news_dim=news_dim)
    minimum = lookback + horizon + RV_LAG_MONTHLY if min_split_rows is None else min_split_rows
    for name, _ in splits.items():
        n = len(panel.split_rows(name))
        if n < minimum:
            raise EmptyIntersection(
                f"{ticker or 'ticker'}: split '{name}' has {n} usable rows, needs {minimum}"
            )
    return panel


# ---------------------------------------------------------------------------
# panel file round-trip (the `ingest` CLI output consumed by `featurize`/`train`)


def save_panel(panel: AlignedPanel, path):
    cols = ["ticker", "date", "split", "open", "high", "low", "close", "volume",
            "vix", "news_date", "news_count"] + [f"n{i}" for i in range(panel.news_dim)]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(cols)
        for r in panel.rows:
            w.writerow(
                [panel.ticker, r.bar.date.isoformat(), r.split,
                 repr(float(r.bar.open)), repr(float(r.bar.high)), repr(float(r.bar.low)),
                 repr(float(r.bar.close)), repr(float(r.bar.volume)), repr(float(r.vix)),
                 r.news.date.isoformat(), r.news.article_count]
                + [repr(v) for v in r.news.embedding.tolist()]
            )


def load_panel(path) -> AlignedPanel:
    with _open_checked(path) as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or header[:11] != ["ticker", "date", "split", "open", "high",
                                             "low", "close", "volume", "vix",
                                             "news_date", "news_count"]:
            raise MalformedRecord(f"{path}: not a panel file")
        news_dim = len(header) - 11
        rows = []
        ticker = ""
        for raw in reader:
            ticker = raw[0]
            day = date.fromisoformat(raw[1])
            bar = OhlcvBar(date=day, open=float(raw[3]), high=float(raw[4]),
                           low=float(raw[5]), close=float(raw[6]), volume=float(raw[7]))
            news = DailyNews(date=date.fromisoformat(raw[9]),
                             embedding=np.array([float(v) for v in raw[11:]]),
                             article_count=int(raw[10]))
            rows.append(PanelRow(bar=bar, news=news, vix=float(raw[8]),
                                 marker=CalendarMarker.from_date(day), split=raw[2]))
    if not rows:
        raise EmptyIntersection(f"{path}: empty panel")
    dates = {s: [r.bar.date for r in rows if r.split == s] for s in ("train", "val", "test")}
    for s, ds in dates.items():
        if not ds:
            raise MalformedRecord(f"{path}: panel has no '{s}' rows")
    splits = SplitSpec(
        train=(min(dates["train"]), max(dates["train"])),
        val=(min(dates["val"]), max(dates["val"])),
        test=(min(dates["test"]), max(dates["test"])),
    )
    return AlignedPanel(ticker=ticker, rows=rows, splits=splits, news_dim=news_dim)
