"""Daily market-state features, calendar markers, and the volatility target.

The daily volatility measure is the equal-weight mean of three range-based
estimators (Parkinson, Garman-Klass, Rogers-Satchell), expressed as a
standard deviation. Weekly/monthly values are trailing means of the daily
one; momentum is the log close-to-close return over 5/22/63 trading days.
Negative estimator interiors (possible on real bars) clamp to zero with a
logged flag instead of aborting a long backtest.
"""

import csv
import logging
import math
from dataclasses import dataclass
from datetime import date

import numpy as np

from .errors import InsufficientHistory, MalformedRecord, MissingFile
from .ingest import AlignedPanel, CalendarMarker, OhlcvBar, RV_LAG_MONTHLY, RV_LAG_WEEKLY

log = logging.getLogger(__name__)

MOM_LAG_WEEKLY = 5
MOM_LAG_MONTHLY = 22
MOM_LAG_QUARTERLY = 63

#: warmup rows consumed before the first emitted feature (quarterly momentum lag)
WARMUP = MOM_LAG_QUARTERLY

_GK_COEF = 2.0 * math.log(2.0) - 1.0


@dataclass(frozen=True)
class FeatureVector:
    """The nine-feature market state for one day, in fixed column order."""

    rv_d: float
    rv_w: float
    rv_m: float
    mom_w: float
    mom_m: float
    mom_q: float
    volume_d: float
    vix_d: float
    news_count_d: float

    ORDER = ("rv_d", "rv_w", "rv_m", "mom_w", "mom_m", "mom_q",
             "volume_d", "vix_d", "news_count_d")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in self.ORDER])


@dataclass(frozen=True)
class VolTarget:
    parkinson: float
    garman_klass: float
    rogers_satchell: float
    aggregated: float


@dataclass(frozen=True)
class FeatureRow:
    date: date
    split: str
    features: FeatureVector
    marker: CalendarMarker
    target: VolTarget


# ---------------------------------------------------------------------------
# range-based estimators (variance -> std-dev convention throughout)


def parkinson(bar: OhlcvBar) -> float:
    """High/low range estimator: sqrt(ln(h/l)^2 / (4 ln 2))."""
    r = math.log(bar.high / bar.low)
    return math.sqrt(r * r / (4.0 * math.log(2.0)))


def _garman_klass_var(bar: OhlcvBar) -> float:
    hl = math.log(bar.high / bar.low)
    co = math.log(bar.close / bar.open)
    return 0.5 * hl * hl - _GK_COEF * co * co


def garman_klass(bar: OhlcvBar) -> float:
    """Open/close-adjusted range estimator; negative interiors clamp to zero."""
    v = _garman_klass_var(bar)
    if v < 0.0:
        log.debug("garman_klass interior negative on %s; clamped", bar.date)
        return 0.0
    return math.sqrt(v)


def _rogers_satchell_var(bar: OhlcvBar) -> float:
    hc = math.log(bar.high / bar.close)
    ho = math.log(bar.high / bar.open)
    lc = math.log(bar.low / bar.close)
    lo = math.log(bar.low / bar.open)
    return hc * ho + lc * lo


def rogers_satchell(bar: OhlcvBar) -> float:
    """Drift-robust range estimator; negative interiors clamp to zero."""
    v = _rogers_satchell_var(bar)
    if v < 0.0:
        log.debug("rogers_satchell interior negative on %s; clamped", bar.date)
        return 0.0
    return math.sqrt(v)


def aggregate_target(p: float, gk: float, rs: float) -> float:
    """Equal-weight mean of the three estimators."""
    return (p + gk + rs) / 3.0


def bar_target(bar: OhlcvBar) -> VolTarget:
    p = parkinson(bar)
    gk = garman_klass(bar)
    rs = rogers_satchell(bar)
    return VolTarget(parkinson=p, garman_klass=gk, rogers_satchell=rs,
                     aggregated=aggregate_target(p, gk, rs))


# ---------------------------------------------------------------------------
# panel -> feature rows


def build_features(panel: AlignedPanel) -> list[FeatureRow]:
    """Emit one feature row per panel day once every trailing lag is available.

    Emission count is exactly len(panel.rows) - WARMUP; trailing windows and
    momentum lags look backward across split boundaries (that is leak-free).
    """
    rows = panel.rows
    n = len(rows)
    if n <= WARMUP:
        raise InsufficientHistory(
            f"{panel.ticker or 'panel'}: {n} rows, need more than {WARMUP}"
        )
    targets = [bar_target(r.bar) for r in rows]
    rv_d = np.array([t.aggregated for t in targets])
    closes = np.array([r.bar.close for r in rows])
    clamp_count = sum(
        1 for r in rows
        if _garman_klass_var(r.bar) < 0.0 or _rogers_satchell_var(r.bar) < 0.0
    )
    if clamp_count:
        log.info("%s: %d day(s) hit a negative estimator interior (clamped to 0)",
                 panel.ticker or "panel", clamp_count)

    out = []
    for i in range(WARMUP, n):
        r = rows[i]
        fv = FeatureVector(
            rv_d=float(rv_d[i]),
            rv_w=float(rv_d[i - RV_LAG_WEEKLY + 1: i + 1].mean()),
            rv_m=float(rv_d[i - RV_LAG_MONTHLY + 1: i + 1].mean()),
            mom_w=float(np.log(closes[i] / closes[i - MOM_LAG_WEEKLY])),
            mom_m=float(np.log(closes[i] / closes[i - MOM_LAG_MONTHLY])),
            mom_q=float(np.log(closes[i] / closes[i - MOM_LAG_QUARTERLY])),
            volume_d=r.bar.volume,
            vix_d=r.vix,
            news_count_d=float(r.news.article_count),
        )
        out.append(FeatureRow(date=r.bar.date, split=r.split, features=fv,
                              marker=r.marker, target=targets[i]))
    return out


# ---------------------------------------------------------------------------
# feature file round-trip

FEATURE_COLUMNS = (
    ["date", "split"]
    + list(FeatureVector.ORDER)
    + ["day_of_week", "day_of_month", "month"]
    + ["parkinson", "garman_klass", "rogers_satchell", "aggregated"]
)


def save_features(rows: list[FeatureRow], path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(FEATURE_COLUMNS)
        for r in rows:
            w.writerow(
                [r.date.isoformat(), r.split]
                + [repr(v) for v in r.features.as_array().tolist()]
                + [r.marker.day_of_week, r.marker.day_of_month, r.marker.month]
                + [repr(r.target.parkinson), repr(r.target.garman_klass),
                   repr(r.target.rogers_satchell), repr(r.target.aggregated)]
            )


def load_features(path) -> list[FeatureRow]:
    try:
        f = open(path, newline="")
    except FileNotFoundError as e:
        raise MissingFile(str(path)) from e
    with f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != FEATURE_COLUMNS:
            raise MalformedRecord(f"{path}: not a feature file")
        out = []
        for raw in reader:
            vals = [float(v) for v in raw[2:11]]
            out.append(FeatureRow(
                date=date.fromisoformat(raw[0]),
                split=raw[1],
                features=FeatureVector(*vals),
                marker=CalendarMarker(day_of_week=int(raw[11]),
                                      day_of_month=int(raw[12]), month=int(raw[13])),
                target=VolTarget(parkinson=float(raw[14]), garman_klass=float(raw[15]),
                                 rogers_satchell=float(raw[16]), aggregated=float(raw[17])),
            ))
    return out
