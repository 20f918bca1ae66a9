"""Deterministic synthetic market generator with planted volatility dynamics.

Produces an OHLCV series whose range-based estimators track a known daily
volatility path, plus VIX and news-embedding files in the exact formats the
ingest loaders expect. News records published on calendar day c encode the
volatility of the trading day that follows c, so after the strict day-before
join each panel row carries (noisy) knowledge of its own day's true
volatility; trading volume can likewise be coupled to the next day's level.
Both knobs give ablation experiments a measurable signal to remove.
"""

import json
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from functools import lru_cache

import numpy as np

from . import ingest
from .errors import InvalidSpec
from .features import WARMUP, bar_target
from .ingest import DailyNews, OhlcvBar, SplitSpec


@dataclass
class SynthSpec:
    seed: int = 0
    days: int = 500
    news_dim: int = 8
    start: date = date(2013, 1, 1)
    # piecewise-constant daily volatility levels: list of (day_count, sigma)
    regimes: list = field(default_factory=lambda: [(500, 0.015)])
    planted_period: int | None = None
    planted_amplitude: float = 0.0
    vol_of_vol: float = 0.10          # stationary sd of the log-vol shock
    shock_persistence: float = 0.0    # AR(1) coefficient of the log-vol shock
    intraday_steps: int = 78
    news_informativeness: float = 0.5
    news_signal_scale: float = 2.0
    news_zero_prob: float = 0.05
    news_skip_prob: float = 0.02
    volume_coupling: float = 0.0
    volume_noise: float = 0.15
    base_volume: float = 1e6
    base_price: float = 100.0

    def validate(self):
        if self.days < WARMUP + 13 + 1:
            raise InvalidSpec(f"days={self.days} too short for warmup + one window")
        if not 0.0 <= self.news_informativeness <= 1.0:
            raise InvalidSpec("news_informativeness must be in [0, 1]")
        if not self.regimes or any(n <= 0 or s <= 0 for n, s in self.regimes):
            raise InvalidSpec("regimes must be nonempty (day_count, sigma>0) pairs")
        if self.planted_period is not None and self.planted_period < 2:
            raise InvalidSpec("planted_period must be >= 2")
        if not 0.0 <= self.planted_amplitude < 1.0:
            raise InvalidSpec("planted_amplitude must be in [0, 1)")
        if not 0.0 <= self.shock_persistence < 1.0:
            raise InvalidSpec("shock_persistence must be in [0, 1)")
        if self.intraday_steps < 2:
            raise InvalidSpec("intraday_steps must be >= 2")

    @classmethod
    def from_json(cls, path) -> "SynthSpec":
        with open(path) as f:
            raw = json.load(f)
        if "start" in raw:
            raw["start"] = date.fromisoformat(raw["start"])
        if "regimes" in raw:
            raw["regimes"] = [(int(n), float(s)) for n, s in raw["regimes"]]
        spec = cls(**raw)
        spec.validate()
        return spec


@dataclass
class SynthData:
    spec: SynthSpec
    bars: list
    news: list
    vix: dict
    sigma: np.ndarray  # true daily volatility per trading day


def trading_days(start: date, count: int) -> list[date]:
    """`count` consecutive weekdays starting at the first weekday >= start."""
    out = []
    d = start
    while len(out) < count:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return out


def sigma_path(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    levels = np.concatenate([np.full(n, s) for n, s in spec.regimes])
    if len(levels) < spec.days:
        levels = np.concatenate([levels, np.full(spec.days - len(levels), spec.regimes[-1][1])])
    levels = levels[: spec.days]
    t = np.arange(spec.days)
    if spec.planted_period:
        levels = levels * (1.0 + spec.planted_amplitude * np.sin(2 * np.pi * t / spec.planted_period))
    vv = spec.vol_of_vol
    phi = spec.shock_persistence
    eps = rng.standard_normal(spec.days)
    z = np.empty(spec.days)
    z[0] = eps[0]
    innov = math.sqrt(1.0 - phi * phi)
    for i in range(1, spec.days):
        z[i] = phi * z[i - 1] + innov * eps[i]
    # z is stationary unit-variance AR(1) (iid when persistence is 0)
    shocks = np.exp(vv * z - 0.5 * vv * vv)
    return levels * shocks


@lru_cache(maxsize=None)
def _range_calibration(m: int) -> float:
    """Correction for discrete intraday monitoring.

    Observed high/low ranges shrink when a day is sampled at m points instead
    of continuously, biasing every range-based estimator low. The factor is
    estimated once per m from a fixed-seed unit-volatility Monte Carlo so the
    aggregated estimator is unbiased for the planted sigma path.
    """
    rng = np.random.default_rng(987_654_321 + m)
    n = 4000
    vals = np.empty(n)
    for i in range(n):
        path = np.concatenate([[0.0], np.cumsum(rng.standard_normal(m) / math.sqrt(m))])
        bar = OhlcvBar(date=date(2000, 1, 3), open=math.exp(path[0]),
                       high=math.exp(path.max()), low=math.exp(path.min()),
                       close=math.exp(path[-1]), volume=0.0)
        vals[i] = bar_target(bar).aggregated
    return 1.0 / float(vals.mean())


def generate(spec: SynthSpec, out_dir=None) -> SynthData:
    """Build bars/news/VIX for the spec; optionally write the three input files."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    days = trading_days(spec.start, spec.days)
    sigma = sigma_path(spec, rng)
    sigma_bar = float(sigma.mean())

    # intraday log-price path per day; O/C on the path so bar invariants hold
    m = spec.intraday_steps
    cal = _range_calibration(m)
    bars = []
    log_close = math.log(spec.base_price)
    vol_noise = rng.standard_normal(spec.days)
    for i, d in enumerate(days):
        steps = rng.standard_normal(m) * (cal * sigma[i] / math.sqrt(m))
        path = log_close + np.concatenate([[0.0], np.cumsum(steps)])
        o, c = math.exp(path[0]), math.exp(path[-1])
        h, low = math.exp(path.max()), math.exp(path.min())
        sig_next = sigma[i + 1] if i + 1 < spec.days else sigma[i]
        volume = float(spec.base_volume * (sig_next / sigma_bar) ** spec.volume_coupling
                       * math.exp(spec.volume_noise * vol_noise[i]))
        bars.append(OhlcvBar(date=d, open=o, high=h, low=low, close=c, volume=volume))
        log_close = path[-1]

    # VIX: annualized trailing volatility in index points, mildly noisy
    vix_noise = rng.standard_normal(spec.days)
    vix = {}
    for i, d in enumerate(days):
        trail = sigma[max(0, i - 9): i + 1].mean()
        vix[d] = float(trail * math.sqrt(252.0) * 100.0 * math.exp(0.05 * vix_noise[i]))

    # news dated the calendar day before trading day i encodes sigma[i]
    signal_map = rng.standard_normal(spec.news_dim)
    news = []
    for i, d in enumerate(days):
        u = rng.uniform()
        noise_vec = rng.standard_normal(spec.news_dim)
        count_draw = 1 + int(rng.poisson(2))
        if u < spec.news_skip_prob:
            continue
        if u < spec.news_skip_prob + spec.news_zero_prob:
            news.append(DailyNews(date=d - timedelta(days=1),
                                  embedding=np.zeros(spec.news_dim), article_count=0))
            continue
        s = spec.news_signal_scale * (sigma[i] / sigma_bar - 1.0)
        inf = spec.news_informativeness
        vec = inf * signal_map * s + (1.0 - inf) * noise_vec
        news.append(DailyNews(date=d - timedelta(days=1), embedding=vec,
                              article_count=count_draw))

    data = SynthData(spec=spec, bars=bars, news=news, vix=vix, sigma=sigma)
    if out_dir is not None:
        import os

        os.makedirs(out_dir, exist_ok=True)
        ingest.save_ohlcv(bars, os.path.join(out_dir, "ohlcv.csv"))
        ingest.save_vix(vix, os.path.join(out_dir, "vix.csv"))
        ingest.save_news_embeddings(news, spec.news_dim, os.path.join(out_dir, "news.txt"))
    return data


def default_splits(data: SynthData, train_frac=0.6, val_frac=0.2) -> SplitSpec:
    """Chronological 60/20/20 split over the generated trading days."""
    days = [b.date for b in data.bars]
    n = len(days)
    i_tr = max(1, int(n * train_frac))
    i_va = max(i_tr + 1, int(n * (train_frac + val_frac)))
    return SplitSpec(
        train=(days[0], days[i_tr - 1]),
        val=(days[i_tr], days[i_va - 1]),
        test=(days[i_va], days[-1]),
    )


def splits_to_json(splits: SplitSpec, path):
    payload = {name: [lo.isoformat(), hi.isoformat()] for name, (lo, hi) in splits.items()}
    with open(path, "w") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")
