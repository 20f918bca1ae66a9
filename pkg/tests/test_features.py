import math
from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from volcast import features
from volcast.errors import InsufficientHistory
from volcast.features import aggregate_target, build_features
from volcast.ingest import AlignedPanel, CalendarMarker, DailyNews, OhlcvBar, PanelRow, SplitSpec


def bar(o, h, l, c, d=date(2020, 1, 6), volume=1e5):
    return OhlcvBar(date=d, open=o, high=h, low=l, close=c, volume=volume)


# ---------------------------------------------------------------------------
# estimator closed forms (expected values evaluated with an independent calculator)


def test_parkinson_zero_range():
    assert features.parkinson(bar(5.0, 5.0, 5.0, 5.0)) == 0.0


def test_parkinson_unit_log_range():
    b = bar(1.5, math.e, 1.0, 2.0)
    assert features.parkinson(b) == pytest.approx(0.6005612043932249, abs=1e-12)


def test_parkinson_scale_invariance():
    b1 = bar(10.0, 12.0, 9.0, 11.0)
    b2 = bar(20.0, 24.0, 18.0, 22.0)
    assert features.parkinson(b1) == pytest.approx(features.parkinson(b2), abs=1e-12)


def test_garman_klass_flat_day():
    assert features.garman_klass(bar(4.0, 4.0, 4.0, 4.0)) == 0.0


def test_garman_klass_unit_range_no_drift():
    b = bar(2.0, math.e, 1.0, 2.0)
    assert features.garman_klass(b) == pytest.approx(0.7071067811865476, abs=1e-12)


def test_garman_klass_negative_interior_clamps():
    # high == low with close != open forces the interior negative; such a bar
    # breaks the OHLC invariants but the estimator must still not blow up
    b = OhlcvBar(date=date(2020, 1, 6), open=1.0, high=1.0, low=1.0, close=1.2, volume=0.0)
    assert features._garman_klass_var(b) < 0
    assert features.garman_klass(b) == 0.0


def test_rogers_satchell_flat_day():
    assert features.rogers_satchell(bar(3.0, 3.0, 3.0, 3.0)) == 0.0


def test_rogers_satchell_trending_bar_is_zero():
    # o=1, h=2, l=1, c=2: both products vanish
    assert features.rogers_satchell(bar(1.0, 2.0, 1.0, 2.0)) == 0.0


def test_rogers_satchell_symmetric_bar():
    # o = c = 1, h = 2, l = 1/2: interior = 2 (ln 2)^2
    b = bar(1.0, 2.0, 0.5, 1.0)
    assert features.rogers_satchell(b) == pytest.approx(0.9802581434685471, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(scale=st.floats(min_value=1e-3, max_value=1e3),
       seed=st.integers(min_value=0, max_value=10_000))
def test_estimators_scale_invariant(scale, seed):
    rng = np.random.default_rng(seed)
    o = 10.0 * math.exp(rng.normal(0, 0.02))
    c = 10.0 * math.exp(rng.normal(0, 0.02))
    h = max(o, c) * math.exp(abs(rng.normal(0, 0.01)))
    l = min(o, c) * math.exp(-abs(rng.normal(0, 0.01)))
    b1 = bar(o, h, l, c)
    b2 = bar(o * scale, h * scale, l * scale, c * scale)
    for fn in (features.parkinson, features.garman_klass, features.rogers_satchell):
        assert fn(b1) == pytest.approx(fn(b2), abs=1e-12)


def test_aggregate_target():
    assert aggregate_target(0.0, 0.0, 0.0) == 0.0
    assert aggregate_target(0.3, 0.3, 0.3) == pytest.approx(0.3)
    assert aggregate_target(0.1, 0.2, 0.3) == pytest.approx(0.2)


# ---------------------------------------------------------------------------
# panel -> features


def weekday_series(n, start=date(2019, 1, 7)):
    out, d = [], start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return out


def make_panel(closes, highs=None, lows=None, volumes=None, vix=20.0):
    days = weekday_series(len(closes))
    splits = SplitSpec(train=(days[0], days[-1]),
                       val=(days[-1] + timedelta(days=1), days[-1] + timedelta(days=2)),
                       test=(days[-1] + timedelta(days=3), days[-1] + timedelta(days=4)))
    rows = []
    for i, d in enumerate(days):
        c = closes[i]
        o = closes[i - 1] if i else c
        h = highs[i] if highs else max(o, c)
        l = lows[i] if lows else min(o, c)
        rows.append(PanelRow(
            bar=OhlcvBar(date=d, open=o, high=h, low=l, close=c,
                         volume=volumes[i] if volumes else 1e5),
            news=DailyNews(d - timedelta(days=1), np.zeros(4), 0),
            vix=vix,
            marker=CalendarMarker.from_date(d),
            split="train",
        ))
    return AlignedPanel(ticker="T", rows=rows, splits=splits, news_dim=4)


def test_constant_price_panel_all_zero():
    panel = make_panel([50.0] * 80)
    rows = build_features(panel)
    for r in rows:
        assert r.features.rv_d == 0.0
        assert r.features.rv_w == 0.0
        assert r.features.rv_m == 0.0
        assert r.features.mom_w == 0.0
        assert r.features.mom_m == 0.0
        assert r.features.mom_q == 0.0


def test_weekly_momentum_on_doubling():
    closes = [100.0] * 70
    # close doubles over exactly the five trading days ending at index 68
    for j, px in zip(range(64, 69), (110.0, 130.0, 160.0, 190.0, 200.0)):
        closes[j] = px
    panel = make_panel(closes)
    rows = build_features(panel)
    by_date = {r.date: r for r in rows}
    day = panel.rows[68].bar.date
    assert by_date[day].features.mom_w == pytest.approx(math.log(2.0), abs=1e-12)


def test_trailing_means_match_naive_loop():
    rng = np.random.default_rng(8)
    closes = (100.0 * np.exp(np.cumsum(rng.normal(0, 0.02, 100)))).tolist()
    highs = [c * 1.03 for c in closes]
    lows = [c * 0.97 for c in closes]
    panel = make_panel(closes, highs=highs, lows=lows)
    rows = build_features(panel)
    rv_d_all = [features.bar_target(r.bar).aggregated for r in panel.rows]
    for idx, r in enumerate(rows):
        i = idx + features.WARMUP
        naive_w = sum(rv_d_all[i - 4: i + 1]) / 5.0
        naive_m = sum(rv_d_all[i - 21: i + 1]) / 22.0
        assert abs(r.features.rv_w - naive_w) < 1e-12
        assert abs(r.features.rv_m - naive_m) < 1e-12


def test_emission_count_is_rows_minus_warmup():
    panel = make_panel([100.0 + i * 0.1 for i in range(90)])
    assert len(build_features(panel)) == 90 - features.WARMUP


def test_insufficient_history():
    panel = make_panel([100.0] * 63)
    with pytest.raises(InsufficientHistory):
        build_features(panel)


def test_feature_file_roundtrip(tmp_path):
    rng = np.random.default_rng(9)
    closes = (100.0 * np.exp(np.cumsum(rng.normal(0, 0.02, 80)))).tolist()
    panel = make_panel(closes)
    rows = build_features(panel)
    path = tmp_path / "features.csv"
    features.save_features(rows, path)
    loaded = features.load_features(path)
    assert len(loaded) == len(rows)
    for a, b in zip(loaded, rows):
        assert a == b
