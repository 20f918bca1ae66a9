#!/usr/bin/env python3
"""HAR and HAR-X baselines on a synthetic panel, with leak-free penalty tuning.

HAR regresses next-day volatility on its daily/weekly/monthly trailing
averages; HAR-X adds momentum, volume, VIX, news count, and the leading
principal components of the day-before news embedding. Ridge and lasso
penalties are picked on the validation split by QLIKE, never on test.
"""

from volcast import baselines, evaluation, features, ingest, synth

spec = synth.SynthSpec(
    seed=9, days=900, news_dim=8,
    regimes=[(300, 0.012), (300, 0.022), (300, 0.015)],
    vol_of_vol=0.25, shock_persistence=0.8,
    news_informativeness=0.8, news_signal_scale=3.0, volume_coupling=0.6,
)
data = synth.generate(spec)
splits = synth.default_splits(data)
panel = ingest.align_panel(data.bars, data.news, data.vix, splits, ticker="SYN")
rows = features.build_features(panel)
print(f"feature rows: {len(rows)} "
      f"(train {sum(r.split == 'train' for r in rows)}, "
      f"val {sum(r.split == 'val' for r in rows)}, "
      f"test {sum(r.split == 'test' for r in rows)})")

for kind in baselines.BASELINE_KINDS:
    job = baselines.run_baseline_job(rows, data.news, spec.news_dim, kind)
    test = job["designs"]["test"]
    metrics = evaluation.evaluate_predictions(test.y, job["predictions"]["test"])
    extra = f" (penalty {job['penalty']:g})" if job["penalty"] is not None else ""
    print(f"{kind:12s} test qlike {metrics['qlike']:.4f}  mape {metrics['mape']:6.2f}%"
          f"  n={metrics['n']}{extra}")

job = baselines.run_baseline_job(rows, data.news, spec.news_dim, "harx-lasso")
active = [(c, round(v, 5)) for c, v in zip(job["columns"], job["coef"]) if v != 0.0]
print("\nlasso-active columns:")
for name, coef in active:
    print(f"  {name:12s} {coef:+.5f}")
