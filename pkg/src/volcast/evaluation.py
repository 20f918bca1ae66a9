"""Forecast accuracy metrics and out-of-sample report assembly.

QLIKE is computed on standard deviations: each summand y/yhat - ln(y/yhat) - 1
is nonnegative and larger for under-prediction than for the mirror-image
over-prediction, which is the property that makes it the ranking metric for
volatility forecasts. MAPE is the usual scale-free percentage error. Days
with zero realized volatility are excluded from aggregate metrics (both are
undefined there) and the exclusion count is reported.
"""

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyTestSet, NonPositiveInput, ZeroTarget

PRED_FLOOR = 1e-6


def mape(y: np.ndarray, yhat: np.ndarray) -> float:
    """Mean absolute percentage error, in percent. Requires y > 0."""
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if np.any(y <= 0.0):
        raise ZeroTarget("mape needs strictly positive targets")
    return float(100.0 * np.mean(np.abs((y - yhat) / y)))


def qlike(y: np.ndarray, yhat: np.ndarray) -> float:
    """Quasi-likelihood loss: mean of y/yhat - ln(y/yhat) - 1 over the sample."""
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if np.any(y <= 0.0) or np.any(yhat <= 0.0):
        raise NonPositiveInput("qlike needs strictly positive inputs")
    r = y / yhat
    return float(np.mean(r - np.log(r) - 1.0))


def evaluate_predictions(y: np.ndarray, yhat: np.ndarray,
                         floor: float = PRED_FLOOR) -> dict:
    """Metrics over one prediction set, excluding zero-target days.

    Non-positive predictions are floored at `floor` before QLIKE (which is
    undefined at yhat <= 0); the number of floored values is reported.
    """
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.size == 0:
        raise EmptyTestSet("no predictions to evaluate")
    keep = y > 0.0
    n_zero = int(np.sum(~keep))
    y, yhat = y[keep], yhat[keep]
    if y.size == 0:
        raise EmptyTestSet("every target was zero")
    n_floored = int(np.sum(yhat < floor))
    yhat = np.maximum(yhat, floor)
    return {
        "qlike": qlike(y, yhat),
        "mape": mape(y, yhat),
        "n": int(y.size),
        "n_zero_targets": n_zero,
        "n_floored": n_floored,
    }


# ---------------------------------------------------------------------------
# run directories -> report


@dataclass
class ReportRow:
    ticker: str
    model: str
    metric: str
    seed_mean: float
    seed_std: float
    n_seeds: int
    sample_count: int
    floored: int
    date_range: tuple


@dataclass
class EvalReport:
    rows: list = field(default_factory=list)

    def to_json_payload(self):
        return [
            {
                "ticker": r.ticker, "model": r.model, "metric": r.metric,
                "seed_mean": r.seed_mean, "seed_std": r.seed_std,
                "n_seeds": r.n_seeds, "sample_count": r.sample_count,
                "floored": r.floored,
                "date_range": list(r.date_range),
            }
            for r in self.rows
        ]


def read_run_dir(run_dir: str) -> dict:
    """Load a training/baseline run directory: config + test predictions."""
    with open(os.path.join(run_dir, "config.json")) as f:
        config = json.load(f)
    dates, ys, yhats, splits = [], [], [], []
    with open(os.path.join(run_dir, "predictions.csv")) as f:
        reader = csv.DictReader(f)
        for row in reader:
            splits.append(row["split"])
            dates.append(row["date"])
            ys.append(float(row["y"]))
            yhats.append(float(row["yhat"]))
    return {
        "config": config,
        "split": np.array(splits),
        "date": np.array(dates),
        "y": np.array(ys),
        "yhat": np.array(yhats),
    }


def build_report(run_dirs: list) -> EvalReport:
    """Aggregate test-split metrics over seeds, grouped per (ticker, model)."""
    groups: dict = {}
    for rd in run_dirs:
        run = read_run_dir(rd)
        cfg = run["config"]
        key = (cfg.get("ticker", ""), cfg.get("model", "unknown"))
        groups.setdefault(key, []).append(run)
    report = EvalReport()
    for (ticker, model), runs in sorted(groups.items()):
        per_seed = []
        for run in runs:
            mask = run["split"] == "test"
            if not mask.any():
                raise EmptyTestSet(f"{ticker}/{model}: run has no test predictions")
            per_seed.append(evaluate_predictions(run["y"][mask], run["yhat"][mask]))
        test_dates = np.concatenate([r["date"][r["split"] == "test"] for r in runs]).tolist()
        date_range = (min(test_dates), max(test_dates))
        for metric in ("qlike", "mape"):
            vals = np.array([m[metric] for m in per_seed])
            report.rows.append(ReportRow(
                ticker=ticker, model=model, metric=metric,
                seed_mean=float(vals.mean()), seed_std=float(vals.std()),
                n_seeds=len(vals),
                sample_count=int(per_seed[0]["n"]),
                floored=int(sum(m["n_floored"] for m in per_seed)),
                date_range=date_range,
            ))
    return report


def write_report(report: EvalReport, csv_path=None, json_path=None):
    if csv_path:
        with open(csv_path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["ticker", "model", "metric", "seed_mean", "seed_std",
                        "n_seeds", "sample_count", "floored", "date_start", "date_end"])
            for r in report.rows:
                w.writerow([r.ticker, r.model, r.metric, repr(r.seed_mean),
                            repr(r.seed_std), r.n_seeds, r.sample_count, r.floored,
                            r.date_range[0], r.date_range[1]])
    if json_path:
        with open(json_path, "w") as f:
            json.dump(report.to_json_payload(), f, indent=2)
            f.write("\n")


def emit_traces(run_dir: str, out_path, split: str = "test"):
    """Plot-ready long-format CSV of (date, realized, predicted) for one run."""
    run = read_run_dir(run_dir)
    model = run["config"].get("model", "model")
    mask = run["split"] == split
    with open(out_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["date", "y", f"yhat_{model}"])
        for d, y, yh in zip(run["date"][mask], run["y"][mask], run["yhat"][mask]):
            w.writerow([d, repr(float(y)), repr(float(yh))])
