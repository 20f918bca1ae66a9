"""HAR and HAR-X regression baselines with PCA-reduced news embeddings.

All solvers are written against numpy linear algebra directly: OLS via a
least-squares solve with a minimum-norm fallback on rank deficiency, ridge
in closed form with the intercept unpenalized, lasso by cycling coordinate
descent on standardized columns. The HAR design regresses the volatility at
t+H on an intercept plus the daily/weekly/monthly trailing volatility at t;
the -X variant appends the remaining market-state features and the leading
principal components of the day's news embedding.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InsufficientHistory, NoConvergenceWarning, SingularDesignWarning
from .features import FeatureRow

HAR_COLUMNS = ["intercept", "rv_d", "rv_w", "rv_m"]
EXOG_COLUMNS = ["mom_w", "mom_m", "mom_q", "volume_d", "vix_d", "news_count_d"]


@dataclass
class RegressionDesign:
    X: np.ndarray            # (n, p), intercept column of ones first
    y: np.ndarray            # (n,)
    columns: list
    dates: list              # prediction-target alignment for reporting

    def __post_init__(self):
        if np.isnan(self.X).any() or np.isnan(self.y).any():
            raise ValueError("design contains NaN")


def har_design(rows: list[FeatureRow], horizon: int = 1) -> RegressionDesign:
    """[1, rv_d, rv_w, rv_m] at day t against the aggregated volatility at t+H."""
    n = len(rows) - horizon
    if n < 1:
        raise InsufficientHistory(f"{len(rows)} rows cannot support horizon {horizon}")
    X = np.ones((n, 4))
    y = np.empty(n)
    dates = []
    for i in range(n):
        f = rows[i].features
        X[i, 1:] = (f.rv_d, f.rv_w, f.rv_m)
        y[i] = rows[i + horizon].target.aggregated
        dates.append(rows[i + horizon].date)
    return RegressionDesign(X=X, y=y, columns=list(HAR_COLUMNS), dates=dates)


def harx_design(rows: list[FeatureRow], news: np.ndarray, reducer: "PcaReducer",
                horizon: int = 1) -> RegressionDesign:
    """HAR columns plus the remaining market features plus PCA news components.

    `news` holds the aligned day-before embedding for each feature row; the
    reducer must already be fitted (on training rows only - never refit here).
    """
    if len(news) != len(rows):
        raise DimensionMismatch(f"{len(news)} news rows for {len(rows)} feature rows")
    base = har_design(rows, horizon=horizon)
    n = len(base.y)
    exog = np.empty((n, len(EXOG_COLUMNS)))
    for i in range(n):
        f = rows[i].features
        exog[i] = (f.mom_w, f.mom_m, f.mom_q, f.volume_d, f.vix_d, f.news_count_d)
    comps = reducer.transform(news[:n])
    X = np.hstack([base.X, exog, comps])
    columns = base.columns + EXOG_COLUMNS + [f"news_pc{j}" for j in range(comps.shape[1])]
    return RegressionDesign(X=X, y=base.y, columns=columns, dates=base.dates)


# ---------------------------------------------------------------------------
# PCA


class PcaReducer:
    """Eigendecomposition of the training covariance, keeping 95% of variance."""

    def __init__(self, variance_target: float = 0.95):
        self.variance_target = variance_target
        self.mean_ = None
        self.components_ = None       # (p, retained)
        self.eigenvalues_ = None      # all, descending
        self.explained_ratio_ = None
        self.retained_ = 0

    def fit(self, emb: np.ndarray) -> "PcaReducer":
        emb = np.asarray(emb, dtype=float)
        self.mean_ = emb.mean(axis=0)
        centered = emb - self.mean_
        cov = centered.T @ centered / len(emb)
        eigvals, eigvecs = np.linalg.eigh(cov)
        order = np.argsort(eigvals)[::-1]
        eigvals = np.clip(eigvals[order], 0.0, None)
        eigvecs = eigvecs[:, order]
        total = eigvals.sum()
        if total <= 0.0:
            # all-zero (or constant) embeddings carry no information
            self.eigenvalues_ = eigvals
            self.explained_ratio_ = np.zeros_like(eigvals)
            self.components_ = eigvecs[:, :0]
            self.retained_ = 0
            return self
        ratios = eigvals / total
        cum = np.cumsum(ratios)
        self.retained_ = int(np.searchsorted(cum, self.variance_target - 1e-12) + 1)
        self.eigenvalues_ = eigvals
        self.explained_ratio_ = ratios
        self.components_ = eigvecs[:, : self.retained_]
        return self

    def transform(self, emb: np.ndarray) -> np.ndarray:
        if self.mean_ is None:
            raise RuntimeError("PcaReducer.transform before fit")
        return (np.asarray(emb, dtype=float) - self.mean_) @ self.components_


# ---------------------------------------------------------------------------
# solvers


def fit_ols(design: RegressionDesign) -> np.ndarray:
    """Least squares; rank-deficient designs fall back to the minimum-norm solution."""
    X, y = design.X, design.y
    rank = np.linalg.matrix_rank(X)
    if rank < X.shape[1]:
        warnings.warn(
            f"design rank {rank} < {X.shape[1]} columns; returning minimum-norm solution",
            SingularDesignWarning,
        )
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef


def fit_ridge(design: RegressionDesign, lam: float) -> np.ndarray:
    """(X'X + lam*D)^-1 X'y with D zeroed on the intercept coordinate."""
    X, y = design.X, design.y
    p = X.shape[1]
    D = np.eye(p)
    D[0, 0] = 0.0
    if lam == 0.0:
        return fit_ols(design)
    return np.linalg.solve(X.T @ X + lam * D, X.T @ y)


def lasso_lambda_max(design: RegressionDesign) -> float:
    """Smallest penalty that zeroes every non-intercept coefficient."""
    Xs, yc, _, _, _ = _standardize(design)
    n = len(yc)
    if Xs.shape[1] == 0:
        return 0.0
    return float(np.max(np.abs(Xs.T @ yc)) / n)


def _standardize(design: RegressionDesign):
    """Center y, center/scale non-intercept columns to unit variance."""
    X, y = design.X, design.y
    feats = X[:, 1:]
    mu = feats.mean(axis=0)
    sd = feats.std(axis=0)
    keep = sd > 1e-12
    Xs = (feats[:, keep] - mu[keep]) / sd[keep]
    return Xs, y - y.mean(), mu, sd, keep


def fit_lasso(design: RegressionDesign, lam: float, tol: float = 1e-8,
              max_sweeps: int = 10_000) -> np.ndarray:
    """Cycling coordinate descent for (1/2n)||y - Xb||^2 + lam * sum|b_j|.

    The penalty applies in standardized column space and never to the
    intercept; coefficients are mapped back to the original scale on return.
    """
    Xs, yc, mu, sd, keep = _standardize(design)
    n, p = Xs.shape
    beta = np.zeros(p)
    if p > 0 and lam < lasso_lambda_max(design):
        resid = yc.copy()
        converged = False
        for _ in range(max_sweeps):
            max_delta = 0.0
            for j in range(p):
                xj = Xs[:, j]
                old = beta[j]
                rho = (xj @ resid) / n + old  # columns have unit variance: x_j'x_j/n = 1
                new = np.sign(rho) * max(abs(rho) - lam, 0.0)
                if new != old:
                    resid += xj * (old - new)
                    beta[j] = new
                    max_delta = max(max_delta, abs(new - old))
            if max_delta < tol:
                converged = True
                break
        if not converged:
            warnings.warn(
                f"lasso stopped after {max_sweeps} sweeps (last delta > {tol})",
                NoConvergenceWarning,
            )
    full = np.zeros(design.X.shape[1])
    scaled = np.zeros(keep.size)
    scaled[keep] = beta / sd[keep]
    full[1:] = scaled
    full[0] = design.y.mean() - design.X[:, 1:].mean(axis=0) @ scaled
    return full


def predict(coef: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Plain inner product; baselines emit raw linear predictions."""
    return np.asarray(X) @ np.asarray(coef)


# ---------------------------------------------------------------------------
# end-to-end baseline run

PENALTY_GRID = tuple(float(x) for x in np.logspace(-4, 1, 11))

BASELINE_KINDS = ("har", "harx-ols", "harx-ridge", "harx-lasso")


def run_baseline_job(rows, news, news_dim: int, kind: str, out_dir=None,
                     horizon: int = 1, ticker: str = "",
                     penalty_grid=PENALTY_GRID) -> dict:
    """Fit one baseline on the train split and predict val/test.

    Ridge/lasso penalties are chosen by validation QLIKE over a log grid; the
    PCA reducer and all fits only ever see training data. Returns the
    selected coefficients and per-split predictions; optionally writes a run
    directory in the same layout the trainer uses.
    """
    import json
    import os

    from .evaluation import PRED_FLOOR, evaluate_predictions
    from .training import attach_news

    if kind not in BASELINE_KINDS:
        raise ValueError(f"unknown baseline kind {kind!r}")
    split_rows = {s: [r for r in rows if r.split == s] for s in ("train", "val", "test")}
    aligned = {s: attach_news(split_rows[s], news, news_dim) for s in split_rows}

    if kind == "har":
        designs = {s: har_design(split_rows[s], horizon=horizon) for s in split_rows}
    else:
        reducer = PcaReducer().fit(aligned["train"])
        designs = {s: harx_design(split_rows[s], aligned[s], reducer, horizon=horizon)
                   for s in split_rows}

    chosen_penalty = None
    if kind in ("har", "harx-ols"):
        coef = fit_ols(designs["train"])
    else:
        fitter = fit_ridge if kind == "harx-ridge" else fit_lasso
        best = (np.inf, None, None)
        for lam in penalty_grid:
            c = fitter(designs["train"], lam)
            val_pred = np.maximum(predict(c, designs["val"].X), PRED_FLOOR)
            keep = designs["val"].y > 0
            score = evaluate_predictions(designs["val"].y[keep], val_pred[keep])["qlike"]
            if score < best[0]:
                best = (score, lam, c)
        _, chosen_penalty, coef = best

    preds = {s: predict(coef, designs[s].X) for s in ("val", "test")}
    out = {
        "kind": kind,
        "coef": coef,
        "columns": designs["train"].columns,
        "penalty": chosen_penalty,
        "designs": designs,
        "predictions": preds,
    }
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "config.json"), "w") as f:
            json.dump({
                "model": kind, "ticker": ticker, "seed": 0,
                "penalty": chosen_penalty, "horizon": horizon,
                "columns": designs["train"].columns,
                "coef": [float(c) for c in coef],
            }, f, indent=2)
            f.write("\n")
        import csv as _csv

        with open(os.path.join(out_dir, "predictions.csv"), "w", newline="") as f:
            w = _csv.writer(f)
            w.writerow(["split", "date", "y", "yhat"])
            for s in ("val", "test"):
                d = designs[s]
                for dt, yv, yh in zip(d.dates, d.y, preds[s]):
                    w.writerow([s, dt.isoformat(), repr(float(yv)), repr(float(yh))])
    return out
