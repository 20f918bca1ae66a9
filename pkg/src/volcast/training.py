"""Windowing, the joint objective, the training loop, and random search.

Windows never straddle a split boundary and never see their target date:
inputs are the lookback rows ending at t, the target is the aggregated
volatility at t+H within the same split. Training minimizes MSE plus the
weighted contrastive alignment term with Adam under cosine decay; early
stopping monitors validation QLIKE by default (the ranking metric), with
the joint loss available as an alternative monitor.
"""

import csv
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field
from datetime import timedelta

import numpy as np

from . import tensor as tn
from .errors import DivergedLoss, InsufficientHistory, VolcastError
from .evaluation import evaluate_predictions
from .features import FeatureRow
from .ingest import DailyNews
from .model import (
    MARKET_DIM,
    M2VN,
    ModelConfig,
    Normalizer,
    align_loss,
)
from .tensor import Tensor

VOLUME_COLUMN = 6  # index of volume_d in the feature vector order


@dataclass
class WindowSample:
    X: np.ndarray          # (T, 9) market state
    N: np.ndarray          # (T, news_dim) aligned day-before embeddings
    M: np.ndarray          # (T, 3) raw calendar markers
    y: float               # aggregated volatility at t+H
    split: str
    input_dates: list
    target_date: object


@dataclass
class SplitData:
    X: np.ndarray
    N: np.ndarray
    M: np.ndarray
    y: np.ndarray
    target_dates: list

    @property
    def n(self) -> int:
        return len(self.y)


@dataclass
class DataBundle:
    train: SplitData
    val: SplitData
    test: SplitData
    normalizer: Normalizer
    news_dim: int


def attach_news(rows: list[FeatureRow], news: list[DailyNews], news_dim: int) -> np.ndarray:
    """Day-before embedding per feature row (zeros when no news qualifies)."""
    by_date = {r.date: r for r in news}
    out = np.zeros((len(rows), news_dim))
    for i, row in enumerate(rows):
        rec = by_date.get(row.date - timedelta(days=1))
        if rec is not None:
            out[i] = rec.embedding
    return out


def make_windows(rows: list[FeatureRow], aligned_news: np.ndarray,
                 lookback: int = 12, horizon: int = 1) -> list[WindowSample]:
    """Sliding windows wholly inside one split; n rows yield n - T - H + 1 windows."""
    if len(rows) < lookback + horizon:
        raise InsufficientHistory(
            f"{len(rows)} feature rows cannot fill a window of {lookback}+{horizon}"
        )
    windows = []
    by_split: dict = {}
    for idx, row in enumerate(rows):
        by_split.setdefault(row.split, []).append(idx)
    for split in ("train", "val", "test"):
        idxs = by_split.get(split, [])
        for j in range(len(idxs) - lookback - horizon + 1):
            sel = idxs[j: j + lookback]
            tgt = idxs[j + lookback - 1 + horizon]
            input_dates = [rows[i].date for i in sel]
            target_date = rows[tgt].date
            assert input_dates[-1] < target_date, "window overlaps its target"
            windows.append(WindowSample(
                X=np.stack([rows[i].features.as_array() for i in sel]),
                N=aligned_news[sel],
                M=np.array([[rows[i].marker.day_of_week, rows[i].marker.day_of_month,
                             rows[i].marker.month] for i in sel]),
                y=rows[tgt].target.aggregated,
                split=split,
                input_dates=input_dates,
                target_date=target_date,
            ))
    return windows


def _stack(windows: list[WindowSample]) -> SplitData:
    return SplitData(
        X=np.stack([w.X for w in windows]) if windows else np.zeros((0, 1, MARKET_DIM)),
        N=np.stack([w.N for w in windows]) if windows else np.zeros((0, 1, 1)),
        M=np.stack([w.M for w in windows]) if windows else np.zeros((0, 1, 3), dtype=int),
        y=np.array([w.y for w in windows]),
        target_dates=[w.target_date for w in windows],
    )


def build_dataset(rows: list[FeatureRow], news: list[DailyNews], news_dim: int,
                  lookback: int = 12, horizon: int = 1,
                  ablation: str | None = None) -> DataBundle:
    """Assemble per-split window arrays plus the train-split normalizer.

    ablation='volume' zeroes the volume column before anything else sees it;
    the news/align ablations are handled at the model/objective level.
    """
    aligned = attach_news(rows, news, news_dim)
    windows = make_windows(rows, aligned, lookback=lookback, horizon=horizon)
    if ablation == "volume":
        for w in windows:
            w.X[:, VOLUME_COLUMN] = 0.0
    parts = {s: _stack([w for w in windows if w.split == s]) for s in ("train", "val", "test")}
    for name, part in parts.items():
        if part.n == 0:
            raise InsufficientHistory(f"split '{name}' produced no windows")
    normalizer = Normalizer.fit(parts["train"].X.reshape(-1, MARKET_DIM))
    return DataBundle(train=parts["train"], val=parts["val"], test=parts["test"],
                      normalizer=normalizer, news_dim=news_dim)


# ---------------------------------------------------------------------------
# objective


def joint_loss(yhat: Tensor, y: Tensor, align: Tensor | None, weight: float) -> Tensor:
    """Mean squared error plus the weighted alignment term."""
    loss = tn.mse_loss(yhat, y)
    if align is not None and weight > 0.0:
        loss = tn.add(loss, tn.mul(align, weight))
    return loss


# ---------------------------------------------------------------------------
# training loop


@dataclass
class TrainSettings:
    lr: float = 3e-4
    batch_size: int = 32
    max_epochs: int = 200
    patience: int = 10
    seed: int = 0
    early_stop_metric: str = "qlike"   # or "joint"
    ablation: str | None = None        # None | volume | news | align

    def validate(self):
        if self.early_stop_metric not in ("qlike", "joint"):
            raise VolcastError(f"unknown early-stop metric {self.early_stop_metric!r}")
        if self.ablation not in (None, "volume", "news", "align"):
            raise VolcastError(f"unknown ablation {self.ablation!r}")
        return self


@dataclass
class TrainResult:
    model: M2VN
    history: list
    best_epoch: int
    stop_epoch: int
    best_metric: float
    wall_clock: float
    config: ModelConfig
    settings: TrainSettings


def _forward_loss(model: M2VN, X, N, M, y, weight):
    """Joint objective with the squared error taken on scale-normalized residuals.

    The head predicts in units of the train-mean target (cfg.output_scale), so
    dividing both sides by that scale keeps the prediction term O(1) and the
    alignment weight grid meaningful; the minimizer of the prediction term is
    unchanged.
    """
    scale = model.cfg.output_scale
    yhat, pair = model.forward(X, N, M)
    align = align_loss(pair)
    loss = joint_loss(tn.mul(yhat, 1.0 / scale), Tensor(y / scale), align, weight)
    return yhat, align, loss


def _eval_split(model: M2VN, part: SplitData, weight: float) -> dict:
    scale = model.cfg.output_scale
    yhat, pair = model.forward(part.X, part.N, part.M)
    align = align_loss(pair)
    mse = float(np.mean(((yhat.data - part.y) / scale) ** 2))
    joint = mse + weight * align.item()
    metrics = evaluate_predictions(part.y, yhat.data)
    return {"mse": mse, "align": align.item(), "joint": joint,
            "qlike": metrics["qlike"], "yhat": yhat.data.copy()}


def train(cfg: ModelConfig, bundle: DataBundle, settings: TrainSettings) -> TrainResult:
    """Adam + cosine decay with patience-based early stopping and best restore."""
    settings.validate()
    cfg = ModelConfig(**{**asdict(cfg)})
    cfg.kernel_sizes = tuple(cfg.kernel_sizes)
    if settings.ablation == "news":
        cfg.zero_news = True
    mean_target = float(np.mean(bundle.train.y))
    if cfg.output_scale == 1.0 and mean_target > 0.0:
        # predict in units of the train-mean target; softplus then works near
        # its comfortable operating point instead of deep in the flat tail
        cfg.output_scale = mean_target
    weight = cfg.align_weight
    if settings.ablation in ("news", "align"):
        weight = 0.0
    start = time.time()
    model = M2VN(cfg, bundle.normalizer, seed=settings.seed)
    n = bundle.train.n
    batches_per_epoch = max(1, math.ceil(n / settings.batch_size))
    opt = tn.Adam(model.params, lr=settings.lr,
                  total_steps=settings.max_epochs * batches_per_epoch)
    rng = np.random.default_rng(settings.seed)

    history = []
    best_metric = math.inf
    best_state = None
    best_epoch = -1
    epochs_since_best = 0
    stop_epoch = settings.max_epochs

    for epoch in range(settings.max_epochs):
        order = rng.permutation(n)
        tot_mse = tot_align = 0.0
        for b in range(batches_per_epoch):
            sel = order[b * settings.batch_size: (b + 1) * settings.batch_size]
            if len(sel) == 0:
                continue
            opt.zero_grad()
            yhat, align, loss = _forward_loss(
                model, bundle.train.X[sel], bundle.train.N[sel], bundle.train.M[sel],
                bundle.train.y[sel], weight)
            if not np.isfinite(loss.item()):
                raise DivergedLoss(f"epoch {epoch}: loss {loss.item()}")
            loss.backward()
            opt.step()
            bsz = len(sel)
            scale = model.cfg.output_scale
            tot_mse += float(np.mean(((yhat.data - bundle.train.y[sel]) / scale) ** 2)) * bsz
            tot_align += align.item() * bsz
        train_mse = tot_mse / n
        train_align = tot_align / n
        train_joint = train_mse + weight * train_align
        val = _eval_split(model, bundle.val, weight)
        if not np.isfinite(val["joint"]):
            raise DivergedLoss(f"epoch {epoch}: validation loss {val['joint']}")
        history.append({
            "epoch": epoch,
            "train_mse": train_mse, "train_align": train_align, "train_joint": train_joint,
            "val_mse": val["mse"], "val_align": val["align"], "val_joint": val["joint"],
            "val_qlike": val["qlike"], "lr": opt.current_lr(),
        })
        monitored = val["qlike"] if settings.early_stop_metric == "qlike" else val["joint"]
        if monitored < best_metric:
            best_metric = monitored
            best_state = {k: p.data.copy() for k, p in model.params.items()}
            best_state["norm.mean"] = bundle.normalizer.mean.copy()
            best_state["norm.std"] = bundle.normalizer.std.copy()
            best_epoch = epoch
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best > settings.patience:
                stop_epoch = epoch + 1
                break
    else:
        stop_epoch = settings.max_epochs

    if best_state is not None:
        model.load_state(best_state)
    return TrainResult(model=model, history=history, best_epoch=best_epoch,
                       stop_epoch=stop_epoch, best_metric=best_metric,
                       wall_clock=time.time() - start, config=cfg, settings=settings)


# ---------------------------------------------------------------------------
# run directory


def write_run_dir(result: TrainResult, bundle: DataBundle, out_dir: str,
                  model_name: str = "m2vn", ticker: str = ""):
    """Persist config snapshot, loss history, checkpoint, and predictions."""
    os.makedirs(out_dir, exist_ok=True)
    cfg = asdict(result.config)
    cfg["kernel_sizes"] = list(result.config.kernel_sizes)
    payload = {
        "model": model_name,
        "ticker": ticker,
        "seed": result.settings.seed,
        "ablation": result.settings.ablation,
        "model_config": cfg,
        "settings": asdict(result.settings),
        "best_epoch": result.best_epoch,
        "stop_epoch": result.stop_epoch,
        "best_metric": result.best_metric,
        "wall_clock_s": result.wall_clock,
    }
    with open(os.path.join(out_dir, "config.json"), "w") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")
    with open(os.path.join(out_dir, "history.csv"), "w", newline="") as f:
        cols = ["epoch", "train_mse", "train_align", "train_joint",
                "val_mse", "val_align", "val_joint", "val_qlike", "lr"]
        w = csv.writer(f)
        w.writerow(cols)
        for row in result.history:
            w.writerow([row["epoch"]] + [repr(float(row[c])) for c in cols[1:]])
    result.model.save(os.path.join(out_dir, "checkpoint.txt"))
    weight = 0.0 if result.settings.ablation in ("news", "align") else result.config.align_weight
    with open(os.path.join(out_dir, "predictions.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["split", "date", "y", "yhat"])
        for split_name, part in (("val", bundle.val), ("test", bundle.test)):
            ev = _eval_split(result.model, part, weight)
            for d, yv, yh in zip(part.target_dates, part.y, ev["yhat"]):
                w.writerow([split_name, d.isoformat(), repr(float(yv)), repr(float(yh))])


# ---------------------------------------------------------------------------
# random search


@dataclass
class SearchSpace:
    latent_width: tuple = (12, 24, 32, 64)
    align_width: tuple = (32, 64, 128, 256)
    temperature: tuple = (0.01, 0.03, 0.07)
    inception_width: tuple = (24, 32, 64, 128, 256, 512)
    top_k: tuple = (4, 5, 6)
    budget: int = 100

    def sample(self, rng: np.random.Generator, base: ModelConfig) -> ModelConfig:
        cfg = ModelConfig(**{**asdict(base)})
        cfg.kernel_sizes = tuple(base.kernel_sizes)
        cfg.latent_width = int(rng.choice(self.latent_width))
        cfg.align_width = int(rng.choice(self.align_width))
        cfg.temperature_init = float(rng.choice(self.temperature))
        cfg.inception_width = int(rng.choice(self.inception_width))
        cfg.top_k = int(rng.choice(self.top_k))
        return cfg.validate()


@dataclass
class SearchOutcome:
    best_config: ModelConfig
    table: list = field(default_factory=list)  # one row per trial


def random_search(space: SearchSpace, bundle: DataBundle, base_cfg: ModelConfig,
                  settings: TrainSettings, seeds=(0, 1, 2),
                  search_seed: int = 0) -> SearchOutcome:
    """Uniform draws from the grids, ranked by mean validation QLIKE across seeds."""
    rng = np.random.default_rng(search_seed)
    outcome = SearchOutcome(best_config=base_cfg)
    best = math.inf
    for trial in range(space.budget):
        cfg = space.sample(rng, base_cfg)
        vals = []
        for seed in seeds:
            trial_settings = TrainSettings(**{**asdict(settings)})
            trial_settings.seed = int(seed)
            result = train(cfg, bundle, trial_settings)
            vals.append(result.best_metric)
        mean_val = float(np.mean(vals))
        outcome.table.append({
            "trial": trial,
            "latent_width": cfg.latent_width,
            "align_width": cfg.align_width,
            "temperature_init": cfg.temperature_init,
            "inception_width": cfg.inception_width,
            "top_k": cfg.top_k,
            "val_qlike_mean": mean_val,
            "val_qlike_per_seed": vals,
        })
        if mean_val < best:
            best = mean_val
            outcome.best_config = cfg
    return outcome
