"""The M2VN forecasting network.

Three modality encoders map the market state, news embeddings, and calendar
markers into a shared latent width; a stack of residual dynamics blocks
alternates spectral top-k filtering of the price channels with a period-
folded inception convolution and gated cross-modal fusion; linear heads
extract alignment embeddings for the contrastive objective and the positive
volatility forecast. Everything runs on the package's own autodiff tensors
in double precision.
"""

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import spectral
from . import tensor as tn
from .errors import DegenerateWindow, ShapeMismatch, VolcastError
from .tensor import Tensor

MARKET_DIM = 9      # the fixed market-state feature count
CALENDAR_DIM = 3    # day-of-week, day-of-month, month
HARMONIC_DIM = 6    # sin/cos per calendar field


@dataclass
class ModelConfig:
    lookback: int = 12          # window length fed to the network
    horizon: int = 1            # forecast offset past the window end
    label_len: int = 2          # trailing context steps inside the window
    news_dim: int = 768
    latent_width: int = 24
    align_width: int = 64
    num_blocks: int = 2
    top_k: int = 4              # spectral modes kept / periods folded
    inception_width: int = 32
    kernel_sizes: tuple = (1, 3, 5)
    align_weight: float = 0.1   # weight of the contrastive term in the objective
    temperature_init: float = 0.07
    zero_news: bool = False     # ablation: blank the news modality entirely
    output_scale: float = 1.0   # head output units; the trainer sets it to the
                                # train-mean target so softplus works near 1
    output_bias_init: float = 0.5413248546129181  # softplus_inverse(1.0)

    def validate(self):
        positives = ("lookback", "horizon", "label_len", "news_dim", "latent_width",
                     "align_width", "num_blocks", "top_k", "inception_width")
        for name in positives:
            if getattr(self, name) <= 0:
                raise VolcastError(f"ModelConfig.{name} must be positive")
        if self.top_k > self.lookback:
            raise VolcastError("top_k cannot exceed lookback")
        if self.label_len > self.lookback:
            raise VolcastError("label_len cannot exceed lookback")
        if self.align_weight < 0:
            raise VolcastError("align_weight must be nonnegative")
        if self.temperature_init <= 0:
            raise VolcastError("temperature_init must be positive")
        if any(k % 2 == 0 or k < 1 for k in self.kernel_sizes):
            raise VolcastError("kernel_sizes must be odd and positive")
        return self

    def to_json(self, path):
        payload = asdict(self)
        payload["kernel_sizes"] = list(self.kernel_sizes)
        with open(path, "w") as f:
            json.dump(payload, f, indent=2)
            f.write("\n")

    @classmethod
    def from_json(cls, path) -> "ModelConfig":
        with open(path) as f:
            raw = json.load(f)
        raw["kernel_sizes"] = tuple(raw.get("kernel_sizes", (1, 3, 5)))
        return cls(**raw).validate()


@dataclass
class Normalizer:
    """Per-feature affine normalization, fitted on the training split only."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Normalizer":
        X = np.asarray(X, dtype=float).reshape(-1, X.shape[-1])
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std = np.where(std < 1e-12, 1.0, std)
        return cls(mean=mean, std=std)

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.std


@dataclass
class AlignmentPair:
    """Per-timestep embeddings of the price and news views plus the learned temperature."""

    r: Tensor            # (B, T, align_width) price-aligned
    t: Tensor            # (B, T, align_width) news-aligned
    temperature: Tensor  # positive scalar, exp-reparameterized


def softplus_inverse(y: float) -> float:
    """x with log(1 + exp(x)) = y, for seeding the head bias at the target scale."""
    if y <= 0:
        raise VolcastError("softplus_inverse needs a positive value")
    return float(y + math.log(-math.expm1(-y)))


def harmonic_calendar(M: np.ndarray) -> np.ndarray:
    """sin/cos encoding of (day_of_week, day_of_month, month) markers."""
    M = np.asarray(M, dtype=float)
    phase = np.stack([
        M[..., 0] / 5.0,
        (M[..., 1] - 1.0) / 31.0,
        (M[..., 2] - 1.0) / 12.0,
    ], axis=-1)
    ang = 2.0 * np.pi * phase
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=-1)


def spectral_topk_filter(x: Tensor, k: int) -> Tensor:
    """Keep each sample's k largest-energy frequency modes along the time axis.

    The per-sample support is chosen from the current values and held fixed
    for the backward pass; the masked reconstruction itself is a self-adjoint
    linear projection, so the gradient is the same filter applied to the
    incoming gradient.
    """
    if x.ndim != 3:
        raise ShapeMismatch("spectral_topk_filter", x.shape)
    B, T, C = x.shape
    F = spectral.dft_matrix(T)
    coeffs = np.einsum("wt,btc->bwc", F, x.data, optimize=True)
    energies = np.linalg.norm(coeffs, axis=2)
    masks = np.zeros((B, T), dtype=bool)
    for b in range(B):
        masks[b, spectral.top_k_indices(energies[b], k)] = True

    def project(values):
        f = np.einsum("wt,btc->bwc", F, values, optimize=True)
        f *= masks[:, :, None]
        return np.einsum("tw,bwc->btc", F.conj().T, f, optimize=True).real

    return tn.apply_linear(x, project)


def fold_periods(price_latent: np.ndarray, k: int) -> list:
    """Integer fold periods from the batch-mean amplitude spectrum of the price latents."""
    B, T, C = price_latent.shape
    F = spectral.dft_matrix(T)
    coeffs = np.einsum("wt,btc->bwc", F, price_latent, optimize=True)
    amp = np.linalg.norm(coeffs, axis=2).mean(axis=0)
    freqs, merged = spectral.merged_pair_energies(amp)
    order = np.argsort(-merged, kind="stable")[:k]
    return [max(2, T // int(freqs[i])) for i in order]


def align_loss(pair: AlignmentPair) -> Tensor:
    """Contrastive loss pulling same-timestep (r, t) together within each window."""
    B, T, _ = pair.r.shape
    if T < 2:
        raise DegenerateWindow("alignment needs at least two timesteps per window")
    sims = tn.matmul(pair.r, tn.transpose_last2(pair.t))      # (B, T, T)
    logits = tn.mul(sims, tn.reciprocal(pair.temperature))
    targets = np.tile(np.arange(T), (B, 1))
    return tn.softmax_cross_entropy(logits, targets)


class M2VN:
    """Forecast positive daily volatility from a (market, news, calendar) window."""

    def __init__(self, cfg: ModelConfig, normalizer: Normalizer, seed: int = 0):
        cfg.validate()
        self.cfg = cfg
        self.normalizer = normalizer
        rng = np.random.default_rng(seed)
        self.params: dict = {}
        d = cfg.latent_width

        def glorot(name, *shape, gain=1.0):
            limit = gain * math.sqrt(6.0 / (shape[0] + shape[-1]))
            self.params[name] = Tensor(rng.uniform(-limit, limit, shape), requires_grad=True)

        def zeros(name, *shape):
            self.params[name] = Tensor(np.zeros(shape), requires_grad=True)

        glorot("enc.price.w", MARKET_DIM, d)
        zeros("enc.price.b", d)
        glorot("enc.news.w", cfg.news_dim, d)
        zeros("enc.news.b", d)
        glorot("enc.time.w", HARMONIC_DIM, d)
        zeros("enc.time.b", d)
        width = 3 * d
        for i in range(cfg.num_blocks):
            glorot(f"block{i}.gate.w", 2 * d, 1)
            zeros(f"block{i}.gate.b", 1)
            for ks in cfg.kernel_sizes:
                fan = width * ks * ks
                lim1 = math.sqrt(6.0 / (fan + cfg.inception_width * ks * ks))
                self.params[f"block{i}.conv1.k{ks}.w"] = Tensor(
                    rng.uniform(-lim1, lim1, (cfg.inception_width, width, ks, ks)),
                    requires_grad=True)
                zeros(f"block{i}.conv1.k{ks}.b", cfg.inception_width)
                lim2 = math.sqrt(6.0 / (cfg.inception_width * ks * ks + fan))
                self.params[f"block{i}.conv2.k{ks}.w"] = Tensor(
                    rng.uniform(-lim2, lim2, (width, cfg.inception_width, ks, ks)),
                    requires_grad=True)
                zeros(f"block{i}.conv2.k{ks}.b", width)
            # small output gain keeps the residual stack near identity at init,
            # which stabilizes early training across seeds
            glorot(f"block{i}.out.w", width, width, gain=0.1)
            zeros(f"block{i}.out.b", width)
        glorot("align.price.w", width, cfg.align_width)
        zeros("align.price.b", cfg.align_width)
        glorot("align.news.w", width, cfg.align_width)
        zeros("align.news.b", cfg.align_width)
        glorot("head.time.w", cfg.lookback + cfg.horizon, cfg.lookback)
        glorot("head.out.w", d, 1)
        self.params["head.out.b"] = Tensor(np.full(1, cfg.output_bias_init),
                                           requires_grad=True)
        self.params["align.log_temp"] = Tensor(
            np.asarray(math.log(cfg.temperature_init)), requires_grad=True)

    # -- components ---------------------------------------------------------

    def encode(self, X: np.ndarray, N: np.ndarray, M: np.ndarray) -> Tensor:
        """Lift the three modalities to (B, T, 3*latent_width)."""
        cfg = self.cfg
        B, T, _ = X.shape
        if T != cfg.lookback or X.shape[-1] != MARKET_DIM or N.shape[-1] != cfg.news_dim:
            raise ShapeMismatch("encode", X.shape, N.shape, M.shape)
        p = self.params
        if cfg.zero_news:
            N = np.zeros_like(N)
        Xn = Tensor(self.normalizer.apply(X))
        price = tn.affine(Xn, p["enc.price.w"], p["enc.price.b"])
        price = spectral_topk_filter(price, min(cfg.top_k, T))
        news = tn.affine(Tensor(np.asarray(N, dtype=float)), p["enc.news.w"], p["enc.news.b"])
        time = tn.affine(Tensor(harmonic_calendar(M)), p["enc.time.w"], p["enc.time.b"])
        return tn.concat([price, news, time], axis=-1)

    def _inception(self, x: Tensor, block: int, stage: str) -> Tensor:
        acc = None
        for ks in self.cfg.kernel_sizes:
            o = tn.conv2d(x, self.params[f"block{block}.{stage}.k{ks}.w"],
                          self.params[f"block{block}.{stage}.k{ks}.b"])
            acc = o if acc is None else tn.add(acc, o)
        return tn.mul(acc, 1.0 / len(self.cfg.kernel_sizes))

    def _period_conv(self, y: Tensor, periods: list, block: int) -> Tensor:
        B, T, C = y.shape
        acc = None
        for period in periods:
            cycles = math.ceil(T / period)
            L = cycles * period
            padded = y if L == T else tn.concat(
                [y, Tensor(np.zeros((B, L - T, C)))], axis=1)
            grid = tn.permute(tn.reshape(padded, (B, cycles, period, C)), (0, 3, 1, 2))
            mid = tn.gelu(self._inception(grid, block, "conv1"))
            z = self._inception(mid, block, "conv2")
            flat = tn.narrow(tn.reshape(tn.permute(z, (0, 2, 3, 1)), (B, L, C)), 1, 0, T)
            acc = flat if acc is None else tn.add(acc, flat)
        return tn.mul(acc, 1.0 / len(periods))

    def _block(self, h: Tensor, i: int) -> Tensor:
        cfg = self.cfg
        d = cfg.latent_width
        T = cfg.lookback
        p = self.params
        price = tn.narrow(h, -1, 0, d)
        rest = tn.narrow(h, -1, d, 2 * d)
        filtered = spectral_topk_filter(price, min(cfg.top_k, T))
        y = tn.concat([filtered, rest], axis=-1)
        periods = fold_periods(price.data, min(cfg.top_k, T // 2))
        c = tn.layer_norm(self._period_conv(y, periods, i))
        r = tn.narrow(c, -1, 0, d)
        t = tn.narrow(c, -1, d, d)
        gate = tn.sigmoid(tn.affine(tn.concat([r, t], axis=-1),
                                    p[f"block{i}.gate.w"], p[f"block{i}.gate.b"]))
        a = tn.repeat_last(gate, d)
        fused = tn.add(tn.mul(a, r), tn.mul(tn.sub(1.0, a), t))
        u = tn.concat([fused, tn.mul(r, t), tn.absolute(tn.sub(r, t))], axis=-1)
        update = tn.affine(u, p[f"block{i}.out.w"], p[f"block{i}.out.b"])
        return tn.add(h, update)

    def dynamics(self, h: Tensor) -> Tensor:
        for i in range(self.cfg.num_blocks):
            h = self._block(h, i)
        return h

    def head(self, h: Tensor) -> Tensor:
        """Temporal extension of the price channels, last position, positive output."""
        cfg = self.cfg
        B = h.shape[0]
        price = tn.narrow(h, -1, 0, cfg.latent_width)
        extended = tn.matmul(self.params["head.time.w"], price)  # (B, T+H, d)
        last = tn.reshape(tn.narrow(extended, 1, cfg.lookback + cfg.horizon - 1, 1),
                          (B, cfg.latent_width))
        raw = tn.affine(last, self.params["head.out.w"], self.params["head.out.b"])
        return tn.reshape(tn.mul(tn.softplus(raw), cfg.output_scale), (B,))

    def alignment(self, h: Tensor) -> AlignmentPair:
        p = self.params
        return AlignmentPair(
            r=tn.affine(h, p["align.price.w"], p["align.price.b"]),
            t=tn.affine(h, p["align.news.w"], p["align.news.b"]),
            temperature=tn.exp(p["align.log_temp"]),
        )

    def forward(self, X, N, M):
        """Full pass: returns (positive forecasts (B,), AlignmentPair)."""
        h = self.dynamics(self.encode(X, N, M))
        return self.head(h), self.alignment(h)

    def predict(self, X, N, M) -> np.ndarray:
        yhat, _ = self.forward(X, N, M)
        return yhat.data.copy()

    # -- persistence ---------------------------------------------------------

    def state(self) -> dict:
        out = {name: p.data for name, p in self.params.items()}
        out["norm.mean"] = self.normalizer.mean
        out["norm.std"] = self.normalizer.std
        return out

    def save(self, path):
        tn.save_checkpoint(self.state(), path)

    def load_state(self, state: dict):
        for name, p in self.params.items():
            if name not in state:
                raise VolcastError(f"checkpoint missing parameter {name}")
            if state[name].shape != p.data.shape:
                raise ShapeMismatch("load_state", state[name].shape, p.data.shape)
            p.data = state[name].astype(float).copy()
        self.normalizer = Normalizer(mean=np.asarray(state["norm.mean"], dtype=float),
                                     std=np.asarray(state["norm.std"], dtype=float))

    @classmethod
    def load(cls, ckpt_path, cfg: ModelConfig) -> "M2VN":
        state = tn.load_checkpoint(ckpt_path)
        model = cls(cfg, Normalizer(mean=np.zeros(MARKET_DIM), std=np.ones(MARKET_DIM)))
        model.load_state(state)
        return model
