"""Acceptance gate: every criterion at its stated tolerance, one line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the PASS lines as
they print. The directional-ablation block trains nine models on a seeded
2000-day synthetic panel and is the long pole (several minutes); everything
else is seconds.
"""

import math
import time

import numpy as np
import pytest

from gradcheck import check_gradients, fd_gradients, max_relative_error
from volcast import baselines, evaluation, features, ingest, spectral, synth
from volcast import tensor as tn
from volcast.model import (
    MARKET_DIM,
    AlignmentPair,
    M2VN,
    ModelConfig,
    Normalizer,
    align_loss,
    spectral_topk_filter,
)
from volcast.synth import SynthSpec
from volcast.tensor import Tensor
from volcast.training import TrainSettings, build_dataset, train, write_run_dir


def report(name: str, ok: bool, detail: str = ""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else ""))
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# 1. best-k-term optimality against exhaustive support enumeration


def test_acceptance_best_k_term_oracle():
    t0 = time.time()
    rng = np.random.default_rng(2024)
    worst_gap = -np.inf
    for _ in range(200):
        T = int(rng.integers(4, 13))
        d = int(rng.integers(1, 4))
        h = rng.standard_normal((T, d))
        s = spectral.dft(h)
        # every nonempty support, via numpy's FFT (independent of the library path)
        coeffs = np.fft.fft(h, axis=0) / np.sqrt(T)
        n_masks = 1 << T
        masks = ((np.arange(n_masks)[:, None] >> np.arange(T)[None, :]) & 1).astype(bool)
        masked = np.where(masks[:, :, None], coeffs[None, :, :], 0.0)
        recs = np.fft.ifft(masked * np.sqrt(T), axis=1)
        errs = np.sum(np.abs(h[None] - recs) ** 2, axis=(1, 2))
        sizes = masks.sum(axis=1)
        for k in range(1, T + 1):
            approx = spectral.top_k_select(s, k)
            mine = float(np.sum(np.abs(h - approx.reconstruction) ** 2))
            best = errs[sizes == k].min()
            worst_gap = max(worst_gap, mine - best)
    elapsed = time.time() - t0
    report("best-k-term optimality (200 instances, all k, exhaustive)",
           worst_gap <= 1e-9 and elapsed < 30.0,
           f"worst gap {worst_gap:.2e}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 2. Parseval identity and DFT round-trip


def test_acceptance_parseval_and_roundtrip():
    t0 = time.time()
    rng = np.random.default_rng(7)
    worst_parseval = 0.0
    worst_roundtrip = 0.0
    for _ in range(1000):
        T = int(rng.integers(1, 65))
        d = int(rng.integers(1, 4))
        h = rng.standard_normal((T, d))
        s = spectral.dft(h)
        te = float(np.sum(h**2))
        fe = float(np.sum(s.energies**2))
        worst_parseval = max(worst_parseval, abs(fe - te) / max(1.0, te))
        back = spectral.idft(s.coefficients)
        worst_roundtrip = max(worst_roundtrip, float(np.max(np.abs(back - h))))
    elapsed = time.time() - t0
    report("Parseval + DFT round-trip (1000 signals, T <= 64)",
           worst_parseval <= 1e-9 and worst_roundtrip <= 1e-9 and elapsed < 10.0,
           f"parseval {worst_parseval:.2e}, roundtrip {worst_roundtrip:.2e}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 3. gradient suite: every op, then the tiny end-to-end model


def _op_checks():
    rng = np.random.default_rng(42)

    def leaf(shape, scale=1.0):
        return Tensor(rng.standard_normal(shape) * scale, requires_grad=True)

    checks = {}
    a, b = leaf((3, 4)), leaf((4,))
    checks["add"] = (lambda: tn.total(tn.add(a, b)), [a, b])
    c, d = leaf((2, 3)), leaf((2, 3))
    checks["sub/mul"] = (lambda: tn.total(tn.mul(tn.sub(c, d), c)), [c, d])
    e = leaf((5,))
    checks["neg"] = (lambda: tn.total(tn.mul(tn.neg(e), e)), [e])
    fdat = rng.standard_normal((4, 3))
    fdat[np.abs(fdat) < 0.15] = 0.4
    f = Tensor(fdat, requires_grad=True)
    checks["abs (|x|>0.1)"] = (lambda: tn.total(tn.absolute(f)), [f])
    g = Tensor(rng.uniform(0.5, 2.0, (3, 3)), requires_grad=True)
    checks["exp/log"] = (lambda: tn.total(tn.mul(tn.exp(g), tn.log(g))), [g])
    h = leaf((4,))
    checks["sin/cos"] = (lambda: tn.total(tn.add(tn.sin(h), tn.cos(h))), [h])
    i = leaf((3, 3))
    checks["sigmoid"] = (lambda: tn.total(tn.sigmoid(i)), [i])
    checks["softplus"] = (lambda: tn.total(tn.softplus(i)), [i])
    checks["gelu"] = (lambda: tn.total(tn.gelu(i)), [i])
    j = Tensor(rng.uniform(0.5, 1.5, (4,)), requires_grad=True)
    checks["reciprocal"] = (lambda: tn.total(tn.reciprocal(j)), [j])
    k, l = leaf((3, 4)), leaf((4, 2))
    checks["matmul"] = (lambda: tn.total(tn.matmul(k, l)), [k, l])
    m, nn = leaf((2, 3, 4)), leaf((4, 2))
    checks["matmul batched"] = (lambda: tn.total(tn.matmul(m, nn)), [m, nn])
    o, p = leaf((2, 3)), leaf((2, 2))
    checks["concat/narrow"] = (
        lambda: tn.total(tn.mul(tn.narrow(tn.concat([o, p], -1), -1, 1, 3),
                                tn.narrow(tn.concat([o, p], -1), -1, 2, 3))), [o, p])
    q = leaf((2, 3, 4))
    checks["reshape/permute"] = (
        lambda: tn.total(tn.mul(tn.reshape(tn.permute(q, (2, 0, 1)), (4, 6)),
                                tn.reshape(tn.permute(q, (2, 0, 1)), (4, 6)))), [q])
    r = leaf((2, 3, 1))
    rr = leaf((2, 3, 4))
    checks["repeat_last"] = (lambda: tn.total(tn.mul(tn.repeat_last(r, 4), rr)), [r, rr])
    s = leaf((3, 4))
    checks["mean/total"] = (lambda: tn.mean(tn.mul(s, s)), [s])
    t, u = leaf((2, 3, 5)), leaf((2, 3, 5))
    checks["layer_norm"] = (lambda: tn.total(tn.mul(tn.layer_norm(t), u)), [t, u])
    v, w = leaf((6,)), leaf((6,))
    checks["mse_loss"] = (lambda: tn.mse_loss(v, w), [v, w])
    x = leaf((4, 5))
    targets = rng.integers(0, 5, size=4)
    checks["softmax_cross_entropy"] = (lambda: tn.softmax_cross_entropy(x, targets), [x])
    y = leaf((2, 2, 3, 4))
    z = leaf((3, 2, 3, 3), scale=0.5)
    bias = leaf((3,))
    checks["conv2d"] = (lambda: tn.total(tn.conv2d(y, z, bias)), [y, z, bias])
    tab = leaf((6, 3))
    idx = np.array([[0, 2], [5, 2]])
    checks["embedding_lookup"] = (
        lambda: tn.total(tn.mul(tn.embedding_lookup(tab, idx),
                                tn.embedding_lookup(tab, idx))), [tab])
    base = np.zeros((1, 8, 2))
    ts = np.arange(8)
    base[0, :, 0] = 3.0 * np.sin(2 * np.pi * ts / 4) + 1.5
    base[0, :, 1] = 2.0 * np.cos(2 * np.pi * ts / 8)
    sf = Tensor(base + 0.05 * rng.standard_normal((1, 8, 2)), requires_grad=True)
    sw = Tensor(rng.standard_normal((1, 8, 2)))
    checks["spectral_topk_filter"] = (
        lambda: tn.total(tn.mul(spectral_topk_filter(sf, 3), sw)), [sf])
    return checks


def test_acceptance_gradient_suite():
    t0 = time.time()
    for name, (build, params) in _op_checks().items():
        err = check_gradients(build, params, tol=1e-4)
        assert err < 1e-4, name

    cfg = ModelConfig(lookback=4, horizon=1, label_len=2, news_dim=4, latent_width=4,
                      align_width=3, num_blocks=1, top_k=2, inception_width=2,
                      kernel_sizes=(1, 3), align_weight=0.1, temperature_init=0.07)
    model = M2VN(cfg, Normalizer(mean=np.zeros(MARKET_DIM), std=np.ones(MARKET_DIM)),
                 seed=25)
    rng = np.random.default_rng(26)
    X = 0.5 * rng.standard_normal((2, 4, MARKET_DIM))
    X[:, :, 0] += np.sin(2 * np.pi * np.arange(4) / 2.0)
    N = 0.5 * rng.standard_normal((2, 4, 4))
    M = np.tile([1, 10, 3], (2, 4, 1))
    yt = Tensor(np.array([0.02, 0.01]))

    def build():
        yhat, pair = model.forward(X, N, M)
        return tn.add(tn.mse_loss(yhat, yt), tn.mul(align_loss(pair), cfg.align_weight))

    params = list(model.params.values())
    for p in params:
        p.grad = None
    loss = build()
    loss.backward()
    analytic = [p.grad.copy() for p in params]
    numeric = fd_gradients(lambda: build().item(), params)
    e2e = max_relative_error(analytic, numeric)
    elapsed = time.time() - t0
    report("gradient suite (all ops < 1e-4; tiny model end-to-end < 1e-3)",
           e2e < 1e-3 and elapsed < 60.0,
           f"end-to-end {e2e:.2e}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 4. metric anchors


def test_acceptance_metric_anchors():
    y = np.array([0.013, 0.024, 0.05])
    ok = evaluation.qlike(y, y) == 0.0 and evaluation.mape(y, y) == 0.0
    r2 = evaluation.qlike(np.array([2.0]), np.array([1.0]))
    rhalf = evaluation.qlike(np.array([0.5]), np.array([1.0]))
    ok = ok and abs(r2 - 0.3068528194400546) < 1e-6
    ok = ok and abs(rhalf - 0.1931471805599454) < 1e-6
    rng = np.random.default_rng(12)
    ratios = np.exp(rng.uniform(np.log(1.0001), np.log(50.0), 1000))
    asym = all(
        evaluation.qlike(np.array([r]), np.array([1.0]))
        > evaluation.qlike(np.array([1.0 / r]), np.array([1.0])) >= 0.0
        for r in ratios
    )
    report("metric anchors (exact zeros, ratio summands to 1e-6, asymmetry x1000)",
           ok and asym, f"summand(2)={r2:.9f}, summand(0.5)={rhalf:.9f}")


# ---------------------------------------------------------------------------
# 5. baseline oracles


def test_acceptance_baseline_oracles():
    rng = np.random.default_rng(31)
    n, p = 80, 5
    X = np.hstack([np.ones((n, 1)), rng.standard_normal((n, p - 1))])
    yv = X @ rng.standard_normal(p) + 0.3 * rng.standard_normal(n)
    design = baselines.RegressionDesign(X=X, y=yv, columns=[f"c{i}" for i in range(p)],
                                        dates=[None] * n)
    coef = baselines.fit_ols(design)
    resid_orth = float(np.max(np.abs(X.T @ (yv - X @ coef))))

    ridge_gap = float(np.max(np.abs(baselines.fit_ridge(design, 0.0) - coef)))

    lam = 0.05
    lcoef = baselines.fit_lasso(design, lam)
    feats = X[:, 1:]
    mu, sd = feats.mean(axis=0), feats.std(axis=0)
    Xs = (feats - mu) / sd
    beta_s = lcoef[1:] * sd
    grad = Xs.T @ (yv - yv.mean() - Xs @ beta_s) / n
    kkt = max(
        max((abs(grad[j]) - lam for j in range(p - 1) if beta_s[j] == 0.0), default=-np.inf),
        max((abs(grad[j] - lam * np.sign(beta_s[j])) for j in range(p - 1)
             if beta_s[j] != 0.0), default=-np.inf),
    )

    lmax = baselines.lasso_lambda_max(design)
    null_coef = baselines.fit_lasso(design, lmax * 1.00001)
    null_ok = bool(np.all(null_coef[1:] == 0.0))

    # PCA on data with an exactly known covariance spectrum
    eigvals = [6.0, 2.5, 0.3, 0.1, 0.05, 0.01]
    q, _ = np.linalg.qr(np.hstack([np.ones((64, 1)), rng.standard_normal((64, 6))]))
    V, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    emb = np.sqrt(64) * q[:, 1:] @ np.diag(np.sqrt(eigvals)) @ V.T + 1.0
    red = baselines.PcaReducer().fit(emb)
    pca_ok = red.explained_ratio_[: red.retained_].sum() >= 0.95

    ok = resid_orth < 1e-8 and ridge_gap < 1e-8 and kkt < 1e-6 and null_ok and pca_ok
    report("baseline oracles (OLS orthogonality, ridge=OLS, lasso KKT/null, PCA 95%)",
           ok, f"orth {resid_orth:.1e}, ridge {ridge_gap:.1e}, kkt {kkt:.1e}, "
               f"retained {red.retained_}")


# ---------------------------------------------------------------------------
# 6. InfoNCE anchors


def test_acceptance_infonce_anchors():
    worst = 0.0
    for T in (2, 4, 12):
        pair = AlignmentPair(r=Tensor(np.zeros((2, T, 5))), t=Tensor(np.zeros((2, T, 5))),
                             temperature=Tensor(np.asarray(0.07)))
        worst = max(worst, abs(align_loss(pair).item() - math.log(T)))
    rng = np.random.default_rng(77)
    nonneg = True
    for _ in range(1000):
        pair = AlignmentPair(
            r=Tensor(rng.standard_normal((1, 4, 3))),
            t=Tensor(rng.standard_normal((1, 4, 3))),
            temperature=Tensor(np.asarray(float(rng.uniform(0.01, 1.0)))),
        )
        if align_loss(pair).item() < 0.0:
            nonneg = False
            break
    report("InfoNCE anchors (uniform = ln T to 1e-10; nonnegative x1000)",
           worst <= 1e-10 and nonneg, f"worst |loss - ln T| = {worst:.2e}")


# ---------------------------------------------------------------------------
# 7-8. directional ablations and the alignment-loss comparison
#       (one shared trained-model battery)

ABLATION_SPEC = SynthSpec(
    seed=100, days=2000, news_dim=8,
    regimes=[(400, 0.012), (300, 0.024), (400, 0.015), (300, 0.022), (600, 0.013)],
    planted_period=4, planted_amplitude=0.15,
    vol_of_vol=0.35, shock_persistence=0.85,
    news_informativeness=0.8, news_signal_scale=3.0,
    volume_coupling=0.5, volume_noise=0.08,
)

ABLATION_CFG = ModelConfig(
    lookback=12, horizon=1, label_len=2, news_dim=8, latent_width=12, align_width=8,
    num_blocks=1, top_k=4, inception_width=4, kernel_sizes=(1, 3),
    align_weight=0.01, temperature_init=0.07,
)


def _ablation_settings(seed, ablation):
    return TrainSettings(lr=2.5e-3, batch_size=128, max_epochs=48, patience=48,
                         seed=seed, ablation=ablation, early_stop_metric="joint")


@pytest.fixture(scope="module")
def ablation_battery():
    data = synth.generate(ABLATION_SPEC)
    splits = synth.default_splits(data)
    panel = ingest.align_panel(data.bars, data.news, data.vix, splits, ticker="SYN")
    rows = features.build_features(panel)
    bundles = {
        ab: build_dataset(rows, data.news, ABLATION_SPEC.news_dim,
                          lookback=ABLATION_CFG.lookback, horizon=ABLATION_CFG.horizon,
                          ablation=ab)
        for ab in (None, "news", "volume")
    }
    t0 = time.time()
    qlikes = {}
    results = {}
    for ab in (None, "news", "volume"):
        for seed in (0, 1, 2):
            res = train(ABLATION_CFG, bundles[ab], _ablation_settings(seed, ab))
            part = bundles[ab].test
            yhat = res.model.predict(part.X, part.N, part.M)
            qlikes[(ab, seed)] = evaluation.evaluate_predictions(part.y, yhat)["qlike"]
            results[(ab, seed)] = res
    wall = time.time() - t0
    return {"bundles": bundles, "qlikes": qlikes, "results": results, "wall": wall}


def test_acceptance_directional_ablations(ablation_battery):
    q = ablation_battery["qlikes"]
    mean = {ab: np.mean([q[(ab, s)] for s in (0, 1, 2)]) for ab in (None, "news", "volume")}
    news_margin = mean["news"] - mean[None]
    volume_margin = mean["volume"] - mean[None]
    wall = ablation_battery["wall"]
    report("directional ablations (full < no-news, full < no-volume; 3-seed means)",
           news_margin > 0.0 and volume_margin > 0.0 and wall < 900.0,
           f"full {mean[None]:.4f}, no-news {mean['news']:.4f} (+{news_margin:.4f}), "
           f"no-volume {mean['volume']:.4f} (+{volume_margin:.4f}), {wall:.0f}s")


def test_acceptance_alignment_objective(ablation_battery):
    bundle = ablation_battery["bundles"][None]
    with_align = ablation_battery["results"][(None, 0)]
    without = train(ABLATION_CFG, bundle, _ablation_settings(0, "align"))

    def align_on_test(res):
        _, pair = res.model.forward(bundle.test.X, bundle.test.N, bundle.test.M)
        return align_loss(pair).item()

    a_on = align_on_test(with_align)
    a_off = align_on_test(without)
    report("alignment objective (InfoNCE strictly lower when trained with λ > 0)",
           a_on < a_off, f"λ>0: {a_on:.4f} vs λ=0: {a_off:.4f}")


# ---------------------------------------------------------------------------
# 9. determinism


def test_acceptance_determinism(tmp_path):
    data = synth.generate(SynthSpec(seed=55, days=320, news_dim=6,
                                    regimes=[(160, 0.012), (160, 0.022)],
                                    news_informativeness=0.7, volume_coupling=0.5))
    splits = synth.default_splits(data)
    panel = ingest.align_panel(data.bars, data.news, data.vix, splits, ticker="SYN")
    rows = features.build_features(panel)
    cfg = ModelConfig(lookback=8, news_dim=6, latent_width=4, align_width=4,
                      num_blocks=1, top_k=2, inception_width=2, kernel_sizes=(1, 3),
                      align_weight=0.05)
    outs = []
    for run_id in ("a", "b"):
        bundle = build_dataset(rows, data.news, 6, lookback=8)
        result = train(cfg, bundle, TrainSettings(lr=1e-3, batch_size=64,
                                                  max_epochs=6, patience=6, seed=3))
        run_dir = tmp_path / run_id
        write_run_dir(result, bundle, str(run_dir), model_name="m2vn", ticker="SYN")
        rep = evaluation.build_report([str(run_dir)])
        stem = tmp_path / f"report_{run_id}"
        evaluation.write_report(rep, csv_path=f"{stem}.csv", json_path=f"{stem}.json")
        outs.append((result.history,
                     (run_dir / "history.csv").read_bytes(),
                     (run_dir / "predictions.csv").read_bytes(),
                     open(f"{stem}.csv", "rb").read(),
                     open(f"{stem}.json", "rb").read()))
    same = (outs[0][0] == outs[1][0] and outs[0][1] == outs[1][1]
            and outs[0][2] == outs[1][2] and outs[0][3] == outs[1][3]
            and outs[0][4] == outs[1][4])
    report("determinism (identical config/seed -> identical histories and reports)",
           same, f"{len(outs[0][0])} epochs compared")
