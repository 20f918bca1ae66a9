#!/usr/bin/env python3
"""The reverse-mode tape in isolation: gradients checked, then a small fit.

Every network op records its backward closure on a tape; walking it in
reverse topological order fills parameter gradients. Central finite
differences verify a composite graph, then Adam with cosine decay fits a
tiny nonlinear regression.
"""

import numpy as np

from volcast import tensor as tn
from volcast.tensor import Tensor

rng = np.random.default_rng(1)

# gradient check of a composite graph against central differences
w1 = Tensor(rng.standard_normal((3, 8)) * 0.5, requires_grad=True)
b1 = Tensor(np.zeros(8), requires_grad=True)
w2 = Tensor(rng.standard_normal((8, 1)) * 0.5, requires_grad=True)
x = Tensor(rng.standard_normal((16, 3)))
y = Tensor(rng.standard_normal((16, 1)))


def loss_fn():
    hidden = tn.gelu(tn.affine(x, w1, b1))
    return tn.mse_loss(tn.matmul(hidden, w2), y)


loss = loss_fn()
loss.backward()
analytic = w1.grad.copy()

eps = 1e-5
numeric = np.zeros_like(w1.data)
flat, nflat = w1.data.reshape(-1), numeric.reshape(-1)
for i in range(flat.size):
    orig = flat[i]
    flat[i] = orig + eps
    up = loss_fn().item()
    flat[i] = orig - eps
    down = loss_fn().item()
    flat[i] = orig
    nflat[i] = (up - down) / (2 * eps)

err = np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric)))
print(f"composite-graph gradient check: max relative error {err:.2e}")

# fit y = sin(3 x) with the same ops
xs = np.linspace(-1, 1, 64).reshape(-1, 1)
ys = np.sin(3 * xs)
W1 = Tensor(rng.standard_normal((1, 16)), requires_grad=True)
B1 = Tensor(np.zeros(16), requires_grad=True)
W2 = Tensor(rng.standard_normal((16, 1)) * 0.3, requires_grad=True)
B2 = Tensor(np.zeros(1), requires_grad=True)
params = {"W1": W1, "B1": B1, "W2": W2, "B2": B2}
opt = tn.Adam(params, lr=2e-2, total_steps=800)

for step in range(800):
    opt.zero_grad()
    pred = tn.affine(tn.gelu(tn.affine(Tensor(xs), W1, B1)), W2, B2)
    fit = tn.mse_loss(pred, Tensor(ys))
    fit.backward()
    opt.step()
    if step % 200 == 0 or step == 799:
        print(f"step {step:4d}  lr {opt.current_lr():.5f}  mse {fit.item():.6f}")

print("final fit mse:", fit.item())
