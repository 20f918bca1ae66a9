"""Central finite-difference gradient checking shared by the tensor and model tests."""

import numpy as np


def fd_gradients(scalar_fn, tensors, eps=1e-5):
    """Central-difference gradients of scalar_fn() w.r.t. every entry of each tensor.

    scalar_fn rebuilds the forward pass from the same tensor objects, so
    in-place perturbation of .data is visible to it.
    """
    grads = []
    for t in tensors:
        g = np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = scalar_fn()
            flat[i] = orig - eps
            fm = scalar_fn()
            flat[i] = orig
            gf[i] = (fp - fm) / (2.0 * eps)
        grads.append(g)
    return grads


def max_relative_error(analytic, numeric):
    """max |a - n| / max(1, |a|, |n|), elementwise over matched gradient arrays."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def check_gradients(build_loss, params, tol=1e-4, eps=1e-5):
    """Assert analytic gradients of build_loss() match central differences."""
    for p in params:
        p.grad = None
    loss = build_loss()
    loss.backward()
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]
    numeric = fd_gradients(lambda: build_loss().item(), params, eps=eps)
    err = max_relative_error(analytic, numeric)
    assert err < tol, f"gradient mismatch: max relative error {err:.3e} >= {tol}"
    return err
