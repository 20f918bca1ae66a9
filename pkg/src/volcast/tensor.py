"""Dense float64 tensors with reverse-mode automatic differentiation.

Covers exactly the operation set the forecasting network needs, plus Adam
with a cosine learning-rate schedule and a text checkpoint format. Values
live in numpy arrays; the tape is a graph of closures walked in reverse
topological order, micrograd-style but array-valued.

Broadcasting is deliberately restricted: two operands must have equal
shapes, or one's shape must be a trailing suffix of the other's (a
parameter broadcast across leading batch axes). Anything else requires an
explicit reshape/repeat — fewer silent shape bugs.
"""

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf, expit

from .errors import NonScalarLoss, ShapeMismatch

__all__ = [
    "Tensor", "add", "sub", "mul", "neg", "absolute", "exp", "log", "sin", "cos",
    "sigmoid", "softplus", "gelu", "reciprocal", "matmul", "affine", "concat",
    "narrow", "reshape", "permute", "transpose_last2", "repeat_last", "total", "apply_linear",
    "mean", "layer_norm", "mse_loss", "softmax_cross_entropy", "conv2d",
    "embedding_lookup", "Adam", "cosine_lr", "save_checkpoint", "load_checkpoint",
]


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_prev", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._prev = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def backward(self):
        if self.data.size != 1:
            raise NonScalarLoss(f"backward() needs a scalar, got shape {self.shape}")
        topo, seen = [], set()

        def visit(node):
            stack = [node]
            while stack:
                n = stack[-1]
                if id(n) in seen:
                    stack.pop()
                    continue
                unvisited = [p for p in n._prev if id(p) not in seen]
                if unvisited:
                    stack.extend(unvisited)
                else:
                    seen.add(id(n))
                    topo.append(n)
                    stack.pop()

        visit(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _node(data, parents, backward) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._prev = tuple(parents)
        out._backward = backward
    return out


def _accum(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _suffix_compatible(sa: tuple, sb: tuple) -> bool:
    small, big = (sa, sb) if len(sa) <= len(sb) else (sb, sa)
    return big[len(big) - len(small):] == small


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    return g


def _elementwise_pair(opname, a, b, fwd, bwd_a, bwd_b):
    a, b = _lift(a), _lift(b)
    if not _suffix_compatible(a.shape, b.shape):
        raise ShapeMismatch(opname, a.shape, b.shape)
    out_data = fwd(a.data, b.data)
    out = _node(out_data, (a, b), None)

    def backward():
        _accum(a, _unbroadcast(bwd_a(a.data, b.data, out.grad), a.shape))
        _accum(b, _unbroadcast(bwd_b(a.data, b.data, out.grad), b.shape))

    out._backward = backward if out.requires_grad else None
    return out


def add(a, b):
    return _elementwise_pair("add", a, b, lambda x, y: x + y,
                             lambda x, y, g: g, lambda x, y, g: g)


def sub(a, b):
    return _elementwise_pair("sub", a, b, lambda x, y: x - y,
                             lambda x, y, g: g, lambda x, y, g: -g)


def mul(a, b):
    return _elementwise_pair("mul", a, b, lambda x, y: x * y,
                             lambda x, y, g: g * y, lambda x, y, g: g * x)


def _elementwise_unary(a, fwd, dfdx):
    a = _lift(a)
    out_data = fwd(a.data)
    out = _node(out_data, (a,), None)

    def backward():
        _accum(a, out.grad * dfdx(a.data, out_data))

    out._backward = backward if out.requires_grad else None
    return out


def neg(a):
    return _elementwise_unary(a, lambda x: -x, lambda x, y: -np.ones_like(x))


def absolute(a):
    # subgradient 0 at exactly 0 (np.sign(0) == 0)
    return _elementwise_unary(a, np.abs, lambda x, y: np.sign(x))


def exp(a):
    return _elementwise_unary(a, np.exp, lambda x, y: y)


def log(a):
    return _elementwise_unary(a, np.log, lambda x, y: 1.0 / x)


def sin(a):
    return _elementwise_unary(a, np.sin, lambda x, y: np.cos(x))


def cos(a):
    return _elementwise_unary(a, np.cos, lambda x, y: -np.sin(x))


def sigmoid(a):
    return _elementwise_unary(a, expit, lambda x, y: y * (1.0 - y))


def softplus(a):
    return _elementwise_unary(a, lambda x: np.logaddexp(0.0, x), lambda x, y: expit(x))


_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(a):
    def fwd(x):
        return 0.5 * x * (1.0 + erf(x * _INV_SQRT2))

    def dfdx(x, y):
        return 0.5 * (1.0 + erf(x * _INV_SQRT2)) + x * _INV_SQRT2PI * np.exp(-0.5 * x * x)

    return _elementwise_unary(a, fwd, dfdx)


def reciprocal(a):
    return _elementwise_unary(a, lambda x: 1.0 / x, lambda x, y: -y * y)


def matmul(a, b):
    a, b = _lift(a), _lift(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeMismatch("matmul", a.shape, b.shape)
    try:
        out_data = np.matmul(a.data, b.data)
    except ValueError as e:
        raise ShapeMismatch("matmul", a.shape, b.shape) from e
    out = _node(out_data, (a, b), None)

    def backward():
        g = out.grad
        _accum(a, _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape))
        _accum(b, _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape))

    out._backward = backward if out.requires_grad else None
    return out


def affine(x, w, b=None):
    """x @ w + b with b broadcast across leading axes."""
    out = matmul(x, w)
    return out if b is None else add(out, b)


def concat(tensors, axis: int = -1):
    ts = [_lift(t) for t in tensors]
    out_data = np.concatenate([t.data for t in ts], axis=axis)
    out = _node(out_data, tuple(ts), None)
    ax = axis if axis >= 0 else out_data.ndim + axis
    splits = np.cumsum([t.shape[ax] for t in ts])[:-1]

    def backward():
        for t, piece in zip(ts, np.split(out.grad, splits, axis=ax)):
            _accum(t, piece)

    out._backward = backward if out.requires_grad else None
    return out


def narrow(a, axis: int, start: int, length: int):
    """Contiguous slice [start, start+length) along one axis."""
    a = _lift(a)
    ax = axis if axis >= 0 else a.ndim + axis
    index = tuple(slice(None) if i != ax else slice(start, start + length) for i in range(a.ndim))
    out = _node(a.data[index], (a,), None)

    def backward():
        g = np.zeros_like(a.data)
        g[index] = out.grad
        _accum(a, g)

    out._backward = backward if out.requires_grad else None
    return out


def reshape(a, shape):
    a = _lift(a)
    out = _node(a.data.reshape(shape), (a,), None)

    def backward():
        _accum(a, out.grad.reshape(a.shape))

    out._backward = backward if out.requires_grad else None
    return out


def permute(a, axes):
    a = _lift(a)
    out = _node(np.transpose(a.data, axes), (a,), None)
    inverse = np.argsort(axes)

    def backward():
        _accum(a, np.transpose(out.grad, inverse))

    out._backward = backward if out.requires_grad else None
    return out


def transpose_last2(a):
    a = _lift(a)
    axes = list(range(a.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return permute(a, axes)


def repeat_last(a, n: int):
    """Expand a trailing singleton axis to width n (gradient sums back)."""
    a = _lift(a)
    if a.shape[-1] != 1:
        raise ShapeMismatch("repeat_last", a.shape)
    out = _node(np.repeat(a.data, n, axis=-1), (a,), None)

    def backward():
        _accum(a, out.grad.sum(axis=-1, keepdims=True))

    out._backward = backward if out.requires_grad else None
    return out


def total(a):
    """Sum of all elements, as a scalar tensor."""
    a = _lift(a)
    out = _node(np.asarray(a.data.sum()), (a,), None)

    def backward():
        _accum(a, np.broadcast_to(out.grad, a.shape).copy())

    out._backward = backward if out.requires_grad else None
    return out


def mean(a):
    a = _lift(a)
    out = _node(np.asarray(a.data.mean()), (a,), None)

    def backward():
        _accum(a, np.broadcast_to(out.grad / a.size, a.shape).copy())

    out._backward = backward if out.requires_grad else None
    return out


def layer_norm(a, eps: float = 1e-5):
    """Normalize the last axis to zero mean / unit variance (no learned gain)."""
    a = _lift(a)
    mu = a.data.mean(axis=-1, keepdims=True)
    var = a.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    y = (a.data - mu) * inv
    out = _node(y, (a,), None)

    def backward():
        g = out.grad
        gm = g.mean(axis=-1, keepdims=True)
        gym = (g * y).mean(axis=-1, keepdims=True)
        _accum(a, inv * (g - gm - y * gym))

    out._backward = backward if out.requires_grad else None
    return out


def mse_loss(pred, target):
    pred, target = _lift(pred), _lift(target)
    if pred.shape != target.shape:
        raise ShapeMismatch("mse_loss", pred.shape, target.shape)
    diff = pred.data - target.data
    out = _node(np.asarray(np.mean(diff**2)), (pred, target), None)
    scale = 2.0 / pred.size

    def backward():
        g = out.grad * scale * diff
        _accum(pred, g)
        _accum(target, -g)

    out._backward = backward if out.requires_grad else None
    return out


def softmax_cross_entropy(logits, targets):
    """Mean cross-entropy of softmax(logits) against integer class targets.

    logits: (..., n); targets: integer array of shape (...).
    """
    logits = _lift(logits)
    targets = np.asarray(targets, dtype=np.int64)
    if targets.shape != logits.shape[:-1]:
        raise ShapeMismatch("softmax_cross_entropy", logits.shape, targets.shape)
    z = logits.data
    zmax = z.max(axis=-1, keepdims=True)
    expz = np.exp(z - zmax)
    sumexp = expz.sum(axis=-1, keepdims=True)
    lse = zmax[..., 0] + np.log(sumexp[..., 0])
    picked = np.take_along_axis(z, targets[..., None], axis=-1)[..., 0]
    rows = max(1, int(np.prod(targets.shape)))
    out = _node(np.asarray((lse - picked).mean()), (logits,), None)

    def backward():
        p = expz / sumexp
        np.subtract.at(p, (*np.indices(targets.shape), targets), 1.0)
        _accum(logits, out.grad * p / rows)

    out._backward = backward if out.requires_grad else None
    return out


def conv2d(x, w, b=None):
    """Same-padded 2D convolution: x (B, C, H, W), w (O, C, kh, kw), odd kernels."""
    x, w = _lift(x), _lift(w)
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ShapeMismatch("conv2d", x.shape, w.shape)
    kh, kw = w.shape[2], w.shape[3]
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeMismatch("conv2d", w.shape)
    ph, pw = kh // 2, kw // 2
    B, C, H, W = x.shape
    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))  # (B, C, H, W, kh, kw)
    out_data = np.einsum("bchwij,ocij->bohw", win, w.data, optimize=True)
    parents = [x, w]
    if b is not None:
        b = _lift(b)
        if b.shape != (w.shape[0],):
            raise ShapeMismatch("conv2d-bias", b.shape, w.shape)
        out_data = out_data + b.data[None, :, None, None]
        parents.append(b)
    out = _node(out_data, tuple(parents), None)

    def backward():
        g = out.grad
        _accum(w, np.einsum("bchwij,bohw->ocij", win, g, optimize=True))
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                gxp[:, :, i:i + H, j:j + W] += np.einsum(
                    "bohw,oc->bchw", g, w.data[:, :, i, j], optimize=True
                )
        _accum(x, gxp[:, :, ph:ph + H, pw:pw + W])
        if b is not None:
            _accum(b, g.sum(axis=(0, 2, 3)))

    out._backward = backward if out.requires_grad else None
    return out


def apply_linear(x, fn, adjoint=None):
    """Apply a fixed linear map to x's values; backward applies its adjoint.

    fn (and adjoint, defaulting to fn for self-adjoint maps) operate on raw
    ndarrays. Any data-dependent coefficients baked into fn are treated as
    constants by the tape.
    """
    x = _lift(x)
    out = _node(fn(x.data), (x,), None)
    adj = adjoint if adjoint is not None else fn

    def backward():
        _accum(x, adj(out.grad))

    out._backward = backward if out.requires_grad else None
    return out


def embedding_lookup(table, indices):
    """Row gather: table (V, d), integer indices of any shape -> (*indices.shape, d)."""
    table = _lift(table)
    idx = np.asarray(indices, dtype=np.int64)
    out = _node(table.data[idx], (table,), None)

    def backward():
        g = np.zeros_like(table.data)
        np.add.at(g, idx, out.grad)
        _accum(table, g)

    out._backward = backward if out.requires_grad else None
    return out


# ---------------------------------------------------------------------------
# optimization


def cosine_lr(base_lr: float, step: int, total_steps: int) -> float:
    """base * 0.5 * (1 + cos(pi * step / total_steps)), clamped past the horizon."""
    t = min(step, total_steps)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * t / total_steps))


class Adam:
    """Adam over a named parameter dict, with optional cosine learning-rate decay."""

    def __init__(self, params: dict, lr: float = 3e-4, betas=(0.9, 0.999),
                 eps: float = 1e-8, total_steps: int | None = None):
        self.params = dict(params)
        self.base_lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.total_steps = total_steps
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def current_lr(self) -> float:
        if self.total_steps is None:
            return self.base_lr
        return cosine_lr(self.base_lr, self.step_count, self.total_steps)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        self.step_count += 1
        lr = self.current_lr()
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1**self.step_count
        bc2 = 1.0 - b2**self.step_count
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


# ---------------------------------------------------------------------------
# checkpoints

_CKPT_HEADER = "volcast-checkpoint v1"


def save_checkpoint(params: dict, path):
    """Write (name, shape, values) triples as text; values are hex floats (lossless)."""
    lines = [_CKPT_HEADER, str(len(params))]
    for name in sorted(params):
        p = params[name]
        data = p.data if isinstance(p, Tensor) else np.asarray(p, dtype=np.float64)
        shape = ",".join(str(s) for s in data.shape)
        lines.append(f"{name}\t{shape}")
        lines.append(" ".join(v.hex() for v in data.reshape(-1).tolist()))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> dict:
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != _CKPT_HEADER:
        raise ValueError(f"{path}: not a volcast checkpoint")
    count = int(lines[1])
    params = {}
    row = 2
    for _ in range(count):
        name, shape_s = lines[row].split("\t")
        shape = tuple(int(s) for s in shape_s.split(",")) if shape_s else ()
        values = np.array([float.fromhex(tok) for tok in lines[row + 1].split()])
        params[name] = values.reshape(shape)
        row += 2
    return params
