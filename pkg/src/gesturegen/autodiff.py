"""Dense float64 arrays with reverse-mode automatic differentiation.

Every differentiable operation used by the models lives here as a small
numpy kernel with an explicit backward function. There is no taping DSL:
each op builds one graph node whose closure knows how to push gradients
to its parents. `finite_diff_check` verifies any scalar-reduced op
against central differences.
"""
from __future__ import annotations

import numpy as np

from .errors import NumericalError, ShapeError

__all__ = [
    "Tensor",
    "tensor",
    "matmul",
    "concat",
    "reshape",
    "broadcast_to",
    "exp",
    "sqrt",
    "sigmoid",
    "silu",
    "softplus",
    "relu",
    "softmax",
    "layer_norm",
    "scaled_dot_attention",
    "causal_depthwise_conv",
    "huber_loss",
    "l1_loss",
    "finite_diff_check",
]


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A float64 array plus the accumulated gradient of a scalar loss.

    `value` is immutable by convention after construction; `grad` is
    populated by `backward()` on the loss node. Leaf tensors (weights,
    inputs) have no parents.
    """

    __slots__ = ("value", "grad", "_parents", "_bwd")

    def __init__(self, value, parents=(), bwd=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._bwd = bwd

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Tensor(shape={self.value.shape})"

    # -- graph traversal ------------------------------------------------

    def _topo(self):
        order, seen, stack = [], set(), [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        return order

    def backward(self):
        """Accumulate d(self)/d(leaf) into `.grad` over the whole graph.

        Non-scalar outputs are seeded with ones (i.e. the gradient of
        their sum). Grads of all reachable nodes are reset first, so
        repeated calls do not accumulate across steps.
        """
        order = self._topo()
        for node in order:
            node.grad = np.zeros_like(node.value)
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node._bwd is not None:
                node._bwd(node.grad)

    # -- operators ------------------------------------------------------

    def __add__(self, other):
        other = _as_tensor(other)
        out = Tensor(self.value + other.value, (self, other))

        def bwd(g):
            self.grad += _unbroadcast(g, self.value.shape)
            other.grad += _unbroadcast(g, other.value.shape)

        out._bwd = bwd
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.value, (self,))
        out._bwd = lambda g: self.grad.__iadd__(-g)
        return out

    def __sub__(self, other):
        return self + (-_as_tensor(other))

    def __rsub__(self, other):
        return _as_tensor(other) + (-self)

    def __mul__(self, other):
        other = _as_tensor(other)
        out = Tensor(self.value * other.value, (self, other))

        def bwd(g):
            self.grad += _unbroadcast(g * other.value, self.value.shape)
            other.grad += _unbroadcast(g * self.value, other.value.shape)

        out._bwd = bwd
        return out

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if isinstance(scalar, Tensor):
            raise TypeError("tensor/tensor division is not supported; multiply by a reciprocal")
        return self * (1.0 / float(scalar))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        out = Tensor(self.value[key], (self,))

        def bwd(g):
            np.add.at(self.grad, key, g)

        out._bwd = bwd
        return out

    def sum(self, axis=None, keepdims=False):
        out = Tensor(self.value.sum(axis=axis, keepdims=keepdims), (self,))

        def bwd(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self.grad += np.broadcast_to(g, self.value.shape)

        out._bwd = bwd
        return out

    def mean(self, axis=None, keepdims=False):
        n = self.value.size if axis is None else self.value.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) / n


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def tensor(value) -> Tensor:
    """Leaf tensor from any array-like, copied to float64."""
    return Tensor(np.array(value, dtype=np.float64))


# -- linear algebra -----------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.value.ndim != 2 or b.value.ndim != 2 or a.value.shape[1] != b.value.shape[0]:
        raise ShapeError(f"matmul shapes incompatible: {a.value.shape} x {b.value.shape}")
    out = Tensor(a.value @ b.value, (a, b))

    def bwd(g):
        a.grad += g @ b.value.T
        b.grad += a.value.T @ g

    out._bwd = bwd
    return out


def concat(parts, axis=-1) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    out = Tensor(np.concatenate([p.value for p in parts], axis=axis), tuple(parts))
    sizes = [p.value.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        for p, piece in zip(parts, np.split(g, splits, axis=axis)):
            p.grad += piece

    out._bwd = bwd
    return out


def reshape(x: Tensor, shape) -> Tensor:
    x = _as_tensor(x)
    out = Tensor(x.value.reshape(shape), (x,))
    out._bwd = lambda g: x.grad.__iadd__(g.reshape(x.value.shape))
    return out


def broadcast_to(x: Tensor, shape) -> Tensor:
    x = _as_tensor(x)
    out = Tensor(np.broadcast_to(x.value, shape).copy(), (x,))
    out._bwd = lambda g: x.grad.__iadd__(_unbroadcast(g, x.value.shape))
    return out


# -- elementwise nonlinearities ----------------------------------------


def exp(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    out = Tensor(np.exp(x.value), (x,))
    out._bwd = lambda g: x.grad.__iadd__(g * out.value)
    return out


def sqrt(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    out = Tensor(np.sqrt(x.value), (x,))
    out._bwd = lambda g: x.grad.__iadd__(g * 0.5 / out.value)
    return out


def sigmoid(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    s = 1.0 / (1.0 + np.exp(-x.value))
    out = Tensor(s, (x,))
    out._bwd = lambda g: x.grad.__iadd__(g * s * (1.0 - s))
    return out


def silu(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    s = 1.0 / (1.0 + np.exp(-x.value))
    out = Tensor(x.value * s, (x,))
    out._bwd = lambda g: x.grad.__iadd__(g * (s + x.value * s * (1.0 - s)))
    return out


def softplus(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    out = Tensor(np.logaddexp(0.0, x.value), (x,))
    out._bwd = lambda g: x.grad.__iadd__(g / (1.0 + np.exp(-x.value)))
    return out


def relu(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    out = Tensor(np.maximum(x.value, 0.0), (x,))
    out._bwd = lambda g: x.grad.__iadd__(g * (x.value > 0.0))
    return out


# -- rows/sequence primitives ------------------------------------------


def softmax(x: Tensor, axis=-1) -> Tensor:
    x = _as_tensor(x)
    shifted = x.value - x.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(s, (x,))

    def bwd(g):
        inner = (g * s).sum(axis=axis, keepdims=True)
        x.grad += s * (g - inner)

    out._bwd = bwd
    return out


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-row normalization over the last axis, then affine."""
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    d = x.value.shape[-1]
    if d == 0:
        raise ShapeError("layer_norm over an empty feature dimension")
    if eps <= 0:
        raise ValueError("layer_norm eps must be positive")
    mu = x.value.mean(axis=-1, keepdims=True)
    xc = x.value - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = Tensor(xhat * gamma.value + beta.value, (x, gamma, beta))

    def bwd(g):
        gxhat = g * gamma.value
        gamma.grad += _unbroadcast(g * xhat, gamma.value.shape)
        beta.grad += _unbroadcast(g, beta.value.shape)
        m1 = gxhat.mean(axis=-1, keepdims=True)
        m2 = (gxhat * xhat).mean(axis=-1, keepdims=True)
        x.grad += inv * (gxhat - m1 - xhat * m2)

    out._bwd = bwd
    return out


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor) -> Tensor:
    """softmax(q k^T / sqrt(d)) v for 2-D inputs (length x features)."""
    q, k, v = _as_tensor(q), _as_tensor(k), _as_tensor(v)
    if q.value.shape[1] != k.value.shape[1]:
        raise ShapeError(f"query/key feature dims differ: {q.value.shape} vs {k.value.shape}")
    if k.value.shape[0] != v.value.shape[0]:
        raise ShapeError(f"key/value lengths differ: {k.value.shape} vs {v.value.shape}")
    if k.value.shape[0] == 0:
        raise ShapeError("attention with zero keys")
    d = q.value.shape[1]
    logits = matmul(q, transpose(k)) * (1.0 / np.sqrt(d))
    return matmul(softmax(logits, axis=-1), v)


def transpose(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    out = Tensor(x.value.T.copy(), (x,))
    out._bwd = lambda g: x.grad.__iadd__(g.T)
    return out


def causal_depthwise_conv(x: Tensor, kernel: Tensor, bias: Tensor) -> Tensor:
    """Per-channel causal convolution over axis 0.

    x: L x C, kernel: w x C (tap 0 is the current frame), bias: C.
    Output frame t only sees frames <= t (zero padding on the left).
    """
    x, kernel, bias = _as_tensor(x), _as_tensor(kernel), _as_tensor(bias)
    L, C = x.value.shape
    w = kernel.value.shape[0]
    if kernel.value.shape[1] != C or bias.value.shape != (C,):
        raise ShapeError(f"conv weights {kernel.value.shape}/{bias.value.shape} mismatch C={C}")
    y = np.zeros_like(x.value)
    for j in range(w):
        if j == 0:
            y += kernel.value[0] * x.value
        else:
            y[j:] += kernel.value[j] * x.value[:-j]
    out = Tensor(y + bias.value, (x, kernel, bias))

    def bwd(g):
        bias.grad += g.sum(axis=0)
        for j in range(w):
            if j == 0:
                kernel.grad[0] += (g * x.value).sum(axis=0)
                x.grad += kernel.value[0] * g
            else:
                kernel.grad[j] += (g[j:] * x.value[:-j]).sum(axis=0)
                x.grad[:-j] += kernel.value[j] * g[j:]

    out._bwd = bwd
    return out


# -- losses -------------------------------------------------------------


def huber_loss(diff: Tensor, delta: float = 1.0) -> Tensor:
    """Mean Huber penalty of an error tensor."""
    diff = _as_tensor(diff)
    d = diff.value
    absd = np.abs(d)
    quad = 0.5 * d * d
    lin = delta * (absd - 0.5 * delta)
    val = np.where(absd <= delta, quad, lin).mean()
    out = Tensor(val, (diff,))
    out._bwd = lambda g: diff.grad.__iadd__(g * np.clip(d, -delta, delta) / d.size)
    return out


def l1_loss(diff: Tensor) -> Tensor:
    """Mean absolute value of an error tensor."""
    diff = _as_tensor(diff)
    out = Tensor(np.abs(diff.value).mean(), (diff,))
    out._bwd = lambda g: diff.grad.__iadd__(g * np.sign(diff.value) / diff.value.size)
    return out


# -- verification -------------------------------------------------------


def finite_diff_check(op, point: np.ndarray, eps: float = 1e-5) -> float:
    """Compare the analytic gradient of sum(op(x)) against central differences.

    `op` maps a Tensor to a Tensor (any shape; reduced by summation).
    Returns max over coordinates of |analytic - numeric| / max(1, |numeric|).
    """
    if not (1e-6 <= eps <= 1e-3):
        raise ValueError(f"eps {eps} outside [1e-6, 1e-3]")
    point = np.asarray(point, dtype=np.float64)
    x = tensor(point)
    out = op(x).sum()
    if not np.isfinite(out.value):
        raise NumericalError("non-finite value in forward pass")
    out.backward()
    analytic = x.grad.copy()

    def scalar_at(p):
        v = op(tensor(p)).value.sum()
        if not np.isfinite(v):
            raise NumericalError("non-finite value during finite differences")
        return v

    flat = point.ravel()
    numeric = np.zeros_like(flat)
    for i in range(flat.size):
        p = flat.copy()
        p[i] += eps
        hi = scalar_at(p.reshape(point.shape))
        p[i] -= 2 * eps
        lo = scalar_at(p.reshape(point.shape))
        numeric[i] = (hi - lo) / (2 * eps)
    numeric = numeric.reshape(point.shape)
    denom = np.maximum(1.0, np.abs(numeric))
    return float(np.max(np.abs(analytic - numeric) / denom))
