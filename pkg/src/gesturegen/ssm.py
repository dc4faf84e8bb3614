"""Selective state-space sequence modeling.

Continuous diagonal SSM, its discretization, the input-dependent scan in
sequential (differentiable) and parallel prefix-combine forms, and the
gated Mamba block that wires them together.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ShapeError

SSM_STATE_DIM = 16
SSM_EXPAND = 2
SSM_CONV_WIDTH = 4


@dataclass
class ContinuousSsm:
    """Single-channel diagonal continuous SSM x' = Ax + Bu, y = Cx + Du."""

    a: np.ndarray  # N, strictly negative diagonal
    b: np.ndarray  # N
    c: np.ndarray  # N
    d: float

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        self.c = np.asarray(self.c, dtype=np.float64)
        if self.a.size < 1:
            raise ShapeError("SSM state dimension must be >= 1")
        if np.any(self.a >= 0):
            raise ValueError("diagonal A entries must be strictly negative for stability")


def discretize_zoh(a: np.ndarray, b: np.ndarray, delta: float):
    """Zero-order hold for the state path, Euler for the input path.

    Returns (abar, bbar) with abar = exp(delta * a), bbar = delta * b.
    """
    if delta <= 0:
        raise ValueError(f"discretization step must be positive, got {delta}")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.exp(delta * a), delta * b


def selective_scan_seq(abar: Tensor, bbar: Tensor, cmat: Tensor, d: Tensor, u: Tensor) -> Tensor:
    """Differentiable sequential scan of the per-step recurrence.

    h_k = abar_k * h_{k-1} + bbar_k * u_k,  y_k = <cmat_k, h_k> + d * u_k

    Shapes: abar/bbar/cmat L x C x N, d C, u L x C. The state starts at
    zero. Backward runs the adjoint recurrence in reverse.
    """
    abar, bbar, cmat = ad._as_tensor(abar), ad._as_tensor(bbar), ad._as_tensor(cmat)
    d, u = ad._as_tensor(d), ad._as_tensor(u)
    L, C = u.value.shape
    if abar.value.shape != bbar.value.shape or abar.value.shape != cmat.value.shape:
        raise ShapeError("scan parameter shapes differ")
    if abar.value.shape[:2] != (L, C):
        raise ShapeError(f"scan params {abar.value.shape} do not match input {u.value.shape}")

    h = np.zeros((L, C, abar.value.shape[2]))
    state = np.zeros((C, abar.value.shape[2]))
    for k in range(L):
        state = abar.value[k] * state + bbar.value[k] * u.value[k][:, None]
        h[k] = state
    y = (cmat.value * h).sum(axis=2) + d.value * u.value
    out = Tensor(y, (abar, bbar, cmat, d, u))

    def bwd(g):
        cmat.grad += g[:, :, None] * h
        d.grad += (g * u.value).sum(axis=0)
        lam = np.zeros_like(state)
        for k in range(L - 1, -1, -1):
            lam = cmat.value[k] * g[k][:, None] + lam
            prev = h[k - 1] if k > 0 else np.zeros_like(state)
            abar.grad[k] += lam * prev
            bbar.grad[k] += lam * u.value[k][:, None]
            u.grad[k] += (bbar.value[k] * lam).sum(axis=1) + d.value * g[k]
            lam = abar.value[k] * lam

    out._bwd = bwd
    return out


def selective_scan_parallel(abar: np.ndarray, bbar: np.ndarray, cmat: np.ndarray,
                            d: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Same contract as `selective_scan_seq`, via an associative prefix scan.

    The recurrence h_k = a_k h_{k-1} + b_k is a scan under
    (a1, b1) o (a2, b2) = (a1*a2, a2*b1 + b2); a Hillis-Steele doubling
    sweep with a fixed combine order keeps outputs reproducible.
    Forward-only (numpy in, numpy out).
    """
    abar = np.asarray(abar, dtype=np.float64)
    bbar = np.asarray(bbar, dtype=np.float64)
    cmat = np.asarray(cmat, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    L, C = u.shape
    if abar.shape[:2] != (L, C):
        raise ShapeError(f"scan params {abar.shape} do not match input {u.shape}")

    a = abar.copy()
    b = bbar * u[:, :, None]
    stride = 1
    while stride < L:
        a_prev = a[:-stride]
        b_prev = b[:-stride]
        b[stride:] = a[stride:] * b_prev + b[stride:]
        a[stride:] = a[stride:] * a_prev
        stride *= 2
    h = b  # inclusive prefix: h_k with zero initial state
    return (cmat * h).sum(axis=2) + d * u


def selective_scan_fused(delta: Tensor, b_proj: Tensor, c_proj: Tensor,
                         a: Tensor, d_skip: Tensor, u: Tensor) -> Tensor:
    """Input-dependent scan with the ZOH discretization folded in.

    Equivalent to building abar = exp(delta * a), bbar = delta * b and
    calling `selective_scan_seq`, but as one graph node so the large
    L x C x N intermediates never materialize as separate tensors.

    Shapes: delta/u L x C, b_proj/c_proj L x N, a C x N (negative),
    d_skip C. Returns y with shape L x C.
    """
    delta, b_proj, c_proj = (ad._as_tensor(v) for v in (delta, b_proj, c_proj))
    a, d_skip, u = ad._as_tensor(a), ad._as_tensor(d_skip), ad._as_tensor(u)
    L, C = u.value.shape
    N = a.value.shape[1]
    if delta.value.shape != (L, C) or a.value.shape != (C, N):
        raise ShapeError(f"fused scan shapes inconsistent: delta {delta.value.shape}, "
                         f"a {a.value.shape}, u {u.value.shape}")
    if b_proj.value.shape != (L, N) or c_proj.value.shape != (L, N):
        raise ShapeError(f"fused scan projections must be L x N, got "
                         f"{b_proj.value.shape} / {c_proj.value.shape}")

    abar = np.exp(delta.value[:, :, None] * a.value[None])  # L x C x N
    h = np.zeros((L, C, N))
    state = np.zeros((C, N))
    for k in range(L):
        bbar_k = delta.value[k][:, None] * b_proj.value[k][None, :]
        state = abar[k] * state + bbar_k * u.value[k][:, None]
        h[k] = state
    y = np.einsum("ln,lcn->lc", c_proj.value, h) + d_skip.value * u.value
    out = Tensor(y, (delta, b_proj, c_proj, a, d_skip, u))

    def bwd(g):
        c_proj.grad += np.einsum("lc,lcn->ln", g, h)
        d_skip.grad += (g * u.value).sum(axis=0)
        lam = np.zeros((C, N))
        for k in range(L - 1, -1, -1):
            lam = lam + c_proj.value[k][None, :] * g[k][:, None]
            prev = h[k - 1] if k > 0 else 0.0
            g_abar = lam * prev
            g_bbar = lam * u.value[k][:, None]
            delta.grad[k] += (g_abar * abar[k] * a.value).sum(axis=1) \
                + (g_bbar * b_proj.value[k][None, :]).sum(axis=1)
            a.grad += g_abar * abar[k] * delta.value[k][:, None]
            b_proj.grad[k] += (g_bbar * delta.value[k][:, None]).sum(axis=0)
            u.grad[k] += (delta.value[k][:, None] * b_proj.value[k][None, :] * lam).sum(axis=1) \
                + d_skip.value * g[k]
            lam = abar[k] * lam

    out._bwd = bwd
    return out


def ssm_impulse_kernel(ssm: ContinuousSsm, delta: float, length: int) -> np.ndarray:
    """Impulse response k_j = c . abar^j bbar of the discretized SSM.

    The D skip term is not folded in; convolution users add d*u at lag 0.
    """
    abar, bbar = discretize_zoh(ssm.a, ssm.b, delta)
    powers = abar[None, :] ** np.arange(length)[:, None]
    return (powers * bbar * ssm.c).sum(axis=1)


# -- Mamba block --------------------------------------------------------


@dataclass
class MambaBlockWeights:
    """Weights for one gated selective-SSM block of width d."""

    w_in: Tensor       # d x 2*d_inner
    conv_kernel: Tensor  # w x d_inner
    conv_bias: Tensor    # d_inner
    w_delta: Tensor    # d_inner x d_inner
    b_delta: Tensor    # d_inner
    w_b: Tensor        # d_inner x N
    w_c: Tensor        # d_inner x N
    a_log: Tensor      # d_inner x N, A = -exp(a_log) < 0
    d_skip: Tensor     # d_inner
    w_out: Tensor      # d_inner x d

    @property
    def d_model(self) -> int:
        return self.w_in.value.shape[0]

    @property
    def d_inner(self) -> int:
        return self.w_out.value.shape[0]

    def named(self, prefix: str) -> dict:
        return {
            f"{prefix}.w_in": self.w_in,
            f"{prefix}.conv_kernel": self.conv_kernel,
            f"{prefix}.conv_bias": self.conv_bias,
            f"{prefix}.w_delta": self.w_delta,
            f"{prefix}.b_delta": self.b_delta,
            f"{prefix}.w_b": self.w_b,
            f"{prefix}.w_c": self.w_c,
            f"{prefix}.a_log": self.a_log,
            f"{prefix}.d_skip": self.d_skip,
            f"{prefix}.w_out": self.w_out,
        }


def init_mamba_block(d: int, rng: np.random.Generator, n_state: int = SSM_STATE_DIM,
                     expand: int = SSM_EXPAND, conv_width: int = SSM_CONV_WIDTH,
                     init_std: float = 0.02) -> MambaBlockWeights:
    """Seeded Gaussian init; A diagonal gets the -(n+1) real init."""
    di = expand * d
    t = lambda shape: ad.tensor(rng.normal(0.0, init_std, shape))
    a_init = np.log(np.broadcast_to(np.arange(1, n_state + 1, dtype=np.float64), (di, n_state)))
    return MambaBlockWeights(
        w_in=t((d, 2 * di)),
        conv_kernel=t((conv_width, di)),
        conv_bias=ad.tensor(np.zeros(di)),
        w_delta=t((di, di)),
        b_delta=ad.tensor(np.zeros(di)),
        w_b=t((di, n_state)),
        w_c=t((di, n_state)),
        a_log=ad.tensor(a_init),
        d_skip=ad.tensor(np.ones(di)),
        w_out=t((di, d)),
    )


def mamba_block_forward(weights: MambaBlockWeights, x: Tensor) -> Tensor:
    """Gated selective-SSM block: project, causal conv + SiLU, scan, gate.

    Causality holds end to end: frame k of the output depends only on
    input frames <= k.
    """
    x = ad._as_tensor(x)
    if x.value.ndim != 2 or x.value.shape[1] != weights.d_model:
        raise ShapeError(f"input {x.value.shape} does not match block width {weights.d_model}")
    di = weights.d_inner

    xz = ad.matmul(x, weights.w_in)
    main, gate = xz[:, :di], xz[:, di:]
    main = ad.silu(ad.causal_depthwise_conv(main, weights.conv_kernel, weights.conv_bias))

    delta = ad.softplus(ad.matmul(main, weights.w_delta) + weights.b_delta)  # L x di
    b_proj = ad.matmul(main, weights.w_b)  # L x N
    c_proj = ad.matmul(main, weights.w_c)  # L x N

    a = -ad.exp(weights.a_log)  # di x N
    y = selective_scan_fused(delta, b_proj, c_proj, a, weights.d_skip, main)
    y = y * ad.silu(gate)
    return ad.matmul(y, weights.w_out)
