"""Denoising network: stacked attention+Mamba blocks with an output
projection, the variant factory for ablation configs, and the training
step (Huber gesture loss + L1 style/emotion alignment, AdamW updates).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import autodiff as ad
from . import fusion as fu
from . import ssm
from .autodiff import Tensor
from .diffusion import DiffusionSchedule, q_sample
from .errors import ConfigError, NumericalError, ShapeError


@dataclass
class DenoiserConfig:
    layers: int = 8
    use_attention: bool = True
    use_mamba: bool = True
    use_conv: bool = False
    residual: bool = True
    d: int = 256
    gesture_dim: int = 75
    n_state: int = ssm.SSM_STATE_DIM
    expand: int = ssm.SSM_EXPAND
    mamba_conv_width: int = ssm.SSM_CONV_WIDTH
    block_conv_width: int = 3

    def __post_init__(self):
        if self.layers < 1:
            raise ConfigError(f"need at least one block, got layers={self.layers}")
        if not (self.use_attention or self.use_mamba or self.use_conv):
            raise ConfigError("at least one of attention/mamba/conv must be enabled")


@dataclass
class MambaAttnBlockWeights:
    ln1_gamma: Tensor
    ln1_beta: Tensor
    w_q: Optional[Tensor]
    w_k: Optional[Tensor]
    w_v: Optional[Tensor]
    w_o: Optional[Tensor]
    mamba: Optional[ssm.MambaBlockWeights]
    ln2_gamma: Tensor
    ln2_beta: Tensor
    conv_kernel: Optional[Tensor] = None
    conv_bias: Optional[Tensor] = None

    def named(self, prefix: str) -> dict:
        out = {}
        for key in ("ln1_gamma", "ln1_beta", "w_q", "w_k", "w_v", "w_o",
                    "ln2_gamma", "ln2_beta", "conv_kernel", "conv_bias"):
            v = getattr(self, key)
            if v is not None:
                out[f"{prefix}.{key}"] = v
        if self.mamba is not None:
            out.update(self.mamba.named(f"{prefix}.mamba"))
        return out


@dataclass
class DenoiserWeights:
    config: DenoiserConfig
    blocks: list
    proj_w: Tensor
    proj_b: Tensor

    def named(self, prefix: str = "denoiser") -> dict:
        out = {}
        for i, b in enumerate(self.blocks):
            out.update(b.named(f"{prefix}.block{i}"))
        out[f"{prefix}.proj_w"] = self.proj_w
        out[f"{prefix}.proj_b"] = self.proj_b
        return out


def _init_block(config: DenoiserConfig, rng: np.random.Generator,
                init_std: float = 0.02) -> MambaAttnBlockWeights:
    d = config.d
    t = lambda shape: ad.tensor(rng.normal(0.0, init_std, shape))
    attn = config.use_attention
    return MambaAttnBlockWeights(
        ln1_gamma=ad.tensor(np.ones(d)), ln1_beta=ad.tensor(np.zeros(d)),
        w_q=t((d, d)) if attn else None,
        w_k=t((d, d)) if attn else None,
        w_v=t((d, d)) if attn else None,
        w_o=t((d, d)) if attn else None,
        mamba=ssm.init_mamba_block(d, rng, config.n_state, config.expand,
                                   config.mamba_conv_width, init_std)
        if config.use_mamba else None,
        ln2_gamma=ad.tensor(np.ones(d)), ln2_beta=ad.tensor(np.zeros(d)),
        conv_kernel=t((config.block_conv_width, d)) if config.use_conv else None,
        conv_bias=ad.tensor(np.zeros(d)) if config.use_conv else None,
    )


def build_variant(config: DenoiserConfig, seed: int) -> DenoiserWeights:
    """Seeded Gaussian init (std 0.02), layer norms at identity."""
    rng = np.random.default_rng(seed)
    blocks = [_init_block(config, rng) for _ in range(config.layers)]
    proj_w = ad.tensor(rng.normal(0.0, 0.02, (config.d, config.gesture_dim)))
    proj_b = ad.tensor(np.zeros(config.gesture_dim))
    return DenoiserWeights(config, blocks, proj_w, proj_b)


def mambattn_block(weights: MambaAttnBlockWeights, x: Tensor, config: DenoiserConfig) -> Tensor:
    """LN -> (optional conv) -> (optional self-attn) -> (optional Mamba) -> LN,
    with a residual from the block input when configured."""
    if x.value.shape[1] != config.d:
        raise ShapeError(f"block input width {x.value.shape[1]} != configured d {config.d}")
    h = ad.layer_norm(x, weights.ln1_gamma, weights.ln1_beta)
    if config.use_conv:
        h = ad.causal_depthwise_conv(h, weights.conv_kernel, weights.conv_bias)
    if config.use_attention:
        attended = ad.scaled_dot_attention(
            ad.matmul(h, weights.w_q), ad.matmul(h, weights.w_k), ad.matmul(h, weights.w_v))
        h = ad.matmul(attended, weights.w_o)
    if config.use_mamba:
        h = ssm.mamba_block_forward(weights.mamba, h)
    y = ad.layer_norm(h, weights.ln2_gamma, weights.ln2_beta)
    return x + y if config.residual else y


def denoiser_forward(weights: DenoiserWeights, f_fuse: Tensor) -> Tensor:
    """Stacked blocks then linear projection to the gesture width."""
    h = f_fuse
    for block in weights.blocks:
        h = mambattn_block(block, h, weights.config)
    return ad.matmul(h, weights.proj_w) + weights.proj_b


# -- full model ---------------------------------------------------------


@dataclass
class GestureModel:
    fusion: fu.FusionWeights
    denoiser: DenoiserWeights

    def named_params(self) -> dict:
        params = self.fusion.named("fusion")
        params.update(self.denoiser.named("denoiser"))
        return params


def build_model(den_config: DenoiserConfig, fus_config: fu.FusionConfig, seed: int) -> GestureModel:
    if den_config.d != fus_config.d or den_config.gesture_dim != fus_config.gesture_dim:
        raise ConfigError("denoiser and fusion configs disagree on d / gesture_dim")
    rng = np.random.default_rng(seed)
    fusion = fu.init_fusion(fus_config, rng)
    denoiser = build_variant(den_config, int(rng.integers(2**31)))
    return GestureModel(fusion, denoiser)


def predict_x0(model: GestureModel, audio: np.ndarray, text: np.ndarray,
               style_id: int, emotion_id: int, x_t: np.ndarray, t: int) -> np.ndarray:
    """Inference path: encode conditions, fuse, denoise. No masking."""
    bundle = fu.encode_conditions(model.fusion, audio, text, style_id, emotion_id, x_t, t)
    out = fu.fusion_forward(model.fusion, bundle)
    return denoiser_forward(model.denoiser, out.f_fuse).value


# -- optimizer ----------------------------------------------------------


class AdamW:
    """Decoupled weight-decay Adam over a named parameter dict."""

    def __init__(self, params: dict, lr: float = 3e-5, betas=(0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 1e-4):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(p.value) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.value) for k, p in params.items()}

    def step(self):
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            update = (self.m[name] / b1c) / (np.sqrt(self.v[name] / b2c) + self.eps)
            p.value -= self.lr * (update + self.weight_decay * p.value)

    def state_arrays(self) -> dict:
        out = {"opt.step": np.array([float(self.t)])}
        for name in self.params:
            out[f"opt.m.{name}"] = self.m[name]
            out[f"opt.v.{name}"] = self.v[name]
        return out

    def load_state_arrays(self, arrays: dict):
        self.t = int(arrays["opt.step"][0])
        for name in self.params:
            self.m[name] = np.array(arrays[f"opt.m.{name}"], dtype=np.float64)
            self.v[name] = np.array(arrays[f"opt.v.{name}"], dtype=np.float64)


# -- training -----------------------------------------------------------


@dataclass
class TrainExample:
    """One clip: clean gesture features plus raw conditioning inputs."""

    x0: np.ndarray       # F x gesture_dim
    audio: np.ndarray    # F x d_audio
    text: np.ndarray     # F x d_text_raw
    style_id: int
    emotion_id: int


def training_step(model: GestureModel, optimizer: AdamW, batch: list,
                  schedule: DiffusionSchedule, rng: np.random.Generator,
                  huber_delta: float = 1.0) -> dict:
    """One stochastic step over a batch of clips.

    Per clip: draw t and noise, form x_t, encode + mask conditions, fuse,
    predict the clean sample, and score Huber gesture loss plus L1
    style/emotion alignment. Gradients are averaged over the batch.
    Returns the component losses.
    """
    if not batch:
        raise ShapeError("empty training batch")
    total_parts = []
    sums = {"l_g": 0.0, "l_s": 0.0, "l_e": 0.0}
    for ex in batch:
        t = int(rng.integers(schedule.steps))
        eps = rng.standard_normal(ex.x0.shape)
        x_t = q_sample(ex.x0, t, eps, schedule)
        bundle = fu.encode_conditions(model.fusion, ex.audio, ex.text,
                                      ex.style_id, ex.emotion_id, x_t, t)
        target_s, target_e = bundle.f_s, bundle.f_e
        masked_s, masked_e = fu.mask_conditions(bundle.f_s, bundle.f_e,
                                                model.fusion.config.mask_prob, rng)
        bundle.f_s, bundle.f_e = masked_s, masked_e
        out = fu.fusion_forward(model.fusion, bundle)
        x0_hat = denoiser_forward(model.denoiser, out.f_fuse)
        l_g = ad.huber_loss(x0_hat - ad.tensor(ex.x0), huber_delta)
        if out.disentangled is not None:
            l_s, l_e = fu.style_emotion_losses(out.disentangled, target_s, target_e)
        else:
            l_s = l_e = ad.tensor(0.0)
        total_parts.append(l_g + l_s + l_e)
        sums["l_g"] += float(l_g.value)
        sums["l_s"] += float(l_s.value)
        sums["l_e"] += float(l_e.value)
    n = len(batch)
    total = total_parts[0]
    for p in total_parts[1:]:
        total = total + p
    total = total / n
    if not np.isfinite(total.value):
        raise NumericalError(f"non-finite training loss: {total.value}")
    total.backward()
    optimizer.step()
    return {"l_total": float(total.value),
            "l_g": sums["l_g"] / n, "l_s": sums["l_s"] / n, "l_e": sums["l_e"] / n}
