"""Denoiser blocks, variant factory, optimizer, and the training step."""
import numpy as np
import pytest

from gesturegen import autodiff as ad, denoiser as dn, fusion as fu
from gesturegen.diffusion import build_schedule
from gesturegen.errors import ConfigError, NumericalError, ShapeError


def small_config(**kw):
    base = dict(layers=1, d=8, gesture_dim=5, n_state=4, expand=2,
                mamba_conv_width=2, block_conv_width=2)
    base.update(kw)
    return dn.DenoiserConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigError):
        small_config(layers=0)
    with pytest.raises(ConfigError):
        small_config(use_attention=False, use_mamba=False, use_conv=False)


def test_residual_identity_with_zero_inner_weights(rng):
    cfg = small_config(use_attention=False, use_mamba=True, residual=True)
    w = dn.build_variant(cfg, seed=0)
    blk = w.blocks[0]
    for t in blk.mamba.named("m").values():
        t.value[...] = 0.0
    blk.ln2_gamma.value[...] = 1.0  # LN of zeros is zero, so y = x + 0
    x = rng.normal(0, 1, (6, 8))
    out = dn.mambattn_block(blk, ad.tensor(x), cfg)
    assert np.allclose(out.value, x, atol=1e-12)
    # without the residual the output is just LN2(0) = beta = 0
    cfg_nores = small_config(use_attention=False, use_mamba=True, residual=False)
    out2 = dn.mambattn_block(blk, ad.tensor(x), cfg_nores)
    assert np.allclose(out2.value, 0.0, atol=1e-12)


ALL_TOGGLES = [(a, m, c) for a in (True, False) for m in (True, False)
               for c in (True, False) if a or m or c]


@pytest.mark.parametrize("attn,mamba,conv", ALL_TOGGLES)
def test_every_block_variant_runs_and_differs(attn, mamba, conv, rng):
    cfg = small_config(use_attention=attn, use_mamba=mamba, use_conv=conv, layers=2)
    w = dn.build_variant(cfg, seed=1)
    x = ad.tensor(rng.normal(0, 1, (5, 8)))
    out = dn.denoiser_forward(w, x)
    assert out.value.shape == (5, 5)
    assert np.all(np.isfinite(out.value))
    # optional weights exist exactly when their stage is on
    blk = w.blocks[0]
    assert (blk.w_q is not None) == attn
    assert (blk.mamba is not None) == mamba
    assert (blk.conv_kernel is not None) == conv


def test_mambattn_block_gradient(rng):
    cfg = small_config(use_attention=True, use_mamba=True, use_conv=True)
    w = dn.build_variant(cfg, seed=2)
    for t in w.named().values():  # bump init so gradients are non-trivial
        if t.value.ndim >= 1:
            t.value[...] = np.random.default_rng(3).normal(0, 0.3, t.value.shape)
    w.blocks[0].ln1_gamma.value[...] = 1.0
    w.blocks[0].ln2_gamma.value[...] = 1.0
    x = rng.normal(0, 1, (4, 8))
    err = ad.finite_diff_check(lambda t: dn.mambattn_block(w.blocks[0], t, cfg), x)
    assert err < 1e-6


def test_build_variant_deterministic():
    cfg = small_config(layers=2)
    w1 = dn.build_variant(cfg, seed=7)
    w2 = dn.build_variant(cfg, seed=7)
    w3 = dn.build_variant(cfg, seed=8)
    for k in w1.named():
        assert np.array_equal(w1.named()[k].value, w2.named()[k].value)
    assert any(not np.array_equal(w1.named()[k].value, w3.named()[k].value)
               for k in w1.named())


def test_build_model_checks_agreement():
    fus = fu.FusionConfig(d=8, d_audio=4, d_text_raw=3, gesture_dim=5)
    with pytest.raises(ConfigError):
        dn.build_model(small_config(d=16), fus, seed=0)


# -- AdamW --------------------------------------------------------------


def test_adamw_first_step_is_signed_lr():
    # with zero weight decay the first Adam update has magnitude ~lr
    p = ad.tensor(np.array([1.0, -2.0]))
    opt = dn.AdamW({"p": p}, lr=0.1, weight_decay=0.0)
    p.grad = np.array([3.0, -4.0])
    opt.step()
    want = np.array([1.0, -2.0]) - 0.1 * np.array([1.0, -1.0]) * (1.0 / (1.0 + 1e-8 / np.sqrt(1)))
    assert np.allclose(p.value, want, atol=1e-6)


def test_adamw_decoupled_weight_decay():
    p = ad.tensor(np.array([10.0]))
    opt = dn.AdamW({"p": p}, lr=0.1, weight_decay=0.5)
    p.grad = np.array([0.0])
    opt.step()
    # zero gradient: pure decay p -= lr * wd * p
    assert p.value[0] == pytest.approx(10.0 - 0.1 * 0.5 * 10.0)


def test_adamw_state_roundtrip():
    rng = np.random.default_rng(0)
    p = ad.tensor(rng.normal(0, 1, (3, 2)))
    opt = dn.AdamW({"p": p}, lr=0.01)
    for _ in range(3):
        p.grad = rng.normal(0, 1, (3, 2))
        opt.step()
    state = {k: v.copy() for k, v in opt.state_arrays().items()}
    opt2 = dn.AdamW({"p": p}, lr=0.01)
    opt2.load_state_arrays(state)
    assert opt2.t == 3
    assert np.array_equal(opt2.m["p"], opt.m["p"])
    assert np.array_equal(opt2.v["p"], opt.v["p"])


# -- training step ------------------------------------------------------


def make_tiny_model(mode=fu.SEAD, seed=0):
    fus = fu.FusionConfig(d=8, d_audio=4, d_text_raw=3, n_styles=2, n_emotions=8,
                          gesture_dim=5, window=4, mode=mode, mask_prob=0.1)
    den = small_config(layers=1)
    return dn.build_model(den, fus, seed)


def make_batch(rng, n=2, frames=6):
    return [dn.TrainExample(x0=rng.normal(0, 1, (frames, 5)),
                            audio=rng.normal(0, 1, (frames, 4)),
                            text=rng.normal(0, 1, (frames, 3)),
                            style_id=i % 2, emotion_id=i % 8) for i in range(n)]


def test_training_step_returns_losses_and_updates(rng):
    model = make_tiny_model()
    opt = dn.AdamW(model.named_params(), lr=1e-3)
    sch = build_schedule(10, 1e-4, 0.2)
    before = {k: p.value.copy() for k, p in model.named_params().items()}
    out = dn.training_step(model, opt, make_batch(rng), sch, np.random.default_rng(1))
    assert set(out) == {"l_total", "l_g", "l_s", "l_e"}
    assert out["l_total"] == pytest.approx(out["l_g"] + out["l_s"] + out["l_e"], rel=1e-9)
    changed = [k for k, p in model.named_params().items()
               if not np.array_equal(p.value, before[k])]
    assert len(changed) > 0


def test_training_step_sa_mode_has_no_alignment_losses(rng):
    model = make_tiny_model(mode=fu.SA)
    opt = dn.AdamW(model.named_params(), lr=1e-3)
    sch = build_schedule(10, 1e-4, 0.2)
    out = dn.training_step(model, opt, make_batch(rng), sch, np.random.default_rng(1))
    assert out["l_s"] == 0.0 and out["l_e"] == 0.0


def test_training_step_rejects_empty_batch(rng):
    model = make_tiny_model()
    opt = dn.AdamW(model.named_params(), lr=1e-3)
    with pytest.raises(ShapeError):
        dn.training_step(model, opt, [], build_schedule(10), np.random.default_rng(0))


def test_training_step_raises_on_nonfinite(rng):
    model = make_tiny_model()
    model.fusion.gesture_w.value[...] = np.inf
    opt = dn.AdamW(model.named_params(), lr=1e-3)
    with pytest.raises(NumericalError):
        dn.training_step(model, opt, make_batch(rng), build_schedule(10),
                         np.random.default_rng(0))


def test_training_is_deterministic(rng):
    losses = []
    for _ in range(2):
        model = make_tiny_model(seed=5)
        opt = dn.AdamW(model.named_params(), lr=1e-3)
        sch = build_schedule(10, 1e-4, 0.2)
        r = np.random.default_rng(42)
        batch = make_batch(np.random.default_rng(7))
        losses.append([dn.training_step(model, opt, batch, sch, r)["l_total"]
                       for _ in range(3)])
    assert losses[0] == losses[1]


def test_predict_x0_shape(rng):
    model = make_tiny_model()
    x0_hat = dn.predict_x0(model, rng.normal(0, 1, (6, 4)), rng.normal(0, 1, (6, 3)),
                           0, 1, rng.normal(0, 1, (6, 5)), 3)
    assert x0_hat.shape == (6, 5)
    assert isinstance(x0_hat, np.ndarray)
