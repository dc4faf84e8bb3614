"""Experiment drivers: training runs with loss logs and checkpoints,
sampling back to BVH, corpus evaluation, and the ablation matrix."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from . import denoiser as dn
from . import fusion as fu
from . import metrics as mt
from .bvh import clip_to_euler, clip_to_rotmat, features_to_clip, parse_bvh, write_bvh
from .diffusion import build_schedule, sample_loop
from .errors import ConfigError, DataError, NumericalError
from .fileio import (read_checkpoint, read_float_lines, write_checkpoint, write_report)
from .synthetic import Dataset, load_dataset

LOSS_HEADER = ["step", "l_total", "l_g", "l_s", "l_e"]


def _model_configs(cfg: dict, dataset: Dataset):
    d_audio = int(dataset.meta.get("d_audio", dataset.records[0].audio.shape[1]))
    d_text = int(dataset.meta.get("d_text", dataset.records[0].text.shape[1]))
    n_styles = int(dataset.meta.get("n_styles", max(r.style_id for r in dataset.records) + 1))
    n_emotions = int(dataset.meta.get("n_emotions", 8))
    fus = fu.FusionConfig(
        d=cfg["model.d"], d_audio=d_audio, d_text_raw=d_text,
        n_styles=n_styles, n_emotions=n_emotions,
        gesture_dim=dataset.gesture_dim, window=cfg["model.window"],
        mode=cfg["model.mode"], mask_prob=cfg["model.mask_prob"])
    den = dn.DenoiserConfig(
        layers=cfg["model.layers"], use_attention=cfg["model.use_attention"],
        use_mamba=cfg["model.use_mamba"], use_conv=cfg["model.use_conv"],
        residual=cfg["model.residual"], d=cfg["model.d"],
        gesture_dim=dataset.gesture_dim, n_state=cfg["model.n_state"],
        expand=cfg["model.expand"])
    return den, fus


def _checkpoint_config(cfg: dict, dataset: Dataset) -> dict:
    keep = [k for k in cfg if k.split(".")[0] in ("model", "diffusion", "train", "seed")]
    out = {k: cfg[k] for k in keep}
    out["data.gesture_dim"] = dataset.gesture_dim
    out["data.frames"] = dataset.frames
    out["data.fps"] = dataset.fps
    return out


def run_train(cfg: dict, dataset_dir, out_dir) -> dict:
    """Train for cfg['train.steps'] steps; write checkpoint + loss CSV.

    Returns {'loss_rows': [...], 'checkpoint': path, 'loss_log': path}.
    On a non-finite loss the last good checkpoint is kept and the error
    re-raised.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset = load_dataset(dataset_dir)
    den_cfg, fus_cfg = _model_configs(cfg, dataset)
    model = dn.build_model(den_cfg, fus_cfg, cfg["seed"])
    schedule = build_schedule(cfg["diffusion.steps"], cfg["diffusion.beta_start"],
                              cfg["diffusion.beta_end"])
    opt = dn.AdamW(model.named_params(), lr=cfg["train.lr"],
                   weight_decay=cfg["train.weight_decay"])
    rng = np.random.default_rng(cfg["seed"])
    ckpt_path = out / "model.ckpt"
    log_path = out / "loss.csv"

    def save(step):
        arrays = {k: p.value for k, p in model.named_params().items()}
        arrays.update(opt.state_arrays())
        write_checkpoint(ckpt_path, arrays, _checkpoint_config(cfg, dataset), step)

    rows = []
    with open(log_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(LOSS_HEADER)
        for step in range(cfg["train.steps"]):
            batch_idx = rng.choice(len(dataset.records), size=min(cfg["train.batch"], len(dataset.records)),
                                   replace=False)
            batch = [dn.TrainExample(r.x0, r.audio, r.text, r.style_id, r.emotion_id)
                     for r in (dataset.records[i] for i in batch_idx)]
            try:
                losses = dn.training_step(model, opt, batch, schedule, rng,
                                          huber_delta=cfg["train.huber_delta"])
            except NumericalError:
                if rows:
                    save(step)
                raise
            row = [step, losses["l_total"], losses["l_g"], losses["l_s"], losses["l_e"]]
            writer.writerow([row[0]] + [f"{v:.10f}" for v in row[1:]])
            rows.append(losses)
    save(cfg["train.steps"])
    return {"loss_rows": rows, "checkpoint": ckpt_path, "loss_log": log_path}


def load_model(checkpoint_path):
    """Rebuild a model (and its configs) from an MGCKPT1 file."""
    arrays, raw_cfg, step = read_checkpoint(checkpoint_path)
    from .config import DEFAULTS, _coerce

    cfg = {}
    for k, v in raw_cfg.items():
        cfg[k] = _coerce(k, v) if k in DEFAULTS else v
    gesture_dim = int(raw_cfg["data.gesture_dim"])
    fus = fu.FusionConfig(
        d=cfg["model.d"],
        d_audio=int(arrays["fusion.dis_w_s"].shape[0]),
        d_text_raw=int(arrays["fusion.text_w"].shape[0]),
        n_styles=int(arrays["fusion.style_enc"].shape[0]),
        n_emotions=int(arrays["fusion.emotion_enc"].shape[0]),
        gesture_dim=gesture_dim, window=cfg["model.window"],
        mode=cfg["model.mode"], mask_prob=cfg["model.mask_prob"])
    den = dn.DenoiserConfig(
        layers=cfg["model.layers"], use_attention=cfg["model.use_attention"],
        use_mamba=cfg["model.use_mamba"], use_conv=cfg["model.use_conv"],
        residual=cfg["model.residual"], d=cfg["model.d"], gesture_dim=gesture_dim,
        n_state=cfg["model.n_state"], expand=cfg["model.expand"])
    model = dn.build_model(den, fus, int(cfg.get("seed", 0)))
    params = model.named_params()
    missing = set(params) - set(arrays)
    if missing:
        raise DataError(f"checkpoint is missing parameters: {sorted(missing)[:5]} ...")
    for name, p in params.items():
        p.value = np.array(arrays[name], dtype=np.float64)
    opt_state = {k: v for k, v in arrays.items() if k.startswith("opt.")}
    return model, cfg, step, opt_state


def run_sample(checkpoint_path, conditions_dir, n: int, seed: int, out_dir,
               max_conditions: int | None = None) -> list:
    """Draw n gesture samples per condition clip and emit them as BVH."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model, cfg, _, _ = load_model(checkpoint_path)
    dataset = load_dataset(conditions_dir)
    if dataset.gesture_dim != model.denoiser.config.gesture_dim:
        raise ConfigError(f"conditions gesture dim {dataset.gesture_dim} does not match "
                          f"checkpoint {model.denoiser.config.gesture_dim}")
    schedule = build_schedule(cfg["diffusion.steps"], cfg["diffusion.beta_start"],
                              cfg["diffusion.beta_end"])
    records = dataset.records[:max_conditions] if max_conditions else dataset.records
    written = []
    for ci, rec in enumerate(records):
        def denoise(x_t, t, _cond, rec=rec):
            return dn.predict_x0(model, rec.audio, rec.text, rec.style_id,
                                 rec.emotion_id, x_t, t)

        for k in range(n):
            feats = sample_loop(denoise, None, rec.x0.shape, schedule,
                                seed=seed * 1_000_003 + ci * 1_000 + k)
            clip = features_to_clip(feats, dataset.fps, dataset.layout, orthonormalize=True)
            euler = clip_to_euler(clip)
            path = out / f"{rec.name}.sample{k:02d}.bvh"
            path.write_text(write_bvh(dataset.skeleton, euler))
            written.append(path)
    return written


def _load_gen_corpus(directory):
    directory = Path(directory)
    files = sorted(directory.glob("*.bvh"))
    if not files:
        raise DataError(f"no BVH clips in {directory}")
    return [(p.stem, parse_bvh(p.read_text())[1]) for p in files]


def get_extractor(ref_dataset_dir, cfg: dict, cache_dir=None):
    """Train (or load a cached) reconstruction feature extractor on the
    reference corpus."""
    ref = load_dataset(ref_dataset_dir)
    cache = Path(cache_dir or ref_dataset_dir) / "fgd_extractor.ckpt"
    clips = [r.clip for r in ref.records]
    if cache.is_file():
        arrays, meta, _ = read_checkpoint(cache)
        ext, _ = mt.train_fgd_extractor(clips[:2], seed=int(meta["seed"]), steps=0,
                                        hidden=int(meta["hidden"]))
        for k, p in ext.named().items():
            p.value = np.array(arrays[k], dtype=np.float64)
        ext.steps = int(meta["steps"])
        return ext, ref
    ext, _ = mt.train_fgd_extractor(clips, seed=cfg["seed"],
                                    steps=cfg["eval.extractor_steps"],
                                    hidden=cfg["eval.extractor_hidden"])
    write_checkpoint(cache, {k: p.value for k, p in ext.named().items()},
                     {"seed": cfg["seed"], "steps": cfg["eval.extractor_steps"],
                      "hidden": cfg["eval.extractor_hidden"]}, cfg["eval.extractor_steps"])
    return ext, ref


def run_eval(gen_dir, ref_dir, cfg: dict, out_dir=None) -> dict:
    """Full metric suite for a generated corpus against a reference corpus."""
    ext, ref = get_extractor(ref_dir, cfg)
    gen = _load_gen_corpus(gen_dir)
    gen_clips = [c for _, c in gen]
    ref_clips = [r.clip for r in ref.records]

    ref_feats = ext.features(ref_clips)
    gen_feats = ext.features(gen_clips)
    report = {
        "fgd": mt.frechet_distance(ref_feats, gen_feats),
        "diversity": mt.diversity_score(gen_feats, n=cfg["eval.n_diversity"], seed=cfg["seed"]),
        "l1div": mt.l1_diversity(gen_clips),
        "n_gen": len(gen_clips),
        "n_ref": len(ref_clips),
        "seed": cfg["seed"],
    }

    # pair generated clips with reference conditions by prefix, falling
    # back to index order
    by_name = {r.name: r for r in ref.records}
    aligns, srgrs = [], []
    for i, (name, clip) in enumerate(gen):
        rec = by_name.get(name.split(".")[0], ref.records[i % len(ref.records)])
        onsets = rec.onsets
        if onsets.size == 0:
            onsets = read_float_lines(Path(ref_dir) / f"{rec.name}.onsets")
        aligns.append(mt.beat_align(onsets, mt.detect_gesture_beats(clip),
                                    sigma=cfg["eval.sigma"]))
        if clip.rotations.shape == rec.clip.rotations.shape:
            # threshold lives in rotation-matrix element space
            srgrs.append(mt.srgr(clip_to_rotmat(clip), clip_to_rotmat(rec.clip),
                                 threshold=cfg["eval.threshold"]))
    report["beat_align"] = float(np.mean(aligns))
    report["srgr"] = float(np.mean(srgrs)) if srgrs else ""

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_report(out / "report.txt", out / "report.json",
                     {k: report[k] for k in sorted(report)})
    return report


# -- ablation matrix ----------------------------------------------------

LAYER_VARIANTS = [("layers-1", {"model.layers": 1}),
                  ("layers-2", {"model.layers": 2}),
                  ("layers-4", {"model.layers": 4}),
                  ("layers-8", {"model.layers": 8}),
                  ("layers-12", {"model.layers": 12})]

BLOCK_VARIANTS = [
    ("full-block", {}),
    ("with-conv", {"model.use_conv": True}),
    ("no-attn", {"model.use_attention": False}),
    ("no-mamba", {"model.use_mamba": False}),
    ("conv-no-attn", {"model.use_conv": True, "model.use_attention": False}),
    ("conv-no-mamba", {"model.use_conv": True, "model.use_mamba": False}),
    ("conv-only", {"model.use_conv": True, "model.use_attention": False,
                   "model.use_mamba": False}),
]

FUSION_VARIANTS = [("fusion-SA", {"model.mode": "SA"}),
                   ("fusion-SEA", {"model.mode": "SEA"}),
                   ("fusion-SEAD-basic", {"model.mode": "SEAD_BASIC"}),
                   ("fusion-SEAD", {"model.mode": "SEAD"})]

METRIC_COLUMNS = ["fgd", "diversity", "l1div", "srgr", "beat_align"]


def ablation_variants():
    return LAYER_VARIANTS + BLOCK_VARIANTS + FUSION_VARIANTS


def run_ablation(cfg: dict, dataset_dir, out_dir) -> list:
    """Train + sample + evaluate every ablation variant on one corpus.

    Per-row failures are recorded and the run continues. Returns the list
    of row dicts and writes a fixed-width table plus per-row reports.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for name, patch in ablation_variants():
        row = {"name": name}
        variant_cfg = dict(cfg)
        variant_cfg.update(patch)
        vdir = out / name
        try:
            run_train(variant_cfg, dataset_dir, vdir)
            run_sample(vdir / "model.ckpt", dataset_dir, n=cfg["sample.n"],
                       seed=cfg["seed"], out_dir=vdir / "samples",
                       max_conditions=cfg["sample.max_conditions"])
            report = run_eval(vdir / "samples", dataset_dir, variant_cfg, out_dir=vdir)
            for col in METRIC_COLUMNS:
                row[col] = report[col]
        except Exception as e:  # record and continue with the next variant
            row["error"] = f"{type(e).__name__}: {e}"
        rows.append(row)

    lines = [_table_row(["name"] + METRIC_COLUMNS)]
    for row in rows:
        if "error" in row:
            lines.append(_table_row([row["name"], "FAILED: " + row["error"]]))
        else:
            lines.append(_table_row([row["name"]] + [_fmt_metric(row[c]) for c in METRIC_COLUMNS]))
    (out / "ablation.txt").write_text("\n".join(lines) + "\n")
    return rows


def _fmt_metric(v):
    return f"{v:.4f}" if isinstance(v, float) else str(v)


def _table_row(cells):
    return "  ".join(f"{c:<18}" for c in cells).rstrip()
