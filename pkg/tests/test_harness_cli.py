"""Experiment harness (train/sample/eval) and the CLI surface."""
import json

import numpy as np
import pytest

from gesturegen import cli, harness, synthetic
from gesturegen.fileio import read_checkpoint


def test_run_train_outputs(mini_run, mini_cfg):
    rows = mini_run["loss_rows"]
    assert len(rows) == mini_cfg["train.steps"]
    assert all(set(r) == {"l_total", "l_g", "l_s", "l_e"} for r in rows)
    log = mini_run["loss_log"].read_text().splitlines()
    assert log[0] == "step,l_total,l_g,l_s,l_e"
    assert len(log) == mini_cfg["train.steps"] + 1
    first = log[1].split(",")
    assert first[0] == "0" and len(first) == 5
    float(first[1])  # parseable


def test_checkpoint_contains_model_and_optimizer(mini_run):
    arrays, cfg, step = read_checkpoint(mini_run["checkpoint"])
    assert step == 8
    assert "fusion.style_enc" in arrays
    assert "denoiser.proj_w" in arrays
    assert "opt.step" in arrays
    assert any(k.startswith("opt.m.") for k in arrays)
    assert cfg["model.d"] == "32"
    assert "data.gesture_dim" in cfg


def test_load_model_bit_exact_reload(mini_run):
    m1, cfg1, step1, opt1 = harness.load_model(mini_run["checkpoint"])
    m2, _, _, _ = harness.load_model(mini_run["checkpoint"])
    p1, p2 = m1.named_params(), m2.named_params()
    assert set(p1) == set(p2)
    for k in p1:
        assert np.array_equal(p1[k].value, p2[k].value), k
    assert step1 == 8


def test_resume_training_is_deterministic(mini_run, mini_cfg, mini_corpus):
    """Two resumes from the same checkpoint take identical steps."""
    from gesturegen import denoiser as dn
    from gesturegen.diffusion import build_schedule

    def resume_losses():
        model, cfg, step, opt_state = harness.load_model(mini_run["checkpoint"])
        opt = dn.AdamW(model.named_params(), lr=mini_cfg["train.lr"],
                       weight_decay=mini_cfg["train.weight_decay"])
        opt.load_state_arrays(opt_state)
        assert opt.t > 0
        ds = synthetic.load_dataset(mini_corpus)
        sch = build_schedule(mini_cfg["diffusion.steps"], mini_cfg["diffusion.beta_start"],
                             mini_cfg["diffusion.beta_end"])
        rng = np.random.default_rng(123)
        batch = [dn.TrainExample(r.x0, r.audio, r.text, r.style_id, r.emotion_id)
                 for r in ds.records[:2]]
        return [dn.training_step(model, opt, batch, sch, rng)["l_total"]
                for _ in range(3)]

    a, b = resume_losses(), resume_losses()
    assert a == b
    assert np.isfinite(a).all()


def test_run_sample_writes_parseable_bvh(tmp_path, mini_run, mini_corpus):
    written = harness.run_sample(mini_run["checkpoint"], mini_corpus, n=2, seed=4,
                                 out_dir=tmp_path / "gen", max_conditions=2)
    assert len(written) == 4  # 2 conditions x 2 samples
    names = {p.name for p in written}
    assert "clip_0000.sample00.bvh" in names and "clip_0001.sample01.bvh" in names
    from gesturegen.bvh import parse_bvh
    ds = synthetic.load_dataset(mini_corpus)
    for p in written:
        _, clip = parse_bvh(p.read_text())
        assert clip.frames == ds.frames
        assert clip.layout.joint_count == ds.layout.joint_count


def test_run_sample_deterministic(tmp_path, mini_run, mini_corpus):
    a = harness.run_sample(mini_run["checkpoint"], mini_corpus, n=1, seed=4,
                           out_dir=tmp_path / "a", max_conditions=1)
    b = harness.run_sample(mini_run["checkpoint"], mini_corpus, n=1, seed=4,
                           out_dir=tmp_path / "b", max_conditions=1)
    c = harness.run_sample(mini_run["checkpoint"], mini_corpus, n=1, seed=5,
                           out_dir=tmp_path / "c", max_conditions=1)
    assert a[0].read_bytes() == b[0].read_bytes()
    assert a[0].read_bytes() != c[0].read_bytes()


def test_run_eval_fixed_point(tmp_path, mini_cfg, mini_corpus):
    """Evaluating the reference against itself: fgd ~ 0, srgr = 1,
    beat_align = 1 (onsets are the clips' own detected beats)."""
    report = harness.run_eval(mini_corpus, mini_corpus, mini_cfg, out_dir=tmp_path / "e")
    assert report["fgd"] < 1e-6
    assert report["srgr"] == 1.0
    assert report["beat_align"] == pytest.approx(1.0, abs=1e-9)
    assert report["l1div"] > 0
    assert report["n_gen"] == report["n_ref"] == 6
    saved = json.loads((tmp_path / "e" / "report.json").read_text())
    assert saved["fgd"] == report["fgd"]
    assert (tmp_path / "e" / "report.txt").is_file()


def test_eval_uses_cached_extractor(mini_corpus, mini_cfg):
    assert (mini_corpus / "fgd_extractor.ckpt").is_file()
    ext1, _ = harness.get_extractor(mini_corpus, mini_cfg)
    ext2, _ = harness.get_extractor(mini_corpus, mini_cfg)
    assert np.array_equal(ext1.enc_w1.value, ext2.enc_w1.value)


def test_ablation_variant_lists():
    names = [n for n, _ in harness.ablation_variants()]
    assert len(names) == 16
    assert names.count("layers-12") == 1
    assert {"full-block", "with-conv", "no-attn", "no-mamba", "conv-no-attn",
            "conv-no-mamba", "conv-only"} <= set(names)
    assert {"fusion-SA", "fusion-SEA", "fusion-SEAD-basic", "fusion-SEAD"} <= set(names)


# -- CLI ----------------------------------------------------------------


def _write_cfg(path, mini_corpus, extra=""):
    path.write_text(
        "synthetic.n_clips = 4\nsynthetic.frames = 40\nsynthetic.joints = 3\n"
        "model.d = 32\nmodel.layers = 1\ntrain.steps = 2\ndiffusion.steps = 5\n"
        "eval.extractor_steps = 10\nsample.max_conditions = 2\n"
        f"data.dir = {mini_corpus}\n" + extra)
    return path


def test_cli_gen_train_sample_eval(tmp_path, mini_corpus):
    cfg = _write_cfg(tmp_path / "base.cfg", mini_corpus)
    assert cli.main(["gen-synthetic", "--config", str(cfg), "--out",
                     str(tmp_path / "data"), "--seed", "2"]) == 0
    assert (tmp_path / "data" / "clip_0003.bvh").is_file()

    assert cli.main(["train", "--config", str(cfg), "--out", str(tmp_path / "run")]) == 0
    ckpt = tmp_path / "run" / "model.ckpt"
    assert ckpt.is_file()

    cfg_sample = _write_cfg(tmp_path / "sample.cfg", mini_corpus,
                            extra=f"data.checkpoint = {ckpt}\n")
    assert cli.main(["sample", "--config", str(cfg_sample),
                     "--out", str(tmp_path / "gen")]) == 0
    assert len(list((tmp_path / "gen").glob("*.bvh"))) == 2

    cfg_eval = _write_cfg(tmp_path / "eval.cfg", mini_corpus,
                          extra=f"data.gen_dir = {tmp_path / 'gen'}\n")
    assert cli.main(["eval", "--config", str(cfg_eval), "--out", str(tmp_path / "rep")]) == 0
    assert (tmp_path / "rep" / "report.json").is_file()


def test_cli_exit_codes(tmp_path, mini_corpus, capsys):
    # 2: configuration problems
    assert cli.main(["train", "--config", "/nonexistent.cfg",
                     "--out", str(tmp_path / "o")]) == 2
    assert cli.main(["train", "--out", str(tmp_path / "o")]) == 2  # data.dir unset
    bad = tmp_path / "bad.cfg"
    bad.write_text("train.stepz = 1\n")
    assert cli.main(["gen-synthetic", "--config", str(bad),
                     "--out", str(tmp_path / "o")]) == 2

    # 3: data problems (empty corpus dir)
    empty = tmp_path / "empty"
    empty.mkdir()
    cfg = tmp_path / "c.cfg"
    cfg.write_text(f"data.dir = {empty}\ntrain.steps = 1\n")
    assert cli.main(["train", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    capsys.readouterr()


def test_cli_exit_code_numerical(tmp_path, mini_corpus, capsys):
    # 4: numerical failure (absurd learning rate blows up the loss)
    cfg = tmp_path / "c.cfg"
    cfg.write_text(f"data.dir = {mini_corpus}\nmodel.d = 32\nmodel.layers = 1\n"
                   "train.steps = 30\ntrain.lr = 1e6\ndiffusion.steps = 5\n")
    assert cli.main(["train", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 4
    capsys.readouterr()


def test_cli_rejects_unknown_subcommand():
    with pytest.raises(SystemExit):
        cli.main(["frobnicate", "--out", "x"])
