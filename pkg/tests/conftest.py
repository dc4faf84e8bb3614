"""Shared fixtures: seeded corpora and a small trained checkpoint.

Session-scoped so the expensive artifacts (synthetic datasets, a short
training run) are built once and reused across test modules.
"""
import numpy as np
import pytest

from gesturegen import config, harness, synthetic


@pytest.fixture(scope="session")
def toy_cfg():
    return config.load_config(None, preset="toy")


@pytest.fixture(scope="session")
def toy_corpus(tmp_path_factory, toy_cfg):
    out = tmp_path_factory.mktemp("toy") / "data"
    synthetic.gen_synthetic_dataset(synthetic.SyntheticSpec.from_config(toy_cfg), out)
    return out


@pytest.fixture(scope="session")
def mini_cfg():
    """A deliberately small config for fast harness/CLI tests."""
    return config.load_config(None, preset="toy", overrides={
        "synthetic.n_clips": 6, "synthetic.frames": 60, "synthetic.joints": 4,
        "model.d": 32, "model.layers": 2, "train.steps": 8,
        "diffusion.steps": 10, "eval.extractor_steps": 30,
        "sample.max_conditions": 2,
    })


@pytest.fixture(scope="session")
def mini_corpus(tmp_path_factory, mini_cfg):
    out = tmp_path_factory.mktemp("mini") / "data"
    synthetic.gen_synthetic_dataset(synthetic.SyntheticSpec.from_config(mini_cfg), out)
    return out


@pytest.fixture(scope="session")
def mini_run(tmp_path_factory, mini_cfg, mini_corpus):
    """A short training run on the mini corpus; returns run_train's result."""
    out = tmp_path_factory.mktemp("mini") / "run"
    return harness.run_train(mini_cfg, mini_corpus, out)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
