import numpy as np
import pytest
import torch

torch.set_num_threads(1)

from playout.config import DenoiserArch, TrainConfig, VaeArch
from playout.diffusion import build_schedule, train_ldm
from playout.layout import load_vocabulary
from playout.synthetic import generate_synthetic_dataset
from playout.vae import train_vae


@pytest.fixture(scope="session")
def vocab():
    return load_vocabulary("synthetic")


@pytest.fixture(scope="session")
def corpus():
    return generate_synthetic_dataset(120, max_elements=8, seed=100)


@pytest.fixture(scope="session")
def tiny_vae(vocab, corpus):
    """A fast, weak VAE: enough for contract tests, not for quality."""
    config = TrainConfig(total_steps=150, batch_size=16, warmup_steps=20, seed=0)
    model, _ = train_vae(corpus, vocab, config, VaeArch(width=32, layers=1, heads=4))
    return model


@pytest.fixture(scope="session")
def tiny_ldm(vocab, corpus, tiny_vae):
    config = TrainConfig(
        total_steps=150, batch_size=16, warmup_steps=20, seed=0, diffusion_steps=25
    )
    arch = DenoiserArch(
        width=32, layers=2, heads=4, cond_width=32, cond_layers=1, time_features=16
    )
    with pytest.warns(UserWarning):
        schedule = build_schedule(25)
    model, _ = train_ldm(corpus, tiny_vae, vocab, config, arch, schedule=schedule)
    model.checkpoint_id = "tiny-test"
    return model
