"""Model checkpoint assembly over the binary container in persist.py.

A first-stage checkpoint stores VAE weights, configs, the vocabulary hash,
and a slot for the diffusion latent std (filled once the diffusion stage has
computed it). A combined checkpoint additionally stores the denoiser, the
guideline encoder, the schedule, and the element-count table.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .config import DenoiserArch, TrainConfig, VaeArch
from .diffusion import Denoiser, DiffusionSchedule, GuidelineEncoder, LdmModel
from .layout import ClassVocabulary, load_vocabulary
from .persist import PersistError, checkpoint_digest, load_checkpoint, save_checkpoint, vocab_hash
from .vae import LayoutVae, arrays_to_state, state_to_arrays


def save_vae_checkpoint(
    path: str | Path,
    model: LayoutVae,
    vocab: ClassVocabulary,
    config: TrainConfig,
    std: float | None = None,
) -> None:
    arrays = state_to_arrays(model, "vae.")
    meta = {
        "kind": "vae",
        "vocab_hash": vocab_hash(vocab),
        "dataset_tag": vocab.dataset,
        "train_config": config.to_dict(),
        "vae_arch": model.arch.to_dict(),
        "latent_dim": model.latent_dim,
        "std": std,
    }
    save_checkpoint(path, arrays, meta)


def _check_vocab(meta: dict) -> ClassVocabulary:
    vocab = load_vocabulary(meta["dataset_tag"])
    if vocab_hash(vocab) != meta["vocab_hash"]:
        raise PersistError(
            "checkpoint vocabulary hash does not match the bundled vocabulary"
        )
    return vocab


def load_vae_checkpoint(path: str | Path) -> tuple[LayoutVae, ClassVocabulary, dict]:
    arrays, meta = load_checkpoint(path)
    if meta.get("kind") != "vae":
        raise PersistError(f"{path}: not a first-stage checkpoint")
    vocab = _check_vocab(meta)
    model = LayoutVae(
        vocab.token_width, meta["latent_dim"], VaeArch.from_dict(meta["vae_arch"])
    )
    arrays_to_state(model, arrays, "vae.")
    model.eval()
    return model, vocab, meta


def save_ldm_checkpoint(path: str | Path, model: LdmModel) -> str:
    if model.schedule.std is None:
        raise PersistError("refusing to save a combined checkpoint without latent std")
    arrays = {}
    arrays.update(state_to_arrays(model.vae, "vae."))
    arrays.update(state_to_arrays(model.denoiser, "denoiser."))
    arrays.update(state_to_arrays(model.encoder, "cond."))
    arrays["schedule.betas"] = model.schedule.betas
    arrays["meta.p_n"] = model.p_n
    meta = {
        "kind": "ldm",
        "vocab_hash": vocab_hash(model.vocab),
        "dataset_tag": model.dataset_tag,
        "train_config": model.train_config.to_dict() if model.train_config else None,
        "vae_arch": model.vae.arch.to_dict(),
        "denoiser_arch": model.denoiser.arch.to_dict(),
        "latent_dim": model.vae.latent_dim,
        "std": model.schedule.std,
        "max_trained_elements": model.max_trained_elements,
    }
    save_checkpoint(path, arrays, meta)
    digest = checkpoint_digest(path)
    model.checkpoint_id = digest[:16]
    return digest


def save_fdvg_checkpoint(path: str | Path, enc) -> None:
    from .metrics import FdVgEncoder  # local import to avoid a cycle

    assert isinstance(enc, FdVgEncoder)
    arrays = state_to_arrays(enc.vae, "vae.")
    meta = {
        "kind": "fdvg",
        "vocab_hash": vocab_hash(enc.vocab),
        "dataset_tag": enc.vocab.dataset,
        "vae_arch": enc.vae.arch.to_dict(),
        "latent_dim": enc.vae.latent_dim,
        "dim": enc.dim,
        "recon_accuracy": enc.recon_accuracy,
    }
    save_checkpoint(path, arrays, meta)


def load_fdvg_checkpoint(path: str | Path):
    from .metrics import FdVgEncoder

    arrays, meta = load_checkpoint(path)
    if meta.get("kind") != "fdvg":
        raise PersistError(f"{path}: not an FD-VG encoder checkpoint")
    vocab = _check_vocab(meta)
    model = LayoutVae(
        vocab.token_width, meta["latent_dim"], VaeArch.from_dict(meta["vae_arch"])
    )
    arrays_to_state(model, arrays, "vae.")
    model.eval()
    return FdVgEncoder(
        vae=model, vocab=vocab, dim=meta["dim"], recon_accuracy=meta["recon_accuracy"]
    )


def save_fid_extractor_checkpoint(path: str | Path, extractor) -> None:
    from .metrics import ConvFeatureExtractor

    assert isinstance(extractor, ConvFeatureExtractor)
    arrays = state_to_arrays(extractor.model, "conv.")
    meta = {"kind": "fid_extractor", "feat_dim": extractor.model.feat_dim}
    save_checkpoint(path, arrays, meta)


def load_fid_extractor_checkpoint(path: str | Path):
    from .metrics import ConvAutoencoder, ConvFeatureExtractor

    arrays, meta = load_checkpoint(path)
    if meta.get("kind") != "fid_extractor":
        raise PersistError(f"{path}: not a feature-extractor checkpoint")
    model = ConvAutoencoder(meta["feat_dim"])
    arrays_to_state(model, arrays, "conv.")
    model.eval()
    return ConvFeatureExtractor(model)


def load_ldm_checkpoint(path: str | Path) -> LdmModel:
    arrays, meta = load_checkpoint(path)
    if meta.get("kind") != "ldm":
        raise PersistError(f"{path}: not a combined checkpoint")
    vocab = _check_vocab(meta)
    vae = LayoutVae(
        vocab.token_width, meta["latent_dim"], VaeArch.from_dict(meta["vae_arch"])
    )
    arrays_to_state(vae, arrays, "vae.")
    arch = DenoiserArch.from_dict(meta["denoiser_arch"])
    denoiser = Denoiser(meta["latent_dim"], arch)
    arrays_to_state(denoiser, arrays, "denoiser.")
    encoder = GuidelineEncoder(arch)
    arrays_to_state(encoder, arrays, "cond.")
    schedule = DiffusionSchedule(arrays["schedule.betas"].astype(np.float64), std=meta["std"])
    config = TrainConfig.from_dict(meta["train_config"]) if meta.get("train_config") else None
    model = LdmModel(
        vae=vae,
        denoiser=denoiser,
        encoder=encoder,
        schedule=schedule,
        vocab=vocab,
        p_n=arrays["meta.p_n"].astype(np.float64),
        dataset_tag=meta["dataset_tag"],
        train_config=config,
        max_trained_elements=int(meta.get("max_trained_elements", 128)),
        checkpoint_id=checkpoint_digest(path)[:16],
    )
    return model.eval()
