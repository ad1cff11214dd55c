"""Generation and interactive editing on top of a trained diffusion stack.

All randomness is derived from a request's master seed, so "recording the
noise" for edits is just re-deriving the same trajectory: an edit replays
the identical initial noise and per-step noises under new guidelines.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace

import numpy as np
import torch

from .diffusion import LdmModel, guideline_tokens
from .guidelines import extract_guidelines, sample_guidelines
from .layout import (
    MAX_ELEMENTS,
    GuidelineSet,
    Layout,
    ValidationError,
    tokenize,
)
from .vae import LatentSeq, decode, encode


def derive_seed(master: int, tag: str, *parts: int) -> int:
    """Stable 63-bit stream seed for one named draw of a master seed."""
    text = f"{master}:{tag}:" + ",".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "little") & (2**63 - 1)


@dataclass(frozen=True)
class NoiseTrajectory:
    """Deterministic derivation of z_T and every per-step sampling noise."""

    master_seed: int
    n: int
    d: int
    T: int

    def initial(self) -> torch.Tensor:
        gen = torch.Generator().manual_seed(derive_seed(self.master_seed, "init", self.n, self.d))
        return torch.randn(self.n, self.d, generator=gen)

    def step_noise(self, t: int) -> torch.Tensor:
        gen = torch.Generator().manual_seed(
            derive_seed(self.master_seed, "step", t, self.n, self.d)
        )
        return torch.randn(self.n, self.d, generator=gen)


@dataclass(frozen=True)
class GenerationRequest:
    guidelines: GuidelineSet
    n: int | None = None
    w: float = 1.5
    seed: int = 0
    checkpoint_id: str | None = None

    def __post_init__(self):
        if self.n is not None and not (1 <= self.n <= MAX_ELEMENTS):
            raise ValidationError(f"n={self.n} outside [1, {MAX_ELEMENTS}]")
        if self.w < 0:
            raise ValidationError("guidance weight w must be >= 0")


def _conditioning(gs: GuidelineSet, model: LdmModel) -> tuple[torch.Tensor, torch.Tensor]:
    """Cropped conditional sequence; an empty set routes to the null token."""
    if len(gs) == 0:
        cond, mask = model.denoiser.null_condition(1)
        return cond.squeeze(0), mask.squeeze(0)
    tokens = torch.from_numpy(guideline_tokens(gs)).unsqueeze(0)
    with torch.no_grad():
        cond = model.encoder(tokens).squeeze(0)
    return cond, torch.ones(len(gs), dtype=torch.bool)


def cfg_predict(
    z_t: torch.Tensor,
    t: int,
    gs: GuidelineSet,
    w: float,
    model: LdmModel,
    cond_cache: tuple[torch.Tensor, torch.Tensor] | None = None,
) -> torch.Tensor:
    """Guided noise estimate: (1 + w) * conditional - w * unconditional."""
    if w < 0:
        raise ValidationError("guidance weight w must be >= 0")
    cond, mask = cond_cache if cond_cache is not None else _conditioning(gs, model)
    with torch.no_grad():
        eps_c = model.denoiser(
            z_t.unsqueeze(0), torch.tensor([t]), cond.unsqueeze(0), mask.unsqueeze(0)
        ).squeeze(0)
        if w == 0:
            return eps_c
        null_cond, null_mask = model.denoiser.null_condition(1)
        eps_u = model.denoiser(
            z_t.unsqueeze(0), torch.tensor([t]), null_cond, null_mask
        ).squeeze(0)
    return (1.0 + w) * eps_c - w * eps_u


def _resolve_count(req: GenerationRequest, model: LdmModel) -> int:
    if req.n is not None:
        return req.n
    rng = np.random.default_rng(derive_seed(req.seed, "count"))
    return int(rng.choice(len(model.p_n), p=model.p_n))


def _ancestral_loop(
    traj: NoiseTrajectory,
    gs: GuidelineSet,
    w: float,
    model: LdmModel,
    clamp_step=None,
) -> torch.Tensor:
    """DDPM ancestral sampling; the final step adds no noise.

    ``clamp_step(z_t, t)`` may overwrite parts of the state before each
    prediction (used by inpainting).
    """
    sched = model.schedule
    cond_cache = _conditioning(gs, model)
    z = traj.initial()
    for t in range(sched.T, 0, -1):
        if clamp_step is not None:
            z = clamp_step(z, t)
        eps_hat = cfg_predict(z, t, gs, w, model, cond_cache=cond_cache)
        coef = sched.beta(t) / math.sqrt(1.0 - sched.alpha_bar(t))
        mean = (z - coef * eps_hat) / math.sqrt(sched.alpha(t))
        if t > 1:
            z = mean + math.sqrt(sched.posterior_variance(t)) * traj.step_noise(t)
        else:
            z = mean
    return z


def sample_layout(
    req: GenerationRequest, model: LdmModel
) -> tuple[Layout, LatentSeq, NoiseTrajectory]:
    """Generate a layout from guidelines; fully determined by the request."""
    if model.schedule.std is None:
        raise ValidationError("model schedule has no latent std; checkpoint incomplete")
    n = _resolve_count(req, model)
    traj = NoiseTrajectory(req.seed, n, model.vae.latent_dim, model.schedule.T)
    z = _ancestral_loop(traj, req.guidelines, req.w, model)
    z0 = z * model.schedule.std
    latents = LatentSeq(z=z0, n_real=n, scale_applied=False)
    _, layout = decode(
        latents, model.vae, model.vocab, dataset_tag=model.dataset_tag, force_real_rows=n
    )
    return layout, latents, traj


def generate_variations(
    layout: Layout,
    subset_method: str,
    count: int,
    seeds: list[int],
    model: LdmModel,
    w: float = 1.5,
) -> list[Layout]:
    """Variations of a layout conditioned on its own (optionally subsampled)
    guidelines; the element count is fixed to the source's."""
    if count != len(seeds):
        raise ValidationError("need exactly one seed per requested variation")
    results = []
    for seed in seeds:
        if subset_method == "all":
            gs = extract_guidelines(layout)
        else:
            gs = sample_guidelines(layout, subset_method, rng_seed=derive_seed(seed, "subset"))
        req = GenerationRequest(guidelines=gs, n=len(layout), w=w, seed=seed)
        results.append(sample_layout(req, model)[0])
    return results


def edit_guidelines(
    prev_traj: NoiseTrajectory,
    prev_req: GenerationRequest,
    new_gs: GuidelineSet,
    model: LdmModel,
) -> Layout:
    """Re-run the recorded trajectory under new guidelines (same N, same noise)."""
    n = _resolve_count(prev_req, model)
    if prev_traj.n != n:
        raise ValidationError(
            f"trajectory was recorded for n={prev_traj.n} but the request resolves to n={n}"
        )
    z = _ancestral_loop(prev_traj, new_gs, prev_req.w, model)
    z0 = z * model.schedule.std
    _, layout = decode(
        LatentSeq(z0, n, False), model.vae, model.vocab,
        dataset_tag=model.dataset_tag, force_real_rows=n,
    )
    return layout


def resample_count(prev_req: GenerationRequest, new_n: int, model: LdmModel) -> Layout:
    """Same guidelines and master seed, fresh trajectory of the new length."""
    req = replace(prev_req, n=new_n)
    return sample_layout(req, model)[0]


def inpaint(
    layout: Layout,
    idx_mask: list[int],
    gs: GuidelineSet,
    seed: int,
    model: LdmModel,
    w: float = 1.5,
) -> Layout:
    """Regenerate the masked elements while clamping all others.

    The full layout is encoded and forward-diffused; sampling starts from
    that terminal state with noise swapped in at the masked indices, and at
    every later step the unmasked indices are overwritten with the step-t
    forward-diffused originals before denoising. Finally the decoded elements
    at the masked indices are spliced into the original layout.
    """
    k = len(layout)
    if k == 0:
        raise ValidationError("cannot inpaint an empty layout")
    idx = sorted(set(idx_mask))
    if idx and not (0 <= idx[0] and idx[-1] < k):
        raise ValidationError(f"mask indices {idx} outside [0, {k})")
    if not idx:
        return layout
    if model.schedule.std is None:
        raise ValidationError("model schedule has no latent std; checkpoint incomplete")

    tok = tokenize(layout, model.vocab, rows=k)
    z0 = encode(tok, model.vae, sample_posterior=False).z / model.schedule.std
    d = model.vae.latent_dim
    sched = model.schedule
    traj = NoiseTrajectory(seed, k, d, sched.T)
    mask_rows = torch.zeros(k, dtype=torch.bool)
    mask_rows[idx] = True

    def forward_state(t: int) -> torch.Tensor:
        gen = torch.Generator().manual_seed(derive_seed(seed, "fwd", t, k, d))
        eps = torch.randn(k, d, generator=gen)
        ab = sched.alpha_bar(t)
        return math.sqrt(ab) * z0 + math.sqrt(1.0 - ab) * eps

    def clamp_step(z: torch.Tensor, t: int) -> torch.Tensor:
        if t == sched.T:
            base = forward_state(t)
            base[mask_rows] = traj.initial()[mask_rows]
            return base
        z = z.clone()
        z[~mask_rows] = forward_state(t)[~mask_rows]
        return z

    z = _ancestral_loop(traj, gs, w, model, clamp_step=clamp_step)
    _, decoded = decode(
        LatentSeq(z * sched.std, k, False), model.vae, model.vocab,
        dataset_tag=model.dataset_tag, force_real_rows=k,
    )
    elements = list(layout.elements)
    for i in idx:
        elements[i] = decoded.elements[i]
    return Layout(tuple(elements), source_id=layout.source_id, dataset_tag=layout.dataset_tag)
