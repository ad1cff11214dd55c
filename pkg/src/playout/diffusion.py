"""Latent DDPM: noise schedule, guideline encoder, and the denoiser.

The denoiser is a transformer encoder over latent element tokens. Unlike the
first stage it does use positional embeddings, since latents carry no
explicit coordinates. The time step enters through feature-wise linear
modulation (a per-layer scale/shift derived from a sinusoidal embedding) and
guidelines enter through cross-attention onto a separately encoded sequence.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .config import DenoiserArch, TrainConfig, VaeArch
from .guidelines import sample_guidelines
from .layout import (
    GRID_HEIGHT,
    MAX_ELEMENTS,
    MAX_GUIDELINES,
    ClassVocabulary,
    GuidelineSet,
    Layout,
    ValidationError,
    element_count_distribution,
    tokenize,
)
from .vae import Block, LatentSeq, LayoutVae, NumericalError, lr_lambda, reparameterize

#: guideline token: axis one-hot (h, v) followed by a 65-wide position one-hot
GUIDELINE_TOKEN_WIDTH = 2 + (GRID_HEIGHT + 1)

DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.05


@dataclass(frozen=True)
class DiffusionSchedule:
    """Per-step noise variances and their cumulative products, 1-indexed by t."""

    betas: np.ndarray  # (T,) float64
    std: float | None = None

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        object.__setattr__(self, "betas", betas)
        if betas.ndim != 1 or len(betas) < 2:
            raise ValidationError("schedule needs at least two steps")
        if not (np.all(betas > 0) and np.all(betas < 1)):
            raise ValidationError("betas must lie strictly inside (0, 1)")
        if not np.all(np.diff(betas) > 0):
            raise ValidationError("betas must be strictly increasing")
        if self.std is not None and self.std <= 0:
            raise ValidationError("std must be positive")
        betas.setflags(write=False)

    @property
    def T(self) -> int:
        return len(self.betas)

    @property
    def alphas(self) -> np.ndarray:
        return 1.0 - self.betas

    @property
    def alpha_bars(self) -> np.ndarray:
        return np.cumprod(self.alphas)

    def beta(self, t: int) -> float:
        return float(self.betas[t - 1])

    def alpha(self, t: int) -> float:
        return 1.0 - self.beta(t)

    def alpha_bar(self, t: int) -> float:
        return float(self.alpha_bars[t - 1])

    def posterior_variance(self, t: int) -> float:
        """Variance of q(z_{t-1} | z_t, z_0); zero at t=1."""
        prev = self.alpha_bar(t - 1) if t > 1 else 1.0
        return (1.0 - prev) / (1.0 - self.alpha_bar(t)) * self.beta(t)

    def with_std(self, std: float) -> "DiffusionSchedule":
        return replace(self, std=std)


def build_schedule(
    T: int = 200,
    kind: str = "linear",
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
) -> DiffusionSchedule:
    """Linear beta schedule; warns when the terminal signal level stays high.

    The default endpoints are chosen so that alpha_bar at T=200 drops below
    0.01, i.e. the terminal step is close to pure noise.
    """
    if T < 2:
        raise ValidationError("T must be >= 2")
    if kind != "linear":
        raise ValidationError(f"unknown schedule kind {kind!r}")
    schedule = DiffusionSchedule(np.linspace(beta_start, beta_end, T))
    terminal = schedule.alpha_bar(T)
    if terminal >= 0.01:
        warnings.warn(
            f"alpha_bar at T={T} is {terminal:.4f} (>= 0.01); "
            "sampling will start from a poorly matched noise level",
            stacklevel=2,
        )
    return schedule


def compute_latent_std(first_batch_latents: list[LatentSeq]) -> float:
    """Population standard deviation over all coordinates of non-PAD latents."""
    if not first_batch_latents:
        raise ValidationError("empty latent batch")
    values = np.concatenate(
        [lat.z[: lat.n_real].detach().cpu().numpy().astype(np.float64).ravel()
         for lat in first_batch_latents]
    )
    if values.size == 0:
        raise ValidationError("latent batch contains no real elements")
    std = float(values.std(ddof=0))
    if std < 1e-12:
        raise ValidationError("latent batch has zero variance")
    return std


def forward_diffuse(
    z0: LatentSeq | torch.Tensor,
    t: int | torch.Tensor,
    eps: torch.Tensor,
    schedule: DiffusionSchedule,
) -> torch.Tensor:
    """Closed-form forward marginal: sqrt(ab_t) z0 + sqrt(1 - ab_t) eps."""
    if isinstance(z0, LatentSeq):
        if not z0.scale_applied:
            raise ValidationError("forward_diffuse expects std-scaled latents")
        z = z0.z
    else:
        z = z0
    if z.shape != eps.shape:
        raise ValidationError(f"noise shape {tuple(eps.shape)} != latent shape {tuple(z.shape)}")
    if isinstance(t, torch.Tensor):
        if int(t.min()) < 1 or int(t.max()) > schedule.T:
            raise ValidationError("t outside [1, T]")
        ab = torch.from_numpy(schedule.alpha_bars).to(z.dtype)[t - 1]
        ab = ab.view(-1, *([1] * (z.ndim - 1)))
    else:
        if not (1 <= t <= schedule.T):
            raise ValidationError(f"t={t} outside [1, {schedule.T}]")
        ab = torch.tensor(schedule.alpha_bar(t), dtype=z.dtype)
    return torch.sqrt(ab) * z + torch.sqrt(1.0 - ab) * eps


# ---------------------------------------------------------------------------
# guideline encoder


def guideline_tokens(gs: GuidelineSet) -> np.ndarray:
    """(k, 67) one-hot tokens in the set's canonical order."""
    out = np.zeros((len(gs), GUIDELINE_TOKEN_WIDTH), dtype=np.float32)
    for i, g in enumerate(gs):
        out[i, 0 if g.axis == "h" else 1] = 1.0
        out[i, 2 + g.position] = 1.0
    return out


class GuidelineEncoder(nn.Module):
    """Permutation-equivariant transformer over guideline tokens (no positions)."""

    def __init__(self, arch: DenoiserArch = DenoiserArch()):
        super().__init__()
        self.width = arch.cond_width
        self.embed = nn.Linear(GUIDELINE_TOKEN_WIDTH, self.width)
        self.blocks = nn.ModuleList(
            Block(self.width, arch.heads, arch.ffn_mult) for _ in range(arch.cond_layers)
        )
        self.norm = nn.LayerNorm(self.width)

    def forward(self, tokens: torch.Tensor, key_padding_mask: torch.Tensor | None = None) -> torch.Tensor:
        h = self.embed(tokens)
        for block in self.blocks:
            x = block.norm1(h)
            h = h + block.attn(x, x, x, need_weights=False, key_padding_mask=key_padding_mask)[0]
            h = h + block.ffn(block.norm2(h))
        return self.norm(h)


def encode_guidelines(
    gs: GuidelineSet, encoder: GuidelineEncoder
) -> tuple[torch.Tensor, torch.Tensor]:
    """Encode a guideline set to a fixed-length conditioning sequence.

    Returns (cond, mask) with cond of shape (128, cond_width); mask is True
    on real positions. The empty set yields an all-masked sequence, which is
    not the learned null token: null conditioning is an explicit substitution.
    """
    k = len(gs)
    cond = torch.zeros(MAX_GUIDELINES, encoder.width)
    mask = torch.zeros(MAX_GUIDELINES, dtype=torch.bool)
    if k > 0:
        tokens = torch.from_numpy(guideline_tokens(gs)).unsqueeze(0)
        with torch.no_grad():
            cond[:k] = encoder(tokens).squeeze(0)
        mask[:k] = True
    return cond, mask


# ---------------------------------------------------------------------------
# denoiser


def time_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    """Sinusoidal features of the (integer) diffusion step."""
    half = dim // 2
    freqs = torch.exp(torch.arange(half, dtype=torch.float32) * (-math.log(10000.0) / (half - 1)))
    angles = t.to(torch.float32)[:, None] * freqs[None, :]
    return torch.cat([torch.sin(angles), torch.cos(angles)], dim=-1)


class CrossAttention(nn.Module):
    """Multi-head attention onto the conditioning sequence.

    Queries whose mask admits no key (the empty-condition case) contribute
    zero instead of NaN.
    """

    def __init__(self, width: int, heads: int, cond_width: int):
        super().__init__()
        if width % heads:
            raise ValidationError("width must be divisible by heads")
        self.heads = heads
        self.head_dim = width // heads
        self.q = nn.Linear(width, width)
        self.k = nn.Linear(cond_width, width)
        self.v = nn.Linear(cond_width, width)
        self.out = nn.Linear(width, width)

    def forward(self, x: torch.Tensor, cond: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        B, L, _ = x.shape
        M = cond.shape[1]
        q = self.q(x).view(B, L, self.heads, self.head_dim).transpose(1, 2)
        k = self.k(cond).view(B, M, self.heads, self.head_dim).transpose(1, 2)
        v = self.v(cond).view(B, M, self.heads, self.head_dim).transpose(1, 2)
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.head_dim)
        scores = scores.masked_fill(~mask[:, None, None, :], float("-inf"))
        attn = torch.nan_to_num(F.softmax(scores, dim=-1), nan=0.0)
        h = (attn @ v).transpose(1, 2).reshape(B, L, -1)
        return self.out(h)


class DenoiserLayer(nn.Module):
    def __init__(self, width: int, heads: int, ffn_mult: int, cond_width: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(width)
        self.self_attn = nn.MultiheadAttention(width, heads, batch_first=True)
        self.norm_cross = nn.LayerNorm(width)
        self.cross = CrossAttention(width, heads, cond_width)
        self.norm2 = nn.LayerNorm(width)
        self.ffn = nn.Sequential(
            nn.Linear(width, ffn_mult * width),
            nn.GELU(),
            nn.Linear(ffn_mult * width, width),
        )

    def forward(
        self,
        x: torch.Tensor,
        cond: torch.Tensor,
        cond_mask: torch.Tensor,
        scale: torch.Tensor,
        shift: torch.Tensor,
    ) -> torch.Tensor:
        x = scale * x + shift
        h = self.norm1(x)
        x = x + self.self_attn(h, h, h, need_weights=False)[0]
        x = x + self.cross(self.norm_cross(x), cond, cond_mask)
        return x + self.ffn(self.norm2(x))


class Denoiser(nn.Module):
    """Noise predictor over latent element tokens with positional embeddings."""

    def __init__(self, latent_dim: int = 8, arch: DenoiserArch = DenoiserArch()):
        super().__init__()
        self.latent_dim = latent_dim
        self.arch = arch
        w = arch.width
        self.in_proj = nn.Linear(latent_dim, w)
        self.pos_emb = nn.Parameter(torch.randn(MAX_ELEMENTS, w) * 0.02)
        self.layers = nn.ModuleList(
            DenoiserLayer(w, arch.heads, arch.ffn_mult, arch.cond_width)
            for _ in range(arch.layers)
        )
        self.film = nn.ModuleList(
            nn.Sequential(
                nn.Linear(arch.time_features, arch.time_features),
                nn.SiLU(),
                nn.Linear(arch.time_features, 2 * w),
            )
            for _ in range(arch.layers)
        )
        for net in self.film:
            nn.init.zeros_(net[-1].weight)
            nn.init.zeros_(net[-1].bias)
        self.out_norm = nn.LayerNorm(w)
        self.out = nn.Linear(w, latent_dim)
        self.null_cond = nn.Parameter(torch.randn(1, arch.cond_width) * 0.02)

    def null_condition(self, batch: int = 1) -> tuple[torch.Tensor, torch.Tensor]:
        """The learned single-token null sequence and its all-valid mask."""
        cond = self.null_cond.unsqueeze(0).expand(batch, -1, -1)
        mask = torch.ones(batch, 1, dtype=torch.bool)
        return cond, mask

    def forward(
        self,
        z_t: torch.Tensor,
        t: torch.Tensor,
        cond: torch.Tensor,
        cond_mask: torch.Tensor,
        film_override: tuple[torch.Tensor, torch.Tensor] | None = None,
    ) -> torch.Tensor:
        B, L, _ = z_t.shape
        if L > MAX_ELEMENTS:
            raise ValidationError(f"sequence length {L} exceeds {MAX_ELEMENTS}")
        tf = time_embedding(t, self.arch.time_features)
        h = self.in_proj(z_t) + self.pos_emb[:L]
        for layer, film in zip(self.layers, self.film):
            if film_override is not None:
                scale, shift = film_override
            else:
                delta, shift = film(tf).chunk(2, dim=-1)
                scale, shift = (1.0 + delta)[:, None, :], shift[:, None, :]
            h = layer(h, cond, cond_mask, scale, shift)
        out = self.out(self.out_norm(h))
        if not torch.isfinite(out).all():
            raise NumericalError("non-finite denoiser output")
        return out


def denoise_step_predict(
    z_t: torch.Tensor,
    t: int,
    cond: torch.Tensor,
    cond_mask: torch.Tensor,
    model: Denoiser,
) -> torch.Tensor:
    """Predicted noise for one unbatched latent sequence (n, d)."""
    if not (1 <= t <= 10**9):
        raise ValidationError("t must be a positive step index")
    with torch.no_grad():
        out = model(
            z_t.unsqueeze(0),
            torch.tensor([t]),
            cond.unsqueeze(0),
            cond_mask.unsqueeze(0),
        )
    return out.squeeze(0)


# ---------------------------------------------------------------------------
# loss and training


def ldm_loss(
    z0: LatentSeq,
    gs: GuidelineSet,
    t: int,
    seed: int,
    denoiser: Denoiser,
    encoder: GuidelineEncoder,
    schedule: DiffusionSchedule,
    p_drop: float = 0.1,
) -> torch.Tensor:
    """Single-example noise-prediction loss (differentiable scalar).

    Draws seeded noise, forward-diffuses to step t, substitutes the learned
    null condition with probability p_drop, and returns the mean squared
    error over non-PAD positions.
    """
    if not (1 <= t <= schedule.T):
        raise ValidationError(f"t={t} outside [1, {schedule.T}]")
    gen = torch.Generator().manual_seed(seed)
    eps = torch.randn(z0.z.shape, generator=gen)
    z_t = forward_diffuse(z0, t, eps, schedule)
    drop = torch.rand((), generator=gen).item() < p_drop
    if drop:
        cond, mask = denoiser.null_condition(1)
        cond, mask = cond.squeeze(0), mask.squeeze(0)
    else:
        k = len(gs)
        cond = torch.zeros(max(k, 1), encoder.width)
        mask = torch.zeros(max(k, 1), dtype=torch.bool)
        if k > 0:
            cond = encoder(torch.from_numpy(guideline_tokens(gs)).unsqueeze(0)).squeeze(0)
            mask = torch.ones(k, dtype=torch.bool)
    pred = denoiser(
        z_t.unsqueeze(0), torch.tensor([t]), cond.unsqueeze(0), mask.unsqueeze(0)
    ).squeeze(0)
    n = z0.n_real
    return ((pred[:n] - eps[:n]) ** 2).mean()


@dataclass
class LdmModel:
    """A complete generation stack: first stage, denoiser, conditioning, schedule."""

    vae: LayoutVae
    denoiser: Denoiser
    encoder: GuidelineEncoder
    schedule: DiffusionSchedule
    vocab: ClassVocabulary
    p_n: np.ndarray
    dataset_tag: str = "synthetic"
    train_config: TrainConfig | None = None
    max_trained_elements: int = MAX_ELEMENTS
    checkpoint_id: str = "unsaved"

    def eval(self) -> "LdmModel":
        self.vae.eval()
        self.denoiser.eval()
        self.encoder.eval()
        return self


def _cond_batch(
    encoder: GuidelineEncoder,
    denoiser: Denoiser,
    guideline_sets: list[GuidelineSet],
    dropped: np.ndarray,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Encode a batch of guideline sets, substituting the null token where dropped."""
    B = len(guideline_sets)
    max_k = max([len(g) for g in guideline_sets] + [1])
    tokens = torch.zeros(B, max_k, GUIDELINE_TOKEN_WIDTH)
    enc_pad = torch.ones(B, max_k, dtype=torch.bool)
    cross_mask = torch.zeros(B, max_k, dtype=torch.bool)
    for i, gs in enumerate(guideline_sets):
        k = len(gs)
        if k:
            tokens[i, :k] = torch.from_numpy(guideline_tokens(gs))
            enc_pad[i, :k] = False
            cross_mask[i, :k] = True
        else:
            enc_pad[i, 0] = False  # dummy key keeps encoder softmax finite
    cond = encoder(tokens, key_padding_mask=enc_pad)
    if dropped.any():
        drop_idx = torch.from_numpy(np.flatnonzero(dropped))
        null = denoiser.null_cond.to(cond.dtype)
        cond = cond.clone()
        cross_mask = cross_mask.clone()
        cond[drop_idx] = 0.0
        cond[drop_idx, 0] = null[0]
        cross_mask[drop_idx] = False
        cross_mask[drop_idx, 0] = True
    return cond, cross_mask


def train_ldm(
    dataset: list[Layout],
    vae: LayoutVae,
    vocab: ClassVocabulary,
    config: TrainConfig,
    arch: DenoiserArch = DenoiserArch(),
    sampling_method: str = "weighted",
    schedule: DiffusionSchedule | None = None,
    log_every: int = 200,
    eval_layouts: list[Layout] | None = None,
    eval_every: int = 1000,
    lr_schedule: str = "constant",
    verbose: bool = False,
) -> tuple[LdmModel, list[dict]]:
    """Train the latent diffusion stage on a frozen first-stage model.

    Per batch: tokenize, posterior-sample latents, scale by the std frozen
    from the first batch, draw per-example guideline subsets with the
    configured sampling method, and optimize the noise-prediction loss with
    classifier-free condition dropping.
    """
    if not dataset:
        raise ValidationError("cannot train on an empty dataset")
    if schedule is None:
        schedule = build_schedule(config.diffusion_steps)
    if schedule.T != config.diffusion_steps:
        raise ValidationError("schedule length does not match config.diffusion_steps")
    torch.manual_seed(config.seed)
    denoiser = Denoiser(config.latent_dim, arch)
    encoder = GuidelineEncoder(arch)
    vae.eval()
    for p in vae.parameters():
        p.requires_grad_(False)

    params = list(denoiser.parameters()) + list(encoder.parameters())
    opt = torch.optim.Adam(params, lr=config.learning_rate, betas=config.betas)
    sched = torch.optim.lr_scheduler.LambdaLR(opt, lr_lambda(config, lr_schedule))
    rng = np.random.default_rng(config.seed)
    noise_gen = torch.Generator().manual_seed(config.seed + 2)

    buckets: dict[int, list[int]] = {}
    for i, layout in enumerate(dataset):
        if len(layout) == 0:
            raise ValidationError("dataset contains an empty layout")
        buckets.setdefault(len(layout), []).append(i)
    lengths = sorted(buckets)
    bucket_p = np.array([len(buckets[n]) for n in lengths], dtype=np.float64)
    bucket_p /= bucket_p.sum()
    tokenized = {
        i: tokenize(layout, vocab, rows=len(layout)).matrix for i, layout in enumerate(dataset)
    }
    ab = torch.from_numpy(schedule.alpha_bars).to(torch.float32)

    std: float | None = None
    sqrt_ab = torch.sqrt(ab)
    sqrt_1mab = torch.sqrt(1.0 - ab)

    def heldout_loss() -> float:
        # fixed layouts, t grid, noise, and guideline subsets: a low-variance probe
        gen = torch.Generator().manual_seed(9999)
        hrng = np.random.default_rng(9999)
        losses = []
        with torch.no_grad():
            for j, layout in enumerate(eval_layouts):
                toks = torch.from_numpy(
                    tokenize(layout, vocab, rows=len(layout)).matrix
                ).unsqueeze(0)
                mu, _ = vae.encode_posterior(toks)
                z0 = mu / std
                t_j = torch.tensor([1 + (j * 37) % schedule.T])
                eps = torch.randn(z0.shape, generator=gen)
                z_t = sqrt_ab[t_j - 1] * z0 + sqrt_1mab[t_j - 1] * eps
                gs = sample_guidelines(layout, sampling_method, rng_seed=int(hrng.integers(2**32)))
                cond, mask = _cond_batch(encoder, denoiser, [gs], np.array([False]))
                pred = denoiser(z_t, t_j, cond, mask)
                losses.append(F.mse_loss(pred, eps).item())
        return float(np.mean(losses))

    log: list[dict] = []
    denoiser.train()
    encoder.train()
    for step in range(config.total_steps):
        n = lengths[rng.choice(len(lengths), p=bucket_p)]
        idx = rng.choice(buckets[n], size=config.batch_size, replace=True)
        batch = np.stack([tokenized[i] for i in idx])
        tokens = torch.from_numpy(batch)
        with torch.no_grad():
            mu, logvar = vae.encode_posterior(tokens)
            z = reparameterize(mu, logvar, noise_gen)
        if std is None:
            std = float(z.double().numpy().std(ddof=0))
            if std < 1e-12:
                raise NumericalError("first-batch latents have zero variance")
        z0 = z / std
        t_np = rng.integers(1, schedule.T + 1, size=config.batch_size)
        t = torch.from_numpy(t_np)
        eps = torch.randn(z0.shape, generator=noise_gen)
        scale_t = sqrt_ab[t - 1].view(-1, 1, 1)
        noise_t = sqrt_1mab[t - 1].view(-1, 1, 1)
        z_t = scale_t * z0 + noise_t * eps

        gsets = [
            sample_guidelines(
                dataset[i], sampling_method, rng_seed=int(rng.integers(2**32))
            )
            for i in idx
        ]
        dropped = rng.random(config.batch_size) < config.p_drop
        cond, cross_mask = _cond_batch(encoder, denoiser, gsets, dropped)

        pred = denoiser(z_t, t, cond, cross_mask)
        loss = F.mse_loss(pred, eps)
        if not torch.isfinite(loss):
            raise NumericalError(f"training diverged at step {step}: loss={float(loss)!r}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        sched.step()
        if step % log_every == 0 or step == config.total_steps - 1:
            entry = {"step": step, "loss": loss.item(), "std": std}
            if eval_layouts and (step % eval_every == 0 or step == config.total_steps - 1):
                denoiser.eval()
                encoder.eval()
                entry["heldout_loss"] = heldout_loss()
                denoiser.train()
                encoder.train()
            log.append(entry)
            if verbose:
                print(
                    "  ".join(
                        f"{k}={v:.5f}" if isinstance(v, float) else f"{k}={v}"
                        for k, v in entry.items()
                    ),
                    flush=True,
                )

    denoiser.eval()
    encoder.eval()
    model = LdmModel(
        vae=vae,
        denoiser=denoiser,
        encoder=encoder,
        schedule=schedule.with_std(std),
        vocab=vocab,
        p_n=element_count_distribution(dataset),
        dataset_tag=dataset[0].dataset_tag,
        train_config=config,
        max_trained_elements=max(lengths),
    )
    return model, log
