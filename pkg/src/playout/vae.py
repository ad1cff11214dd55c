"""First-stage transformer VAE between token space and per-element latents.

The encoder and decoder carry no positional embeddings: coordinates already
position each element, so both stages are permutation-equivariant over
element rows. The decoder starts from per-slot learned query embeddings and
receives a projection of the latent sequence added at every layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .config import TrainConfig, VaeArch
from .layout import (
    MAX_ELEMENTS,
    ClassVocabulary,
    Layout,
    TokenizedLayout,
    ValidationError,
    segment_slices,
    tokenize,
    untokenize,
)

#: extra PAD rows appended to a training window so the decoder learns PAD
PAD_WINDOW = 4


class NumericalError(RuntimeError):
    """Raised when a model produces non-finite values."""


@dataclass(frozen=True)
class LatentSeq:
    """Per-element continuous latents. ``scale_applied`` tracks division by std."""

    z: torch.Tensor  # (rows, d) float32
    n_real: int
    scale_applied: bool = False

    @property
    def dim(self) -> int:
        return self.z.shape[-1]


class Block(nn.Module):
    """Pre-norm self-attention + feed-forward block, dropout-free."""

    def __init__(self, width: int, heads: int, ffn_mult: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(width)
        self.attn = nn.MultiheadAttention(width, heads, batch_first=True)
        self.norm2 = nn.LayerNorm(width)
        self.ffn = nn.Sequential(
            nn.Linear(width, ffn_mult * width),
            nn.GELU(),
            nn.Linear(ffn_mult * width, width),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.norm1(x)
        x = x + self.attn(h, h, h, need_weights=False)[0]
        return x + self.ffn(self.norm2(x))


class LayoutVae(nn.Module):
    def __init__(self, token_width: int, latent_dim: int = 8, arch: VaeArch = VaeArch()):
        super().__init__()
        self.token_width = token_width
        self.latent_dim = latent_dim
        self.arch = arch
        w = arch.width
        self.embed = nn.Linear(token_width, w)
        self.encoder = nn.ModuleList(Block(w, arch.heads, arch.ffn_mult) for _ in range(arch.layers))
        self.enc_norm = nn.LayerNorm(w)
        self.head_mean = nn.Linear(w, latent_dim)
        self.head_logvar = nn.Linear(w, latent_dim)
        self.queries = nn.Parameter(torch.randn(MAX_ELEMENTS, w) * 0.02)
        self.z_proj = nn.ModuleList(nn.Linear(latent_dim, w) for _ in range(arch.layers))
        self.decoder = nn.ModuleList(Block(w, arch.heads, arch.ffn_mult) for _ in range(arch.layers))
        self.dec_norm = nn.LayerNorm(w)
        self.head_out = nn.Linear(w, token_width)

    def encode_posterior(self, tokens: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """tokens (B, L, D) -> posterior mean and log-variance, each (B, L, d)."""
        h = self.embed(tokens)
        for block in self.encoder:
            h = block(h)
        h = self.enc_norm(h)
        return self.head_mean(h), self.head_logvar(h)

    def decode_logits(self, z: torch.Tensor) -> torch.Tensor:
        """z (B, L, d) -> per-segment logits (B, L, D)."""
        length = z.shape[-2]
        if length > MAX_ELEMENTS:
            raise ValidationError(f"latent sequence of length {length} exceeds {MAX_ELEMENTS}")
        if z.shape[-1] != self.latent_dim:
            raise ValidationError(
                f"latent dim {z.shape[-1]} does not match model dim {self.latent_dim}"
            )
        h = self.queries[:length].expand(*z.shape[:-1], -1)
        for proj, block in zip(self.z_proj, self.decoder):
            h = block(h + proj(z))
        return self.head_out(self.dec_norm(h))


def gaussian_kl(mu: torch.Tensor, logvar: torch.Tensor) -> torch.Tensor:
    """Per-element KL(q || N(0, I)), summed over latent dimensions."""
    return 0.5 * (mu.pow(2) + logvar.exp() - 1.0 - logvar).sum(dim=-1)


def reparameterize(
    mu: torch.Tensor, logvar: torch.Tensor, generator: torch.Generator | None
) -> torch.Tensor:
    eps = torch.randn(mu.shape, generator=generator, dtype=mu.dtype)
    return mu + torch.exp(0.5 * logvar) * eps


def encode(
    tok: TokenizedLayout,
    model: LayoutVae,
    sample_posterior: bool = False,
    seed: int = 0,
) -> LatentSeq:
    """Encode one tokenized layout; sampling uses only the given seed."""
    tokens = torch.from_numpy(np.array(tok.matrix)).unsqueeze(0)
    with torch.no_grad():
        mu, logvar = model.encode_posterior(tokens)
    if not (torch.isfinite(mu).all() and torch.isfinite(logvar).all()):
        raise NumericalError("non-finite activations in the encoder")
    if sample_posterior:
        gen = torch.Generator().manual_seed(seed)
        z = reparameterize(mu, logvar, gen)
    else:
        z = mu
    return LatentSeq(z=z.squeeze(0), n_real=tok.n_real, scale_applied=False)


def decode(
    z: LatentSeq | torch.Tensor,
    model: LayoutVae,
    vocab: ClassVocabulary,
    dataset_tag: str = "synthetic",
    force_real_rows: int | None = None,
) -> tuple[np.ndarray, Layout]:
    """Decode latents to per-segment logits and the argmax layout."""
    if isinstance(z, LatentSeq):
        if z.scale_applied:
            raise ValidationError("decode expects unscaled latents (scale_applied=False)")
        zt = z.z
    else:
        zt = z
    with torch.no_grad():
        logits = model.decode_logits(zt.unsqueeze(0)).squeeze(0)
    logits_np = logits.numpy()
    layout = untokenize(logits_np, vocab, dataset_tag=dataset_tag, force_real_rows=force_real_rows)
    return logits_np, layout


def segment_cross_entropy(
    logits: torch.Tensor, targets: torch.Tensor, segs: tuple[slice, ...]
) -> torch.Tensor:
    """Mean over rows and the five one-hot segments of softmax cross-entropy."""
    losses = []
    for seg in segs:
        seg_logits = logits[..., seg].reshape(-1, seg.stop - seg.start)
        seg_target = targets[..., seg].reshape(-1, seg.stop - seg.start).argmax(dim=-1)
        losses.append(F.cross_entropy(seg_logits, seg_target))
    return torch.stack(losses).mean()


def loss_terms(
    model: LayoutVae,
    tokens: torch.Tensor,
    segs: tuple[slice, ...],
    beta: float,
    generator: torch.Generator | None,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """(total, recon, kl) for a token batch; PAD rows count at weight 1."""
    mu, logvar = model.encode_posterior(tokens)
    z = reparameterize(mu, logvar, generator)
    logits = model.decode_logits(z)
    recon = segment_cross_entropy(logits, tokens, segs)
    kl = gaussian_kl(mu, logvar).mean()
    return recon + beta * kl, recon, kl


def vae_loss(
    tok: TokenizedLayout,
    model: LayoutVae,
    vocab: ClassVocabulary,
    beta: float,
    seed: int = 0,
) -> tuple[float, float, float]:
    """(total, recon, kl) for a single tokenized layout."""
    if beta < 0:
        raise ValidationError("beta must be >= 0")
    tokens = torch.from_numpy(np.array(tok.matrix)).unsqueeze(0)
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        total, recon, kl = loss_terms(model, tokens, segment_slices(vocab), beta, gen)
    return float(total), float(recon), float(kl)


def reconstruction_accuracy(
    model: LayoutVae,
    layouts: list[Layout],
    vocab: ClassVocabulary,
    pad_window: int = PAD_WINDOW,
) -> dict:
    """Posterior-mean round-trip accuracy.

    element_acc counts elements whose decoded row matches all five fields at
    the same index; count_acc counts layouts whose decoded element count is
    exact; layout_acc counts fully reproduced layouts.
    """
    n_elements = 0
    n_correct = 0
    n_count_ok = 0
    n_layout_ok = 0
    for layout in layouts:
        rows = min(len(layout) + pad_window, MAX_ELEMENTS)
        tok = tokenize(layout, vocab, rows=rows)
        lat = encode(tok, model, sample_posterior=False)
        _, decoded = decode(lat, model, vocab, dataset_tag=layout.dataset_tag)
        n_elements += len(layout)
        matched = sum(
            1 for a, b in zip(layout.elements, decoded.elements) if a == b
        )
        n_correct += matched
        if len(decoded) == len(layout):
            n_count_ok += 1
            if matched == len(layout):
                n_layout_ok += 1
    return {
        "element_acc": n_correct / max(n_elements, 1),
        "count_acc": n_count_ok / max(len(layouts), 1),
        "layout_acc": n_layout_ok / max(len(layouts), 1),
    }


def _bucket_by_length(layouts: list[Layout]) -> dict[int, list[int]]:
    buckets: dict[int, list[int]] = {}
    for i, layout in enumerate(layouts):
        buckets.setdefault(len(layout), []).append(i)
    return buckets


def lr_lambda(config: TrainConfig, lr_schedule: str):
    """Warmup plus an optional cosine decay to 5% of the peak rate."""
    warmup = max(config.warmup_steps, 1)

    def factor(step: int) -> float:
        if step + 1 < warmup:
            return (step + 1) / warmup
        if lr_schedule == "constant":
            return 1.0
        span = max(config.total_steps - warmup, 1)
        progress = min((step + 1 - warmup) / span, 1.0)
        return 0.05 + 0.95 * 0.5 * (1.0 + math.cos(math.pi * progress))

    if lr_schedule not in ("constant", "cosine"):
        raise ValidationError(f"unknown lr schedule {lr_schedule!r}")
    return factor


def train_vae(
    dataset: list[Layout],
    vocab: ClassVocabulary,
    config: TrainConfig,
    arch: VaeArch = VaeArch(),
    log_every: int = 200,
    eval_layouts: list[Layout] | None = None,
    eval_every: int = 1000,
    lr_schedule: str = "constant",
    verbose: bool = False,
) -> tuple[LayoutVae, list[dict]]:
    """Train the first-stage VAE on a layout corpus.

    Batches are bucketed by element count; most use the exact-length window
    and a fraction append PAD rows so the decoder learns to emit padding.
    Fully seeded: equal configs give equal parameters.
    """
    if not dataset:
        raise ValidationError("cannot train on an empty dataset")
    for layout in dataset:
        if len(layout) == 0:
            raise ValidationError("dataset contains an empty layout")
    torch.manual_seed(config.seed)
    model = LayoutVae(vocab.token_width, config.latent_dim, arch)
    segs = segment_slices(vocab)
    opt = torch.optim.Adam(model.parameters(), lr=config.learning_rate, betas=config.betas)
    sched = torch.optim.lr_scheduler.LambdaLR(opt, lr_lambda(config, lr_schedule))
    rng = np.random.default_rng(config.seed)
    noise_gen = torch.Generator().manual_seed(config.seed + 1)
    buckets = _bucket_by_length(dataset)
    lengths = sorted(buckets)
    bucket_p = np.array([len(buckets[n]) for n in lengths], dtype=np.float64)
    bucket_p /= bucket_p.sum()
    tokenized = {
        i: tokenize(layout, vocab, rows=len(layout)).matrix for i, layout in enumerate(dataset)
    }
    pad_row = tokenize(Layout(()), vocab, rows=1).matrix[0]

    log: list[dict] = []
    model.train()
    for step in range(config.total_steps):
        n = lengths[rng.choice(len(lengths), p=bucket_p)]
        idx = rng.choice(buckets[n], size=config.batch_size, replace=True)
        window = n
        if rng.random() < 0.3:
            window = min(n + int(rng.integers(1, PAD_WINDOW + 3)), MAX_ELEMENTS)
        batch = np.empty((config.batch_size, window, vocab.token_width), dtype=np.float32)
        batch[:, n:, :] = pad_row
        for row, i in enumerate(idx):
            batch[row, :n] = tokenized[i]
        tokens = torch.from_numpy(batch)
        total, recon, kl = loss_terms(model, tokens, segs, config.beta_kl, noise_gen)
        if not torch.isfinite(total):
            raise NumericalError(
                f"training diverged at step {step}: loss={float(total)!r}"
            )
        opt.zero_grad()
        total.backward()
        opt.step()
        sched.step()
        if step % log_every == 0 or step == config.total_steps - 1:
            entry = {
                "step": step,
                "loss": total.item(),
                "recon": recon.item(),
                "kl": kl.item(),
            }
            if eval_layouts and (step % eval_every == 0 or step == config.total_steps - 1):
                model.eval()
                entry.update(reconstruction_accuracy(model, eval_layouts, vocab))
                model.train()
            log.append(entry)
            if verbose:
                print(
                    "  ".join(
                        f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}"
                        for k, v in entry.items()
                    ),
                    flush=True,
                )
    model.eval()
    return model, log


def state_to_arrays(model: nn.Module, prefix: str = "") -> dict[str, np.ndarray]:
    return {prefix + k: v.detach().cpu().numpy() for k, v in model.state_dict().items()}


def arrays_to_state(
    model: nn.Module, arrays: dict[str, np.ndarray], prefix: str = ""
) -> None:
    state = {
        k[len(prefix):]: torch.from_numpy(np.array(v))
        for k, v in arrays.items()
        if k.startswith(prefix)
    }
    model.load_state_dict(state)
