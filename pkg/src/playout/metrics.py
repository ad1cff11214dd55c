"""Evaluation stack: Fréchet distances, desk FID, FD-VG, geometric metrics.

The image feature extractor is pluggable. The bundled desk extractor is a
small convolutional autoencoder trained on rendered synthetic layouts, so
image-space scores are labeled "FID-like": comparable between runs of this
package, not against Inception-based numbers. Exact formula choices for the
geometric metrics live in docs/metrics.md.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import torch
from scipy.optimize import linear_sum_assignment
from torch import nn

from .config import TrainConfig, VaeArch
from .layout import (
    GRID_HEIGHT,
    GRID_WIDTH,
    ClassVocabulary,
    Element,
    Layout,
    ValidationError,
    tokenize,
)
from .render import render_padded
from .vae import LayoutVae, train_vae


@dataclass(frozen=True)
class FeatureSet:
    """A bag of equal-dimension feature vectors with a provenance tag."""

    vectors: np.ndarray  # (n, dim) float64
    tag: str = ""

    def __post_init__(self):
        vec = np.asarray(self.vectors, dtype=np.float64)
        object.__setattr__(self, "vectors", vec)
        if vec.ndim != 2 or vec.shape[0] < 2:
            raise ValidationError("a feature set needs at least two vectors")
        if not np.isfinite(vec).all():
            raise ValidationError("feature vectors must be finite")


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((mat + mat.T) / 2.0)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(a: FeatureSet, b: FeatureSet) -> float:
    """Fréchet distance between Gaussian fits of two feature sets.

    ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}), with unbiased
    covariances and the matrix square root taken by eigendecomposition of the
    symmetrized product, clipping negative eigenvalues at zero.
    """
    if a.vectors.shape[1] != b.vectors.shape[1]:
        raise ValidationError("feature dimensions differ")
    dim = a.vectors.shape[1]
    for fs in (a, b):
        if fs.vectors.shape[0] < dim:
            warnings.warn(
                f"feature set {fs.tag!r} has fewer samples ({fs.vectors.shape[0]}) "
                f"than dimensions ({dim}); the covariance estimate is degenerate",
                stacklevel=2,
            )
    mu_a = a.vectors.mean(axis=0)
    mu_b = b.vectors.mean(axis=0)
    cov_a = np.cov(a.vectors, rowvar=False).reshape(dim, dim)
    cov_b = np.cov(b.vectors, rowvar=False).reshape(dim, dim)
    sqrt_a = _psd_sqrt(cov_a)
    inner = _psd_sqrt(sqrt_a @ cov_b @ sqrt_a)
    fd = float(((mu_a - mu_b) ** 2).sum() + np.trace(cov_a) + np.trace(cov_b) - 2.0 * np.trace(inner))
    if not np.isfinite(fd):
        raise ValidationError("Fréchet distance is non-finite")
    return max(fd, 0.0)


def _subsample(layouts: list[Layout], sample_size: int, rng: np.random.Generator) -> list[Layout]:
    if len(layouts) < sample_size:
        warnings.warn(
            f"only {len(layouts)} layouts available (sample size {sample_size}); using all",
            stacklevel=3,
        )
        return list(layouts)
    idx = rng.choice(len(layouts), size=sample_size, replace=False)
    return [layouts[i] for i in idx]


# ---------------------------------------------------------------------------
# image-space FID (desk extractor)


class ConvAutoencoder(nn.Module):
    """Small convolutional autoencoder over 64x64 RGB rasters."""

    def __init__(self, feat_dim: int = 64):
        super().__init__()
        self.feat_dim = feat_dim
        self.conv = nn.Sequential(
            nn.Conv2d(3, 16, 4, stride=2, padding=1),  # 32
            nn.SiLU(),
            nn.Conv2d(16, 32, 4, stride=2, padding=1),  # 16
            nn.SiLU(),
            nn.Conv2d(32, 64, 4, stride=2, padding=1),  # 8
            nn.SiLU(),
            nn.Conv2d(64, 64, 4, stride=2, padding=1),  # 4
            nn.SiLU(),
        )
        self.to_feat = nn.Linear(64 * 4 * 4, feat_dim)
        self.from_feat = nn.Linear(feat_dim, 64 * 4 * 4)
        self.deconv = nn.Sequential(
            nn.ConvTranspose2d(64, 64, 4, stride=2, padding=1),
            nn.SiLU(),
            nn.ConvTranspose2d(64, 32, 4, stride=2, padding=1),
            nn.SiLU(),
            nn.ConvTranspose2d(32, 16, 4, stride=2, padding=1),
            nn.SiLU(),
            nn.ConvTranspose2d(16, 3, 4, stride=2, padding=1),
        )

    def features(self, images: torch.Tensor) -> torch.Tensor:
        h = self.conv(images)
        return self.to_feat(h.flatten(1))

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        feat = self.features(images)
        h = self.from_feat(feat).view(-1, 64, 4, 4)
        return self.deconv(h)


@dataclass
class ConvFeatureExtractor:
    """Callable wrapper: uint8 image batch -> float64 feature matrix."""

    model: ConvAutoencoder

    def __call__(self, images: np.ndarray) -> np.ndarray:
        x = torch.from_numpy(images.astype(np.float32) / 255.0).permute(0, 3, 1, 2)
        with torch.no_grad():
            feats = self.model.features(x)
        return feats.numpy().astype(np.float64)

    @property
    def dim(self) -> int:
        return self.model.feat_dim


def train_fid_extractor(
    layouts: list[Layout],
    vocab: ClassVocabulary,
    steps: int = 600,
    batch_size: int = 32,
    feat_dim: int = 64,
    seed: int = 0,
    verbose: bool = False,
) -> ConvFeatureExtractor:
    """Train the desk image autoencoder on rendered layouts."""
    torch.manual_seed(seed)
    model = ConvAutoencoder(feat_dim)
    images = np.stack([render_padded(l, vocab) for l in layouts])
    data = torch.from_numpy(images.astype(np.float32) / 255.0).permute(0, 3, 1, 2)
    opt = torch.optim.Adam(model.parameters(), lr=1e-3)
    rng = np.random.default_rng(seed)
    for step in range(steps):
        idx = rng.choice(len(layouts), size=min(batch_size, len(layouts)), replace=False)
        batch = data[idx]
        recon = model(batch)
        loss = nn.functional.mse_loss(recon, batch)
        opt.zero_grad()
        loss.backward()
        opt.step()
        if verbose and step % 100 == 0:
            print(f"extractor step={step} loss={float(loss):.5f}", flush=True)
    model.eval()
    return ConvFeatureExtractor(model)


def layout_features(
    layouts: list[Layout], extractor, vocab: ClassVocabulary, batch_size: int = 64
) -> np.ndarray:
    feats = []
    for start in range(0, len(layouts), batch_size):
        chunk = layouts[start : start + batch_size]
        images = np.stack([render_padded(l, vocab) for l in chunk])
        feats.append(extractor(images))
    return np.concatenate(feats)


def fid(
    real: list[Layout],
    gen: list[Layout],
    extractor,
    vocab: ClassVocabulary,
    sample_size: int = 1024,
    seed: int = 0,
) -> float:
    """FID-like score over rendered layouts with a pluggable extractor."""
    if extractor is None:
        raise ValidationError("no feature extractor available")
    rng = np.random.default_rng(seed)
    real_s = _subsample(real, sample_size, rng)
    gen_s = _subsample(gen, sample_size, rng)
    fa = FeatureSet(layout_features(real_s, extractor, vocab), tag="real")
    fb = FeatureSet(layout_features(gen_s, extractor, vocab), tag="generated")
    return frechet_distance(fa, fb)


# ---------------------------------------------------------------------------
# FD-VG


@dataclass
class FdVgEncoder:
    """Layout autoencoder whose mean-pooled encoder outputs are FD features."""

    vae: LayoutVae
    vocab: ClassVocabulary
    dim: int
    recon_accuracy: float | None = None


def train_fdvg_encoder(
    dataset: list[Layout],
    vocab: ClassVocabulary,
    total_steps: int = 3000,
    seed: int = 0,
    verbose: bool = False,
) -> FdVgEncoder:
    """Train the vector-graphic autoencoder (a KL-free twin of the first stage)."""
    from .vae import reconstruction_accuracy

    config = TrainConfig(
        beta_kl=0.0, latent_dim=32, total_steps=total_steps, seed=seed, batch_size=48
    )
    arch = VaeArch(width=128, layers=4, heads=8)
    model, _ = train_vae(dataset, vocab, config, arch, verbose=verbose)
    acc = reconstruction_accuracy(model, dataset[: min(200, len(dataset))], vocab)
    return FdVgEncoder(vae=model, vocab=vocab, dim=32, recon_accuracy=acc["element_acc"])


def fdvg_features(layouts: list[Layout], enc: FdVgEncoder) -> np.ndarray:
    feats = np.empty((len(layouts), enc.dim))
    for i, layout in enumerate(layouts):
        tok = tokenize(layout, enc.vocab, rows=max(len(layout), 1))
        tokens = torch.from_numpy(np.array(tok.matrix)).unsqueeze(0)
        with torch.no_grad():
            mu, _ = enc.vae.encode_posterior(tokens)
        feats[i] = mu.squeeze(0)[: max(len(layout), 1)].mean(dim=0).numpy()
    return feats


def fd_vg(
    real: list[Layout],
    gen: list[Layout],
    enc: FdVgEncoder,
    sample_size: int = 1024,
    seed: int = 0,
) -> float:
    """Fréchet distance in the layout autoencoder's embedding space."""
    rng = np.random.default_rng(seed)
    real_s = _subsample(real, sample_size, rng)
    gen_s = _subsample(gen, sample_size, rng)
    fa = FeatureSet(fdvg_features(real_s, enc), tag="real")
    fb = FeatureSet(fdvg_features(gen_s, enc), tag="generated")
    return frechet_distance(fa, fb)


# ---------------------------------------------------------------------------
# geometric metrics (formulas frozen in docs/metrics.md)


def _element_masks(layout: Layout) -> np.ndarray:
    masks = np.zeros((len(layout), GRID_HEIGHT, GRID_WIDTH), dtype=bool)
    for i, el in enumerate(layout):
        masks[i, el.y_min : el.y_max, el.x_min : el.x_max] = True
    return masks


def _pair_iou(a: Element, b: Element) -> float:
    ix = max(0, min(a.x_max, b.x_max) - max(a.x_min, b.x_min))
    iy = max(0, min(a.y_max, b.y_max) - max(a.y_min, b.y_min))
    inter = ix * iy
    if inter == 0:
        return 0.0
    union = a.area + b.area - inter
    return inter / union


_ALIGN_LINES = (
    lambda e: e.x_min,
    lambda e: (e.x_min + e.x_max) / 2.0,
    lambda e: e.x_max,
    lambda e: e.y_min,
    lambda e: (e.y_min + e.y_max) / 2.0,
    lambda e: e.y_max,
)


def geometric_metrics(layouts: list[Layout]) -> dict:
    """Mean IoU over overlapping pairs, overlapped-area fraction, alignment.

    Single-element layouts contribute 0 to every metric by convention.
    """
    if not layouts:
        raise ValidationError("no layouts to evaluate")
    iou_vals, overlap_vals, align_vals = [], [], []
    for layout in layouts:
        els = layout.elements
        n = len(els)
        if n < 2:
            iou_vals.append(0.0)
            overlap_vals.append(0.0)
            align_vals.append(0.0)
            continue
        pair_ious = [
            v
            for i in range(n)
            for j in range(i + 1, n)
            if (v := _pair_iou(els[i], els[j])) > 0
        ]
        iou_vals.append(float(np.mean(pair_ious)) if pair_ious else 0.0)

        masks = _element_masks(layout)
        counts = masks.sum(axis=0)
        total_area = masks.sum()
        overlapped = sum(int((m & (counts - m >= 1)).sum()) for m in masks)
        overlap_vals.append(overlapped / total_area if total_area else 0.0)

        per_el = []
        for i in range(n):
            best = min(
                abs(line(els[i]) - line(els[j]))
                for j in range(n)
                if j != i
                for line in _ALIGN_LINES
            )
            per_el.append(best)
        align_vals.append(float(np.mean(per_el)))
    return {
        "iou": float(np.mean(iou_vals)),
        "overlap": float(np.mean(overlap_vals)),
        "alignment": float(np.mean(align_vals)),
    }


def _docsim_weight(a: Element, b: Element) -> float:
    if a.class_id != b.class_id:
        return 0.0
    ca = ((a.x_min + a.x_max) / 2 / GRID_WIDTH, (a.y_min + a.y_max) / 2 / GRID_HEIGHT)
    cb = ((b.x_min + b.x_max) / 2 / GRID_WIDTH, (b.y_min + b.y_max) / 2 / GRID_HEIGHT)
    delta_c = float(np.hypot(ca[0] - cb[0], ca[1] - cb[1]))
    delta_s = abs(a.width - b.width) / GRID_WIDTH + abs(a.height - b.height) / GRID_HEIGHT
    area_a = (a.width / GRID_WIDTH) * (a.height / GRID_HEIGHT)
    area_b = (b.width / GRID_WIDTH) * (b.height / GRID_HEIGHT)
    alpha = min(area_a, area_b) ** 0.5
    return alpha * 2.0 ** (-delta_c - 2.0 * delta_s)


def docsim_pair(a: Layout, b: Layout) -> float:
    if len(a) == 0 or len(b) == 0:
        return 0.0
    weights = np.array([[_docsim_weight(ea, eb) for eb in b] for ea in a])
    rows, cols = linear_sum_assignment(weights, maximize=True)
    return float(weights[rows, cols].sum()) / max(len(a), len(b))


def docsim(pairs: list[tuple[Layout, Layout]]) -> float:
    """Mean maximum-weight matching similarity over layout pairs."""
    if not pairs:
        raise ValidationError("no layout pairs to evaluate")
    return float(np.mean([docsim_pair(a, b) for a, b in pairs]))


def shuffled_baseline(layouts: list[Layout], seed: int = 0) -> list[Layout]:
    """Corrupted corpus: element counts kept, elements reassigned randomly
    across the corpus. Destroys intra-layout structure; used as the FID-like
    sanity baseline a trained generator must beat."""
    rng = np.random.default_rng(seed)
    pool = [el for layout in layouts for el in layout]
    order = rng.permutation(len(pool))
    out = []
    cursor = 0
    for layout in layouts:
        n = len(layout)
        els = tuple(pool[order[cursor + i]] for i in range(n))
        cursor += n
        out.append(Layout(els, source_id=layout.source_id, dataset_tag=layout.dataset_tag))
    return out
