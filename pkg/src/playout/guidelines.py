"""Guideline extraction, weighting, training-time sampling, and G-Usage."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layout import (
    MAX_GUIDELINES_PER_AXIS,
    Guideline,
    GuidelineSet,
    Layout,
    ValidationError,
)

SAMPLING_METHODS = ("all", "uniform", "weighted", "weight_tiers")

#: number of weight bins for the weight_tiers sampling method
N_TIERS = 3


@dataclass(frozen=True)
class WeightedGuideline:
    """A guideline and its total overlapped element-edge length in grid units."""

    guideline: Guideline
    weight: int
    touched: bool = True


def extract_guidelines(layout: Layout) -> GuidelineSet:
    """All lines obtained by extending every element's box edges, deduplicated.

    Positions on a valid grid cannot exceed the per-axis capacity, but if an
    oversized set ever arises the lowest-weight lines are dropped and the
    result is flagged ``truncated``.
    """
    if len(layout) == 0:
        raise ValidationError("cannot extract guidelines from an empty layout")
    lines = set()
    for el in layout:
        lines.add(("v", el.x_min))
        lines.add(("v", el.x_max))
        lines.add(("h", el.y_min))
        lines.add(("h", el.y_max))
    guidelines = [Guideline(a, p) for a, p in sorted(lines)]
    truncated = False
    for axis in ("h", "v"):
        axis_lines = [g for g in guidelines if g.axis == axis]
        if len(axis_lines) > MAX_GUIDELINES_PER_AXIS:
            weights = {
                (wg.guideline.axis, wg.guideline.position): wg.weight
                for wg in weigh_guidelines(layout, GuidelineSet.of(axis_lines))
            }
            axis_lines.sort(key=lambda g: (weights[(g.axis, g.position)], g.position))
            drop = {
                (g.axis, g.position)
                for g in axis_lines[: len(axis_lines) - MAX_GUIDELINES_PER_AXIS]
            }
            guidelines = [g for g in guidelines if (g.axis, g.position) not in drop]
            truncated = True
    return GuidelineSet(tuple(guidelines), truncated=truncated)


def weigh_guidelines(layout: Layout, gs: GuidelineSet) -> list[WeightedGuideline]:
    """Weight of each line: sum of lengths of element edges lying exactly on it.

    Both edges of a degenerate element lie on the same line and both
    contribute. Lines no element edge lies on get weight 0 and are flagged
    untouched.
    """
    out = []
    for g in gs:
        weight = 0
        touched = False
        for el in layout:
            if g.axis == "v":
                hits = (el.x_min == g.position) + (el.x_max == g.position)
                edge_len = el.y_max - el.y_min
            else:
                hits = (el.y_min == g.position) + (el.y_max == g.position)
                edge_len = el.x_max - el.x_min
            if hits:
                touched = True
                weight += hits * edge_len
        out.append(WeightedGuideline(g, weight, touched=touched))
    return out


def _weighted_subset(rng: np.random.Generator, weights: np.ndarray, size: int) -> np.ndarray:
    """Indices of a without-replacement sample with probability ~ weight."""
    n = len(weights)
    positive = np.flatnonzero(weights > 0)
    chosen: list[int] = []
    if len(positive) > 0:
        take = min(size, len(positive))
        p = weights[positive] / weights[positive].sum()
        chosen.extend(positive[rng.choice(len(positive), size=take, replace=False, p=p)])
    if len(chosen) < size:
        zeros = np.setdiff1d(np.arange(n), np.array(chosen, dtype=int))
        extra = rng.choice(len(zeros), size=size - len(chosen), replace=False)
        chosen.extend(zeros[extra])
    return np.array(sorted(chosen), dtype=int)


def sample_guidelines(layout: Layout, method: str, rng_seed: int) -> GuidelineSet:
    """Training-time guideline subset for one example, deterministic per seed.

    all: the full extracted set. uniform: keep each line independently with a
    keep-probability itself drawn uniformly per example. weighted: a subset of
    uniformly drawn size, sampled without replacement proportionally to edge
    weight. weight_tiers: lines binned into weight terciles; a random nonempty
    subset of tiers is kept wholesale.
    """
    if method not in SAMPLING_METHODS:
        raise ValidationError(f"unknown sampling method {method!r}")
    full = extract_guidelines(layout)
    if method == "all":
        return full
    rng = np.random.default_rng(rng_seed)
    lines = list(full)
    if method == "uniform":
        keep_prob = rng.random()
        mask = rng.random(len(lines)) < keep_prob
        return GuidelineSet.of(g for g, m in zip(lines, mask) if m)
    weights = np.array(
        [wg.weight for wg in weigh_guidelines(layout, full)], dtype=np.float64
    )
    if method == "weighted":
        size = int(rng.integers(1, len(lines) + 1))
        idx = _weighted_subset(rng, weights, size)
        return GuidelineSet.of(lines[i] for i in idx)
    # weight_tiers
    q1, q2 = np.quantile(weights, [1 / 3, 2 / 3])
    tiers = np.where(weights <= q1, 0, np.where(weights <= q2, 1, 2))
    subset_id = int(rng.integers(1, 2**N_TIERS))  # nonempty subsets of {0,1,2}
    keep_tiers = {t for t in range(N_TIERS) if subset_id >> t & 1}
    return GuidelineSet.of(g for g, t in zip(lines, tiers) if t in keep_tiers)


def g_usage(given: GuidelineSet, generated_layout: Layout) -> float:
    """Fraction of the given guidelines matched exactly by the layout's edges.

    Extra lines in the layout never penalize. Positions are discrete, so the
    intersection uses exact integer equality.
    """
    if len(given) == 0:
        raise ValidationError("g_usage is undefined for an empty guideline set")
    produced = {(g.axis, g.position) for g in extract_guidelines(generated_layout)}
    hit = sum(1 for g in given if (g.axis, g.position) in produced)
    return hit / len(given)
