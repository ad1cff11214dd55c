"""Synthetic layout corpus built from recursive axis-aligned canvas splits.

Every layout is a partition of the canvas into grid-aligned cells, so cells
share edges and guideline extraction finds heavily reused lines, which is
what makes the corpus useful for conditioning experiments.
"""

from __future__ import annotations

import numpy as np

from .layout import GRID_HEIGHT, GRID_WIDTH, Element, Layout, ValidationError

#: minimum extent of a split child, in grid units
MIN_EXTENT = 2

#: probability that a finished cell is dropped (adds whitespace variety)
DROP_PROB = 0.1

#: classes are drawn from the CLAY-sized vocabulary by default
DEFAULT_N_CLASSES = 23


def _split_cells(rng: np.random.Generator, n_target: int) -> list[tuple[int, int, int, int]]:
    # cells are (x0, y0, x1, y1) vertex boxes; children share the split edge
    cells = [(0, 0, GRID_WIDTH - 1, GRID_HEIGHT - 1)]
    while len(cells) < n_target:
        splittable = [
            i
            for i, (x0, y0, x1, y1) in enumerate(cells)
            if x1 - x0 >= 2 * MIN_EXTENT or y1 - y0 >= 2 * MIN_EXTENT
        ]
        if not splittable:
            break
        areas = np.array(
            [(cells[i][2] - cells[i][0]) * (cells[i][3] - cells[i][1]) for i in splittable],
            dtype=np.float64,
        )
        pick = splittable[rng.choice(len(splittable), p=areas / areas.sum())]
        x0, y0, x1, y1 = cells.pop(pick)
        w, h = x1 - x0, y1 - y0
        can_v = w >= 2 * MIN_EXTENT
        can_h = h >= 2 * MIN_EXTENT
        if can_v and can_h:
            vertical = rng.random() < w / (w + h)
        else:
            vertical = can_v
        if vertical:
            s = int(rng.integers(x0 + MIN_EXTENT, x1 - MIN_EXTENT + 1))
            cells.extend([(x0, y0, s, y1), (s, y0, x1, y1)])
        else:
            s = int(rng.integers(y0 + MIN_EXTENT, y1 - MIN_EXTENT + 1))
            cells.extend([(x0, y0, x1, s), (x0, s, x1, y1)])
    return cells


def generate_layout(seed: int, index: int, max_elements: int, n_classes: int) -> Layout:
    """Generate the ``index``-th layout of the seeded corpus."""
    rng = np.random.default_rng([seed, index])
    n_target = int(rng.integers(1, max_elements + 1))
    cells = _split_cells(rng, n_target)
    if len(cells) > 1:
        keep = rng.random(len(cells)) >= DROP_PROB
        if not keep.any():
            keep[rng.integers(len(cells))] = True
        cells = [c for c, k in zip(cells, keep) if k]
    cells.sort(key=lambda c: (c[1], c[0]))
    classes = rng.integers(0, n_classes, size=len(cells))
    elements = tuple(
        Element(int(cls), x0, y0, x1, y1) for cls, (x0, y0, x1, y1) in zip(classes, cells)
    )
    return Layout(elements, source_id=f"synthetic-{seed}-{index}", dataset_tag="synthetic")


def generate_synthetic_dataset(
    count: int,
    max_elements: int = 16,
    seed: int = 0,
    n_classes: int = DEFAULT_N_CLASSES,
) -> list[Layout]:
    """Deterministic synthetic corpus; layout i depends only on (seed, i)."""
    if count < 1:
        raise ValidationError("count must be >= 1")
    if not (1 <= max_elements <= 128):
        raise ValidationError("max_elements must be in [1, 128]")
    return [generate_layout(seed, i, max_elements, n_classes) for i in range(count)]
