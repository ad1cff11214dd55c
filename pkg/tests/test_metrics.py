import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from playout.layout import Element, Layout, ValidationError
from playout.metrics import (
    FeatureSet,
    _docsim_weight,
    docsim,
    docsim_pair,
    frechet_distance,
    geometric_metrics,
    shuffled_baseline,
)
from playout.synthetic import generate_synthetic_dataset


def test_frechet_identity():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(500, 8))
    assert frechet_distance(FeatureSet(x), FeatureSet(x)) <= 1e-8


def test_frechet_symmetry():
    rng = np.random.default_rng(1)
    a = FeatureSet(rng.normal(size=(400, 6)))
    b = FeatureSet(rng.normal(loc=0.3, size=(400, 6)))
    assert abs(frechet_distance(a, b) - frechet_distance(b, a)) <= 1e-6


def test_frechet_gaussian_analytic():
    # N(0,1) vs N(1,1) in 1-D: FD = (0-1)^2 + 0 = 1 (smaller n here; the
    # 100k-sample version runs in the acceptance suite)
    rng = np.random.default_rng(2)
    a = FeatureSet(rng.normal(0.0, 1.0, size=(20000, 1)))
    b = FeatureSet(rng.normal(1.0, 1.0, size=(20000, 1)))
    assert frechet_distance(a, b) == pytest.approx(1.0, abs=0.05)


def test_frechet_dimension_mismatch():
    rng = np.random.default_rng(3)
    with pytest.raises(ValidationError):
        frechet_distance(
            FeatureSet(rng.normal(size=(10, 2))), FeatureSet(rng.normal(size=(10, 3)))
        )


def test_frechet_warns_on_small_sets():
    rng = np.random.default_rng(4)
    a = FeatureSet(rng.normal(size=(5, 8)))
    b = FeatureSet(rng.normal(size=(5, 8)))
    with pytest.warns(UserWarning, match="fewer samples"):
        frechet_distance(a, b)


def test_feature_set_validation():
    with pytest.raises(ValidationError):
        FeatureSet(np.ones((1, 4)))
    with pytest.raises(ValidationError):
        FeatureSet(np.array([[np.nan, 1.0], [0.0, 1.0]]))


# --- geometric metrics against a brute-force pixel/pair oracle -------------


def brute_force_geometric(layouts):
    iou_vals, overlap_vals, align_vals = [], [], []
    for layout in layouts:
        els = layout.elements
        n = len(els)
        if n < 2:
            iou_vals.append(0.0)
            overlap_vals.append(0.0)
            align_vals.append(0.0)
            continue
        # per-pixel double loop
        grids = []
        for el in els:
            g = set()
            for x in range(el.x_min, el.x_max):
                for y in range(el.y_min, el.y_max):
                    g.add((x, y))
            grids.append(g)
        ious = []
        for i in range(n):
            for j in range(i + 1, n):
                inter = len(grids[i] & grids[j])
                if inter:
                    ious.append(inter / len(grids[i] | grids[j]))
        iou_vals.append(sum(ious) / len(ious) if ious else 0.0)
        total = sum(len(g) for g in grids)
        covered = 0
        for i in range(n):
            others = set()
            for j in range(n):
                if j != i:
                    others |= grids[j]
            covered += len(grids[i] & others)
        overlap_vals.append(covered / total if total else 0.0)
        per_el = []
        for i in range(n):
            best = None
            for j in range(n):
                if j == i:
                    continue
                a, b = els[i], els[j]
                lines_a = [a.x_min, (a.x_min + a.x_max) / 2, a.x_max,
                           a.y_min, (a.y_min + a.y_max) / 2, a.y_max]
                lines_b = [b.x_min, (b.x_min + b.x_max) / 2, b.x_max,
                           b.y_min, (b.y_min + b.y_max) / 2, b.y_max]
                for la, lb in zip(lines_a, lines_b):
                    d = abs(la - lb)
                    if best is None or d < best:
                        best = d
            per_el.append(best)
        align_vals.append(sum(per_el) / n)
    return {
        "iou": sum(iou_vals) / len(iou_vals),
        "overlap": sum(overlap_vals) / len(overlap_vals),
        "alignment": sum(align_vals) / len(align_vals),
    }


def test_geometric_metrics_match_brute_force():
    rng = np.random.default_rng(5)
    layouts = []
    for _ in range(10):
        n = rng.integers(1, 7)
        els = []
        for _ in range(n):
            x0, y0 = rng.integers(0, 30), rng.integers(0, 55)
            els.append(
                Element(
                    int(rng.integers(0, 5)), int(x0), int(y0),
                    int(x0 + rng.integers(1, 36 - x0)), int(y0 + rng.integers(1, 64 - y0)),
                )
            )
        layouts.append(Layout(tuple(els)))
    got = geometric_metrics(layouts)
    want = brute_force_geometric(layouts)
    for key in ("iou", "overlap", "alignment"):
        assert got[key] == pytest.approx(want[key], abs=1e-9), key


def test_single_element_conventions():
    layout = Layout((Element(0, 0, 0, 10, 10),))
    m = geometric_metrics([layout])
    assert m["iou"] == 0.0 and m["overlap"] == 0.0 and m["alignment"] == 0.0


def test_identical_stacked_boxes_iou_one():
    layout = Layout((Element(0, 2, 2, 12, 22), Element(1, 2, 2, 12, 22)))
    m = geometric_metrics([layout])
    assert m["iou"] == pytest.approx(1.0)
    assert m["overlap"] == pytest.approx(1.0)


def test_metrics_invariant_under_reorder(corpus):
    sample = corpus[:20]
    reordered = [
        Layout(tuple(reversed(l.elements)), dataset_tag=l.dataset_tag) for l in sample
    ]
    a = geometric_metrics(sample)
    b = geometric_metrics(reordered)
    for key in a:
        assert a[key] == pytest.approx(b[key], abs=1e-12)


def test_iou_overlap_in_unit_range(corpus):
    m = geometric_metrics(corpus)
    assert 0.0 <= m["iou"] <= 1.0
    assert 0.0 <= m["overlap"] <= 1.0


# --- docsim -----------------------------------------------------------------


def brute_force_docsim(a, b):
    """Enumerate all matchings (small n only)."""
    import itertools

    na, nb = len(a), len(b)
    best = 0.0
    if na <= nb:
        for perm in itertools.permutations(range(nb), na):
            s = sum(_docsim_weight(a.elements[i], b.elements[j]) for i, j in enumerate(perm))
            best = max(best, s)
    else:
        for perm in itertools.permutations(range(na), nb):
            s = sum(_docsim_weight(a.elements[i], b.elements[j]) for j, i in enumerate(perm))
            best = max(best, s)
    return best / max(na, nb)


def test_docsim_matches_enumeration():
    layouts = generate_synthetic_dataset(8, max_elements=5, seed=21)
    pairs = list(zip(layouts[:4], layouts[4:]))
    for a, b in pairs:
        assert docsim_pair(a, b) == pytest.approx(brute_force_docsim(a, b), abs=1e-12)
    assert docsim(pairs) == pytest.approx(
        np.mean([brute_force_docsim(a, b) for a, b in pairs]), abs=1e-12
    )


def test_docsim_self_similarity_is_maximal():
    layout = generate_synthetic_dataset(1, max_elements=6, seed=22)[0]
    other = generate_synthetic_dataset(1, max_elements=6, seed=23)[0]
    assert docsim_pair(layout, layout) >= docsim_pair(layout, other)


def test_shuffled_baseline_preserves_counts(corpus):
    shuffled = shuffled_baseline(corpus[:30], seed=0)
    assert [len(l) for l in shuffled] == [len(l) for l in corpus[:30]]
    key = lambda e: (e.class_id, e.x_min, e.y_min, e.x_max, e.y_max)
    pool = sorted((el for l in corpus[:30] for el in l.elements), key=key)
    pool2 = sorted((el for l in shuffled for el in l.elements), key=key)
    assert pool == pool2
