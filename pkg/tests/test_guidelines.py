import numpy as np
import pytest

from playout.guidelines import (
    extract_guidelines,
    g_usage,
    sample_guidelines,
    weigh_guidelines,
)
from playout.layout import Element, Guideline, GuidelineSet, Layout, ValidationError
from playout.synthetic import generate_synthetic_dataset


def brute_force_extract(layout):
    """Independent oracle: iterate all edges and union them."""
    lines = set()
    for el in layout:
        for pos in (el.x_min, el.x_max):
            lines.add(("v", pos))
        for pos in (el.y_min, el.y_max):
            lines.add(("h", pos))
    return lines


def brute_force_weights(layout, gs):
    """Independent oracle: accumulate every edge against every line."""
    weights = {(g.axis, g.position): 0 for g in gs}
    for el in layout:
        edges = [
            ("v", el.x_min, el.y_max - el.y_min),
            ("v", el.x_max, el.y_max - el.y_min),
            ("h", el.y_min, el.x_max - el.x_min),
            ("h", el.y_max, el.x_max - el.x_min),
        ]
        for axis, pos, length in edges:
            if (axis, pos) in weights:
                weights[(axis, pos)] += length
    return weights


def test_single_element_edges():
    layout = Layout((Element(0, 4, 8, 12, 16),))
    gs = extract_guidelines(layout)
    assert {(g.axis, g.position) for g in gs} == {("v", 4), ("v", 12), ("h", 8), ("h", 16)}
    assert len(gs) == 4


def test_dedup_shared_edge():
    layout = Layout((Element(0, 4, 0, 12, 8), Element(1, 4, 20, 30, 28)))
    gs = extract_guidelines(layout)
    assert sum(1 for g in gs if g.axis == "v" and g.position == 4) == 1


def test_extract_matches_brute_force_on_synthetic():
    for layout in generate_synthetic_dataset(60, max_elements=16, seed=11):
        gs = extract_guidelines(layout)
        assert {(g.axis, g.position) for g in gs} == brute_force_extract(layout)


def test_extract_rejects_empty():
    with pytest.raises(ValidationError):
        extract_guidelines(Layout(()))


def test_weights_two_elements():
    a = Element(0, 4, 8, 12, 16)
    b = Element(1, 4, 20, 30, 28)
    layout = Layout((a, b))
    weights = {
        (wg.guideline.axis, wg.guideline.position): wg.weight
        for wg in weigh_guidelines(layout, extract_guidelines(layout))
    }
    assert weights[("v", 4)] == (16 - 8) + (28 - 20)  # both left edges on x=4
    assert weights[("h", 16)] == 12 - 4  # only A touches y=16


def test_weights_match_brute_force():
    for layout in generate_synthetic_dataset(40, max_elements=15, seed=12):
        gs = extract_guidelines(layout)
        got = {
            (wg.guideline.axis, wg.guideline.position): wg.weight
            for wg in weigh_guidelines(layout, gs)
        }
        assert got == brute_force_weights(layout, gs)


def test_weights_invariant_under_reorder():
    layout = generate_synthetic_dataset(1, max_elements=10, seed=13)[0]
    reordered = Layout(tuple(reversed(layout.elements)), dataset_tag=layout.dataset_tag)
    gs = extract_guidelines(layout)
    w1 = {(w.guideline.axis, w.guideline.position): w.weight for w in weigh_guidelines(layout, gs)}
    w2 = {(w.guideline.axis, w.guideline.position): w.weight for w in weigh_guidelines(reordered, gs)}
    assert w1 == w2


def test_untouched_guideline_flagged():
    layout = Layout((Element(0, 4, 8, 12, 16),))
    gs = GuidelineSet.of([Guideline("v", 20)])
    (wg,) = weigh_guidelines(layout, gs)
    assert wg.weight == 0 and not wg.touched


def test_sample_all_is_extraction():
    layout = generate_synthetic_dataset(1, max_elements=8, seed=14)[0]
    assert sample_guidelines(layout, "all", 0).guidelines == extract_guidelines(layout).guidelines


def test_sample_subset_invariant():
    layout = generate_synthetic_dataset(1, max_elements=12, seed=15)[0]
    full = {(g.axis, g.position) for g in extract_guidelines(layout)}
    for method in ("uniform", "weighted", "weight_tiers"):
        for seed in range(30):
            sub = sample_guidelines(layout, method, seed)
            assert {(g.axis, g.position) for g in sub} <= full


def test_sample_deterministic():
    layout = generate_synthetic_dataset(1, max_elements=12, seed=16)[0]
    for method in ("uniform", "weighted", "weight_tiers"):
        assert (
            sample_guidelines(layout, method, 5).guidelines
            == sample_guidelines(layout, method, 5).guidelines
        )


def test_weighted_selection_frequency():
    # one heavy line (weight 100 vs 1 scale): a tall shared edge vs a short one.
    # With subset size 1 the heavy line must win with frequency ~ w_h / (w_h + w_l).
    layout = Layout((Element(0, 0, 0, 20, 50), Element(1, 0, 0, 20, 50)))
    # edges: v@0 and v@20 weight 2*50 each; h@0 and h@50 weight 2*20 each
    full = extract_guidelines(layout)
    weights = {
        (w.guideline.axis, w.guideline.position): w.weight
        for w in weigh_guidelines(layout, full)
    }
    total = sum(weights.values())
    counts = {k: 0 for k in weights}
    n_trials = 4000
    hits = 0
    for seed in range(n_trials):
        rng = np.random.default_rng(seed)
        # force subset size 1 by re-deriving what sample_guidelines would do:
        sub = sample_guidelines(layout, "weighted", seed)
        if len(sub) == 1:
            hits += 1
            g = sub.guidelines[0]
            counts[(g.axis, g.position)] += 1
    assert hits > 300  # size-1 subsets occur often enough to test frequencies
    for key, count in counts.items():
        assert count / hits == pytest.approx(weights[key] / total, abs=0.05)


def test_weight_tiers_closure():
    layout = generate_synthetic_dataset(1, max_elements=14, seed=17)[0]
    full = extract_guidelines(layout)
    weights = np.array([w.weight for w in weigh_guidelines(layout, full)], dtype=float)
    q1, q2 = np.quantile(weights, [1 / 3, 2 / 3])
    tiers = np.where(weights <= q1, 0, np.where(weights <= q2, 1, 2))
    by_tier = {}
    for g, t in zip(full, tiers):
        by_tier.setdefault(int(t), set()).add((g.axis, g.position))
    for seed in range(40):
        sub = {(g.axis, g.position) for g in sample_guidelines(layout, "weight_tiers", seed)}
        for members in by_tier.values():
            taken = members & sub
            assert taken == members or not taken  # whole tiers only


def test_per_axis_capacity_never_exceeded():
    # element coords live in [0,36)/[0,64), so extraction can produce at most
    # 37 vertical and 64 horizontal distinct lines; the truncation path can
    # therefore never fire for valid layouts
    dense = Layout(
        tuple(Element(0, x % 34, (2 * x) % 62, x % 34 + 1, (2 * x) % 62 + 1) for x in range(128))
    )
    gs = extract_guidelines(dense)
    assert not gs.truncated
    assert sum(1 for g in gs if g.axis == "h") <= 64
    assert sum(1 for g in gs if g.axis == "v") <= 64


def test_g_usage_self_roundtrip():
    for layout in generate_synthetic_dataset(20, max_elements=10, seed=18):
        assert g_usage(extract_guidelines(layout), layout) == 1.0


def test_g_usage_counting():
    layout = Layout((Element(0, 4, 8, 12, 16),))
    given = GuidelineSet.of(
        [Guideline("v", 4), Guideline("v", 12), Guideline("h", 8), Guideline("h", 40)]
    )
    assert g_usage(given, layout) == 0.75


def test_g_usage_extra_lines_never_penalize():
    dense = generate_synthetic_dataset(1, max_elements=16, seed=19)[0]
    given = GuidelineSet.of([Guideline("v", dense.elements[0].x_min)])
    assert g_usage(given, dense) == 1.0


def test_g_usage_empty_given_rejected():
    layout = Layout((Element(0, 4, 8, 12, 16),))
    with pytest.raises(ValidationError):
        g_usage(GuidelineSet(()), layout)


def test_g_usage_batch_mean_second_pass():
    layouts = generate_synthetic_dataset(30, max_elements=10, seed=20)
    givens = [extract_guidelines(l) for l in layouts]
    gens = list(reversed(layouts))
    values = [g_usage(g, l) for g, l in zip(givens, gens)]
    # independent second pass: recompute from raw sets
    second = []
    for given, gen in zip(givens, gens):
        produced = brute_force_extract(gen)
        second.append(sum((g.axis, g.position) in produced for g in given) / len(given))
    assert np.mean(values) == pytest.approx(np.mean(second), abs=1e-12)
