import numpy as np
import pytest

from playout.layout import Element, Guideline, GuidelineSet, Layout, load_vocabulary
from playout.render import (
    DEFAULT_BACKGROUND,
    PAD_COLOR,
    STROKE_COLOR,
    rasterize,
    render_padded,
    render_svg,
)


def test_clay_button_color():
    vocab = load_vocabulary("clay")
    svg = render_svg(Layout((Element(2, 0, 0, 10, 10),), dataset_tag="clay"), vocab)
    assert 'fill="#71c9ce"' in svg  # BUTTON


def test_publaynet_figure_color():
    vocab = load_vocabulary("publaynet")
    svg = render_svg(Layout((Element(4, 0, 0, 10, 10),), dataset_tag="publaynet"), vocab)
    assert 'fill="#fae3d9"' in svg  # FIGURE


def test_stroke_color_constant(vocab):
    svg = render_svg(Layout((Element(0, 1, 1, 5, 5),)), vocab)
    assert f'stroke="{STROKE_COLOR}"' in svg
    assert 'stroke-width="1"' in svg


def test_empty_layout_blank_canvas(vocab):
    svg = render_svg(Layout(()), vocab)
    assert svg.count("<rect") == 1  # background only
    assert f'fill="{DEFAULT_BACKGROUND}"' in svg


def test_byte_stable(vocab, corpus):
    layout = corpus[0]
    gs = GuidelineSet.of([Guideline("v", 10), Guideline("h", 3)])
    a = render_svg(layout, vocab, guideline_set=gs, show_guidelines=True)
    b = render_svg(layout, vocab, guideline_set=gs, show_guidelines=True)
    assert a.encode() == b.encode()


def test_element_paint_order(vocab):
    layout = Layout((Element(0, 0, 0, 10, 10), Element(2, 0, 0, 10, 10)))
    svg = render_svg(layout, vocab)
    first = svg.index(vocab.colors[0])
    second = svg.index(vocab.colors[2])
    assert first < second  # later elements paint on top


def test_degenerate_element_one_px_stroke(vocab):
    layout = Layout((Element(0, 5, 5, 5, 20),))
    svg = render_svg(layout, vocab)
    assert "<line" in svg
    raster = rasterize(svg)
    rgb = tuple(int(vocab.colors[0][i : i + 2], 16) for i in (1, 3, 5))
    assert (raster == rgb).all(axis=-1).sum() > 0


def test_guideline_overlay_red(vocab):
    gs = GuidelineSet.of([Guideline("v", 18)])
    svg = render_svg(Layout(()), vocab, guideline_set=gs, show_guidelines=True)
    assert 'stroke="#ff0000"' in svg


def test_rasterize_deterministic(vocab, corpus):
    svg = render_svg(corpus[1], vocab)
    assert np.array_equal(rasterize(svg), rasterize(svg))


def test_rasterize_coverage_matches_area(vocab):
    # pixel count of a solo box ~ analytic area within 1px rounding per edge
    el = Element(0, 4, 8, 20, 40)
    svg = render_svg(Layout((el,)), vocab, canvas_px=360)  # scale 10 px/unit
    raster = rasterize(svg)
    bg = np.array([255, 255, 255], dtype=np.uint8)
    painted = (~(raster == bg).all(axis=-1)).sum()
    scale = 10
    expected = (el.width * scale) * (el.height * scale)
    assert abs(painted - expected) <= 2 * (el.width + el.height) * scale + 4


def test_render_padded_letterbox(vocab, corpus):
    img = render_padded(corpus[2], vocab, size=64)
    assert img.shape == (64, 64, 3)
    pad_rgb = tuple(int(PAD_COLOR[i : i + 2], 16) for i in (1, 3, 5))
    assert (img[:, 0] == pad_rgb).all() and (img[:, -1] == pad_rgb).all()
    with pytest.raises(Exception):
        render_padded(corpus[2], vocab, size=50)


def test_render_padded_deterministic(vocab, corpus):
    assert np.array_equal(render_padded(corpus[3], vocab), render_padded(corpus[3], vocab))
