"""Deterministic SVG and raster rendering of layouts with the class legend.

Every box is filled with its class color and stroked #393e46 at width 1.
Later elements paint over earlier ones. Degenerate (zero width or height)
boxes are drawn as one-pixel strokes in the class color. Guideline overlays
are red lines spanning the canvas.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET

import numpy as np

from .layout import (
    GRID_HEIGHT,
    GRID_WIDTH,
    ClassVocabulary,
    GuidelineSet,
    Layout,
    ValidationError,
)

STROKE_COLOR = "#393e46"
GUIDELINE_COLOR = "#ff0000"
DEFAULT_BACKGROUND = "#ffffff"
PAD_COLOR = "#ffffff"


def _fmt(v: float) -> str:
    s = f"{v:.4f}".rstrip("0").rstrip(".")
    return s if s else "0"


def render_svg(
    layout: Layout,
    vocab: ClassVocabulary,
    guideline_set: GuidelineSet | None = None,
    show_guidelines: bool = False,
    canvas_px: int = 360,
    background: str = DEFAULT_BACKGROUND,
) -> str:
    """Render to an SVG 1.1 document string; byte-stable for fixed inputs."""
    scale = canvas_px / GRID_WIDTH
    width = canvas_px
    height_f = GRID_HEIGHT * scale
    height = _fmt(height_f)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="{background}"/>',
    ]
    for el in layout:
        color = vocab.color_of(el.class_id)
        x, y = el.x_min * scale, el.y_min * scale
        w, h = el.width * scale, el.height * scale
        if el.width == 0 or el.height == 0:
            parts.append(
                f'<line x1="{_fmt(x)}" y1="{_fmt(y)}" x2="{_fmt(x + w)}" y2="{_fmt(y + h)}" '
                f'stroke="{color}" stroke-width="1"/>'
            )
        else:
            parts.append(
                f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(h)}" '
                f'fill="{color}" stroke="{STROKE_COLOR}" stroke-width="1"/>'
            )
    if show_guidelines and guideline_set is not None:
        for g in guideline_set:
            if g.axis == "v":
                x = _fmt(g.position * scale)
                parts.append(
                    f'<line x1="{x}" y1="0" x2="{x}" y2="{height}" '
                    f'stroke="{GUIDELINE_COLOR}" stroke-width="1"/>'
                )
            else:
                y = _fmt(g.position * scale)
                parts.append(
                    f'<line x1="0" y1="{y}" x2="{width}" y2="{y}" '
                    f'stroke="{GUIDELINE_COLOR}" stroke-width="1"/>'
                )
    parts.append("</svg>")
    return "\n".join(parts)


def _hex_to_rgb(color: str) -> np.ndarray:
    return np.array([int(color[i : i + 2], 16) for i in (1, 3, 5)], dtype=np.uint8)


def rasterize(svg: str, width_px: int | None = None) -> np.ndarray:
    """Rasterize an SVG produced by :func:`render_svg` to an RGB uint8 array.

    Supports the rect/line subset this package emits (pixel-snapped fills,
    one-pixel strokes drawn just inside the box), which keeps rendering
    deterministic without an external rasterizer.
    """
    root = ET.fromstring(svg)
    svg_w = float(root.get("width"))
    svg_h = float(root.get("height"))
    if width_px is None:
        width_px = round(svg_w)
    scale = width_px / svg_w
    out_h = round(svg_h * scale)
    img = np.full((out_h, width_px, 3), 255, dtype=np.uint8)

    def snap(v: float) -> int:
        return int(round(v * scale))

    for node in root:
        tag = node.tag.split("}")[-1]
        if tag == "rect":
            x0, y0 = snap(float(node.get("x"))), snap(float(node.get("y")))
            x1 = snap(float(node.get("x")) + float(node.get("width")))
            y1 = snap(float(node.get("y")) + float(node.get("height")))
            x0, x1 = max(x0, 0), min(x1, width_px)
            y0, y1 = max(y0, 0), min(y1, out_h)
            if x1 <= x0 or y1 <= y0:
                continue
            img[y0:y1, x0:x1] = _hex_to_rgb(node.get("fill"))
            stroke = node.get("stroke")
            if stroke:
                rgb = _hex_to_rgb(stroke)
                img[y0, x0:x1] = rgb
                img[y1 - 1, x0:x1] = rgb
                img[y0:y1, x0] = rgb
                img[y0:y1, x1 - 1] = rgb
        elif tag == "line":
            rgb = _hex_to_rgb(node.get("stroke"))
            x0, y0 = snap(float(node.get("x1"))), snap(float(node.get("y1")))
            x1, y1 = snap(float(node.get("x2"))), snap(float(node.get("y2")))
            if x0 == x1:
                col = min(max(x0, 0), width_px - 1)
                a, b = sorted((y0, y1))
                img[max(a, 0) : min(b + 1, out_h), col] = rgb
            else:
                row = min(max(y0, 0), out_h - 1)
                a, b = sorted((x0, x1))
                img[row, max(a, 0) : min(b + 1, width_px)] = rgb
    return img


def render_padded(
    layout: Layout,
    vocab: ClassVocabulary,
    size: int = 64,
    background: str = DEFAULT_BACKGROUND,
) -> np.ndarray:
    """Square raster with the 36:64 canvas letterboxed in ``PAD_COLOR``.

    ``size`` must keep the canvas width integral (size * 36 divisible by 64).
    """
    if size * GRID_WIDTH % GRID_HEIGHT != 0:
        raise ValidationError(f"size {size} does not letterbox the grid exactly")
    canvas_px = size * GRID_WIDTH // GRID_HEIGHT
    img = rasterize(render_svg(layout, vocab, canvas_px=canvas_px, background=background))
    out = np.empty((size, size, 3), dtype=np.uint8)
    out[:] = _hex_to_rgb(PAD_COLOR)
    left = (size - canvas_px) // 2
    out[:, left : left + canvas_px] = img
    return out
