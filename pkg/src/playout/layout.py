"""Core layout data model: elements, guidelines, vocabularies, tokenization.

Layouts live on a discrete 36x64 grid. Element coordinates are vertex
coordinates: x in [0, 36), y in [0, 64). Guidelines are axis-aligned
reference lines whose positions may additionally sit on the far canvas
border (x = 36, y = 64).
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

GRID_WIDTH = 36
GRID_HEIGHT = 64
MAX_ELEMENTS = 128
MAX_GUIDELINES = 128
MAX_GUIDELINES_PER_AXIS = MAX_GUIDELINES // 2

DATASET_TAGS = ("clay", "rico_semantic", "publaynet", "synthetic")

#: widths of the four coordinate one-hot segments (x_min, y_min, x_max, y_max)
COORD_SEGMENTS = (GRID_WIDTH, GRID_HEIGHT, GRID_WIDTH, GRID_HEIGHT)

_HEX_COLOR = re.compile(r"^#[0-9a-f]{6}$")


class ValidationError(ValueError):
    """Raised when a record, layout, or guideline violates its invariants."""


@dataclass(frozen=True)
class Element:
    """A typed axis-aligned box with vertex coordinates on the grid."""

    class_id: int
    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        if self.class_id < 0:
            raise ValidationError(f"negative class_id {self.class_id}")
        if not (0 <= self.x_min <= self.x_max < GRID_WIDTH):
            raise ValidationError(
                f"x range ({self.x_min}, {self.x_max}) outside [0, {GRID_WIDTH})"
            )
        if not (0 <= self.y_min <= self.y_max < GRID_HEIGHT):
            raise ValidationError(
                f"y range ({self.y_min}, {self.y_max}) outside [0, {GRID_HEIGHT})"
            )

    @property
    def width(self) -> int:
        return self.x_max - self.x_min

    @property
    def height(self) -> int:
        return self.y_max - self.y_min

    @property
    def area(self) -> int:
        return self.width * self.height


@dataclass(frozen=True)
class Layout:
    """An ordered element sequence. Order is semantic (inpainting indexes it).

    An empty layout is representable (it is the decode of an all-pad token
    matrix); most operations require at least one element and say so.
    """

    elements: tuple[Element, ...]
    source_id: str | None = None
    dataset_tag: str = "synthetic"

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        if len(self.elements) > MAX_ELEMENTS:
            raise ValidationError(
                f"{len(self.elements)} elements exceeds the maximum of {MAX_ELEMENTS}"
            )
        if self.dataset_tag not in DATASET_TAGS:
            raise ValidationError(f"unknown dataset_tag {self.dataset_tag!r}")
        for i, el in enumerate(self.elements):
            if not isinstance(el, Element):
                raise ValidationError(f"element {i} is not an Element")

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)


@dataclass(frozen=True)
class Guideline:
    """A horizontal or vertical reference line at a discrete grid position."""

    axis: str  # "h" or "v"
    position: int

    def __post_init__(self):
        if self.axis not in ("h", "v"):
            raise ValidationError(f"axis must be 'h' or 'v', got {self.axis!r}")
        bound = GRID_HEIGHT if self.axis == "h" else GRID_WIDTH
        if not (0 <= self.position <= bound):
            raise ValidationError(
                f"{self.axis} position {self.position} outside [0, {bound}]"
            )


@dataclass(frozen=True)
class GuidelineSet:
    """A deduplicated, axis-major sorted set of guidelines.

    ``truncated`` is set when construction had to drop lines to respect the
    per-axis capacity (64 per axis).
    """

    guidelines: tuple[Guideline, ...]
    truncated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "guidelines", tuple(self.guidelines))
        seen = set()
        prev = None
        for g in self.guidelines:
            key = (g.axis, g.position)
            if key in seen:
                raise ValidationError(f"duplicate guideline {key}")
            if prev is not None and key < prev:
                raise ValidationError("guidelines must be sorted axis-major")
            seen.add(key)
            prev = key
        for axis in ("h", "v"):
            n = sum(1 for g in self.guidelines if g.axis == axis)
            if n > MAX_GUIDELINES_PER_AXIS:
                raise ValidationError(
                    f"{n} {axis!r} guidelines exceed the per-axis cap of "
                    f"{MAX_GUIDELINES_PER_AXIS}"
                )
        if len(self.guidelines) > MAX_GUIDELINES:
            raise ValidationError("guideline set exceeds the maximum size")

    @classmethod
    def of(cls, guidelines, truncated: bool = False) -> "GuidelineSet":
        """Build a set from any iterable, deduplicating and sorting."""
        uniq = sorted({(g.axis, g.position) for g in guidelines})
        return cls(tuple(Guideline(a, p) for a, p in uniq), truncated=truncated)

    def __len__(self) -> int:
        return len(self.guidelines)

    def __iter__(self):
        return iter(self.guidelines)

    def positions(self, axis: str) -> tuple[int, ...]:
        return tuple(g.position for g in self.guidelines if g.axis == axis)


@dataclass(frozen=True)
class ClassVocabulary:
    """Ordered class names with per-class fill colors for rendering."""

    dataset: str
    names: tuple[str, ...]
    colors: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) != len(self.colors):
            raise ValidationError("names and colors must have equal length")
        if len(set(self.names)) != len(self.names):
            raise ValidationError("class names must be unique")
        for c in self.colors:
            if not _HEX_COLOR.match(c):
                raise ValidationError(f"color {c!r} is not #rrggbb")

    @property
    def size(self) -> int:
        return len(self.names)

    @property
    def pad_index(self) -> int:
        """Index of the synthetic PAD class (appended after real classes)."""
        return len(self.names)

    @property
    def token_width(self) -> int:
        """Width D of one tokenized element row: classes + PAD + 2*(36+64)."""
        return self.size + 1 + sum(COORD_SEGMENTS)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValidationError(f"unknown class name {name!r}") from None

    def color_of(self, class_id: int) -> str:
        if not (0 <= class_id < self.size):
            raise ValidationError(f"class_id {class_id} outside vocabulary")
        return self.colors[class_id]


def load_vocabulary(tag: str) -> ClassVocabulary:
    """Load a bundled class vocabulary. ``synthetic`` reuses the CLAY table."""
    asset = "clay" if tag == "synthetic" else tag
    try:
        raw = resources.files("playout.data").joinpath(f"{asset}.json").read_text()
    except FileNotFoundError:
        raise ValidationError(f"no vocabulary asset for dataset {tag!r}") from None
    doc = json.loads(raw)
    classes = sorted(doc["classes"], key=lambda c: c["index"])
    if [c["index"] for c in classes] != list(range(len(classes))):
        raise ValidationError(f"vocabulary {tag!r} has non-contiguous indices")
    return ClassVocabulary(
        dataset=tag,
        names=tuple(c["name"] for c in classes),
        colors=tuple(c["color"] for c in classes),
    )


@dataclass(frozen=True)
class TokenizedLayout:
    """One-hot element rows: [class | x_min | y_min | x_max | y_max].

    Rows at index >= n_real are the designated PAD row (PAD class one-hot,
    every coordinate one-hot at bin 0). The full-size form has
    ``MAX_ELEMENTS`` rows; shorter windows are used where the trailing pad
    rows carry no information.
    """

    matrix: np.ndarray  # (rows, D) float32
    n_real: int

    def __post_init__(self):
        if self.matrix.ndim != 2:
            raise ValidationError("token matrix must be 2-D")
        if not (0 <= self.n_real <= self.matrix.shape[0]):
            raise ValidationError("n_real outside matrix row count")
        self.matrix.setflags(write=False)

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]


def segment_slices(vocab: ClassVocabulary) -> tuple[slice, ...]:
    """The five one-hot column ranges of a token row, in field order."""
    widths = (vocab.size + 1,) + COORD_SEGMENTS
    bounds = np.cumsum((0,) + widths)
    return tuple(slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]))


def tokenize(layout: Layout, vocab: ClassVocabulary, rows: int = MAX_ELEMENTS) -> TokenizedLayout:
    """One-hot encode a layout, padding with PAD rows up to ``rows``."""
    n = len(layout)
    if n > rows:
        raise ValidationError(f"layout has {n} elements but only {rows} rows requested")
    segs = segment_slices(vocab)
    mat = np.zeros((rows, vocab.token_width), dtype=np.float32)
    for i, el in enumerate(layout):
        if el.class_id >= vocab.size:
            raise ValidationError(
                f"element {i}: class_id {el.class_id} outside vocabulary of size {vocab.size}"
            )
        for seg, value in zip(segs, (el.class_id, el.x_min, el.y_min, el.x_max, el.y_max)):
            mat[i, seg.start + value] = 1.0
    # designated PAD row: PAD class, coordinate bin 0
    mat[n:, segs[0].start + vocab.pad_index] = 1.0
    for seg in segs[1:]:
        mat[n:, seg.start] = 1.0
    return TokenizedLayout(matrix=mat, n_real=n)


def untokenize(
    tok: TokenizedLayout | np.ndarray,
    vocab: ClassVocabulary,
    dataset_tag: str = "synthetic",
    force_real_rows: int | None = None,
) -> Layout:
    """Decode a token (or logits) matrix back to a layout by per-segment argmax.

    Total on any real-valued input: PAD-classified rows are dropped and
    inverted coordinate pairs are reordered, so the result always satisfies
    the layout invariants. Inverse of :func:`tokenize` on exact one-hot input.
    ``force_real_rows`` suppresses the PAD class for the first n rows, used
    when the element count was fixed upstream.
    """
    mat = tok.matrix if isinstance(tok, TokenizedLayout) else np.asarray(tok)
    if mat.ndim != 2 or mat.shape[1] != vocab.token_width:
        raise ValidationError(
            f"expected (*, {vocab.token_width}) token matrix, got {mat.shape}"
        )
    segs = segment_slices(vocab)
    cls_logits = np.array(mat[:, segs[0]])
    if force_real_rows:
        cls_logits[:force_real_rows, vocab.pad_index] = -np.inf
    cls = cls_logits.argmax(axis=1)
    coords = [mat[:, s].argmax(axis=1) for s in segs[1:]]
    elements = []
    for i in range(mat.shape[0]):
        if cls[i] == vocab.pad_index:
            continue
        x0, y0, x1, y1 = (int(c[i]) for c in coords)
        if x0 > x1:
            x0, x1 = x1, x0
        if y0 > y1:
            y0, y1 = y1, y0
        elements.append(Element(int(cls[i]), x0, y0, x1, y1))
    return Layout(tuple(elements), dataset_tag=dataset_tag)


def quantize(value: float, bins: int) -> int:
    """Map a normalized coordinate in [0, 1] onto a grid bin (floor + clamp)."""
    return min(max(int(math.floor(value * bins)), 0), bins - 1)


def normalize_ingest(record: dict, vocab: ClassVocabulary) -> Layout:
    """Build a layout from one canonical normalized-JSON record.

    Coordinates are floats in [0, 1] x [0, 1], quantized by floor(x*36)
    clamped to 35 and floor(y*64) clamped to 63.
    """
    try:
        dataset = record["dataset"]
        raw_elements = record["elements"]
        source_id = record.get("id")
    except (TypeError, KeyError) as exc:
        raise ValidationError(f"malformed layout record: missing {exc}") from None
    if dataset not in DATASET_TAGS:
        raise ValidationError(f"unknown dataset_tag {dataset!r}")
    if len(raw_elements) > MAX_ELEMENTS:
        raise ValidationError(
            f"record {source_id!r} has {len(raw_elements)} elements (max {MAX_ELEMENTS})"
        )
    elements = []
    for i, raw in enumerate(raw_elements):
        try:
            name = raw["class"]
            coords = [float(raw[k]) for k in ("x_min", "y_min", "x_max", "y_max")]
        except (TypeError, KeyError, ValueError) as exc:
            raise ValidationError(f"element {i}: malformed record ({exc})") from None
        if any(not (0.0 <= c <= 1.0) for c in coords):
            raise ValidationError(f"element {i}: coordinates outside [0, 1]")
        x0, y0, x1, y1 = coords
        if x0 > x1 or y0 > y1:
            raise ValidationError(f"element {i}: inverted box")
        elements.append(
            Element(
                class_id=vocab.index_of(name),
                x_min=quantize(x0, GRID_WIDTH),
                y_min=quantize(y0, GRID_HEIGHT),
                x_max=quantize(x1, GRID_WIDTH),
                y_max=quantize(y1, GRID_HEIGHT),
            )
        )
    return Layout(tuple(elements), source_id=source_id, dataset_tag=dataset)


def element_count_distribution(dataset: list[Layout]) -> np.ndarray:
    """Empirical p(N) over element counts, indexed by N (index 0 unused)."""
    if not dataset:
        raise ValidationError("empty dataset has no element-count distribution")
    counts = np.zeros(MAX_ELEMENTS + 1, dtype=np.float64)
    for layout in dataset:
        n = len(layout)
        if n == 0:
            raise ValidationError("dataset contains an empty layout")
        counts[n] += 1
    return counts / counts.sum()
