"""Persistence: layout/guideline JSON formats and binary checkpoints.

Layout files are JSON-lines. Two element encodings exist: the normalized
form carries floats in [0, 1] ("x_min" ...) and is quantized on ingest; the
grid form carries exact integers ("ix_min" ...) and round-trips bitwise.

Checkpoints use a purpose-built container (JSON header + raw little-endian
arrays) so that saving the same state twice yields identical bytes.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from pathlib import Path

import numpy as np

from .layout import (
    ClassVocabulary,
    Element,
    Guideline,
    GuidelineSet,
    Layout,
    normalize_ingest,
)

SCHEMA_VERSION = 1
_MAGIC = b"PLCK"


class PersistError(ValueError):
    """Raised on malformed or version-incompatible persisted data."""


# ---------------------------------------------------------------------------
# layouts


def layout_to_record(layout: Layout, vocab: ClassVocabulary) -> dict:
    """Grid-space JSON record (exact integers)."""
    return {
        "id": layout.source_id,
        "dataset": layout.dataset_tag,
        "elements": [
            {
                "class": vocab.names[el.class_id],
                "ix_min": el.x_min,
                "iy_min": el.y_min,
                "ix_max": el.x_max,
                "iy_max": el.y_max,
            }
            for el in layout
        ],
    }


def record_to_layout(record: dict, vocab: ClassVocabulary) -> Layout:
    """Parse either element encoding; grid records load without quantization."""
    elements = record.get("elements")
    if elements is None:
        raise PersistError("layout record has no 'elements'")
    if elements and "ix_min" in elements[0]:
        els = tuple(
            Element(
                class_id=vocab.index_of(e["class"]),
                x_min=int(e["ix_min"]),
                y_min=int(e["iy_min"]),
                x_max=int(e["ix_max"]),
                y_max=int(e["iy_max"]),
            )
            for e in elements
        )
        return Layout(els, source_id=record.get("id"), dataset_tag=record["dataset"])
    return normalize_ingest(record, vocab)


def save_layouts_jsonl(path: str | Path, layouts: list[Layout], vocab: ClassVocabulary) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for layout in layouts:
            fh.write(json.dumps(layout_to_record(layout, vocab)) + "\n")


def load_layouts_jsonl(path: str | Path, vocab: ClassVocabulary) -> list[Layout]:
    layouts = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise PersistError(f"{path}:{lineno}: malformed JSON ({exc})") from None
            layouts.append(record_to_layout(record, vocab))
    return layouts


# ---------------------------------------------------------------------------
# guidelines


def guidelines_to_json(gs: GuidelineSet) -> dict:
    return {"guidelines": [{"axis": g.axis, "pos": g.position} for g in gs]}


def guidelines_from_json(doc: dict) -> GuidelineSet:
    try:
        items = doc["guidelines"]
        return GuidelineSet.of(Guideline(g["axis"], int(g["pos"])) for g in items)
    except (TypeError, KeyError) as exc:
        raise PersistError(f"malformed guideline document ({exc})") from None


# ---------------------------------------------------------------------------
# checkpoints


def vocab_hash(vocab: ClassVocabulary) -> str:
    payload = json.dumps(
        {"dataset": vocab.dataset, "names": vocab.names, "colors": vocab.colors},
        sort_keys=True,
    ).encode()
    return hashlib.sha256(payload).hexdigest()


def save_checkpoint(path: str | Path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    """Write a deterministic checkpoint container.

    Layout: magic, u32 version, u64 header length, header JSON (meta plus an
    array manifest with dtypes/shapes/offsets, sorted keys), then the raw
    array bytes in manifest order.
    """
    names = sorted(arrays)
    manifest = []
    offset = 0
    blobs = []
    for name in names:
        arr = np.asarray(arrays[name])
        blob = arr.tobytes()  # always C-order, works for 0-dim and views
        manifest.append(
            {"name": name, "dtype": str(arr.dtype), "shape": list(arr.shape), "offset": offset}
        )
        offset += len(blob)
        blobs.append(blob)
    header = json.dumps(
        {"schema_version": SCHEMA_VERSION, "meta": meta, "arrays": manifest},
        sort_keys=True,
    ).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IQ", SCHEMA_VERSION, len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        data = fh.read()
    buf = io.BytesIO(data)
    if buf.read(4) != _MAGIC:
        raise PersistError(f"{path}: not a checkpoint file")
    version, header_len = struct.unpack("<IQ", buf.read(12))
    if version != SCHEMA_VERSION:
        raise PersistError(
            f"{path}: schema version {version} unsupported (expected {SCHEMA_VERSION})"
        )
    try:
        header = json.loads(buf.read(header_len))
    except json.JSONDecodeError:
        raise PersistError(f"{path}: corrupted header") from None
    base = buf.tell()
    arrays = {}
    for entry in header["arrays"]:
        dtype = np.dtype(entry["dtype"])
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = base + entry["offset"]
        end = start + count * dtype.itemsize
        if end > len(data):
            raise PersistError(f"{path}: truncated array {entry['name']!r}")
        arrays[entry["name"]] = np.frombuffer(data[start:end], dtype=dtype).reshape(shape).copy()
    return arrays, header["meta"]


def checkpoint_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
