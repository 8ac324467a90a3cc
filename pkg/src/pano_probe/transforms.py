"""Pixel-level panorama transforms: horizontal circular shift, horizontal
flip, the shift-magnitude schedule, and lossless variant materialization.

Shift direction convention: output column x reads input column (x + delta)
mod W, i.e. content appears moved left by delta.  Any fixed convention gives
the same downstream test statistics because the full schedule of magnitudes
is evaluated and |s - s_shifted| is symmetric in content position.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .corpus import Dataset
from .errors import TransformError, ValidationError

__all__ = [
    "ImageBuffer",
    "ShiftSchedule",
    "VariantIndex",
    "circular_shift",
    "hflip",
    "shift_schedule",
    "materialize_variants",
    "shift_variant_label",
]

VARIANT_ORIG = "orig"
VARIANT_FLIP = "flip"

INDEX_FILENAME = "variant_index.json"


def shift_variant_label(delta: int) -> str:
    return f"shift:{delta}"


@dataclass(frozen=True)
class ImageBuffer:
    """Row-major, channel-interleaved 8-bit pixel buffer."""

    width: int
    height: int
    channels: int
    pixels: bytes

    def __post_init__(self):
        expected = self.width * self.height * self.channels
        if len(self.pixels) != expected:
            raise ValidationError(
                f"pixel buffer has {len(self.pixels)} bytes, expected {expected}"
            )

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ImageBuffer":
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3:
            raise ValidationError("expected a (height, width[, channels]) array")
        arr = np.ascontiguousarray(arr, dtype=np.uint8)
        h, w, c = arr.shape
        return cls(width=w, height=h, channels=c, pixels=arr.tobytes())

    def to_array(self) -> np.ndarray:
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(
            self.height, self.width, self.channels
        )


@dataclass(frozen=True)
class ShiftSchedule:
    """Shift magnitudes j*W/N for j = 1..N-1, all strictly inside (0, W)."""

    width: int
    divisions: int
    magnitudes: tuple[int, ...]


def circular_shift(image: ImageBuffer, delta: int) -> ImageBuffer:
    """Horizontal circular shift: output column x = input column (x+delta) mod W."""
    if delta < 0:
        raise ValidationError(f"shift must be non-negative, got {delta}")
    delta = delta % image.width
    arr = image.to_array()
    return ImageBuffer.from_array(np.roll(arr, -delta, axis=1))


def hflip(image: ImageBuffer) -> ImageBuffer:
    """Horizontal flip: output column x = input column W-1-x."""
    return ImageBuffer.from_array(image.to_array()[:, ::-1, :])


def shift_schedule(width: int, divisions: int) -> ShiftSchedule:
    """Magnitudes [W/N, 2W/N, ..., (N-1)W/N]; N must divide W exactly."""
    if divisions < 2:
        raise ValidationError(f"divisions must be >= 2, got {divisions}")
    if width % divisions != 0:
        raise ValidationError(
            f"divisions {divisions} must divide image width {width} exactly"
        )
    step = width // divisions
    return ShiftSchedule(
        width=width,
        divisions=divisions,
        magnitudes=tuple(j * step for j in range(1, divisions)),
    )


class VariantIndex:
    """Maps (pair_id, variant label) to an image path relative to its root."""

    def __init__(self, root, pairs: dict[str, dict[str, str]]):
        self.root = Path(root)
        self.pairs = pairs

    def path(self, pair_id: str, variant: str) -> Path:
        try:
            rel = self.pairs[pair_id][variant]
        except KeyError:
            raise ValidationError(
                f"variant index has no entry for ({pair_id!r}, {variant!r})"
            ) from None
        return self.root / rel

    def to_dict(self) -> dict:
        return {"pairs": self.pairs}

    def write(self, path=None) -> Path:
        path = Path(path) if path else self.root / INDEX_FILENAME
        payload = json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        path.write_text(payload, encoding="utf-8")
        return path

    @classmethod
    def read(cls, path) -> "VariantIndex":
        path = Path(path)
        doc = json.loads(path.read_text(encoding="utf-8"))
        return cls(root=path.parent, pairs=doc["pairs"])


def _safe_name(pair_id: str) -> str:
    cleaned = "".join(c if c.isalnum() or c in "._-" else "_" for c in pair_id)
    if cleaned != pair_id:
        # keep sanitized names collision-free
        cleaned += "-" + hashlib.sha256(pair_id.encode("utf-8")).hexdigest()[:8]
    return cleaned


def _load_buffer(pair, dataset: Dataset) -> ImageBuffer:
    try:
        with Image.open(pair.image_path) as img:
            img.load()
            arr = np.asarray(img)
    except (OSError, ValueError) as exc:
        raise TransformError(
            f"pair {pair.id!r}: cannot decode {pair.image_path}: {exc}",
            pair_id=pair.id,
        ) from exc
    buf = ImageBuffer.from_array(arr)
    if (buf.width, buf.height) != (dataset.width, dataset.height):
        raise TransformError(
            f"pair {pair.id!r}: image is {buf.width}x{buf.height}, "
            f"manifest declares {dataset.width}x{dataset.height}",
            pair_id=pair.id,
        )
    return buf


def _save_png(buf: ImageBuffer, path: Path) -> None:
    arr = buf.to_array()
    if buf.channels == 1:
        arr = arr[:, :, 0]
    Image.fromarray(arr).save(path, format="PNG")


def materialize_variants(dataset: Dataset, schedule: ShiftSchedule, out_dir) -> VariantIndex:
    """Write each pair's flip and all scheduled shifts as PNG files.

    Returns an index covering "orig" (pointing back at the source image),
    "flip" and every "shift:<delta>".  Output is deterministic: rerunning on
    the same inputs reproduces identical bytes.
    """
    if schedule.width != dataset.width:
        raise ValidationError(
            f"schedule width {schedule.width} != dataset width {dataset.width}"
        )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs: dict[str, dict[str, str]] = {}
    for pair in dataset.pairs:
        buf = _load_buffer(pair, dataset)
        name = _safe_name(pair.id)
        entry = {VARIANT_ORIG: os.path.relpath(os.fspath(pair.image_path), out_dir)}
        flip_name = f"{name}__flip.png"
        _save_png(hflip(buf), out_dir / flip_name)
        entry[VARIANT_FLIP] = flip_name
        for delta in schedule.magnitudes:
            shift_name = f"{name}__shift_{delta}.png"
            _save_png(circular_shift(buf, delta), out_dir / shift_name)
            entry[shift_variant_label(delta)] = shift_name
        pairs[pair.id] = entry
    return VariantIndex(root=out_dir, pairs=pairs)
