"""Image-set container, preprocessing steps, and on-disk formats.

Two interchangeable formats are supported:

* a directory of 16-bit binary PGM files (one image per file, lexicographic
  filename order defines set order);
* a single ``IMGSET`` container: 8-byte magic ``IMGSET01``, little-endian
  u32 count/height/width, then count*H*W little-endian float32, row-major.
"""

from __future__ import annotations

import math
import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateInputError, FormatError, InvalidInputError, ShapeError

IMGSET_MAGIC = b"IMGSET01"
PGM_MAXVAL = 65535


@dataclass(frozen=True)
class ImageSet:
    """Ordered collection of same-shape 2-D grayscale images.

    ``images`` is an (N, H, W) float64 array; ``labels`` is an optional
    per-image source tag of matching length.
    """

    images: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float64)
        if images.ndim != 3:
            raise ShapeError(f"expected an (N, H, W) stack, got shape {images.shape}")
        if images.shape[0] == 0 or images.shape[1] == 0 or images.shape[2] == 0:
            raise InvalidInputError(f"empty image set or empty images: shape {images.shape}")
        if not np.all(np.isfinite(images)):
            raise InvalidInputError("image set contains non-finite values")
        object.__setattr__(self, "images", images)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != images.shape[0]:
                raise InvalidInputError(
                    f"{len(labels)} labels for {images.shape[0]} images"
                )
            object.__setattr__(self, "labels", labels)

    @classmethod
    def from_images(cls, images, labels=None) -> "ImageSet":
        """Build a set from a sequence of 2-D arrays, checking shapes agree."""
        arrays = [np.asarray(im, dtype=np.float64) for im in images]
        if not arrays:
            raise InvalidInputError("cannot build an ImageSet from zero images")
        shapes = {a.shape for a in arrays}
        if len(shapes) != 1:
            raise FormatError(f"mixed image shapes in set: {sorted(shapes)}")
        if arrays[0].ndim != 2:
            raise ShapeError(f"images must be 2-D, got shape {arrays[0].shape}")
        return cls(np.stack(arrays), labels)

    def __len__(self) -> int:
        return self.images.shape[0]

    def __getitem__(self, index: int) -> np.ndarray:
        return self.images[index]

    @property
    def height(self) -> int:
        return self.images.shape[1]

    @property
    def width(self) -> int:
        return self.images.shape[2]


@dataclass(frozen=True)
class Volume:
    """Stack of 2-D slices ordered bottom-to-top."""

    slices: np.ndarray

    def __post_init__(self):
        slices = np.asarray(self.slices, dtype=np.float64)
        if slices.ndim != 3:
            raise ShapeError(f"expected a (D, H, W) volume, got shape {slices.shape}")
        object.__setattr__(self, "slices", slices)

    @property
    def depth(self) -> int:
        return self.slices.shape[0]


# ---------------------------------------------------------------------------
# preprocessing


def clip_percentile(image_set: ImageSet, p: float) -> ImageSet:
    """Clip each image at its own p-th percentile (nearest-rank).

    The percentile of N sorted pixels is the value at 1-based index
    ceil(p/100 * N). Values above it are replaced by it; values at or below
    are unchanged. Idempotent for a fixed p.
    """
    if not 0.0 < p <= 100.0:
        raise InvalidInputError(f"percentile must be in (0, 100], got {p}")
    clipped = np.empty_like(image_set.images)
    n_pixels = image_set.height * image_set.width
    rank = math.ceil(p / 100.0 * n_pixels) - 1
    for i, image in enumerate(image_set.images):
        threshold = np.sort(image, axis=None)[rank]
        clipped[i] = np.minimum(image, threshold)
    return ImageSet(clipped, image_set.labels)


def normalize_max(image_set: ImageSet) -> ImageSet:
    """Divide each image by its own maximum so values land in [0, 1]."""
    if np.any(image_set.images < 0):
        raise InvalidInputError("normalize_max requires non-negative images")
    maxima = image_set.images.max(axis=(1, 2))
    if np.any(maxima <= 0.0):
        bad = int(np.argmax(maxima <= 0.0))
        raise DegenerateInputError(f"image {bad} is all-zero; cannot normalize")
    return ImageSet(image_set.images / maxima[:, None, None], image_set.labels)


def trim_volume(volume: Volume, discard_top: int = 6, discard_bottom: int = 8) -> ImageSet:
    """Drop slices from both ends of a bottom-to-top volume, keeping order."""
    if discard_top < 0 or discard_bottom < 0:
        raise InvalidInputError("discard counts must be non-negative")
    if discard_top + discard_bottom >= volume.depth:
        raise InvalidInputError(
            f"discarding {discard_top}+{discard_bottom} slices exhausts depth {volume.depth}"
        )
    kept = volume.slices[discard_bottom : volume.depth - discard_top]
    return ImageSet(kept.copy())


# ---------------------------------------------------------------------------
# 16-bit PGM directory format


def _write_pgm(path: Path, image: np.ndarray) -> None:
    quantized = np.clip(np.rint(image * PGM_MAXVAL), 0, PGM_MAXVAL).astype(">u2")
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n{PGM_MAXVAL}\n".encode("ascii")
    path.write_bytes(header + quantized.tobytes())


def _read_pgm(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    match = re.match(rb"P5\s+(?:#[^\n]*\n\s*)*(\d+)\s+(\d+)\s+(\d+)\s", raw)
    if match is None:
        raise FormatError(f"{path} is not a binary PGM file")
    width, height, maxval = (int(match.group(i)) for i in (1, 2, 3))
    if maxval != PGM_MAXVAL:
        raise FormatError(f"{path}: expected 16-bit PGM (maxval {PGM_MAXVAL}), got {maxval}")
    pixels = np.frombuffer(raw, dtype=">u2", offset=match.end(), count=height * width)
    if pixels.size != height * width:
        raise FormatError(f"{path}: truncated pixel data")
    return pixels.reshape(height, width).astype(np.float64) / PGM_MAXVAL


# ---------------------------------------------------------------------------
# IMGSET container format


def _write_imgset(path: Path, images: np.ndarray) -> None:
    n, h, w = images.shape
    header = IMGSET_MAGIC + struct.pack("<III", n, h, w)
    path.write_bytes(header + images.astype("<f4").tobytes())


def parse_imgset_bytes(raw: bytes, source: str = "<bytes>") -> np.ndarray:
    if len(raw) < len(IMGSET_MAGIC) + 12 or not raw.startswith(IMGSET_MAGIC):
        raise FormatError(f"{source} is not an IMGSET container")
    n, h, w = struct.unpack_from("<III", raw, len(IMGSET_MAGIC))
    if n == 0 or h == 0 or w == 0:
        raise FormatError(f"{source}: degenerate dimensions {n}x{h}x{w}")
    expected = len(IMGSET_MAGIC) + 12 + 4 * n * h * w
    if len(raw) != expected:
        raise FormatError(f"{source}: expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f4", offset=len(IMGSET_MAGIC) + 12)
    return data.reshape(n, h, w).astype(np.float64)


def _read_imgset(path: Path) -> np.ndarray:
    return parse_imgset_bytes(path.read_bytes(), source=str(path))


# ---------------------------------------------------------------------------
# dispatching save/load


def save_set(image_set: ImageSet, path) -> None:
    """Write a set as an IMGSET container, or as PGM files if path is a directory."""
    path = Path(path)
    if path.is_dir() or (not path.suffix and not path.exists()):
        path.mkdir(parents=True, exist_ok=True)
        digits = max(6, len(str(len(image_set) - 1)))
        for i, image in enumerate(image_set.images):
            _write_pgm(path / f"{i:0{digits}d}.pgm", image)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        _write_imgset(path, image_set.images)


def load_set(path) -> ImageSet:
    """Read a set from an IMGSET container or a directory of PGM files."""
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob("*.pgm"))
        if not files:
            raise InvalidInputError(f"no .pgm files in {path}")
        return ImageSet.from_images([_read_pgm(f) for f in files])
    if not path.exists():
        raise InvalidInputError(f"{path} does not exist")
    return ImageSet(_read_imgset(path))
