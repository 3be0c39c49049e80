"""Edge-sharpness blurriness metric over grayscale images.

The sharpness of an image is the mean over pixels of the maximum signed
difference to any 8-connected neighbor; the blurriness of a (original,
blurred) pair is |X - Y| / X. Conventions frozen here: border pixels use
their partial neighborhoods, the per-pixel max is the raw signed maximum
(negative at a strict local minimum), and a pixel with no neighbors at all
(1x1 image) contributes 0.

Images may differ in size; the metric compares densities, not totals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import backend

_LUMA_R, _LUMA_G, _LUMA_B = 299, 587, 114


@dataclass(frozen=True)
class GrayImage:
    width: int
    height: int
    pixels: bytes  # row-major intensities in [0, 255]

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")
        if len(self.pixels) != self.width * self.height:
            raise ValueError("pixel buffer does not match dimensions")


def from_rows(rows: Sequence[Sequence[int]]) -> GrayImage:
    if not rows or not rows[0]:
        raise ValueError("image must not be empty")
    width = len(rows[0])
    if any(len(row) != width for row in rows):
        raise ValueError("rows must have equal length")
    flat = [v for row in rows for v in row]
    if any(not isinstance(v, int) or not 0 <= v <= 255 for v in flat):
        raise ValueError("intensities must be integers in [0, 255]")
    return GrayImage(width, len(rows), bytes(flat))


def luma(r: int, g: int, b: int) -> int:
    return (r * _LUMA_R + g * _LUMA_G + b * _LUMA_B) // 1000


def edge_sharpness(img: GrayImage) -> float:
    """Mean per-pixel maximum signed difference to the 8-neighborhood."""
    total = backend.edge_sharp_total(img.pixels, img.width, img.height)
    return total / (img.width * img.height)


def blurriness(original: GrayImage, blurred: GrayImage) -> float:
    """|X - Y| / X. Undefined (ValueError) when the original has X = 0."""
    x = edge_sharpness(original)
    if x == 0:
        raise ValueError("original image has zero edge sharpness; metric undefined")
    y = edge_sharpness(blurred)
    return abs(x - y) / x


def _tokens(text: str):
    for line in text.splitlines():
        body = line.split("#", 1)[0]
        yield from body.split()


def load_pnm(text: str) -> GrayImage:
    """Parse a plain-text portable graymap (P2) or pixmap (P3).

    P3 input is converted to grayscale with integer luma. Comments and
    arbitrary whitespace are accepted; maxval must be at most 255.
    """
    toks = list(_tokens(text))
    if not toks:
        raise ValueError("empty image file")
    magic = toks[0]
    if magic not in ("P2", "P3"):
        raise ValueError("unsupported format %r (plain P2/P3 only)" % magic)
    try:
        width, height, maxval = (int(v) for v in toks[1:4])
        samples = [int(v) for v in toks[4:]]
    except (ValueError, IndexError):
        raise ValueError("malformed image header or samples") from None
    if width < 1 or height < 1:
        raise ValueError("image dimensions must be positive")
    if not 1 <= maxval <= 255:
        raise ValueError("maxval must be in [1, 255]")
    per_pixel = 3 if magic == "P3" else 1
    if len(samples) != width * height * per_pixel:
        raise ValueError("sample count does not match dimensions")
    if any(not 0 <= s <= maxval for s in samples):
        raise ValueError("sample out of range")
    if magic == "P3":
        values = [
            luma(samples[k], samples[k + 1], samples[k + 2])
            for k in range(0, len(samples), 3)
        ]
    else:
        values = samples
    return GrayImage(width, height, bytes(values))


def load_pnm_file(path: str) -> GrayImage:
    with open(path, "r", encoding="ascii") as fh:
        return load_pnm(fh.read())
