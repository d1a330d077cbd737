"""Rasters, label maps, procedural scenes, and PPM file I/O.

Scenes are generated procedurally so every pixel carries an exact
ground-truth class: a background plus axis-aligned rectangles and discs
filled with distinct palette colors. The recipe (draw order, ranges) is
frozen in PROTOCOL.md so other implementations can emit identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import PpmError
from .rng import Xoshiro256StarStar


def _read_only(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Frame:
    """An RGB raster: pixels is (height, width, 3) uint8, row-major."""

    width: int
    height: int
    pixels: np.ndarray
    frame_index: int = 0

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError("frame dimensions must be >= 1")
        if self.frame_index < 0:
            raise ValueError("frame_index must be non-negative")
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.shape != (self.height, self.width, 3):
            raise ValueError(
                f"pixel buffer shape {px.shape} does not match "
                f"{self.height}x{self.width}x3"
            )
        object.__setattr__(self, "pixels", _read_only(px))

    @classmethod
    def from_array(cls, pixels: np.ndarray, frame_index: int = 0) -> "Frame":
        h, w = pixels.shape[:2]
        return cls(width=w, height=h, pixels=pixels, frame_index=frame_index)

    def with_index(self, frame_index: int) -> "Frame":
        return replace(self, frame_index=frame_index)

    def tobytes(self) -> bytes:
        return self.pixels.tobytes()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Frame):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.frame_index == other.frame_index
            and np.array_equal(self.pixels, other.pixels)
        )


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Per-pixel class indices: labels is (height, width) uint8."""

    width: int
    height: int
    labels: np.ndarray
    num_classes: int

    def __post_init__(self) -> None:
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        if self.num_classes > 256:
            raise ValueError("num_classes must fit in one byte per pixel")
        lab = np.asarray(self.labels, dtype=np.uint8)
        if lab.shape != (self.height, self.width):
            raise ValueError(
                f"label buffer shape {lab.shape} does not match "
                f"{self.height}x{self.width}"
            )
        if lab.size and int(lab.max()) >= self.num_classes:
            raise ValueError("label value out of range for num_classes")
        object.__setattr__(self, "labels", _read_only(lab))

    @classmethod
    def from_array(cls, labels: np.ndarray, num_classes: int) -> "LabelMap":
        h, w = labels.shape
        return cls(width=w, height=h, labels=labels, num_classes=num_classes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabelMap):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.num_classes == other.num_classes
            and np.array_equal(self.labels, other.labels)
        )


@dataclass(frozen=True)
class ScenePalette:
    """Ordered, pairwise-distinct RGB colors; index doubles as class id."""

    colors: tuple[tuple[int, int, int], ...]

    def __post_init__(self) -> None:
        if len(self.colors) < 2:
            raise ValueError("palette needs at least 2 colors")
        if len(set(self.colors)) != len(self.colors):
            raise ValueError("palette colors must be pairwise distinct")
        for c in self.colors:
            if len(c) != 3 or any(not (0 <= v <= 255) for v in c):
                raise ValueError(f"invalid RGB triple: {c!r}")

    def __len__(self) -> int:
        return len(self.colors)

    def as_array(self) -> np.ndarray:
        return np.array(self.colors, dtype=np.uint8)


# Even channel values survive coarse quantization cleanly. The mid gray is a
# deliberate "mixture attractor": box-averaged boundary pixels between
# saturated regions tend to land nearest to it, so downscaling grows
# misclassified halos along edges. The final class is reserved for thin
# strokes whose few-pixel width dissolves into the background at low
# resolutions. Both are boundary-degradation mechanisms the testbed is
# built to measure.
DEFAULT_PALETTE = ScenePalette(
    colors=(
        (24, 24, 24),     # 0: background
        (200, 44, 44),    # 1: red
        (44, 180, 70),    # 2: green
        (50, 90, 220),    # 3: blue
        (234, 200, 40),   # 4: yellow
        (120, 120, 120),  # 5: gray
        (180, 60, 180),   # 6: magenta (fine strokes)
    )
)

_MIN_SCENE_DIM = 16


def _half_extent(rng: Xoshiro256StarStar, small: bool, width: int, height: int) -> int:
    m = min(width, height)
    if small:
        return 2 + rng.randint(4)  # 2..5 px: fine structure that dies at low res
    lo = max(3, m // 24)
    hi = max(lo + 1, m // 5)
    return lo + rng.randint(hi - lo + 1)


def generate_scene(
    seed: int,
    width: int,
    height: int,
    palette: ScenePalette = DEFAULT_PALETTE,
    num_shapes: int = 10,
) -> Frame:
    """Deterministic synthetic scene: background + colored rectangles/discs.

    Pure function of its arguments; every output pixel equals a palette
    color exactly, so the palette index raster is an exact ground truth.
    """
    if width < _MIN_SCENE_DIM or height < _MIN_SCENE_DIM:
        raise ValueError(f"scene dimensions must be at least {_MIN_SCENE_DIM}x{_MIN_SCENE_DIM}")
    if num_shapes < 1:
        raise ValueError("num_shapes must be >= 1")

    rng = Xoshiro256StarStar(seed)
    n_colors = len(palette)
    labels = np.zeros((height, width), dtype=np.uint8)

    for _ in range(num_shapes):
        kind = rng.randint(3)  # 0 = rectangle, 1 = disc, 2 = thin stroke
        if kind == 0:
            color = 1 + rng.randint(n_colors - 1)
            small = rng.randint(4) == 0
            hw = _half_extent(rng, small, width, height)
            hh = _half_extent(rng, small, width, height)
            cx = rng.randint(width)
            cy = rng.randint(height)
            x0, x1 = max(0, cx - hw), min(width, cx + hw + 1)
            y0, y1 = max(0, cy - hh), min(height, cy + hh + 1)
            labels[y0:y1, x0:x1] = color
        elif kind == 1:
            color = 1 + rng.randint(n_colors - 1)
            small = rng.randint(4) == 0
            r = _half_extent(rng, small, width, height)
            cx = rng.randint(width)
            cy = rng.randint(height)
            x0, x1 = max(0, cx - r), min(width, cx + r + 1)
            y0, y1 = max(0, cy - r), min(height, cy + r + 1)
            ys = np.arange(y0, y1, dtype=np.int64) - cy
            xs = np.arange(x0, x1, dtype=np.int64) - cx
            mask = ys[:, None] ** 2 + xs[None, :] ** 2 <= r * r
            patch = labels[y0:y1, x0:x1]
            patch[mask] = color
            labels[y0:y1, x0:x1] = patch
        else:
            # Thin stroke in the final palette class: a 3..5 px wide bar whose
            # length scales with the frame. Survives full-resolution encoding
            # but dissolves under coarse box filtering.
            orient = rng.randint(2)  # 0 = horizontal, 1 = vertical
            m = min(width, height)
            half_len = max(8, m // 16) + rng.randint(max(8, m // 4))
            half_thick = 1 + rng.randint(2)
            cx = rng.randint(width)
            cy = rng.randint(height)
            hw, hh = (half_len, half_thick) if orient == 0 else (half_thick, half_len)
            x0, x1 = max(0, cx - hw), min(width, cx + hw + 1)
            y0, y1 = max(0, cy - hh), min(height, cy + hh + 1)
            labels[y0:y1, x0:x1] = n_colors - 1

    pixels = palette.as_array()[labels]
    return Frame(width=width, height=height, pixels=pixels, frame_index=0)


def save_ppm(frame: Frame) -> bytes:
    """Binary PPM (P6, maxval 255)."""
    header = f"P6\n{frame.width} {frame.height}\n255\n".encode("ascii")
    return header + frame.tobytes()


def _ppm_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read `count` whitespace-separated header tokens, honoring # comments.

    Returns the tokens and the offset one byte past the single whitespace
    character that terminates the last token.
    """
    tokens: list[bytes] = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i] == ord("#"):
            while i < n and data[i] != ord("\n"):
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace():
            i += 1
        if start == i:
            raise PpmError("malformed header: truncated before all fields present")
        tokens.append(data[start:i])
        if len(tokens) == count:
            if i >= n:
                raise PpmError("malformed header: missing whitespace after maxval")
            i += 1  # exactly one whitespace byte separates header from raster
        else:
            if i >= n:
                raise PpmError("malformed header: truncated before all fields present")
    return tokens, i


def load_ppm(data: bytes) -> Frame:
    """Parse a binary PPM (P6, maxval 255) into a Frame."""
    if len(data) < 2:
        raise PpmError("malformed header: too short")
    magic = data[:2]
    if magic != b"P6":
        if magic[:1] == b"P":
            raise PpmError(f"unsupported format {magic.decode('ascii', 'replace')}: only binary P6 is supported")
        raise PpmError("malformed header: missing P6 magic")
    if len(data) < 3 or not (data[2:3].isspace() or data[2] == ord("#")):
        raise PpmError("malformed header: magic not followed by whitespace")
    tokens, offset = _ppm_tokens(data[2:], 3)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise PpmError(f"malformed header: non-numeric field in {tokens!r}") from exc
    if maxval != 255:
        raise PpmError(f"unsupported maxval {maxval}: only 255 is supported")
    if width < 1 or height < 1:
        raise PpmError("malformed header: non-positive dimensions")
    raster = data[2 + offset :]
    expected = width * height * 3
    if len(raster) < expected:
        raise PpmError(f"truncated payload: expected {expected} raster bytes, got {len(raster)}")
    if len(raster) > expected:
        raise PpmError(f"malformed payload: {len(raster) - expected} trailing bytes after raster")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3)
    return Frame(width=width, height=height, pixels=pixels, frame_index=0)
