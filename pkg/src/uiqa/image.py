"""Image buffers, lossless I/O and colour conversions.

Pixels are stored as 8-bit integers in an (H, W, C) array. All arithmetic
elsewhere in the package happens on unit-interval floats obtained from
:meth:`ImageBuffer.as_float` and is re-quantized with :func:`quantize`.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Union

import numpy as np
from PIL import Image

PathLike = Union[str, Path]

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

# sRGB primaries, D65. The white point is taken as the matrix row sums so
# that pure white maps to a = b = 0 without rounding residue.
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE_D65 = _RGB_TO_XYZ.sum(axis=1)
_LAB_EPS = 216.0 / 24389.0
_LAB_KAPPA = 24389.0 / 27.0

_PNM_SUFFIXES = {".ppm", ".pgm", ".pnm"}


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """Immutable 8-bit raster with 1 or 3 channels."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError(f"image data must be (H, W, C), got shape {arr.shape}")
        h, w, c = arr.shape
        if h < 1 or w < 1:
            raise ValueError(f"image must be at least 1x1, got {w}x{h}")
        if c not in (1, 3):
            raise ValueError(f"image must have 1 or 3 channels, got {c}")
        if arr.dtype != np.uint8:
            if np.issubdtype(arr.dtype, np.floating) and not np.all(np.isfinite(arr)):
                raise ValueError("image data contains non-finite values")
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("image intensities must lie in [0, 255]")
            if not np.array_equal(arr, np.round(arr)):
                raise ValueError("integer intensities required; use from_float for real data")
            arr = arr.astype(np.uint8)
        arr = np.array(arr, dtype=np.uint8, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_float(cls, values: np.ndarray) -> ImageBuffer:
        """Build a buffer from unit-interval reals, rounding half up."""
        return cls(quantize(values))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape  # type: ignore[return-value]

    def as_float(self) -> np.ndarray:
        return self.data.astype(np.float64) / 255.0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return self.data.shape == other.data.shape and np.array_equal(self.data, other.data)

    def __hash__(self) -> int:
        return hash((self.data.shape, self.data.tobytes()))

    def __repr__(self) -> str:
        return f"ImageBuffer({self.width}x{self.height}x{self.channels})"


class LabPixelPlane(NamedTuple):
    L: np.ndarray
    a: np.ndarray
    b: np.ndarray

    @property
    def chroma(self) -> np.ndarray:
        return np.hypot(self.a, self.b)


def quantize(values: np.ndarray) -> np.ndarray:
    """Map unit-interval reals to uint8 with clipping and round-half-up."""
    scaled = np.floor(np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0) * 255.0 + 0.5)
    return scaled.astype(np.uint8)


def load_image(path: PathLike) -> ImageBuffer:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such image: {path}")
    if path.suffix.lower() in _PNM_SUFFIXES:
        return _read_plain_pnm(path)
    try:
        with Image.open(path) as im:
            if im.format != "PNG":
                raise ValueError(f"{path}: unsupported image format {im.format!r}")
            im.load()
            mode = im.mode
            if mode in ("L", "RGB"):
                arr = np.asarray(im)
            elif mode == "P":
                arr = np.asarray(im.convert("RGB"))
            elif mode == "LA":
                arr = np.asarray(im)[:, :, 0]
            elif mode == "RGBA":
                arr = np.asarray(im)[:, :, :3]
            elif mode == "1":
                arr = np.asarray(im.convert("L"))
            else:
                raise ValueError(f"{path}: unsupported PNG mode {mode!r}")
    except (OSError, SyntaxError) as exc:
        raise ValueError(f"{path}: cannot decode image ({exc})") from exc
    return ImageBuffer(arr)


def save_image(img: ImageBuffer, path: PathLike) -> None:
    if not isinstance(img, ImageBuffer):
        raise TypeError("save_image expects an ImageBuffer")
    path = Path(path)
    if not path.parent.is_dir():
        raise FileNotFoundError(f"parent directory does not exist: {path.parent}")
    if path.suffix.lower() in _PNM_SUFFIXES:
        _write_plain_pnm(img, path)
        return
    arr = img.data[:, :, 0] if img.channels == 1 else img.data
    Image.fromarray(arr, mode="L" if img.channels == 1 else "RGB").save(path, format="PNG")


def _read_plain_pnm(path: Path) -> ImageBuffer:
    tokens: list[str] = []
    for line in path.read_text(encoding="ascii").splitlines():
        tokens.extend(line.split("#", 1)[0].split())
    if len(tokens) < 4 or tokens[0] not in ("P2", "P3"):
        raise ValueError(f"{path}: not a plain-text PGM/PPM (P2/P3)")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
        values = np.array([int(t) for t in tokens[4:]], dtype=np.int64)
    except ValueError as exc:
        raise ValueError(f"{path}: malformed pixmap ({exc})") from exc
    channels = 3 if tokens[0] == "P3" else 1
    if width < 1 or height < 1:
        raise ValueError(f"{path}: zero-dimension image")
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 is supported, got {maxval}")
    if values.size != width * height * channels:
        raise ValueError(
            f"{path}: expected {width * height * channels} samples, found {values.size}"
        )
    if values.min() < 0 or values.max() > 255:
        raise ValueError(f"{path}: sample out of range")
    return ImageBuffer(values.reshape(height, width, channels).astype(np.uint8))


def _write_plain_pnm(img: ImageBuffer, path: Path) -> None:
    magic = "P3" if img.channels == 3 else "P2"
    rows = [" ".join(str(v) for v in row.ravel()) for row in img.data]
    text = f"{magic}\n{img.width} {img.height}\n255\n" + "\n".join(rows) + "\n"
    path.write_text(text, encoding="ascii")


def to_grayscale(img: ImageBuffer) -> ImageBuffer:
    """BT.601 luma; single-channel input is returned as is."""
    if img.channels == 1:
        return img
    luma = img.data.astype(np.float64) @ LUMA_WEIGHTS
    return ImageBuffer(np.floor(np.clip(luma, 0, 255) + 0.5).astype(np.uint8))


def luminance(img: ImageBuffer) -> np.ndarray:
    """Unquantized BT.601 luma on the 0-255 scale."""
    if img.channels == 1:
        return img.data[:, :, 0].astype(np.float64)
    return img.data.astype(np.float64) @ LUMA_WEIGHTS


def _srgb_to_linear(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def rgb_to_cielab(img: ImageBuffer) -> LabPixelPlane:
    """sRGB (D65) to CIELAB."""
    if img.channels != 3:
        raise ValueError("rgb_to_cielab requires a 3-channel image")
    linear = _srgb_to_linear(img.as_float())
    xyz = linear @ _RGB_TO_XYZ.T / _WHITE_D65
    f = np.where(xyz > _LAB_EPS, np.cbrt(xyz), (_LAB_KAPPA * xyz + 16.0) / 116.0)
    fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]
    return LabPixelPlane(L=116.0 * fy - 16.0, a=500.0 * (fx - fy), b=200.0 * (fy - fz))


def hsv_saturation(img: ImageBuffer) -> np.ndarray:
    """HSV S channel in [0, 1]; zero where the pixel is black."""
    if img.channels != 3:
        raise ValueError("saturation requires a 3-channel image")
    rgb = img.as_float()
    vmax = rgb.max(axis=2)
    vmin = rgb.min(axis=2)
    out = np.zeros_like(vmax)
    np.divide(vmax - vmin, vmax, out=out, where=vmax > 0)
    return out
