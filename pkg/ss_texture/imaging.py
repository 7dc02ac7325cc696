"""
Image ingestion, synthetic class textures and graymap output.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Any, Mapping

import numpy as np
from PIL import Image as PILImage
from scipy import ndimage

from .errors import ExportError, IngestionError, InvalidArgumentError
from .models import Image

logger = logging.getLogger("ss_texture.imaging")

LUMINANCE_WEIGHTS = (0.299, 0.587, 0.114)
SYNTH_KINDS = ("sinusoid", "checkerboard", "filtered_noise", "blobs")
MIN_SYNTH_SIZE = 64

# kind -> accepted params with their defaults
_SYNTH_DEFAULTS: dict[str, dict[str, float]] = {
    "sinusoid": {"wavelength": 8.0, "angle": 0.0, "noise": 0.1},
    "checkerboard": {"cell": 8.0, "noise": 0.1},
    "filtered_noise": {"sigma": 2.0, "noise": 0.0},
    "blobs": {"sigma": 4.0, "threshold": 0.0, "noise": 0.1},
}


def load_grayscale(path: Path | str) -> Image:
    """
    Decode an 8-bit graymap (P2/P5) or PNG into float pixels in [0, 255].

    Color files are reduced with the luminance weights 0.299, 0.587, 0.114.
    """
    path = Path(path)
    try:
        with PILImage.open(path) as img:
            img.load()
            pixels = _to_gray(img, path)
    except IngestionError:
        raise
    except (OSError, ValueError, SyntaxError, PILImage.DecompressionBombError) as exc:
        raise IngestionError(path, str(exc) or type(exc).__name__) from exc

    if pixels.ndim != 2 or pixels.size == 0:
        raise IngestionError(path, "decoded raster is empty")
    logger.debug("loaded %s (%dx%d)", path, pixels.shape[0], pixels.shape[1])
    return Image(pixels=pixels, name=path.stem)


def _to_gray(img: PILImage.Image, path: Path) -> np.ndarray:
    if img.mode == "L":
        return np.asarray(img, dtype=np.float64)
    if img.mode in ("1", "LA"):
        return np.asarray(img.convert("L"), dtype=np.float64)
    if img.mode in ("P", "RGB", "RGBA", "CMYK", "YCbCr"):
        rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
        return rgb @ np.asarray(LUMINANCE_WEIGHTS)
    raise IngestionError(path, f"unsupported pixel mode {img.mode!r}; expected 8-bit data")


def _synth_params(kind: str, params: Mapping[str, Any] | None) -> dict[str, float]:
    if kind not in _SYNTH_DEFAULTS:
        raise InvalidArgumentError(f"unknown texture kind {kind!r}; expected one of {SYNTH_KINDS}")
    merged = dict(_SYNTH_DEFAULTS[kind])
    for key, value in (params or {}).items():
        if key not in merged:
            raise InvalidArgumentError(f"{kind} has no parameter {key!r}")
        try:
            merged[key] = float(value)
        except (TypeError, ValueError) as exc:
            raise InvalidArgumentError(f"{kind}.{key} must be a number") from exc
    if merged["noise"] < 0:
        raise InvalidArgumentError("noise amplitude must be nonnegative")
    for key in ("wavelength", "sigma"):
        if key in merged and not merged[key] > 0:
            raise InvalidArgumentError(f"{kind}.{key} must be positive")
    if "cell" in merged and merged["cell"] < 1:
        raise InvalidArgumentError("checkerboard cell must be >= 1 pixel")
    return merged


def _smooth_noise(rng: np.random.Generator, size: int, sigma: float) -> np.ndarray:
    field = ndimage.gaussian_filter(rng.standard_normal((size, size)), sigma, mode="wrap")
    std = field.std()
    return field / std if std > 0 else field


def rescale_to_byte_range(values: np.ndarray) -> np.ndarray:
    """Affine map onto [0, 255]; a constant array maps to zeros."""
    data = np.asarray(values, dtype=np.float64)
    lo, hi = float(data.min()), float(data.max())
    if hi - lo <= 0:
        return np.zeros_like(data)
    return (data - lo) * (255.0 / (hi - lo))


def synth_texture(
    kind: str,
    params: Mapping[str, Any] | None = None,
    size: int = 640,
    seed: int = 0,
) -> Image:
    """
    Seeded synthetic texture of `size` x `size` pixels, rescaled to [0, 255].

    sinusoid: grating with `wavelength` and stripe orientation `angle`
    (radians; 0 gives constant rows). checkerboard: squares of `cell`
    pixels. filtered_noise: white noise smoothed by a Gaussian of `sigma`.
    blobs: filtered noise thresholded at `threshold`. `noise` adds white
    noise relative to the unit amplitude of the pattern.
    """
    if size < MIN_SYNTH_SIZE:
        raise InvalidArgumentError(f"synthetic size must be >= {MIN_SYNTH_SIZE}, got {size}")
    p = _synth_params(kind, params)
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)

    if kind == "sinusoid":
        theta = p["angle"]
        phase = -x * math.sin(theta) + y * math.cos(theta)
        pattern = np.sin(2.0 * math.pi * phase / p["wavelength"])
    elif kind == "checkerboard":
        cell = p["cell"]
        pattern = 2.0 * ((np.floor(x / cell) + np.floor(y / cell)) % 2) - 1.0
    elif kind == "filtered_noise":
        pattern = _smooth_noise(rng, size, p["sigma"])
    else:
        pattern = np.where(_smooth_noise(rng, size, p["sigma"]) > p["threshold"], 1.0, -1.0)

    if p["noise"] > 0:
        pattern = pattern + p["noise"] * rng.standard_normal((size, size))
    return Image(pixels=rescale_to_byte_range(pattern), name=kind)


def write_graymap(pixels: np.ndarray, path: Path | str) -> Path:
    """Write values (already in [0, 255]) as a binary 8-bit graymap."""
    path = Path(path)
    data = np.clip(np.rint(np.asarray(pixels, dtype=np.float64)), 0, 255).astype(np.uint8)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        PILImage.fromarray(data).save(path, format="PPM")
    except OSError as exc:
        raise ExportError(path, str(exc)) from exc
    return path
