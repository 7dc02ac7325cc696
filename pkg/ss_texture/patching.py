from __future__ import annotations

import math

import numpy as np

from .errors import InvalidArgumentError
from .models import Image, PatchGrid, SubsetVector

DEFAULT_PATCH_SIZE = 32
DEFAULT_PATCH_STRIDE = 10
DEFAULT_CROP_SIZES: tuple[int, ...] = (18, 24, 30)
_DEGENERATE_STD = 1e-12


def split_halves(image: Image) -> tuple[Image, Image]:
    """Upper rows [0, H//2) for training, lower rows [H//2, H) for testing."""
    if image.height < 2:
        raise InvalidArgumentError(f"image height must be >= 2, got {image.height}")
    cut = image.height // 2
    return (
        Image(pixels=image.pixels[:cut].copy(), name=image.name),
        Image(pixels=image.pixels[cut:].copy(), name=image.name),
    )


def patch_origins(height: int, width: int, patch_size: int, stride: int) -> list[tuple[int, int]]:
    if stride < 1:
        raise InvalidArgumentError(f"stride must be >= 1, got {stride}")
    if patch_size < 1 or patch_size > height or patch_size > width:
        raise InvalidArgumentError(
            f"patch size {patch_size} does not fit a {height}x{width} half"
        )
    rows = range(0, height - patch_size + 1, stride)
    cols = range(0, width - patch_size + 1, stride)
    return [(r, c) for r in rows for c in cols]


def extract_patches(
    half: Image,
    patch_size: int = DEFAULT_PATCH_SIZE,
    stride: int = DEFAULT_PATCH_STRIDE,
    source_half: str = "upper",
) -> PatchGrid:
    origins = patch_origins(half.height, half.width, patch_size, stride)
    patches = [
        half.pixels[r : r + patch_size, c : c + patch_size].copy() for r, c in origins
    ]
    return PatchGrid(patches=patches, origins=origins, source_half=source_half)  # type: ignore[arg-type]


def preprocess_patch(patch: np.ndarray) -> tuple[np.ndarray, bool]:
    """
    DC cancellation and variance normalization.

    Returns the standardized patch and a degenerate flag; a constant patch
    maps to all zeros with the flag set.
    """
    data = np.asarray(patch, dtype=np.float64)
    if data.ndim != 2 or data.size == 0:
        raise InvalidArgumentError("cannot preprocess an empty patch")
    out, degenerate = preprocess_stack(data[np.newaxis])
    return out[0], bool(degenerate[0])


def preprocess_stack(patches: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """`preprocess_patch` over a (n, H, W) stack; returns (patches, degenerate flags)."""
    data = np.asarray(patches, dtype=np.float64)
    magnitude = np.maximum(np.abs(data).max(axis=(1, 2)), 1.0)
    std = data.std(axis=(1, 2))
    degenerate = ~(std > _DEGENERATE_STD * magnitude)
    out = data.copy()
    # second pass pulls mean and variance to the last ulp
    for _ in range(2):
        out -= out.mean(axis=(1, 2), keepdims=True)
        scale = out.std(axis=(1, 2), keepdims=True)
        out /= np.where(scale > 0.0, scale, 1.0)
    out[degenerate] = 0.0
    return out, degenerate


def _crop_offset(side: int, crop_size: int) -> int:
    if crop_size < 1 or crop_size > side:
        raise InvalidArgumentError(f"crop {crop_size} larger than response side {side}")
    if (side - crop_size) % 2:
        raise InvalidArgumentError(
            f"response side {side} and crop {crop_size} must differ by an even amount"
        )
    return (side - crop_size) // 2


def crop_and_vectorize(
    response: np.ndarray,
    scale_index: int,
    crop_size: int,
    subsample_stride: int = 1,
    derivative_id: str = "L",
) -> SubsetVector:
    """Central crop, keep every `subsample_stride`-th pixel, flatten row-major."""
    data = np.asarray(response, dtype=np.float64)
    if data.ndim != 2:
        raise InvalidArgumentError("response must be 2D")
    values = crop_stack(data[np.newaxis], crop_size, subsample_stride)[0]
    return SubsetVector(
        values=values,
        derivative_id=derivative_id,
        scale_index=scale_index,
        crop_size=crop_size,
        subsample_stride=subsample_stride,
    )


def crop_stack(responses: np.ndarray, crop_size: int, subsample_stride: int = 1) -> np.ndarray:
    """(n, S, S) responses -> (n, ceil(crop/stride)**2) feature rows."""
    if subsample_stride < 1:
        raise InvalidArgumentError(f"subsample stride must be >= 1, got {subsample_stride}")
    rows, cols = responses.shape[-2:]
    off_r = _crop_offset(rows, crop_size)
    off_c = _crop_offset(cols, crop_size)
    window = responses[
        :,
        off_r : off_r + crop_size : subsample_stride,
        off_c : off_c + crop_size : subsample_stride,
    ]
    return window.reshape(window.shape[0], -1)


def subset_vector_length(crop_size: int, subsample_stride: int) -> int:
    return math.ceil(crop_size / subsample_stride) ** 2
