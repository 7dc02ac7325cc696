from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import ExperimentConfig
from .errors import IngestionError, InsufficientDataError
from .imaging import load_grayscale, synth_texture
from .models import Image, Kernel2D, PatchBank
from .patching import (
    crop_stack,
    extract_patches,
    preprocess_stack,
    split_halves,
    subset_vector_length,
)
from .scale_space import convolve_reflective

logger = logging.getLogger("ss_texture.datasets")

IMAGE_SUFFIXES = (".pgm", ".pnm", ".png")
_CHUNK = 512


def collect_class_images(
    directory: Path,
    ignore_dirs: Iterable[str] = (".git", "__pycache__", ".venv"),
) -> list[Path]:
    """
    All graymap / PNG files below `directory`, sorted by relative path.

    The sort order fixes the class index of each image.
    """
    directory = directory.resolve()
    if not directory.is_dir():
        raise IngestionError(directory, "not a directory")
    skipped = set(ignore_dirs)
    found = [
        path
        for path in directory.rglob("*")
        if path.is_file()
        and path.suffix.lower() in IMAGE_SUFFIXES
        and not any(part in skipped for part in path.relative_to(directory).parts)
    ]
    return sorted(found, key=lambda p: str(p.relative_to(directory)).lower())


def class_image_paths(config: ExperimentConfig) -> list[Path]:
    """Configured image files; a directory entry stands for every image below it."""
    paths: list[Path] = []
    for entry in config.class_images:
        paths.extend(collect_class_images(entry) if entry.is_dir() else [entry])
    return paths


def load_class_images(config: ExperimentConfig) -> list[Image]:
    """One image per class: the configured files, else the synthetic recipe."""
    if config.class_images:
        paths = class_image_paths(config)
        if not paths:
            raise InsufficientDataError("class_images names no image files")
        return [load_grayscale(path) for path in paths]
    return [
        synth_texture(spec.kind, spec.params, config.synthetic_size, spec.seed)
        for spec in config.synthetic
    ]


def build_patch_bank(image: Image, patch_size: int, stride: int) -> PatchBank:
    upper, lower = split_halves(image)
    train_grid = extract_patches(upper, patch_size, stride, source_half="upper")
    test_grid = extract_patches(lower, patch_size, stride, source_half="lower")
    train, train_flags = preprocess_stack(train_grid.stack())
    test, test_flags = preprocess_stack(test_grid.stack())

    degenerate = int(train_flags.sum() + test_flags.sum())
    if degenerate:
        logger.warning("%s: %d constant patches mapped to zeros", image.name, degenerate)
    return PatchBank(
        name=image.name or "class",
        train=train,
        test=test,
        train_origins=list(train_grid.origins),
        test_origins=[(r + upper.height, c) for r, c in test_grid.origins],
        split_row=upper.height,
        degenerate=degenerate,
    )


def build_patch_banks(config: ExperimentConfig) -> list[PatchBank]:
    banks = [
        build_patch_bank(image, config.patch_size, config.patch_stride)
        for image in load_class_images(config)
    ]
    logger.info(
        "built %d patch banks (%d train / %d test patches per class)",
        len(banks), len(banks[0].train), len(banks[0].test),
    )
    return banks


def subset_features(
    patches: np.ndarray,
    kernel: Kernel2D,
    crop_size: int,
    subsample_stride: int = 1,
    boundary: str = "mirror",
) -> np.ndarray:
    """Feature rows of one (derivative, scale) subset for a stack of patches."""
    if patches.shape[0] == 0:
        return np.empty((0, subset_vector_length(crop_size, subsample_stride)))
    chunks = [
        crop_stack(
            convolve_reflective(patches[start : start + _CHUNK], kernel, boundary),
            crop_size,
            subsample_stride,
        )
        for start in range(0, patches.shape[0], _CHUNK)
    ]
    return np.concatenate(chunks, axis=0)


def stack_patches(banks: Sequence[PatchBank], picks: Sequence[np.ndarray], half: str) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate the picked patches of every class; returns (patches, labels)."""
    parts = [getattr(bank, half)[idx] for bank, idx in zip(banks, picks)]
    labels = np.concatenate([np.full(len(idx), j, dtype=np.int64) for j, idx in enumerate(picks)])
    return np.concatenate(parts, axis=0), labels
