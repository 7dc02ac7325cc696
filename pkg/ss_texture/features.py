"""
Per-subset PCA: maps each raw feature subset v(i) to an uncorrelated,
variance-truncated subset u(i).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import InsufficientDataError, InvalidArgumentError
from .models import PcaModel

DEFAULT_PCA_FRACTION = 0.95
_RATIO_TOLERANCE = 1e-12


def _as_matrix(samples: np.ndarray | Sequence[Sequence[float]]) -> np.ndarray:
    try:
        X = np.asarray(samples, dtype=np.float64)
    except ValueError as exc:
        raise InvalidArgumentError("samples must all have the same dimension") from exc
    if X.ndim != 2:
        raise InvalidArgumentError("samples must form an (n, d) matrix")
    return X


def _spectrum(centered: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and eigenvectors as rows of the sample covariance."""
    n, d = centered.shape
    if d <= n:
        cov = centered.T @ centered / (n - 1)
        eigvals, eigvecs = np.linalg.eigh(cov)
        order = np.argsort(eigvals)[::-1]
        return eigvals[order], eigvecs[:, order].T
    # thin route for d >> n: covariance eigenvectors are the right singular vectors
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    return s**2 / (n - 1), vt


def fit_pca(
    samples: np.ndarray | Sequence[Sequence[float]],
    retained_fraction: float = DEFAULT_PCA_FRACTION,
) -> PcaModel:
    """
    Fit PCA on one feature subset with all classes pooled.

    Keeps the smallest k whose leading eigenvalues explain at least
    `retained_fraction` of the total variance, with k <= min(d, n - 1).
    """
    X = _as_matrix(samples)
    n, d = X.shape
    if n < 2:
        raise InsufficientDataError(f"PCA needs at least 2 samples, got {n}")
    if not 0.0 < retained_fraction <= 1.0:
        raise InvalidArgumentError(
            f"retained_fraction must lie in (0, 1], got {retained_fraction}"
        )

    mean = X.mean(axis=0)
    eigvals, components = _spectrum(X - mean)
    eigvals = np.clip(eigvals, 0.0, None)

    k_max = min(d, n - 1)
    total = float(eigvals.sum())
    if total > 0.0:
        ratios = np.cumsum(eigvals) / total
        k = int(np.searchsorted(ratios, retained_fraction - _RATIO_TOLERANCE)) + 1
        k = min(k, k_max)
        explained = float(ratios[k - 1])
    else:
        k, explained = 1, 1.0

    components = components[:k].copy()
    pivots = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(k), pivots])
    components *= np.where(signs == 0, 1.0, signs)[:, np.newaxis]

    return PcaModel(
        mean=mean,
        components=components,
        eigenvalues=eigvals[:k].copy(),
        retained_fraction=float(retained_fraction),
        explained_fraction=explained,
    )


def pca_transform(model: PcaModel, x: np.ndarray) -> np.ndarray:
    """components . (x - mean) for one vector or every row of a matrix."""
    data = np.asarray(x, dtype=np.float64)
    if data.shape[-1] != model.dim:
        raise InvalidArgumentError(
            f"expected vectors of length {model.dim}, got {data.shape[-1]}"
        )
    return (data - model.mean) @ model.components.T


def pca_reconstruct(model: PcaModel, u: np.ndarray) -> np.ndarray:
    data = np.asarray(u, dtype=np.float64)
    if data.shape[-1] != model.n_components:
        raise InvalidArgumentError(
            f"expected {model.n_components} coordinates, got {data.shape[-1]}"
        )
    return model.mean + data @ model.components
