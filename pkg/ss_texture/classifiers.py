"""
Base classifiers whose outputs form one row of a decision profile.

Every confidence vector is nonnegative and sums to one:
- QDC with the two-parameter covariance regularization
- k-NN with leave-one-out selection of k
- Parzen with leave-one-out selection of the kernel width h
- plain 1-NN
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Protocol, Sequence

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist, pdist
from scipy.special import logsumexp, softmax

from .errors import InsufficientDataError, InvalidArgumentError, SingularCovarianceError
from .models import NeighborModel, QdcModel

NeighborMode = Literal["knn", "parzen", "nn1"]

DEFAULT_KNN_MAX_K = 25
DEFAULT_PARZEN_GRID_SIZE = 16
DEFAULT_PARZEN_GRID_SPAN = (0.05, 5.0)


def _labels(y: Sequence[int] | np.ndarray, n: int, n_classes: int | None) -> tuple[np.ndarray, int]:
    labels = np.asarray(y, dtype=np.int64)
    if labels.shape != (n,):
        raise InvalidArgumentError(f"expected {n} labels, got shape {labels.shape}")
    if n and labels.min() < 0:
        raise InvalidArgumentError("labels must be nonnegative class indices")
    c = n_classes if n_classes is not None else (int(labels.max()) + 1 if n else 0)
    if n and labels.max() >= c:
        raise InvalidArgumentError(f"label {labels.max()} out of range for {c} classes")
    return labels, c


def _matrix(X: np.ndarray) -> np.ndarray:
    data = np.asarray(X, dtype=np.float64)
    if data.ndim == 1:
        data = data[:, np.newaxis]
    if data.ndim != 2:
        raise InvalidArgumentError("training data must be an (n, d) matrix")
    return data


def _queries(x: np.ndarray, dim: int) -> tuple[np.ndarray, bool]:
    data = np.asarray(x, dtype=np.float64)
    single = data.ndim == 1
    if single:
        data = data[np.newaxis]
    if data.ndim != 2 or data.shape[1] != dim:
        raise InvalidArgumentError(
            f"expected vectors of length {dim}, got shape {np.asarray(x).shape}"
        )
    return data, single


# ---- QDC ----


def regularize_covariance(cov: np.ndarray, eta: float, lambda_: float) -> np.ndarray:
    """(1 - eta - lambda) S + eta (S o I) + lambda tr(S)/n I."""
    cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    n = cov.shape[0]
    eye = np.eye(n)
    return (
        (1.0 - eta - lambda_) * cov
        + eta * (cov * eye)
        + lambda_ * (np.trace(cov) / n) * eye
    )


def _check_regularization(eta: float, lambda_: float) -> None:
    if eta < 0 or lambda_ < 0 or eta + lambda_ >= 1:
        raise InvalidArgumentError(
            f"need eta, lambda >= 0 and eta + lambda < 1, got eta={eta}, lambda={lambda_}"
        )


def train_qdc(
    X: np.ndarray,
    y: Sequence[int] | np.ndarray,
    eta: float = 0.0,
    lambda_: float = 0.0,
    n_classes: int | None = None,
) -> QdcModel:
    """
    Quadratic discriminant with regularized per-class covariances.

    A covariance whose Cholesky factorization fails, or whose pivots fall
    below the working precision, raises SingularCovarianceError; no ridge is
    added silently.
    """
    _check_regularization(eta, lambda_)
    data = _matrix(X)
    labels, c = _labels(y, data.shape[0], n_classes)
    if c < 2:
        raise InsufficientDataError("QDC needs at least 2 classes")
    d = data.shape[1]

    means = np.empty((c, d))
    covariances = np.empty((c, d, d))
    factors: list[np.ndarray] = []
    log_dets = np.empty(c)
    counts = np.bincount(labels, minlength=c)
    for j in range(c):
        members = data[labels == j]
        if members.shape[0] < 2:
            raise InsufficientDataError(
                f"class {j} has {members.shape[0]} samples; QDC needs at least 2"
            )
        means[j] = members.mean(axis=0)
        cov = regularize_covariance(np.cov(members, rowvar=False), eta, lambda_)
        cov = 0.5 * (cov + cov.T)
        try:
            chol = linalg.cholesky(cov, lower=True)
        except linalg.LinAlgError as exc:
            raise SingularCovarianceError(j) from exc
        pivots = np.diag(chol)
        if pivots.min() ** 2 <= d * np.finfo(np.float64).eps * pivots.max() ** 2:
            raise SingularCovarianceError(j)
        covariances[j] = cov
        factors.append(chol)
        log_dets[j] = 2.0 * np.sum(np.log(pivots))

    return QdcModel(
        means=means,
        covariances=covariances,
        cholesky=factors,
        log_dets=log_dets,
        priors=counts / counts.sum(),
        eta=float(eta),
        lambda_=float(lambda_),
    )


def qdc_log_posteriors(model: QdcModel, x: np.ndarray) -> np.ndarray:
    """Unnormalized log prior + log Gaussian density (the shared 2*pi term dropped)."""
    queries, single = _queries(x, model.dim)
    with np.errstate(divide="ignore"):
        log_priors = np.log(model.priors)
    scores = np.empty((queries.shape[0], model.n_classes))
    for j in range(model.n_classes):
        z = linalg.solve_triangular(
            model.cholesky[j], (queries - model.means[j]).T, lower=True
        )
        scores[:, j] = log_priors[j] - 0.5 * (model.log_dets[j] + np.sum(z**2, axis=0))
    return scores[0] if single else scores


def qdc_confidences(model: QdcModel, x: np.ndarray) -> np.ndarray:
    """Posterior probabilities via a max-shifted softmax of the log scores."""
    scores = qdc_log_posteriors(model, x)
    posteriors = softmax(scores, axis=-1)
    return posteriors / posteriors.sum(axis=-1, keepdims=True)


# ---- neighbours ----


def default_knn_grid(n_samples: int, max_k: int = DEFAULT_KNN_MAX_K) -> list[int]:
    """Odd k in [1, max_k], capped at n - 1 (always contains 1)."""
    cap = min(max_k, n_samples - 1)
    return [k for k in range(1, cap + 1, 2)] or [1]


def default_parzen_grid(
    X: np.ndarray,
    size: int = DEFAULT_PARZEN_GRID_SIZE,
    span: tuple[float, float] = DEFAULT_PARZEN_GRID_SPAN,
) -> list[float]:
    """Geometric grid over span x median pairwise training distance."""
    data = _matrix(X)
    pairwise = pdist(data) if data.shape[0] > 1 else np.empty(0)
    scale = float(np.median(pairwise)) if pairwise.size else 1.0
    if not scale > 0:
        scale = 1.0
    return list(np.geomspace(span[0] * scale, span[1] * scale, size))


def _vote_fractions(neighbor_labels: np.ndarray, n_classes: int) -> np.ndarray:
    """(q, k) neighbour labels -> (q, c) vote fractions."""
    q, k = neighbor_labels.shape
    counts = np.zeros((q, n_classes))
    np.add.at(counts, (np.repeat(np.arange(q), k), neighbor_labels.ravel()), 1.0)
    return counts / k


def _parzen_scores(sq_dists: np.ndarray, labels: np.ndarray, n_classes: int, h: float) -> np.ndarray:
    """Per-class log of summed Gaussian kernel weights; -inf for empty classes."""
    log_weights = -sq_dists / (2.0 * h * h)
    scores = np.full((sq_dists.shape[0], n_classes), -np.inf)
    with np.errstate(divide="ignore"):
        for j in range(n_classes):
            members = labels == j
            if members.any():
                scores[:, j] = logsumexp(log_weights[:, members], axis=1)
    return scores


def _normalize_scores(scores: np.ndarray) -> np.ndarray:
    out = np.empty_like(scores)
    finite = np.isfinite(scores).any(axis=1)
    out[~finite] = 1.0 / scores.shape[1]
    if finite.any():
        out[finite] = softmax(scores[finite], axis=1)
    return out / out.sum(axis=1, keepdims=True)


def _argmax_lowest(values: np.ndarray) -> np.ndarray:
    # np.argmax already returns the first maximum
    return np.argmax(values, axis=1)


def train_neighbor(
    X: np.ndarray,
    y: Sequence[int] | np.ndarray,
    mode: NeighborMode = "knn",
    selection_grid: Sequence[float] | None = None,
    n_classes: int | None = None,
) -> NeighborModel:
    """
    Store the training set and pick k (knn) or h (parzen) by leave-one-out.

    Ties in leave-one-out error go to the smallest parameter; neighbour
    distance ties go to the lower training index.
    """
    if mode not in ("knn", "parzen", "nn1"):
        raise InvalidArgumentError(f"unknown neighbour mode {mode!r}")
    data = _matrix(X)
    labels, c = _labels(y, data.shape[0], n_classes)
    counts = np.bincount(labels, minlength=c)
    if c == 0 or (counts == 0).any():
        raise InsufficientDataError("every class needs at least one training sample")
    priors = counts / counts.sum()
    n = data.shape[0]

    if mode == "nn1":
        return NeighborModel(samples=data, labels=labels, n_classes=c, mode="nn1", k=1, priors=priors)

    sq = cdist(data, data, "sqeuclidean")
    np.fill_diagonal(sq, np.inf)
    loo: dict[float, float] = {}

    if mode == "knn":
        grid = sorted(int(k) for k in (default_knn_grid(n) if selection_grid is None else selection_grid))
        if not grid or grid[0] < 1:
            raise InvalidArgumentError("k grid must be nonempty with k >= 1")
        grid = [k for k in grid if k <= max(n - 1, 1)] or [1]
        order = np.argsort(sq, axis=1, kind="stable")
        for k in grid:
            votes = _vote_fractions(labels[order[:, :k]], c)
            loo[float(k)] = float(np.mean(_argmax_lowest(votes) != labels))
        best = min(grid, key=lambda k: (loo[float(k)], k))
        return NeighborModel(
            samples=data, labels=labels, n_classes=c, mode="knn", k=int(best),
            priors=priors, loo_errors=loo,
        )

    grid_h = sorted(float(h) for h in (default_parzen_grid(data) if selection_grid is None else selection_grid))
    if not grid_h or grid_h[0] <= 0:
        raise InvalidArgumentError("h grid must be nonempty with h > 0")
    for h in grid_h:
        scores = _parzen_scores(sq, labels, c, h)
        loo[h] = float(np.mean(_argmax_lowest(_normalize_scores(scores)) != labels))
    best_h = min(grid_h, key=lambda h: (loo[h], h))
    return NeighborModel(
        samples=data, labels=labels, n_classes=c, mode="parzen", k=1, h=best_h,
        priors=priors, loo_errors=loo,
    )


def neighbor_confidences(model: NeighborModel, x: np.ndarray) -> np.ndarray:
    queries, single = _queries(x, model.dim)
    sq = cdist(queries, model.samples, "sqeuclidean")
    if model.mode == "parzen":
        assert model.h is not None
        out = _normalize_scores(_parzen_scores(sq, model.labels, model.n_classes, model.h))
    else:
        k = min(model.k, model.samples.shape[0])
        order = np.argsort(sq, axis=1, kind="stable")[:, :k]
        out = _vote_fractions(model.labels[order], model.n_classes)
    return out[0] if single else out


# ---- uniform interface used by the pipeline ----


class BaseClassifier(Protocol):
    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> "BaseClassifier":  # pragma: no cover - interface
        ...

    def confidences(self, X: np.ndarray) -> np.ndarray:  # pragma: no cover - interface
        ...


@dataclass
class QdcClassifier(BaseClassifier):
    eta: float = 0.0
    lambda_: float = 0.0
    model: QdcModel | None = field(default=None, repr=False)

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> "QdcClassifier":
        self.model = train_qdc(X, y, self.eta, self.lambda_, n_classes)
        return self

    def confidences(self, X: np.ndarray) -> np.ndarray:
        assert self.model is not None, "fit() first"
        return qdc_confidences(self.model, X)


@dataclass
class NeighborClassifier(BaseClassifier):
    mode: NeighborMode = "knn"
    max_k: int = DEFAULT_KNN_MAX_K
    parzen_grid_size: int = DEFAULT_PARZEN_GRID_SIZE
    parzen_grid_span: tuple[float, float] = DEFAULT_PARZEN_GRID_SPAN
    model: NeighborModel | None = field(default=None, repr=False)

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> "NeighborClassifier":
        grid: list[float] | None = None
        if self.mode == "knn":
            grid = [float(k) for k in default_knn_grid(len(X), self.max_k)]
        elif self.mode == "parzen":
            grid = default_parzen_grid(X, self.parzen_grid_size, self.parzen_grid_span)
        self.model = train_neighbor(X, y, self.mode, grid, n_classes)
        return self

    def confidences(self, X: np.ndarray) -> np.ndarray:
        assert self.model is not None, "fit() first"
        return neighbor_confidences(self.model, X)
