from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ss_texture.classifiers import (
    NeighborClassifier,
    QdcClassifier,
    default_knn_grid,
    default_parzen_grid,
    neighbor_confidences,
    qdc_confidences,
    qdc_log_posteriors,
    regularize_covariance,
    train_neighbor,
    train_qdc,
)
from ss_texture.errors import InsufficientDataError, InvalidArgumentError, SingularCovarianceError
from ss_texture.models import NeighborModel


def two_blobs(seed: int, n: int = 30, d: int = 3, offset: float = 10.0) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    X = np.vstack([
        rng.standard_normal((n, d)) - offset,
        rng.standard_normal((n, d)) + offset,
    ])
    y = np.repeat([0, 1], n)
    return X, y


def random_spd(seed: int, d: int = 4) -> np.ndarray:
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((d, d))
    return A @ A.T + 0.1 * np.eye(d)


def test_regularization_formula() -> None:
    S = random_spd(0)
    assert np.array_equal(regularize_covariance(S, 0.0, 0.0), S)
    np.testing.assert_allclose(regularize_covariance(np.eye(4), 0.0, 0.5), np.eye(4), atol=1e-15)
    np.testing.assert_allclose(regularize_covariance(np.eye(4), 0.3, 0.2), np.eye(4), atol=1e-15)

    eta, lam = 0.2, 0.3
    expected = (1 - eta - lam) * S + eta * np.diag(np.diag(S)) + lam * np.trace(S) / 4 * np.eye(4)
    np.testing.assert_allclose(regularize_covariance(S, eta, lam), expected, atol=1e-14)
    # trace is preserved
    assert abs(np.trace(regularize_covariance(S, eta, lam)) - np.trace(S)) < 1e-12


def test_qdc_separates_far_classes() -> None:
    X, y = two_blobs(1)
    model = train_qdc(X, y, 0.01, 0.1)
    assert model.n_classes == 2 and model.dim == 3
    np.testing.assert_allclose(model.priors, [0.5, 0.5])
    conf = qdc_confidences(model, np.array([[-10.0] * 3, [10.0] * 3]))
    assert conf[0, 0] > 0.999
    assert conf[1, 1] > 0.999

    single = qdc_confidences(model, np.full(3, 10.0))
    assert single.shape == (2,)


def test_identical_classes_give_uniform_confidence() -> None:
    rng = np.random.default_rng(2)
    samples = rng.standard_normal((20, 2))
    X = np.vstack([samples, samples])
    y = np.repeat([0, 1], 20)
    conf = qdc_confidences(train_qdc(X, y), rng.standard_normal((5, 2)))
    np.testing.assert_allclose(conf, 0.5, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(0.1, 1e3))
def test_qdc_confidences_are_distributions(seed: int, scale: float) -> None:
    X, y = two_blobs(seed % 1000, n=12, offset=1.0)
    model = train_qdc(X, y, 0.05, 0.05)
    rng = np.random.default_rng(seed)
    conf = qdc_confidences(model, scale * rng.standard_normal((8, 3)))
    assert np.all(np.isfinite(conf))
    assert np.all(conf >= 0)
    np.testing.assert_allclose(conf.sum(axis=1), 1.0, atol=1e-12)


def test_common_offset_in_discriminants_keeps_confidences() -> None:
    X, y = two_blobs(5, offset=1.0)
    model = train_qdc(X, y, 0.05, 0.05)
    queries = np.random.default_rng(5).standard_normal((10, 3))
    base_scores = qdc_log_posteriors(model, queries)
    base = qdc_confidences(model, queries)

    shifted_models = (
        (replace(model, priors=model.priors * 1e30), np.log(1e30)),
        (replace(model, log_dets=model.log_dets + 500.0), -250.0),
    )
    for shifted, offset in shifted_models:
        scores = qdc_log_posteriors(shifted, queries)
        np.testing.assert_allclose(scores - base_scores, offset, atol=1e-9)
        conf = qdc_confidences(shifted, queries)
        np.testing.assert_allclose(conf, base, atol=1e-12)
        assert np.array_equal(np.argmax(conf, axis=1), np.argmax(base, axis=1))


def test_far_query_does_not_overflow() -> None:
    X, y = two_blobs(3)
    model = train_qdc(X, y, 0.0, 0.1)
    far = np.full((1, 3), 1e4)
    scores = qdc_log_posteriors(model, far)
    assert np.all(scores < -1e6)
    conf = qdc_confidences(model, far)
    assert np.all(np.isfinite(conf))
    assert conf[0, 1] == pytest.approx(1.0)


def test_qdc_errors() -> None:
    rng = np.random.default_rng(4)
    X = rng.standard_normal((6, 5))
    y = np.repeat([0, 1], 3)
    with pytest.raises(SingularCovarianceError) as info:
        train_qdc(X, y, 0.0, 0.0)
    assert info.value.class_index == 0
    assert "Lx_S1" in str(info.value.with_subset("Lx_S1"))
    # enough shrinkage makes the same data usable
    assert train_qdc(X, y, 0.0, 0.5).n_classes == 2

    with pytest.raises(InsufficientDataError):
        train_qdc(X[:4], [0, 0, 0, 1], 0.0, 0.5)
    with pytest.raises(InsufficientDataError):
        train_qdc(X, np.zeros(6, dtype=int), n_classes=1)
    with pytest.raises(InvalidArgumentError):
        train_qdc(X, y, 0.6, 0.4)
    with pytest.raises(InvalidArgumentError):
        train_qdc(X, y, -0.1, 0.0)
    with pytest.raises(InvalidArgumentError):
        train_qdc(X, y[:5])
    model = train_qdc(X, y, 0.0, 0.5)
    with pytest.raises(InvalidArgumentError):
        qdc_confidences(model, np.zeros(4))


def test_knn_vote_fractions() -> None:
    model = NeighborModel(
        samples=np.array([[0.0], [0.1], [0.2], [5.0]]),
        labels=np.array([0, 0, 1, 1]),
        n_classes=2,
        mode="knn",
        k=3,
    )
    np.testing.assert_allclose(neighbor_confidences(model, np.array([0.05])), [2 / 3, 1 / 3])


def test_knn_picks_smallest_k_on_separable_data() -> None:
    X, y = two_blobs(5, n=10)
    model = train_neighbor(X, y, "knn")
    assert model.k == 1
    assert model.loo_errors[1.0] == 0.0
    # 19 neighbours: 9 of the own class against 10 of the other
    assert model.loo_errors[19.0] == 1.0


def test_knn_grid() -> None:
    assert default_knn_grid(100) == list(range(1, 26, 2))
    assert default_knn_grid(6) == [1, 3, 5]
    assert default_knn_grid(1) == [1]


def test_nn1_is_one_hot() -> None:
    X, y = two_blobs(6, n=5)
    clf = NeighborClassifier(mode="nn1").fit(X, y, 2)
    assert clf.model is not None and clf.model.k == 1
    conf = clf.confidences(np.array([[-10.0] * 3, [10.0] * 3]))
    np.testing.assert_array_equal(conf, [[1.0, 0.0], [0.0, 1.0]])


def test_parzen_matches_kernel_sums() -> None:
    X = np.array([[0.0], [1.0], [3.0], [3.5], [4.0]])
    y = np.array([0, 0, 1, 1, 1])
    h = 0.8
    model = train_neighbor(X, y, "parzen", selection_grid=[h])
    assert model.h == h

    query = np.array([[2.0], [0.5], [3.3]])
    weights = np.exp(-((query - X.T) ** 2) / (2 * h * h))
    sums = np.column_stack([weights[:, y == 0].sum(axis=1), weights[:, y == 1].sum(axis=1)])
    np.testing.assert_allclose(neighbor_confidences(model, query), sums / sums.sum(axis=1, keepdims=True), atol=1e-12)

    far = neighbor_confidences(model, np.array([[1e6]]))
    np.testing.assert_allclose(far.sum(), 1.0)


def test_parzen_selection_prefers_smallest_tied_width() -> None:
    X, y = two_blobs(7, n=8, d=2)
    grid = default_parzen_grid(X, size=5)
    assert len(grid) == 5 and grid == sorted(grid)
    model = train_neighbor(X, y, "parzen", selection_grid=grid)
    best_error = min(model.loo_errors.values())
    assert model.h == min(h for h, e in model.loo_errors.items() if e == best_error)


def test_neighbor_errors() -> None:
    X, y = two_blobs(8, n=4)
    with pytest.raises(InvalidArgumentError):
        train_neighbor(X, y, "radius")  # type: ignore[arg-type]
    with pytest.raises(InsufficientDataError):
        train_neighbor(X, np.zeros(8, dtype=int), "knn", n_classes=2)
    with pytest.raises(InvalidArgumentError):
        train_neighbor(X, y, "parzen", selection_grid=[0.0, 1.0])
    with pytest.raises(InvalidArgumentError):
        train_neighbor(X, y, "knn", selection_grid=[0])


def test_classifier_wrappers() -> None:
    X, y = two_blobs(9)
    for clf in (QdcClassifier(0.01, 0.1), NeighborClassifier("knn", max_k=7), NeighborClassifier("parzen")):
        conf = clf.fit(X, y, 2).confidences(np.array([[-10.0] * 3, [10.0] * 3]))
        assert conf.shape == (2, 2)
        assert np.argmax(conf, axis=1).tolist() == [0, 1]
