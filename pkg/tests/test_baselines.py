import asyncio
import math
from dataclasses import replace

import numpy as np
import pytest

from ss_texture.baselines import (
    MhBaseline,
    cfs_baseline,
    cfs_runner,
    mh_baseline,
    mh_features,
    response_moments,
    zscore,
)
from ss_texture.config import ExperimentConfig, SynthSpec, default_synthetic_recipe
from ss_texture.datasets import build_patch_banks
from ss_texture.errors import InvalidArgumentError
from ss_texture.patching import preprocess_patch
from ss_texture.pipeline import ExperimentRunner


def small_config(**changes) -> ExperimentConfig:
    config = ExperimentConfig(
        synthetic_size=128,
        synthetic=[
            SynthSpec(s.kind, {k: v for k, v in s.params.items() if k != "noise"}, s.seed)
            for s in default_synthetic_recipe()
        ],
        patch_size=16,
        patch_stride=4,
        crop_sizes=[8, 10, 12],
        training_sizes=[20],
        test_size=60,
        repetitions=2,
        reg_eta=[0.01, 0.01, 0.01],
        reg_lambda=[0.1, 0.1, 0.1],
    )
    return replace(config, **changes)


def test_moments_of_a_single_spike() -> None:
    moments = response_moments(np.array([[[0.0, 0.0], [0.0, 1.0]]]))
    mean, std, skew, kurt = moments[0]
    assert mean == pytest.approx(0.25, abs=1e-12)
    assert std == pytest.approx(math.sqrt(3) / 4, abs=1e-12)
    assert skew == pytest.approx(2 / math.sqrt(3), abs=1e-12)
    assert kurt == pytest.approx(7 / 3, abs=1e-12)


def test_moments_match_direct_formulas() -> None:
    rng = np.random.default_rng(0)
    responses = rng.gamma(2.0, size=(5, 8, 8))
    moments = response_moments(responses)
    for row, values in zip(moments, responses.reshape(5, -1)):
        centered = values - values.mean()
        m2 = np.mean(centered**2)
        np.testing.assert_allclose(
            row,
            [values.mean(), math.sqrt(m2), np.mean(centered**3) / m2**1.5, np.mean(centered**4) / m2**2],
            atol=1e-12,
        )


def test_flat_response_has_zero_higher_moments() -> None:
    moments = response_moments(np.full((2, 4, 4), 3.0))
    np.testing.assert_array_equal(moments, [[3.0, 0.0, 0.0, 0.0]] * 2)


def test_preprocessed_patch_is_standardized() -> None:
    rng = np.random.default_rng(1)
    patch, _ = preprocess_patch(rng.uniform(0, 255, (16, 16)))
    mean, std, _, _ = response_moments(patch[np.newaxis])[0]
    assert abs(mean) < 1e-12
    assert std == pytest.approx(1.0, abs=1e-12)


def test_mh_feature_layout() -> None:
    config = small_config()
    rng = np.random.default_rng(2)
    patches = rng.standard_normal((3, 16, 16))
    features = mh_features(patches, config)
    assert features.shape == (3, 72)
    np.testing.assert_allclose(features[1], mh_features(patches[1], config)[0], atol=1e-12)
    assert mh_features(np.empty((0, 16, 16)), config).shape == (0, 72)


def test_zscore_uses_training_statistics() -> None:
    train = np.array([[1.0, 5.0], [3.0, 5.0]])
    test = np.array([[2.0, 9.0], [5.0, 1.0]])
    z_train, z_test = zscore(train, test)
    np.testing.assert_allclose(z_train, [[-1.0, 0.0], [1.0, 0.0]])
    np.testing.assert_allclose(z_test, [[0.0, 0.0], [3.0, 0.0]])


def test_mh_curve() -> None:
    config = small_config()
    baseline = MhBaseline(config)
    curves = asyncio.run(baseline.run_curve())
    assert curves.combined.name == "mh"
    assert curves.combined.errors.shape == (1, 2)
    assert np.all((curves.combined.errors >= 0) & (curves.combined.errors <= 1))
    assert not curves.subsets
    assert baseline.bank_features()[0][0].shape == (377, 72)

    again = mh_baseline(config)
    assert np.array_equal(again.combined.errors, curves.combined.errors)


def test_cfs_groups() -> None:
    config = small_config()
    banks = build_patch_banks(config)

    per_derivative = cfs_runner(config, "per_derivative", banks)
    assert per_derivative.name == "cfs_per_derivative"
    assert len(per_derivative.groups) == 6
    result = per_derivative.run_repetition(20, seed=3)
    assert list(result.subset_errors) == list(config.derivatives)

    per_scale = cfs_runner(config, "per_scale", banks)
    assert [g.label for g in per_scale.groups] == ["S1", "S2", "S3"]

    separate = ExperimentRunner(config, banks=banks).run_repetition(20, seed=3)
    everything = cfs_runner(config, "all", banks).run_repetition(20, seed=3)
    assert everything.dims == {"all": sum(separate.dims.values())}
    assert 0.0 <= everything.error <= 1.0

    with pytest.raises(InvalidArgumentError):
        cfs_runner(config, "pairs", banks)


def test_cfs_curve() -> None:
    curves = cfs_baseline(small_config(repetitions=1), "per_scale")
    assert curves.combined.name == "cfs_per_scale"
    assert list(curves.subsets) == ["S1", "S2", "S3"]
