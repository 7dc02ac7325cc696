"""
Reference methods the combined classifier is compared with.

MH: four moments (mean, std, skewness, kurtosis) of every N-jet response,
z-scored and classified by 1-NN. CFS: PCA-reduced subsets concatenated
into one feature space (or into per-derivative / per-scale groups).
"""

from __future__ import annotations

import asyncio
import logging

import numpy as np
from scipy import stats

from .classifiers import NeighborClassifier
from .config import ExperimentConfig
from .errors import InvalidArgumentError
from .models import CombinerSpec, CurveSet, PatchBank, RepetitionResult
from .pipeline import ExperimentRunner, error_rate, sweep
from .scale_space import compute_njet

logger = logging.getLogger("ss_texture.baselines")

MH_MOMENTS = ("mean", "std", "skewness", "kurtosis")
CFS_FUSIONS = ("all", "per_derivative", "per_scale")
_CHUNK = 512
_FLAT_STD = 1e-12


def response_moments(responses: np.ndarray) -> np.ndarray:
    """
    (n, 4) population moments over the pixels of each response in a stack.

    Kurtosis is Pearson's (m4 / m2**2). A flat response has skewness and
    kurtosis 0.
    """
    flat = np.asarray(responses, dtype=np.float64).reshape(responses.shape[0], -1)
    mean = flat.mean(axis=1)
    std = flat.std(axis=1)
    flat_rows = ~(std > _FLAT_STD * np.maximum(1.0, np.abs(flat).max(axis=1)))
    skew = np.zeros_like(mean)
    kurt = np.zeros_like(mean)
    varying = ~flat_rows
    if varying.any():
        skew[varying] = stats.skew(flat[varying], axis=1, bias=True)
        kurt[varying] = stats.kurtosis(flat[varying], axis=1, fisher=False, bias=True)
    std = np.where(flat_rows, 0.0, std)
    return np.column_stack([mean, std, skew, kurt])


def mh_features(patches: np.ndarray, config: ExperimentConfig) -> np.ndarray:
    """
    Moment vector of every patch: 4 values per (derivative, scale), in
    decision-profile order, so 4 * nd * ns entries.
    """
    data = np.asarray(patches, dtype=np.float64)
    if data.ndim == 2:
        data = data[np.newaxis]
    blocks: list[np.ndarray] = []
    for start in range(0, data.shape[0], _CHUNK):
        njet = compute_njet(
            data[start : start + _CHUNK],
            config.sigmas,
            derivatives=config.derivatives,
            truncation=config.truncation,
            boundary=config.boundary,
        )
        blocks.append(
            np.hstack([
                response_moments(njet[(d, s)])
                for d in config.derivatives
                for s in range(config.ns)
            ])
        )
    if not blocks:
        return np.empty((0, len(MH_MOMENTS) * config.nd * config.ns))
    return np.vstack(blocks)


def zscore(train: np.ndarray, test: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Standardize with training statistics; zero-variance columns become 0."""
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    keep = std > 0
    scale = np.where(keep, std, 1.0)
    return (
        np.where(keep, (train - mean) / scale, 0.0),
        np.where(keep, (test - mean) / scale, 0.0),
    )


class MhBaseline:
    def __init__(self, config: ExperimentConfig, runner: ExperimentRunner | None = None) -> None:
        self.config = config
        self.runner = runner if runner is not None else ExperimentRunner(config, name="mh")
        self._features: list[tuple[np.ndarray, np.ndarray]] | None = None

    def bank_features(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """(train, test) moment features of every class, computed once."""
        if self._features is None:
            self._features = [
                (mh_features(bank.train, self.config), mh_features(bank.test, self.config))
                for bank in self.runner.banks
            ]
            logger.info("MH features: %d values per patch", self._features[0][0].shape[1])
        return self._features

    def run_repetition(self, training_size: int, seed: int) -> RepetitionResult:
        split = self.runner.draw_split(training_size, seed)
        if self.runner.n_classes == 1:
            return RepetitionResult(error=0.0)
        features = self.bank_features()
        F_train = np.vstack([features[j][0][idx] for j, idx in enumerate(split.train_picks)])
        F_test = np.vstack([features[j][1][idx] for j, idx in enumerate(split.test_picks)])
        Z_train, Z_test = zscore(F_train, F_test)
        classifier = NeighborClassifier(mode="nn1").fit(Z_train, split.train_labels, self.runner.n_classes)
        return RepetitionResult(error=error_rate(classifier.confidences(Z_test), split.test_labels))

    async def run_curve(self) -> CurveSet:
        self.runner.check_sizes(max(self.config.training_sizes))
        self.bank_features()
        return await sweep(self.config, self.run_repetition, "mh")


def cfs_runner(
    config: ExperimentConfig,
    fusion: str = "all",
    banks: list[PatchBank] | None = None,
) -> ExperimentRunner:
    """
    all: one classifier on every subset. per_derivative / per_scale: one
    classifier per group, combined across groups with `rule_stage2`.
    """
    if fusion not in CFS_FUSIONS:
        raise InvalidArgumentError(f"unknown fusion {fusion!r}; expected one of {CFS_FUSIONS}")
    rule = config.combiner.rule_stage2
    if fusion == "all":
        spec = CombinerSpec("one_stage", "mean", "mean")
    elif fusion == "per_derivative":
        spec = CombinerSpec("fuse_scales_then_combine", "mean", rule)
    else:
        spec = CombinerSpec("fuse_derivatives_then_combine", "mean", rule)
    return ExperimentRunner(config, banks=banks, fusion=fusion, combiner=spec, name=f"cfs_{fusion}")


async def mh_baseline_async(config: ExperimentConfig) -> CurveSet:
    return await MhBaseline(config).run_curve()


async def cfs_baseline_async(config: ExperimentConfig, fusion: str = "all") -> CurveSet:
    return await cfs_runner(config, fusion).run_curve()


def mh_baseline(config: ExperimentConfig) -> CurveSet:
    return asyncio.run(mh_baseline_async(config))


def cfs_baseline(config: ExperimentConfig, fusion: str = "all") -> CurveSet:
    return asyncio.run(cfs_baseline_async(config, fusion))
