"""
Experiment runner: patch banks -> per-subset PCA -> base classifiers ->
decision profile -> combiner, repeated over a grid of training sizes.
"""

from __future__ import annotations

import asyncio
import hashlib
import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .classifiers import BaseClassifier, NeighborClassifier, QdcClassifier
from .combiners import (
    TEMPLATE_RULE,
    TWO_STAGE_TOPOLOGIES,
    combine_stack,
    fit_decision_templates,
    normalize_rows,
    stage_one_stack,
)
from .config import ExperimentConfig
from .datasets import build_patch_banks, stack_patches, subset_features
from .errors import InvalidArgumentError, SingularCovarianceError
from .features import fit_pca, pca_transform
from .models import (
    CombinerSpec,
    CurveSet,
    FeatureGroup,
    LearningCurve,
    PatchBank,
    RepetitionResult,
    Topology,
    scale_label,
    subset_label,
)
from .scale_space import kernel_bank

logger = logging.getLogger("ss_texture.pipeline")

FUSIONS = ("none", "per_derivative", "per_scale", "all")


def derive_seed(rng_seed: int, size: int, repetition: int) -> int:
    """Stable per-point seed; adding sizes never shifts existing points."""
    digest = hashlib.sha256(f"{rng_seed}:{size}:{repetition}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def class_test_counts(test_size: int, n_classes: int) -> list[int]:
    """Even split of the test set; the remainder goes to the lowest class indices."""
    base, extra = divmod(test_size, n_classes)
    return [base + (1 if j < extra else 0) for j in range(n_classes)]


def feature_groups(derivatives: Sequence[str], ns: int, fusion: str = "none") -> list[FeatureGroup]:
    """
    Base-classifier inputs in decision-profile order.

    none: one group per subset (derivatives outer, scales inner).
    per_derivative: the scales of each derivative concatenated.
    per_scale: the derivatives of each scale concatenated.
    all: every subset in one group.
    """
    if fusion == "none":
        return [
            FeatureGroup(subset_label(d, s), ((d, s),))
            for d in derivatives
            for s in range(ns)
        ]
    if fusion == "per_derivative":
        return [FeatureGroup(d, tuple((d, s) for s in range(ns))) for d in derivatives]
    if fusion == "per_scale":
        return [FeatureGroup(scale_label(s), tuple((d, s) for d in derivatives)) for s in range(ns)]
    if fusion == "all":
        return [FeatureGroup("all", tuple((d, s) for d in derivatives for s in range(ns)))]
    raise InvalidArgumentError(f"unknown fusion {fusion!r}; expected one of {FUSIONS}")


def fusion_for_topology(topology: Topology) -> str:
    if topology == "fuse_scales_then_combine":
        return "per_derivative"
    if topology == "fuse_derivatives_then_combine":
        return "per_scale"
    return "none"


def combiner_label(spec: CombinerSpec) -> str:
    if spec.topology == "one_stage":
        return f"one_stage_{spec.rule_stage1}"
    return f"{spec.topology}_{spec.rule_stage1}_{spec.rule_stage2}"


def make_classifier(config: ExperimentConfig, eta: float, lambda_: float) -> BaseClassifier:
    if config.base_classifier == "qdc":
        return QdcClassifier(eta=eta, lambda_=lambda_)
    return NeighborClassifier(
        mode=config.base_classifier,  # type: ignore[arg-type]
        max_k=config.knn_max_k,
        parzen_grid_size=config.parzen_grid_size,
        parzen_grid_span=(config.parzen_grid_span[0], config.parzen_grid_span[1]),
    )


def error_rate(supports: np.ndarray, labels: np.ndarray) -> float:
    """Misclassification fraction of argmax decisions (ties to the lowest class)."""
    if labels.size == 0:
        return 0.0
    return float(np.mean(np.argmax(supports, axis=-1) != labels))


@dataclass(frozen=True)
class Split:
    train_patches: np.ndarray
    train_labels: np.ndarray
    test_patches: np.ndarray
    test_labels: np.ndarray
    train_picks: list[np.ndarray]   # per class, indices into bank.train
    test_picks: list[np.ndarray]    # per class, indices into bank.test


class ExperimentRunner:
    """
    Runs one experiment configuration; patch banks are built once and
    shared read-only by every repetition.
    """

    def __init__(
        self,
        config: ExperimentConfig,
        banks: list[PatchBank] | None = None,
        fusion: str | None = None,
        combiner: CombinerSpec | None = None,
        name: str | None = None,
    ) -> None:
        self.config = config.validate()
        self.combiner = combiner if combiner is not None else config.combiner
        self.fusion = fusion if fusion is not None else fusion_for_topology(self.combiner.topology)
        self.groups = feature_groups(config.derivatives, config.ns, self.fusion)
        self.kernels = kernel_bank(config.sigmas, config.derivatives, config.truncation)
        self._banks = banks
        self._name = name

    @property
    def banks(self) -> list[PatchBank]:
        if self._banks is None:
            self._banks = build_patch_banks(self.config)
        return self._banks

    @property
    def n_classes(self) -> int:
        return len(self.banks)

    @property
    def name(self) -> str:
        if self._name is not None:
            return self._name
        if self.fusion != fusion_for_topology(self.combiner.topology):
            return f"cfs_{self.fusion}"
        return combiner_label(self.combiner)

    def stage_one_labels(self) -> list[str]:
        if self.combiner.topology == "scales_then_derivatives":
            return list(self.config.derivatives)
        if self.combiner.topology == "derivatives_then_scales":
            return [scale_label(s) for s in range(self.config.ns)]
        return []

    # ---- Step 1: draw training and test sets ----

    def check_sizes(self, training_size: int) -> None:
        for bank in self.banks:
            if training_size > len(bank.train):
                raise InvalidArgumentError(
                    f"training size {training_size} exceeds the {len(bank.train)} "
                    f"training patches of {bank.name}"
                )
        for bank, count in zip(self.banks, class_test_counts(self.config.test_size, self.n_classes)):
            if count > len(bank.test):
                raise InvalidArgumentError(
                    f"test set needs {count} patches of {bank.name}, only {len(bank.test)} exist"
                )

    def draw_split(self, training_size: int, seed: int) -> Split:
        self.check_sizes(training_size)
        rng = np.random.default_rng(seed)
        counts = class_test_counts(self.config.test_size, self.n_classes)
        train_picks: list[np.ndarray] = []
        test_picks: list[np.ndarray] = []
        for bank, count in zip(self.banks, counts):
            train_picks.append(rng.permutation(len(bank.train))[:training_size])
            test_picks.append(rng.permutation(len(bank.test))[:count])
        train_patches, train_labels = stack_patches(self.banks, train_picks, "train")
        test_patches, test_labels = stack_patches(self.banks, test_picks, "test")
        return Split(train_patches, train_labels, test_patches, test_labels, train_picks, test_picks)

    # ---- Step 2: per-subset PCA, concatenated inside a group ----

    def group_features(self, group: FeatureGroup, split: Split) -> tuple[np.ndarray, np.ndarray]:
        cfg = self.config
        train_parts: list[np.ndarray] = []
        test_parts: list[np.ndarray] = []
        for derivative_id, s in group.members:
            kernel = self.kernels[(derivative_id, s)]
            X_train = subset_features(
                split.train_patches, kernel, cfg.crop_sizes[s], cfg.subsample_strides[s], cfg.boundary
            )
            X_test = subset_features(
                split.test_patches, kernel, cfg.crop_sizes[s], cfg.subsample_strides[s], cfg.boundary
            )
            pca = fit_pca(X_train, cfg.pca_fraction)
            logger.debug(
                "%s: %d of %d PCA dimensions (%.3f variance)",
                subset_label(derivative_id, s), pca.n_components, pca.dim, pca.explained_fraction,
            )
            train_parts.append(pca_transform(pca, X_train))
            test_parts.append(pca_transform(pca, X_test))
        return np.hstack(train_parts), np.hstack(test_parts)

    # ---- Step 3: one base classifier per group ----

    def fit_group(self, group: FeatureGroup, U_train: np.ndarray, y_train: np.ndarray) -> BaseClassifier:
        cfg = self.config
        scales = sorted({s for _, s in group.members})
        eta = max(cfg.reg_eta[s] for s in scales)
        lambda_ = max(cfg.reg_lambda[s] for s in scales)
        try:
            return make_classifier(cfg, eta, lambda_).fit(U_train, y_train, self.n_classes)
        except SingularCovarianceError as exc:
            eps = cfg.singular_retry_epsilon
            if eps is None:
                raise exc.with_subset(group.label) from exc
            logger.warning("%s: singular covariance, retrying with lambda=%g", group.label, eps)
            retry_eta = eta if eta + eps < 1.0 else 0.0
            try:
                return make_classifier(cfg, retry_eta, eps).fit(U_train, y_train, self.n_classes)
            except SingularCovarianceError as again:
                raise again.with_subset(group.label) from again

    # ---- Step 4: decision profiles and the combiner ----

    def run_repetition(
        self,
        training_size: int,
        seed: int,
        tolerate_singular: bool = False,
    ) -> RepetitionResult:
        """
        Error of the combined classifier on one train/test draw, plus the
        error of every base classifier and first-stage group.

        With `tolerate_singular` a singular covariance is logged and the
        combined error recorded at chance level 1 - 1/c; otherwise it is
        raised naming the subset.
        """
        split = self.draw_split(training_size, seed)
        c = self.n_classes
        if c == 1:
            return RepetitionResult(
                error=0.0,
                subset_errors={g.label: 0.0 for g in self.groups},
                group_errors={label: 0.0 for label in self.stage_one_labels()},
            )

        chance = 1.0 - 1.0 / c
        labels = split.test_labels
        test_supports = np.full((len(labels), len(self.groups), c), 1.0 / c)
        train_supports = None
        if self.combiner.topology == "one_stage" and self.combiner.rule_stage1 == TEMPLATE_RULE:
            train_supports = np.full((len(split.train_labels), len(self.groups), c), 1.0 / c)

        result = RepetitionResult(error=0.0)
        for i, group in enumerate(self.groups):
            U_train, U_test = self.group_features(group, split)
            result.dims[group.label] = int(U_train.shape[1])
            try:
                classifier = self.fit_group(group, U_train, split.train_labels)
            except SingularCovarianceError as exc:
                if not tolerate_singular:
                    raise
                logger.warning("%s; recording chance level for this repetition", exc)
                result.singular = result.singular or group.label
                result.subset_errors[group.label] = chance
                continue
            test_supports[:, i] = normalize_rows(classifier.confidences(U_test))
            if train_supports is not None:
                train_supports[:, i] = normalize_rows(classifier.confidences(U_train))
            result.subset_errors[group.label] = error_rate(test_supports[:, i], labels)

        if result.singular is not None:
            result.error = chance
            result.group_errors = {label: chance for label in self.stage_one_labels()}
            return result

        templates = None
        if train_supports is not None:
            templates = fit_decision_templates(train_supports, split.train_labels, c)
        ns, nd = self.config.ns, self.config.nd
        mu = combine_stack(test_supports, ns, nd, self.combiner, templates)
        result.error = error_rate(mu, labels)
        if self.combiner.topology in TWO_STAGE_TOPOLOGIES:
            stage = stage_one_stack(test_supports, ns, nd, self.combiner.topology, self.combiner.rule_stage1)
            for g, label in enumerate(self.stage_one_labels()):
                result.group_errors[label] = error_rate(stage[:, g], labels)
        return result

    async def run_curve(self) -> CurveSet:
        # 在进入线程池之前构建 patch bank，并检查最大的训练集大小
        self.check_sizes(max(self.config.training_sizes))
        return await sweep(
            self.config,
            lambda size, seed: self.run_repetition(size, seed, tolerate_singular=True),
            self.name,
        )


# ---- learning curves ----


def _mean_dims(results: Sequence[RepetitionResult], label: str) -> float:
    values = [r.dims[label] for r in results if label in r.dims]
    return float(np.mean(values)) if values else float("nan")


def assemble_curves(
    name: str,
    sizes: Sequence[int],
    repetitions: int,
    results: Sequence[RepetitionResult],
) -> CurveSet:
    """`results` is ordered size-major: results[i * repetitions + r]."""
    grid = [list(results[i * repetitions : (i + 1) * repetitions]) for i in range(len(sizes))]
    combined = LearningCurve(
        name=name,
        sizes=list(sizes),
        errors=np.array([[r.error for r in row] for row in grid]),
    )
    curves = CurveSet(combined=combined)
    subset_labels = list(dict.fromkeys(k for r in results for k in r.subset_errors))
    group_labels = list(dict.fromkeys(k for r in results for k in r.group_errors))
    for label in subset_labels:
        curves.subsets[label] = LearningCurve(
            name=label,
            sizes=list(sizes),
            errors=np.array([[r.subset_errors.get(label, np.nan) for r in row] for row in grid]),
        )
        curves.dims[label] = [_mean_dims(row, label) for row in grid]
    for label in group_labels:
        curves.groups[label] = LearningCurve(
            name=label,
            sizes=list(sizes),
            errors=np.array([[r.group_errors.get(label, np.nan) for r in row] for row in grid]),
        )
    return curves


async def sweep(
    config: ExperimentConfig,
    evaluate: Callable[[int, int], RepetitionResult],
    name: str,
) -> CurveSet:
    """
    Evaluate every (training size, repetition) point, at most
    `config.threads` at a time; results are collected in grid order.
    """
    # 限制同时运行的线程数，与 threads 配置一致
    semaphore = asyncio.Semaphore(config.threads)

    async def run_point(size: int, repetition: int) -> RepetitionResult:
        seed = derive_seed(config.rng_seed, size, repetition)
        async with semaphore:
            result = await asyncio.to_thread(evaluate, size, seed)
        logger.info(
            "%s: size=%d rep=%d/%d error=%.4f",
            name, size, repetition + 1, config.repetitions, result.error,
        )
        return result

    tasks = [
        run_point(size, repetition)
        for size in config.training_sizes
        for repetition in range(config.repetitions)
    ]
    # gather 保持任务提交顺序，因此结果按 size-major 排列
    results = await asyncio.gather(*tasks)
    return assemble_curves(name, config.training_sizes, config.repetitions, results)


def run_pipeline_once(config: ExperimentConfig, training_size: int, repetition_seed: int) -> float:
    return ExperimentRunner(config).run_repetition(training_size, repetition_seed).error


async def run_learning_curve_async(config: ExperimentConfig, runner: ExperimentRunner | None = None) -> CurveSet:
    runner = runner if runner is not None else ExperimentRunner(config)
    logger.info(
        "learning curve %s: %d sizes x %d repetitions, %d classes",
        runner.name, len(config.training_sizes), config.repetitions, runner.n_classes,
    )
    return await runner.run_curve()


def run_learning_curve(config: ExperimentConfig) -> CurveSet:
    return asyncio.run(run_learning_curve_async(config))
