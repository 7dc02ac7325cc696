"""
Decision profiles and the rules that aggregate them.

A decision profile stacks the confidence vectors of the m = ns * nd base
classifiers; row i = s + k * ns belongs to scale s of derivative k. The
two-stage topologies reduce it first inside groups (the scales of one
derivative, or the derivatives of one scale) and then across groups.

Every function here also accepts a leading batch axis on raw support
arrays (n, m, c) through the `*_stack` helpers, which the pipeline uses to
score a whole test set at once.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import InsufficientDataError, InvalidArgumentError
from .models import (
    FIXED_RULES,
    STAGE_RULES,
    TOPOLOGIES,
    CombinerSpec,
    DecisionProfile,
    DecisionTemplates,
    Topology,
)

TWO_STAGE_TOPOLOGIES = ("scales_then_derivatives", "derivatives_then_scales")
FUSION_TOPOLOGIES = ("fuse_scales_then_combine", "fuse_derivatives_then_combine")
TEMPLATE_RULE = "dt"


def validate_combiner_spec(spec: CombinerSpec) -> None:
    if spec.topology not in TOPOLOGIES:
        raise InvalidArgumentError(f"unknown topology {spec.topology!r}")
    stage1 = STAGE_RULES + ((TEMPLATE_RULE,) if spec.topology == "one_stage" else ())
    if spec.rule_stage1 not in stage1:
        raise InvalidArgumentError(
            f"rule {spec.rule_stage1!r} is not valid as first stage of {spec.topology}"
        )
    if spec.topology != "one_stage" and spec.rule_stage2 not in STAGE_RULES:
        raise InvalidArgumentError(f"unknown second-stage rule {spec.rule_stage2!r}")


def normalize_rows(supports: np.ndarray) -> np.ndarray:
    """Rescale the last axis to sum 1; all-zero rows become uniform."""
    data = np.asarray(supports, dtype=np.float64)
    if np.any(data < 0) or not np.all(np.isfinite(data)):
        raise InvalidArgumentError("confidences must be finite and nonnegative")
    totals = data.sum(axis=-1, keepdims=True)
    c = data.shape[-1]
    return np.where(totals > 0, data / np.where(totals > 0, totals, 1.0), 1.0 / c)


def build_decision_profile(
    confidence_rows: Sequence[Sequence[float]] | np.ndarray,
    ns: int,
    nd: int,
) -> DecisionProfile:
    try:
        rows = np.asarray(confidence_rows, dtype=np.float64)
    except ValueError as exc:
        raise InvalidArgumentError("confidence rows must share one length") from exc
    if rows.ndim != 2 or rows.shape[1] == 0:
        raise InvalidArgumentError("confidence rows must form an (m, c) matrix")
    if ns < 1 or nd < 1 or rows.shape[0] != ns * nd:
        raise InvalidArgumentError(
            f"expected ns * nd = {ns * nd} rows, got {rows.shape[0]}"
        )
    return DecisionProfile(supports=normalize_rows(rows), ns=ns, nd=nd)


# ---- aggregation rules over axis -2 ----


def _one_hot(labels: np.ndarray, c: int) -> np.ndarray:
    return (labels[..., np.newaxis] == np.arange(c)).astype(np.float64)


def _plurality(values: np.ndarray) -> np.ndarray:
    """Each row votes for its argmax; one-hot of the winning class."""
    c = values.shape[-1]
    counts = _one_hot(np.argmax(values, axis=-1), c).sum(axis=-2)
    return _one_hot(np.argmax(counts, axis=-1), c)


_LOG_TINY = float(np.log(np.finfo(np.float64).tiny))


def _log_product(values: np.ndarray) -> np.ndarray:
    """
    Column products computed as sums of logs.

    A row whose largest product lies below the smallest normal float is
    divided by that largest product instead of flushing to zeros; the
    ranking of the classes is kept. log(0) = -inf, so an exact zero
    still gives exactly 0.
    """
    with np.errstate(divide="ignore"):
        logs = np.log(values).sum(axis=-2)
    top = logs.max(axis=-1, keepdims=True)
    shift = np.where(np.isfinite(top) & (top < _LOG_TINY), top, 0.0)
    return np.exp(logs - shift)


def aggregate(values: np.ndarray, rule: str) -> np.ndarray:
    """Apply `rule` down the columns of (..., n, c) supports."""
    if rule == "min":
        return values.min(axis=-2)
    if rule == "max":
        return values.max(axis=-2)
    if rule == "mean":
        return values.mean(axis=-2)
    if rule == "median":
        return np.median(values, axis=-2)
    if rule == "prod":
        return _log_product(values)
    if rule == "vote":
        return _plurality(values)
    raise InvalidArgumentError(f"unknown combination rule {rule!r}")


def combine_one_stage(dp: DecisionProfile, rule: str) -> np.ndarray:
    if rule not in FIXED_RULES:
        raise InvalidArgumentError(f"unknown fixed rule {rule!r}")
    return aggregate(dp.supports, rule)


def majority_vote(dp: DecisionProfile) -> int:
    return int(np.argmax(_plurality(dp.supports)))


def _grouped(supports: np.ndarray, ns: int, nd: int, topology: Topology) -> np.ndarray:
    lead = supports.shape[:-2]
    c = supports.shape[-1]
    by_derivative = supports.reshape(*lead, nd, ns, c)
    if topology == "scales_then_derivatives":
        return by_derivative
    if topology == "derivatives_then_scales":
        return np.swapaxes(by_derivative, -3, -2)
    raise InvalidArgumentError(f"{topology!r} is not a two-stage topology")


def stage_one_stack(
    supports: np.ndarray, ns: int, nd: int, topology: Topology, rule: str
) -> np.ndarray:
    """
    First-stage group outputs, shape (..., groups, c).

    scales_then_derivatives yields one row per derivative,
    derivatives_then_scales one row per scale.
    """
    if rule not in STAGE_RULES:
        raise InvalidArgumentError(f"unknown first-stage rule {rule!r}")
    return aggregate(_grouped(supports, ns, nd, topology), rule)


def combine_two_stage(dp: DecisionProfile, spec: CombinerSpec) -> np.ndarray:
    if spec.topology not in TWO_STAGE_TOPOLOGIES:
        raise InvalidArgumentError(f"{spec.topology!r} is not a two-stage topology")
    if spec.rule_stage2 not in STAGE_RULES:
        raise InvalidArgumentError(f"unknown second-stage rule {spec.rule_stage2!r}")
    groups = stage_one_stack(dp.supports, dp.ns, dp.nd, spec.topology, spec.rule_stage1)
    return aggregate(groups, spec.rule_stage2)


# ---- decision templates ----


def fit_decision_templates(
    profiles: Sequence[DecisionProfile] | np.ndarray,
    labels: Sequence[int] | np.ndarray,
    n_classes: int,
) -> DecisionTemplates:
    """Template of class j = elementwise mean of the class-j training profiles."""
    stack = _support_stack(profiles)
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (stack.shape[0],):
        raise InvalidArgumentError(f"expected {stack.shape[0]} labels, got shape {y.shape}")
    templates = np.empty((n_classes,) + stack.shape[1:])
    for j in range(n_classes):
        members = stack[y == j]
        if members.shape[0] == 0:
            raise InsufficientDataError(f"no training profile for class {j}")
        templates[j] = members.mean(axis=0)
    return DecisionTemplates(templates=templates)


def _support_stack(profiles: Sequence[DecisionProfile] | np.ndarray) -> np.ndarray:
    if isinstance(profiles, np.ndarray):
        stack = profiles.astype(np.float64, copy=False)
    else:
        stack = np.stack([p.supports for p in profiles]) if len(profiles) else np.empty((0, 0, 0))
    if stack.ndim != 3:
        raise InvalidArgumentError("profiles must stack to (n, m, c)")
    return stack


def template_distances(supports: np.ndarray, templates: DecisionTemplates) -> np.ndarray:
    """Squared Euclidean distance of each (m, c) profile to each template: (..., classes)."""
    data = np.asarray(supports, dtype=np.float64)
    if data.shape[-2:] != templates.templates.shape[1:]:
        raise InvalidArgumentError(
            f"profile shape {data.shape[-2:]} does not match templates "
            f"{templates.templates.shape[1:]}"
        )
    diff = data[..., np.newaxis, :, :] - templates.templates
    return np.square(diff).sum(axis=(-2, -1))


def classify_decision_templates(dp: DecisionProfile, templates: DecisionTemplates) -> int:
    return int(np.argmin(template_distances(dp.supports, templates)))


def argmax_class(mu: Sequence[float] | np.ndarray) -> int:
    values = np.asarray(mu, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise InvalidArgumentError("argmax_class needs a nonempty vector")
    return int(np.argmax(values))


# ---- batched entry point used by the pipeline ----


def combine_stack(
    supports: np.ndarray,
    ns: int,
    nd: int,
    spec: CombinerSpec,
    templates: DecisionTemplates | None = None,
) -> np.ndarray:
    """
    Final supports (n, c) for normalized profiles (n, m, c).

    For the fusion topologies the rows of `supports` are the fused groups
    and only `rule_stage2` applies. Decision templates return negated
    distances so the argmax is the nearest template.
    """
    validate_combiner_spec(spec)
    if spec.topology == "one_stage":
        if spec.rule_stage1 == TEMPLATE_RULE:
            if templates is None:
                raise InvalidArgumentError("decision-template combiner needs fitted templates")
            return -template_distances(supports, templates)
        return aggregate(supports, spec.rule_stage1)
    if spec.topology in FUSION_TOPOLOGIES:
        return aggregate(supports, spec.rule_stage2)
    groups = stage_one_stack(supports, ns, nd, spec.topology, spec.rule_stage1)
    return aggregate(groups, spec.rule_stage2)
