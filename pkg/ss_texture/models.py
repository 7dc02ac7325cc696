from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, get_args

import numpy as np

# Derivative id -> (order_x, order_y); x runs along columns, y along rows.
DERIVATIVE_ORDERS: dict[str, tuple[int, int]] = {
    "L": (0, 0),
    "Lx": (1, 0),
    "Ly": (0, 1),
    "Lxx": (2, 0),
    "Lxy": (1, 1),
    "Lyy": (0, 2),
}
DEFAULT_DERIVATIVES: tuple[str, ...] = tuple(DERIVATIVE_ORDERS)

Topology = Literal[
    "one_stage",
    "scales_then_derivatives",
    "derivatives_then_scales",
    "fuse_scales_then_combine",
    "fuse_derivatives_then_combine",
]
TOPOLOGIES: tuple[str, ...] = get_args(Topology)
FIXED_RULES: tuple[str, ...] = ("min", "prod", "median", "mean", "max")
STAGE_RULES: tuple[str, ...] = FIXED_RULES + ("vote",)


def scale_label(scale_index: int) -> str:
    return f"S{scale_index + 1}"


def subset_label(derivative_id: str, scale_index: int) -> str:
    """Name of one (derivative, scale) feature subset, e.g. ``Lxx_S2``."""
    return f"{derivative_id}_{scale_label(scale_index)}"


@dataclass(frozen=True)
class Image:
    pixels: np.ndarray              # 2D float64, rows x cols
    name: str | None = None         # file stem or synthetic kind

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])


@dataclass(frozen=True)
class Kernel2D:
    values: np.ndarray              # (2r+1) x (2r+1), rows = y, cols = x
    sigma: float
    order_x: int
    order_y: int
    profile_x: np.ndarray           # 1D factor along columns
    profile_y: np.ndarray           # 1D factor along rows

    @property
    def radius(self) -> int:
        return (self.values.shape[0] - 1) // 2


@dataclass(frozen=True)
class NJetResponse:
    responses: dict[tuple[str, int], np.ndarray]
    sigmas: tuple[float, ...]
    derivatives: tuple[str, ...] = DEFAULT_DERIVATIVES

    def __getitem__(self, key: tuple[str, int]) -> np.ndarray:
        return self.responses[key]

    def __len__(self) -> int:
        return len(self.responses)


@dataclass(frozen=True)
class PatchGrid:
    patches: list[np.ndarray]
    origins: list[tuple[int, int]]  # (row, col) top-left, row-major order
    source_half: Literal["upper", "lower"]

    def __len__(self) -> int:
        return len(self.patches)

    def stack(self) -> np.ndarray:
        return np.stack(self.patches) if self.patches else np.empty((0, 0, 0))


@dataclass(frozen=True)
class SubsetVector:
    values: np.ndarray
    derivative_id: str
    scale_index: int
    crop_size: int
    subsample_stride: int = 1


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray                # (d,)
    components: np.ndarray          # (k, d), orthonormal rows
    eigenvalues: np.ndarray         # (k,), nonincreasing
    retained_fraction: float        # requested fraction
    explained_fraction: float       # achieved fraction of total variance

    @property
    def n_components(self) -> int:
        return int(self.components.shape[0])

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])


@dataclass(frozen=True)
class QdcModel:
    means: np.ndarray               # (c, d)
    covariances: np.ndarray         # (c, d, d), regularized
    cholesky: list[np.ndarray]      # lower factors of the regularized covariances
    log_dets: np.ndarray            # (c,)
    priors: np.ndarray              # (c,)
    eta: float = 0.0
    lambda_: float = 0.0

    @property
    def n_classes(self) -> int:
        return int(self.means.shape[0])

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])


@dataclass(frozen=True)
class NeighborModel:
    samples: np.ndarray             # (n, d)
    labels: np.ndarray              # (n,) ints in [0, c)
    n_classes: int
    mode: Literal["knn", "parzen", "nn1"]
    k: int = 1
    h: float | None = None
    priors: np.ndarray | None = None
    loo_errors: dict[float, float] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return int(self.samples.shape[1])


@dataclass(frozen=True)
class DecisionProfile:
    """
    m x c supports; row i = s + k * ns holds scale s of derivative k.
    """

    supports: np.ndarray
    ns: int
    nd: int

    @property
    def m(self) -> int:
        return int(self.supports.shape[0])

    @property
    def c(self) -> int:
        return int(self.supports.shape[1])

    def row(self, scale_index: int, derivative_index: int) -> np.ndarray:
        return self.supports[scale_index + derivative_index * self.ns]

    def by_derivative(self) -> np.ndarray:
        """(nd, ns, c): the scale groups of each derivative."""
        return self.supports.reshape(self.nd, self.ns, self.c)

    def by_scale(self) -> np.ndarray:
        """(ns, nd, c): the derivative groups of each scale."""
        return self.by_derivative().transpose(1, 0, 2)


@dataclass(frozen=True)
class CombinerSpec:
    topology: Topology = "derivatives_then_scales"
    rule_stage1: str = "mean"
    rule_stage2: str = "mean"


@dataclass(frozen=True)
class DecisionTemplates:
    templates: np.ndarray           # (c, m, c)

    @property
    def n_classes(self) -> int:
        return int(self.templates.shape[0])


@dataclass
class LearningCurve:
    name: str
    sizes: list[int]
    errors: np.ndarray              # (len(sizes), repetitions)

    @property
    def mean(self) -> np.ndarray:
        return self.errors.mean(axis=1)

    @property
    def std(self) -> np.ndarray:
        return self.errors.std(axis=1)

    @property
    def repetitions(self) -> int:
        return int(self.errors.shape[1])


@dataclass
class CurveSet:
    """
    Everything one learning-curve experiment produces.

    `subsets` holds one curve per single base classifier, `groups` one per
    first-stage group, and `dims` the mean retained PCA dimension per
    subset (rows follow `sizes`).
    """

    combined: LearningCurve
    subsets: dict[str, LearningCurve] = field(default_factory=dict)
    groups: dict[str, LearningCurve] = field(default_factory=dict)
    dims: dict[str, list[float]] = field(default_factory=dict)

    def best_subset_mean(self) -> np.ndarray:
        if not self.subsets:
            return np.full(len(self.combined.sizes), np.nan)
        return np.min(np.stack([c.mean for c in self.subsets.values()]), axis=0)


@dataclass(frozen=True)
class PatchBank:
    """Preprocessed patches of one class; origins are (row, col) in full-image coordinates."""

    name: str
    train: np.ndarray               # (n_train, P, P) from the upper half
    test: np.ndarray                # (n_test, P, P) from the lower half
    train_origins: list[tuple[int, int]]
    test_origins: list[tuple[int, int]]
    split_row: int                  # first row of the lower half
    degenerate: int = 0


@dataclass(frozen=True)
class FeatureGroup:
    """Feature subsets concatenated into the input of one base classifier."""

    label: str
    members: tuple[tuple[str, int], ...]   # (derivative id, scale index)


@dataclass
class RepetitionResult:
    error: float
    subset_errors: dict[str, float] = field(default_factory=dict)
    group_errors: dict[str, float] = field(default_factory=dict)
    dims: dict[str, int] = field(default_factory=dict)
    singular: str | None = None     # label of the subset that hit a singular covariance
