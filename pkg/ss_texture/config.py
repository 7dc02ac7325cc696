from __future__ import annotations

import math

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from .combiners import validate_combiner_spec
from .errors import ConfigError, InvalidArgumentError
from .models import DEFAULT_DERIVATIVES, DERIVATIVE_ORDERS, CombinerSpec
from .scale_space import BOUNDARY_MODES, DEFAULT_SIGMAS, DEFAULT_TRUNCATION

BASE_CLASSIFIERS = ("qdc", "knn", "parzen")
DEFAULT_TRAINING_SIZES = (10, 20, 40, 60, 100, 150, 200, 300, 500, 700, 1000, 1500)
RECIPE_NOISE = 4.0


@dataclass(frozen=True)
class SynthSpec:
    kind: str
    params: dict[str, float] = field(default_factory=dict)
    seed: int = 0


def default_synthetic_recipe() -> list[SynthSpec]:
    """
    Two grating orientations, a checkerboard and smoothed noise.

    White noise of four times the pattern amplitude is added to every class
    so single subsets make errors; the gratings are the confusable pair.
    """
    return [
        SynthSpec("sinusoid", {"wavelength": 8.0, "angle": 0.0, "noise": RECIPE_NOISE}, seed=1),
        SynthSpec("sinusoid", {"wavelength": 8.0, "angle": math.pi / 2, "noise": RECIPE_NOISE}, seed=2),
        SynthSpec("checkerboard", {"cell": 8.0, "noise": RECIPE_NOISE}, seed=3),
        SynthSpec("filtered_noise", {"sigma": 2.0, "noise": RECIPE_NOISE}, seed=4),
    ]


@dataclass
class ExperimentConfig:
    # data
    class_images: list[Path] = field(default_factory=list)  # empty -> synthetic recipe
    synthetic: list[SynthSpec] = field(default_factory=default_synthetic_recipe)
    synthetic_size: int = 640

    # scale space and patches
    sigmas: list[float] = field(default_factory=lambda: list(DEFAULT_SIGMAS))
    derivatives: list[str] = field(default_factory=lambda: list(DEFAULT_DERIVATIVES))
    truncation: float = DEFAULT_TRUNCATION
    boundary: str = "mirror"
    patch_size: int = 32
    patch_stride: int = 10
    crop_sizes: list[int] = field(default_factory=lambda: [18, 24, 30])
    subsample_strides: list[int] = field(default_factory=lambda: [1, 1, 1])

    # features and base classifiers, one regularization entry per scale
    pca_fraction: float = 0.95
    reg_eta: list[float] = field(default_factory=lambda: [0.01, 0.0, 0.0])
    reg_lambda: list[float] = field(default_factory=lambda: [0.01, 0.0, 0.0])
    singular_retry_epsilon: float | None = None
    base_classifier: str = "qdc"
    knn_max_k: int = 25
    parzen_grid_size: int = 16
    parzen_grid_span: list[float] = field(default_factory=lambda: [0.05, 5.0])
    combiner: CombinerSpec = field(default_factory=CombinerSpec)

    # learning curve
    training_sizes: list[int] = field(default_factory=lambda: list(DEFAULT_TRAINING_SIZES))
    test_size: int = 900
    repetitions: int = 5
    rng_seed: int = 0
    threads: int = 1

    @property
    def ns(self) -> int:
        return len(self.sigmas)

    @property
    def nd(self) -> int:
        return len(self.derivatives)

    @property
    def n_classes(self) -> int:
        return len(self.class_images) if self.class_images else len(self.synthetic)

    def validate(self) -> "ExperimentConfig":
        """Raise ConfigError on the first violated constraint; returns self."""
        _check(self.n_classes >= 1, "at least one class image or synthetic texture is required")
        _check(self.synthetic_size >= 64, "synthetic_size must be >= 64")
        _check(len(self.sigmas) >= 1, "sigmas must not be empty")
        _check(all(s > 0 for s in self.sigmas), "sigmas must be positive")
        _check(
            all(b > a for a, b in zip(self.sigmas, self.sigmas[1:])),
            "sigmas must be strictly increasing",
        )
        _check(len(self.derivatives) >= 1, "derivatives must not be empty")
        unknown = [d for d in self.derivatives if d not in DERIVATIVE_ORDERS]
        _check(not unknown, f"unknown derivatives {unknown}; expected {list(DERIVATIVE_ORDERS)}")
        _check(len(set(self.derivatives)) == len(self.derivatives), "derivatives repeat")
        _check(self.truncation > 0, "truncation must be positive")
        _check(self.boundary in BOUNDARY_MODES, f"boundary must be one of {BOUNDARY_MODES}")
        _check(self.patch_size >= 1 and self.patch_stride >= 1, "patch_size and patch_stride must be >= 1")

        for name in ("crop_sizes", "subsample_strides", "reg_eta", "reg_lambda"):
            _check(
                len(getattr(self, name)) == self.ns,
                f"{name} needs one entry per scale ({self.ns}), got {len(getattr(self, name))}",
            )
        for crop in self.crop_sizes:
            _check(
                1 <= crop <= self.patch_size and (self.patch_size - crop) % 2 == 0,
                f"crop {crop} must fit centrally in a {self.patch_size}-pixel patch",
            )
        _check(all(s >= 1 for s in self.subsample_strides), "subsample_strides must be >= 1")
        _check(0 < self.pca_fraction <= 1, "pca_fraction must lie in (0, 1]")
        for eta, lam in zip(self.reg_eta, self.reg_lambda):
            _check(eta >= 0 and lam >= 0 and eta + lam < 1, "need reg_eta, reg_lambda >= 0 and their sum < 1")
        if self.singular_retry_epsilon is not None:
            _check(0 < self.singular_retry_epsilon < 1, "singular_retry_epsilon must lie in (0, 1)")

        _check(self.base_classifier in BASE_CLASSIFIERS, f"base_classifier must be one of {BASE_CLASSIFIERS}")
        _check(self.knn_max_k >= 1, "knn_max_k must be >= 1")
        _check(self.parzen_grid_size >= 1, "parzen_grid_size must be >= 1")
        _check(
            len(self.parzen_grid_span) == 2 and 0 < self.parzen_grid_span[0] <= self.parzen_grid_span[1],
            "parzen_grid_span must be [low, high] with 0 < low <= high",
        )
        try:
            validate_combiner_spec(self.combiner)
        except InvalidArgumentError as exc:
            raise ConfigError(f"combiner: {exc}") from exc

        _check(len(self.training_sizes) >= 1, "training_sizes must not be empty")
        _check(all(s >= 1 for s in self.training_sizes), "training sizes must be >= 1")
        _check(
            all(b > a for a, b in zip(self.training_sizes, self.training_sizes[1:])),
            "training_sizes must be strictly increasing",
        )
        _check(self.test_size >= 1, "test_size must be >= 1")
        _check(self.repetitions >= 1, "repetitions must be >= 1")
        _check(self.threads >= 1, "threads must be >= 1")
        return self


def _check(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


# ---- loading and overrides ----

# field name -> coercion kind; drives both the TOML loader and the CLI flags
FIELD_KINDS: dict[str, str] = {
    "class_images": "paths",
    "synthetic_size": "int",
    "sigmas": "floats",
    "derivatives": "strs",
    "truncation": "float",
    "boundary": "str",
    "patch_size": "int",
    "patch_stride": "int",
    "crop_sizes": "ints",
    "subsample_strides": "ints",
    "pca_fraction": "float",
    "reg_eta": "floats",
    "reg_lambda": "floats",
    "singular_retry_epsilon": "optional_float",
    "base_classifier": "str",
    "knn_max_k": "int",
    "parzen_grid_size": "int",
    "parzen_grid_span": "floats",
    "training_sizes": "ints",
    "test_size": "int",
    "repetitions": "int",
    "rng_seed": "int",
    "threads": "int",
}
COMBINER_KEYS = ("topology", "rule_stage1", "rule_stage2")


def _split(value: Any) -> list[Any]:
    if isinstance(value, str):
        return [part.strip() for part in value.split(",") if part.strip()]
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


def coerce_field(name: str, value: Any) -> Any:
    """Convert a TOML value or a flag string to the field's Python type."""
    kind = FIELD_KINDS[name]
    try:
        if kind == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if kind == "float":
            return float(value)
        if kind == "optional_float":
            if value is None or (isinstance(value, str) and value.lower() in ("", "none", "null")):
                return None
            return float(value)
        if kind == "str":
            return str(value)
        if kind == "ints":
            return [int(v) for v in _split(value)]
        if kind == "floats":
            return [float(v) for v in _split(value)]
        if kind == "strs":
            return [str(v) for v in _split(value)]
        if kind == "paths":
            return [Path(v) for v in _split(value)]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value for {name}: {value!r}") from exc
    raise ConfigError(f"unknown field kind {kind!r}")  # pragma: no cover - table is static


def _synth_spec(entry: Any, index: int) -> SynthSpec:
    if not isinstance(entry, Mapping):
        raise ConfigError(f"synthetic[{index}] must be a table")
    unknown = set(entry) - {"kind", "params", "seed"}
    if unknown:
        raise ConfigError(f"synthetic[{index}] has unknown keys {sorted(unknown)}")
    if "kind" not in entry:
        raise ConfigError(f"synthetic[{index}] needs a kind")
    params = entry.get("params", {})
    if not isinstance(params, Mapping):
        raise ConfigError(f"synthetic[{index}].params must be a table")
    return SynthSpec(kind=str(entry["kind"]), params=dict(params), seed=int(entry.get("seed", index)))


def config_from_mapping(data: Mapping[str, Any], base: ExperimentConfig | None = None) -> ExperimentConfig:
    config = base if base is not None else ExperimentConfig()
    changes: dict[str, Any] = {}
    for key, value in data.items():
        if key == "combiner":
            if not isinstance(value, Mapping):
                raise ConfigError("combiner must be a table")
            unknown = set(value) - set(COMBINER_KEYS)
            if unknown:
                raise ConfigError(f"combiner has unknown keys {sorted(unknown)}")
            changes["combiner"] = replace(config.combiner, **{k: str(v) for k, v in value.items()})
        elif key == "synthetic":
            if not isinstance(value, list):
                raise ConfigError("synthetic must be an array of tables")
            changes["synthetic"] = [_synth_spec(entry, i) for i, entry in enumerate(value)]
        elif key in FIELD_KINDS:
            changes[key] = coerce_field(key, value)
        else:
            raise ConfigError(f"unknown configuration key {key!r}")
    return replace(config, **changes)


def load_config(path: Path | str | None, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Read a TOML experiment file on top of `base` (defaults when None)."""
    if path is None:
        return base if base is not None else ExperimentConfig()
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    config = config_from_mapping(data, base)
    # relative image paths resolve against the config file
    config.class_images = [p if p.is_absolute() else path.parent / p for p in config.class_images]
    return config


def apply_overrides(config: ExperimentConfig, overrides: Mapping[str, Any]) -> ExperimentConfig:
    """
    Apply flag values (None means "not given"). Keys are field names, plus
    `combiner_topology`, `combiner_rule_stage1` and `combiner_rule_stage2`.
    """
    flat: dict[str, Any] = {}
    combiner: dict[str, str] = {}
    for key, value in overrides.items():
        if value is None:
            continue
        if key.startswith("combiner_") and key[len("combiner_"):] in COMBINER_KEYS:
            combiner[key[len("combiner_"):]] = value
        else:
            flat[key] = value
    if combiner:
        flat["combiner"] = combiner
    return config_from_mapping(flat, config)
