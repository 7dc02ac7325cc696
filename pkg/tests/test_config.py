import math
from pathlib import Path

import pytest

from ss_texture.config import (
    ExperimentConfig,
    SynthSpec,
    apply_overrides,
    coerce_field,
    config_from_mapping,
    load_config,
)
from ss_texture.errors import ConfigError
from ss_texture.models import CombinerSpec

ROOT = Path(__file__).resolve().parents[1]


def test_defaults_are_valid() -> None:
    config = ExperimentConfig().validate()
    assert (config.ns, config.nd, config.n_classes) == (3, 6, 4)
    assert config.sigmas[2] == pytest.approx(math.sqrt(7.0))
    assert config.crop_sizes == [18, 24, 30]
    assert config.combiner == CombinerSpec("derivatives_then_scales", "mean", "mean")
    assert config.training_sizes[0] == 10 and config.training_sizes[-1] == 1500


def test_shipped_configs_load() -> None:
    synthetic = load_config(ROOT / "configs" / "synthetic.toml").validate()
    assert synthetic == ExperimentConfig()

    brodatz = load_config(ROOT / "configs" / "brodatz.toml").validate()
    assert brodatz.n_classes == 4
    assert brodatz.class_images[0] == ROOT / "configs" / "brodatz" / "D4.pgm"
    assert brodatz.threads == 4


def test_toml_file(tmp_path: Path) -> None:
    path = tmp_path / "exp.toml"
    path.write_text(
        'class_images = ["a.pgm", "/abs/b.pgm"]\n'
        "training_sizes = [10, 20]\n"
        "pca_fraction = 0.9\n"
        "singular_retry_epsilon = 0.001\n"
        "[combiner]\n"
        'topology = "one_stage"\n'
        'rule_stage1 = "dt"\n',
        encoding="utf-8",
    )
    config = load_config(path).validate()
    assert config.class_images == [tmp_path / "a.pgm", Path("/abs/b.pgm")]
    assert config.training_sizes == [10, 20]
    assert config.pca_fraction == 0.9
    assert config.singular_retry_epsilon == 0.001
    assert config.combiner == CombinerSpec("one_stage", "dt", "mean")


def test_load_errors(tmp_path: Path) -> None:
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("sigmas = [1.0,\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(bad)
    with pytest.raises(ConfigError):
        config_from_mapping({"sigma": [1.0]})
    with pytest.raises(ConfigError):
        config_from_mapping({"combiner": {"topology": "one_stage", "rule": "mean"}})
    with pytest.raises(ConfigError):
        config_from_mapping({"synthetic": [{"kind": "sinusoid", "colour": 1}]})
    with pytest.raises(ConfigError):
        config_from_mapping({"patch_size": "large"})


def test_synthetic_entries() -> None:
    config = config_from_mapping({
        "synthetic": [
            {"kind": "blobs", "params": {"sigma": 3.0}, "seed": 9},
            {"kind": "checkerboard"},
        ]
    })
    assert config.synthetic == [SynthSpec("blobs", {"sigma": 3.0}, 9), SynthSpec("checkerboard", {}, 1)]
    assert config.n_classes == 2


def test_flag_overrides() -> None:
    base = ExperimentConfig()
    config = apply_overrides(base, {
        "training_sizes": "10,100,1000",
        "sigmas": "1, 2",
        "crop_sizes": "18,24",
        "subsample_strides": "1,1",
        "reg_eta": "0.01,0.01",
        "reg_lambda": "0.1,0.1",
        "rng_seed": "7",
        "threads": None,
        "singular_retry_epsilon": "none",
        "combiner_topology": "scales_then_derivatives",
        "combiner_rule_stage2": "prod",
    }).validate()
    assert config.training_sizes == [10, 100, 1000]
    assert config.sigmas == [1.0, 2.0]
    assert config.rng_seed == 7
    assert config.threads == 1
    assert config.singular_retry_epsilon is None
    assert config.combiner == CombinerSpec("scales_then_derivatives", "mean", "prod")
    # the base is left untouched
    assert base.training_sizes[0] == 10 and len(base.training_sizes) == 12


def test_coerce_field() -> None:
    assert coerce_field("derivatives", "L, Lx") == ["L", "Lx"]
    assert coerce_field("class_images", "a.pgm,b.pgm") == [Path("a.pgm"), Path("b.pgm")]
    assert coerce_field("repetitions", 3.0) == 3
    with pytest.raises(ConfigError):
        coerce_field("repetitions", 2.5)


@pytest.mark.parametrize(
    "changes",
    [
        {"crop_sizes": [18, 24, 31]},
        {"crop_sizes": [18, 24, 34]},
        {"crop_sizes": [18, 24]},
        {"sigmas": [1.0, 1.0, 2.0]},
        {"derivatives": ["L", "Lxxx"]},
        {"reg_eta": [0.6, 0.0, 0.0], "reg_lambda": [0.5, 0.0, 0.0]},
        {"pca_fraction": 0.0},
        {"boundary": "zero"},
        {"base_classifier": "svm"},
        {"training_sizes": [20, 10]},
        {"repetitions": 0},
        {"singular_retry_epsilon": 1.5},
        {"class_images": [], "synthetic": []},
        {"combiner": CombinerSpec("scales_then_derivatives", "dt", "mean")},
        {"combiner": CombinerSpec("derivatives_then_scales", "mean", "mode")},
    ],
)
def test_invalid_configs(changes: dict) -> None:
    config = ExperimentConfig()
    for key, value in changes.items():
        setattr(config, key, value)
    with pytest.raises(ConfigError):
        config.validate()
