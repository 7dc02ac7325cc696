from __future__ import annotations

import argparse
import asyncio
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .baselines import CFS_FUSIONS, MhBaseline, cfs_runner
from .config import COMBINER_KEYS, FIELD_KINDS, ExperimentConfig, apply_overrides, load_config
from .datasets import load_class_images
from .errors import InvalidArgumentError, SSTextureError
from .export import export_results, improvement_summary, load_results, plot_curves
from .imaging import load_grayscale, rescale_to_byte_range, synth_texture, write_graymap
from .log import configure_logging
from .models import CurveSet, subset_label
from .patching import preprocess_patch
from .pipeline import ExperimentRunner, run_learning_curve_async
from .scale_space import compute_njet

logger = logging.getLogger("ss_texture.cli")


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _common_parser() -> argparse.ArgumentParser:
    """Options shared by every subcommand; one flag per configuration field."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML experiment file; flags override its values.")
    common.add_argument("--out", type=Path, default=Path("results"), help="Output directory.")
    common.add_argument("--log-file", type=Path, help="Also write the log to this file.")
    common.add_argument("--log-level", default="INFO", choices=("DEBUG", "INFO", "WARNING", "ERROR"))

    fields = common.add_argument_group("experiment fields (same names as the config file)")
    for name, kind in FIELD_KINDS.items():
        flags = [_flag(name)]
        if name == "rng_seed":
            flags.append("--seed")
        metavar = "A,B,..." if kind in ("ints", "floats", "strs", "paths") else None
        fields.add_argument(*flags, dest=name, default=None, metavar=metavar, help=f"{kind} value")
    for key in COMBINER_KEYS:
        fields.add_argument(_flag(f"combiner_{key}"), dest=f"combiner_{key}", default=None)
    return common


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="ss_texture",
        description="Scale-space texture classification with two-stage classifier combiners",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("synth", parents=[common], help="Write the synthetic class images as graymaps.")
    curve = sub.add_parser("curve", parents=[common], help="Run a learning-curve experiment.")
    curve.add_argument("--prefix", help="Result file prefix (default: combiner name).")

    baseline = sub.add_parser("baseline", parents=[common], help="Run the MH or CFS baseline.")
    baseline.add_argument("method", choices=("mh", "cfs"))
    baseline.add_argument("--fusion", choices=CFS_FUSIONS, default="all", help="CFS grouping.")
    baseline.add_argument("--prefix", help="Result file prefix (default: mh / cfs_<fusion>).")

    plot = sub.add_parser("plot", parents=[common], help="Re-render a chart from result files.")
    plot.add_argument("--results", type=Path, help="Directory holding the CSV files (default: --out).")
    plot.add_argument("--prefix", required=True, help="Prefix the curve files were written with.")

    inspect = sub.add_parser("inspect", parents=[common], help="Dump the N-jet of one patch as graymaps.")
    inspect.add_argument("--image", type=Path, help="Image to read (default: first class image).")
    inspect.add_argument("--row", type=int, default=0, help="Patch origin row.")
    inspect.add_argument("--col", type=int, default=0, help="Patch origin column.")
    return parser.parse_args(argv)


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config)
    overrides = {name: getattr(args, name) for name in FIELD_KINDS}
    overrides.update({f"combiner_{k}": getattr(args, f"combiner_{k}") for k in COMBINER_KEYS})
    return apply_overrides(config, overrides).validate()


def print_summary(curves: CurveSet) -> None:
    summary = improvement_summary(curves)
    for row in summary.itertuples(index=False):
        line = f"size={row.size:5d}  combined={row.combined_error:.4f}"
        if row.best_subset:
            line += (
                f"  best single={row.best_subset} {row.best_subset_error:.4f}"
                f"  improvement={row.improvement_pp:+.1f} pp"
            )
        print(line)


# ---- subcommands ----


def cmd_synth(config: ExperimentConfig, out: Path) -> None:
    for index, spec in enumerate(config.synthetic):
        image = synth_texture(spec.kind, spec.params, config.synthetic_size, spec.seed)
        path = write_graymap(image.pixels, out / f"{index:02d}_{spec.kind}.pgm")
        print(f"wrote {path}")


async def cmd_curve(config: ExperimentConfig, out: Path, prefix: str | None) -> None:
    runner = ExperimentRunner(config)
    curves = await run_learning_curve_async(config, runner)
    export_results(curves, out, prefix or runner.name)
    print_summary(curves)


async def cmd_baseline(config: ExperimentConfig, out: Path, method: str, fusion: str, prefix: str | None) -> None:
    if method == "mh":
        curves = await MhBaseline(config).run_curve()
    else:
        curves = await cfs_runner(config, fusion).run_curve()
    export_results(curves, out, prefix or curves.combined.name)
    print_summary(curves)


def cmd_plot(results: Path, prefix: str) -> None:
    curves = load_results(results, prefix)
    path = plot_curves(
        curves.combined,
        results / f"{prefix}.svg",
        subsets=curves.subsets.values(),
        groups=curves.groups.values(),
    )
    print(f"wrote {path}")


def cmd_inspect(config: ExperimentConfig, out: Path, image_path: Path | None, row: int, col: int) -> None:
    image = load_grayscale(image_path) if image_path else load_class_images(config)[0]
    p = config.patch_size
    if not (0 <= row <= image.height - p and 0 <= col <= image.width - p):
        raise InvalidArgumentError(f"a {p}x{p} patch at ({row}, {col}) does not fit the {image.height}x{image.width} image")
    patch, degenerate = preprocess_patch(image.pixels[row : row + p, col : col + p])
    if degenerate:
        logger.warning("patch at (%d, %d) is constant", row, col)
    njet = compute_njet(
        patch, config.sigmas, derivatives=config.derivatives,
        truncation=config.truncation, boundary=config.boundary,
    )
    write_graymap(rescale_to_byte_range(patch), out / "patch.pgm")
    for (derivative_id, s), response in njet.responses.items():
        path = write_graymap(rescale_to_byte_range(response), out / f"{subset_label(derivative_id, s)}.pgm")
        print(f"{path}  min={np.min(response):+.4f} max={np.max(response):+.4f}")


async def main_async(argv: Sequence[str] | None = None) -> int:
    args = parse_args(argv)
    configure_logging(args.log_level, args.log_file)
    try:
        # 优先级：默认值 < 配置文件 < 命令行参数
        config = build_config(args)
        if args.command == "synth":
            cmd_synth(config, args.out)
        elif args.command == "curve":
            await cmd_curve(config, args.out, args.prefix)
        elif args.command == "baseline":
            await cmd_baseline(config, args.out, args.method, args.fusion, args.prefix)
        elif args.command == "plot":
            cmd_plot(args.results or args.out, args.prefix)
        else:
            cmd_inspect(config, args.out, args.image, args.row, args.col)
    except SSTextureError as exc:
        # 可预期的错误只打印诊断信息，不输出 traceback
        logger.error("%s", exc)
        return 1
    return 0


def main(argv: Sequence[str] | None = None) -> None:
    sys.exit(asyncio.run(main_async(argv)))


if __name__ == "__main__":
    main()
