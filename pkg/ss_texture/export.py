"""
Result files: one CSV per learning curve, a retained-dimension table, an
improvement summary and an SVG chart. Nothing time-dependent is written,
so re-exporting the same curves reproduces the files byte for byte.
"""

from __future__ import annotations

import logging
import re
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .errors import ExportError, IngestionError  # noqa: E402
from .models import CurveSet, LearningCurve  # noqa: E402

logger = logging.getLogger("ss_texture.export")

_FLOAT_FORMAT = "%.10g"
_SVG_SALT = "ss_texture"


def curve_frame(curve: LearningCurve) -> pd.DataFrame:
    frame = pd.DataFrame({
        "size": np.asarray(curve.sizes, dtype=np.int64),
        "mean_error": curve.mean,
        "std_error": curve.std,
    })
    for r in range(curve.repetitions):
        frame[f"rep_{r + 1}"] = curve.errors[:, r]
    return frame


def _write_frame(frame: pd.DataFrame, path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=_FLOAT_FORMAT, lineterminator="\n")
    except OSError as exc:
        raise ExportError(path, str(exc)) from exc
    return path


def write_curve_csv(curve: LearningCurve, path: Path) -> Path:
    return _write_frame(curve_frame(curve), path)


def read_curve_csv(path: Path, name: str | None = None) -> LearningCurve:
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise IngestionError(path, str(exc)) from exc
    rep_columns = [c for c in frame.columns if re.fullmatch(r"rep_\d+", str(c))]
    if "size" not in frame.columns or not rep_columns:
        raise IngestionError(path, "not a learning-curve file (needs size and rep_* columns)")
    rep_columns.sort(key=lambda c: int(str(c)[4:]))
    return LearningCurve(
        name=name or path.stem,
        sizes=[int(s) for s in frame["size"]],
        errors=frame[rep_columns].to_numpy(dtype=np.float64),
    )


def dims_frame(curves: CurveSet) -> pd.DataFrame:
    frame = pd.DataFrame({"size": np.asarray(curves.combined.sizes, dtype=np.int64)})
    for label, values in curves.dims.items():
        frame[label] = values
    return frame


def improvement_summary(curves: CurveSet) -> pd.DataFrame:
    """
    Per size: combined mean error, the best single base classifier and its
    mean error, and the improvement in percentage points.
    """
    sizes = curves.combined.sizes
    combined = curves.combined.mean
    labels = list(curves.subsets)
    if labels:
        means = np.stack([curves.subsets[label].mean for label in labels])
        best_idx = np.argmin(means, axis=0)
        best = means[best_idx, np.arange(len(sizes))]
        best_labels = [labels[i] for i in best_idx]
    else:
        best = np.full(len(sizes), np.nan)
        best_labels = [""] * len(sizes)
    return pd.DataFrame({
        "size": np.asarray(sizes, dtype=np.int64),
        "combined_error": combined,
        "best_subset": best_labels,
        "best_subset_error": best,
        "improvement_pp": (best - combined) * 100.0,
    })


def chart_limits(curves: Sequence[LearningCurve]) -> tuple[tuple[float, float], tuple[float, float]]:
    """((min size, max size), (0, max error observed)); an all-zero chart gets height 1."""
    sizes = np.concatenate([np.asarray(c.sizes, dtype=np.float64) for c in curves])
    top = max(float(np.nanmax(c.errors)) if c.errors.size else 0.0 for c in curves)
    return (float(sizes.min()), float(sizes.max())), (0.0, top if top > 0 else 1.0)


def plot_curves(
    combined: LearningCurve,
    path: Path,
    subsets: Iterable[LearningCurve] = (),
    groups: Iterable[LearningCurve] = (),
    title: str | None = None,
) -> Path:
    """
    Combined curve over the thin per-subset curves, log-scaled size axis.
    The axes span [min size, max size] and [0, max error observed].
    """
    subsets, groups = list(subsets), list(groups)
    (x_lo, x_hi), (_, top) = chart_limits([combined] + subsets + groups)

    plt.rcParams["svg.hashsalt"] = _SVG_SALT
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    try:
        for curve in subsets:
            ax.plot(curve.sizes, curve.mean, color="0.7", linewidth=0.8)
        for curve in groups:
            ax.plot(curve.sizes, curve.mean, linestyle="--", linewidth=1.0, label=curve.name)
        ax.errorbar(
            combined.sizes, combined.mean, yerr=combined.std,
            color="black", linewidth=2.0, capsize=3, label=combined.name,
        )
        ax.set_xscale("log")
        if x_lo < x_hi:
            ax.set_xlim(x_lo, x_hi)
        ax.set_ylim(0.0, top)
        ax.set_xlabel("training patches per class")
        ax.set_ylabel("classification error")
        ax.set_title(title or combined.name)
        ax.legend(loc="upper right", fontsize="small")
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise ExportError(path, str(exc)) from exc
    finally:
        plt.close(fig)
    return path


def _safe(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", label)


def export_results(curves: CurveSet, out_dir: Path, prefix: str = "curve") -> list[Path]:
    """Write every curve of `curves` plus dims, summary and chart; returns the paths."""
    out_dir = Path(out_dir)
    written = [write_curve_csv(curves.combined, out_dir / f"{prefix}_combined.csv")]
    for label, curve in curves.subsets.items():
        written.append(write_curve_csv(curve, out_dir / f"{prefix}_bc_{_safe(label)}.csv"))
    for label, curve in curves.groups.items():
        written.append(write_curve_csv(curve, out_dir / f"{prefix}_group_{_safe(label)}.csv"))
    if curves.dims:
        written.append(_write_frame(dims_frame(curves), out_dir / f"{prefix}_dims.csv"))
    if curves.subsets:
        written.append(_write_frame(improvement_summary(curves), out_dir / f"{prefix}_summary.csv"))
    written.append(
        plot_curves(
            curves.combined,
            out_dir / f"{prefix}.svg",
            subsets=curves.subsets.values(),
            groups=curves.groups.values(),
        )
    )
    logger.info("wrote %d result files to %s", len(written), out_dir)
    return written


def _labelled(paths: Sequence[Path], stem_prefix: str) -> dict[str, LearningCurve]:
    return {
        p.stem[len(stem_prefix):]: read_curve_csv(p, p.stem[len(stem_prefix):])
        for p in sorted(paths)
    }


def load_results(out_dir: Path, prefix: str = "curve") -> CurveSet:
    """Read back the curve files written by `export_results`."""
    out_dir = Path(out_dir)
    combined_path = out_dir / f"{prefix}_combined.csv"
    if not combined_path.is_file():
        raise IngestionError(combined_path, "no combined curve found")
    return CurveSet(
        combined=read_curve_csv(combined_path, prefix),
        subsets=_labelled(list(out_dir.glob(f"{prefix}_bc_*.csv")), f"{prefix}_bc_"),
        groups=_labelled(list(out_dir.glob(f"{prefix}_group_*.csv")), f"{prefix}_group_"),
    )
