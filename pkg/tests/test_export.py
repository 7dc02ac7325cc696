from pathlib import Path

import numpy as np
import pytest

from ss_texture.errors import ExportError, IngestionError
from ss_texture.export import (
    chart_limits,
    curve_frame,
    export_results,
    improvement_summary,
    load_results,
    read_curve_csv,
    write_curve_csv,
)
from ss_texture.models import CurveSet, LearningCurve


def curve(name: str, errors: list[list[float]], sizes: list[int] | None = None) -> LearningCurve:
    return LearningCurve(name=name, sizes=sizes or [10, 100], errors=np.array(errors))


def sample_curves() -> CurveSet:
    return CurveSet(
        combined=curve("combined", [[0.2, 0.3], [0.05, 0.07]]),
        subsets={
            "L_S1": curve("L_S1", [[0.4, 0.5], [0.2, 0.2]]),
            "Lx_S2": curve("Lx_S2", [[0.3, 0.3], [0.1, 0.12]]),
        },
        groups={"S1": curve("S1", [[0.35, 0.4], [0.15, 0.1]])},
        dims={"L_S1": [4.0, 6.5], "Lx_S2": [3.0, 5.0]},
    )


def test_curve_csv_layout(tmp_path: Path) -> None:
    path = write_curve_csv(curve("c", [[0.2, 0.3], [0.05, 0.07]]), tmp_path / "c.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "size,mean_error,std_error,rep_1,rep_2"
    assert len(lines) == 3
    assert lines[1] == "10,0.25,0.05,0.2,0.3"

    frame = curve_frame(curve("c", [[0.1], [0.2]]))
    assert list(frame.columns) == ["size", "mean_error", "std_error", "rep_1"]
    assert frame["std_error"].tolist() == [0.0, 0.0]


def test_read_back(tmp_path: Path) -> None:
    original = curve("c", [[0.2, 0.3, 0.25], [0.05, 0.07, 0.06]])
    loaded = read_curve_csv(write_curve_csv(original, tmp_path / "c.csv"))
    assert loaded.name == "c"
    assert loaded.sizes == [10, 100]
    np.testing.assert_allclose(loaded.errors, original.errors)

    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(IngestionError):
        read_curve_csv(bad)
    with pytest.raises(IngestionError):
        read_curve_csv(tmp_path / "missing.csv")


def test_improvement_summary() -> None:
    summary = improvement_summary(sample_curves())
    assert list(summary.columns) == ["size", "combined_error", "best_subset", "best_subset_error", "improvement_pp"]
    assert summary["best_subset"].tolist() == ["Lx_S2", "Lx_S2"]
    np.testing.assert_allclose(summary["best_subset_error"], [0.3, 0.11])
    np.testing.assert_allclose(summary["improvement_pp"], [5.0, 5.0])


def test_chart_limits() -> None:
    curves = sample_curves()
    (x_lo, x_hi), (y_lo, y_hi) = chart_limits([curves.combined, *curves.subsets.values()])
    assert (x_lo, x_hi) == (10.0, 100.0)
    assert (y_lo, y_hi) == (0.0, 0.5)
    assert chart_limits([curve("zero", [[0.0], [0.0]])])[1] == (0.0, 1.0)


def test_export_is_reproducible(tmp_path: Path) -> None:
    first = export_results(sample_curves(), tmp_path / "a", "run")
    second = export_results(sample_curves(), tmp_path / "b", "run")
    names = sorted(p.name for p in first)
    assert names == [
        "run.svg",
        "run_bc_L_S1.csv",
        "run_bc_Lx_S2.csv",
        "run_combined.csv",
        "run_dims.csv",
        "run_group_S1.csv",
        "run_summary.csv",
    ]
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes(), a.name
    svg = (tmp_path / "a" / "run.svg").read_text(encoding="utf-8")
    assert svg.lstrip().startswith("<?xml")
    assert "<dc:date>" not in svg


def test_load_results(tmp_path: Path) -> None:
    export_results(sample_curves(), tmp_path, "run")
    loaded = load_results(tmp_path, "run")
    assert loaded.combined.name == "run"
    assert sorted(loaded.subsets) == ["L_S1", "Lx_S2"]
    assert list(loaded.groups) == ["S1"]
    np.testing.assert_allclose(loaded.subsets["Lx_S2"].errors, [[0.3, 0.3], [0.1, 0.12]])

    with pytest.raises(IngestionError):
        load_results(tmp_path, "other")


def test_unwritable_destination(tmp_path: Path) -> None:
    blocker = tmp_path / "file"
    blocker.write_text("x", encoding="utf-8")
    with pytest.raises(ExportError):
        export_results(sample_curves(), blocker / "out", "run")
