import json
import os

import numpy as np
import pytest

from mzfigures import FigureSpec, SchemaError, load_csv, render_figure
from mzfigures.render import load_spec_file, main


def write_csv(path, header, rows):
    lines = [",".join(header)] + [",".join(str(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture
def vb_csv(tmp_path):
    path = tmp_path / "vb_sin.csv"
    t = np.linspace(0.0, 1.0, 20)
    write_csv(path, ["t", "err_markovian", "err_linear", "err_cubic"],
              [[ti, 0.1 * ti, 0.05 * ti, 0.02 * ti] for ti in t])
    return path


@pytest.fixture
def kernel_csv(tmp_path):
    path = tmp_path / "nl_kernels_3.csv"
    t = np.linspace(0.0, 5.0, 30)
    write_csv(path, ["t", "K_0", "K_1"],
              [[ti, np.exp(-ti), -2.0 * np.exp(-2.0 * ti)] for ti in t])
    return path


def test_load_csv_columns_and_values(vb_csv):
    cols = load_csv(vb_csv)
    assert list(cols) == ["t", "err_markovian", "err_linear", "err_cubic"]
    assert cols["t"].shape == (20,)
    np.testing.assert_allclose(cols["err_cubic"], 0.02 * cols["t"])


def test_load_csv_empty_cells_become_nan(tmp_path):
    path = tmp_path / "diverged.csv"
    path.write_text("t,err_M127\n0.0,1.0\n0.001,\n")
    cols = load_csv(path)
    assert np.isnan(cols["err_M127"][1])


def test_error_curves_figure(vb_csv, tmp_path):
    out = tmp_path / "vb_sin.png"
    render_figure(FigureSpec(str(vb_csv), "error-curves", str(out)))
    assert out.exists() and out.stat().st_size > 0


def test_kernel_magnitudes_log_scale(kernel_csv, tmp_path, monkeypatch):
    import matplotlib.pyplot as plt

    scales = []
    original = plt.Figure.savefig

    def spy(fig, *args, **kwargs):
        scales.append(fig.axes[0].get_yscale())
        return original(fig, *args, **kwargs)

    monkeypatch.setattr(plt.Figure, "savefig", spy)
    out = tmp_path / "kernels.png"
    render_figure(FigureSpec(str(kernel_csv), "kernel-magnitudes", str(out)))
    assert scales == ["log"]
    assert out.exists()


def test_trajectory_comparison(tmp_path):
    path = tmp_path / "nl_case_1_3.csv"
    t = np.linspace(0.0, 2.0, 15)
    write_csv(path, ["t", "reference", "markovian", "memory"],
              [[ti, np.cos(ti), np.cos(ti) + 0.1, np.cos(ti) + 0.01] for ti in t])
    out = tmp_path / "case.png"
    render_figure(FigureSpec(str(path), "trajectory-comparison", str(out)))
    assert out.exists()


def test_missing_column_named_in_error(tmp_path):
    path = tmp_path / "bad.csv"
    write_csv(path, ["t", "reference", "markovian"], [[0.0, 1.0, 1.0]])
    out = tmp_path / "bad.png"
    with pytest.raises(SchemaError, match="'memory'"):
        render_figure(FigureSpec(str(path), "trajectory-comparison", str(out)))
    assert not out.exists()


def test_empty_csv_errors_without_output(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("t,err_M3\n")
    out = tmp_path / "empty.png"
    with pytest.raises(SchemaError, match="empty"):
        render_figure(FigureSpec(str(path), "error-curves", str(out)))
    assert not out.exists()

    path.write_text("")
    with pytest.raises(SchemaError, match="empty"):
        render_figure(FigureSpec(str(path), "error-curves", str(out)))
    assert not out.exists()


def test_unknown_kind_rejected():
    with pytest.raises(SchemaError, match="kind"):
        FigureSpec("a.csv", "pie-chart", "a.png")


def test_spec_file_cli(vb_csv, kernel_csv, tmp_path, capsys):
    spec = [
        {"csv": str(vb_csv), "kind": "error-curves",
         "output": str(tmp_path / "a.png"), "title": "errors"},
        {"csv": str(kernel_csv), "kind": "kernel-magnitudes",
         "output": str(tmp_path / "b.png")},
    ]
    spec_path = tmp_path / "figures.json"
    spec_path.write_text(json.dumps(spec))
    assert main([str(spec_path)]) == 0
    assert (tmp_path / "a.png").exists() and (tmp_path / "b.png").exists()
    out = capsys.readouterr().out
    assert str(tmp_path / "a.png") in out


def test_cli_schema_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,foo\n0.0,1.0\n")
    spec_path = tmp_path / "figures.json"
    spec_path.write_text(json.dumps([
        {"csv": str(bad), "kind": "error-curves",
         "output": str(tmp_path / "bad.png")}]))
    assert main([str(spec_path)]) == 1
    assert "err" in capsys.readouterr().err
    assert not (tmp_path / "bad.png").exists()


def test_spec_file_must_be_list(tmp_path):
    spec_path = tmp_path / "figures.json"
    spec_path.write_text(json.dumps({"csv": "a.csv"}))
    with pytest.raises(SchemaError, match="list"):
        load_spec_file(str(spec_path))
