"""Command-line interface: parameter resolution, artifacts, determinism."""

import json
import os

import numpy as np
import pytest

from mzrom.cli import main
from mzrom.mzkernel import load_kernel_table


def read_bytes(path):
    with open(path, "rb") as handle:
        return handle.read()


def run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = main(["--out", str(out), *argv])
    return code, out


def test_full_solve_writes_artifacts_and_manifest(tmp_path):
    code, out = run(tmp_path, "full-solve", "--n-grid", "64", "--dt", "1e-3",
                    "--t-final", "0.1")
    assert code == 0
    assert (out / "final_field.csv").exists()
    assert (out / "final_spectrum.csv").exists()
    manifest = json.loads(read_bytes(out / "manifest.json"))
    assert manifest["subcommand"] == "full-solve"
    for key in ("ic", "seed", "band_limit", "n_grid", "nu", "dt", "t_final", "scheme"):
        assert key in manifest["config"]


def test_full_solve_rerun_is_byte_identical(tmp_path):
    args = ("full-solve", "--ic", "random", "--seed", "3", "--n-grid", "64",
            "--dt", "1e-3", "--t-final", "0.1")
    _, out_a = run(tmp_path, *args, name="a")
    _, out_b = run(tmp_path, *args, name="b")
    for fname in ("final_field.csv", "final_spectrum.csv", "manifest.json"):
        assert read_bytes(out_a / fname) == read_bytes(out_b / fname), fname


def test_full_solve_divergence_exit_code(tmp_path):
    code, _ = run(tmp_path, "full-solve", "--n-grid", "256", "--dt", "0.01",
                  "--t-final", "1.0")
    assert code == 3


def test_yaml_config_section_overrides_defaults(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("full-solve:\n  n_grid: 64\n  dt: 1.0e-3\n  t_final: 0.1\n")
    out = tmp_path / "out"
    code = main(["--config", str(cfg), "--out", str(out), "full-solve"])
    assert code == 0
    manifest = json.loads(read_bytes(out / "manifest.json"))
    assert manifest["config"]["n_grid"] == 64


def test_flag_overrides_yaml(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("full-solve:\n  n_grid: 64\n  dt: 1.0e-3\n  t_final: 0.2\n")
    out = tmp_path / "out"
    code = main(["--config", str(cfg), "--out", str(out), "full-solve",
                 "--t-final", "0.1"])
    assert code == 0
    manifest = json.loads(read_bytes(out / "manifest.json"))
    assert manifest["config"]["t_final"] == 0.1


def test_unknown_config_key_is_rejected(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("full-solve:\n  gridsize: 64\n")
    code = main(["--config", str(cfg), "--out", str(tmp_path / "o"), "full-solve"])
    assert code == 1


def test_missing_config_file_is_an_error(tmp_path):
    code = main(["--config", str(tmp_path / "absent.yaml"),
                 "--out", str(tmp_path / "o"), "full-solve"])
    assert code == 1


def test_unknown_subcommand_is_an_error(tmp_path):
    assert main(["--out", str(tmp_path / "o"), "no-such-command"]) == 1


def test_oracle_linear_passes_and_writes_report(tmp_path):
    code, out = run(tmp_path, "oracle-linear")
    assert code == 0
    report = json.loads(read_bytes(out / "oracle_linear.json"))
    assert report["kernel_sup_error"] < 1e-4
    assert report["rom_sup_error"] < 1e-3


def test_vb_rom_requires_existing_kernel_files(tmp_path):
    code, _ = run(tmp_path, "vb-rom", "--kernel-dir", str(tmp_path))
    assert code == 1


def test_nl_demo_small_scale_writes_cases_and_kernels(tmp_path):
    code, out = run(tmp_path, "nl-demo", "--d", "1", "--nq", "6",
                    "--dt-full", "1e-3", "--dt-kernel", "1e-2",
                    "--t-kernel", "0.5", "--t-rom", "0.2")
    assert code == 0
    assert (out / "nl_kernels_1.csv").exists()
    assert (out / "nl_errors.json").exists()
    for x1 in ("1", "2", "3", "7"):
        assert (out / f"nl_case_{x1}_1.csv").exists()
    errors = json.loads(read_bytes(out / "nl_errors.json"))
    assert errors["7"]["extrapolation"] is True


def test_nl_demo_rerun_is_byte_identical(tmp_path):
    args = ("nl-demo", "--d", "1", "--nq", "4", "--dt-full", "1e-3",
            "--dt-kernel", "1e-2", "--t-kernel", "0.2", "--t-rom", "0.1")
    _, out_a = run(tmp_path, *args, name="a")
    _, out_b = run(tmp_path, *args, name="b")
    for fname in os.listdir(out_a):
        assert read_bytes(out_a / fname) == read_bytes(out_b / fname), fname


def test_csv_headers_are_documented_schema(tmp_path):
    _, out = run(tmp_path, "full-solve", "--n-grid", "64", "--dt", "1e-3",
                 "--t-final", "0.1")
    with open(out / "final_field.csv") as handle:
        assert handle.readline().strip() == "z,u"
    with open(out / "final_spectrum.csv") as handle:
        assert handle.readline().strip() == "k,re,im"
