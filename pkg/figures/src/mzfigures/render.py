"""Presentation layer for the toolkit's CSV artifacts.

Reads the documented CSV schemas and emits one image per figure spec; no
numerical processing happens here beyond taking magnitudes for log-scale
kernel plots. Divergence shows up in the CSVs as empty cells, which load as
NaN and simply truncate the plotted curves.

A spec file is a JSON list of figure entries:
    [{"csv": "out/vb_sin.csv", "kind": "error-curves",
      "output": "fig/vb_sin.png", "yscale": "linear", "title": "..."}]
"""

import argparse
import csv
import json
import sys
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("error-curves", "trajectory-comparison", "kernel-magnitudes")


class SchemaError(ValueError):
    pass


@dataclass
class FigureSpec:
    csv: str
    kind: str
    output: str
    yscale: str = ""   # "" -> kind default (log for kernel magnitudes)
    title: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; "
                              f"expected one of {', '.join(KINDS)}")
        if self.yscale not in ("", "linear", "log"):
            raise SchemaError(f"unknown yscale {self.yscale!r}")


def load_csv(path):
    """Ordered {column: float array}; empty cells become NaN."""
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    rows = [r for r in rows if r]
    if not rows:
        raise SchemaError(f"{path}: empty CSV (no header)")
    header, data = rows[0], rows[1:]
    if not data:
        raise SchemaError(f"{path}: empty CSV (no data rows)")
    columns = {}
    for j, name in enumerate(header):
        values = [row[j] if j < len(row) else "" for row in data]
        columns[name] = np.array(
            [float(v) if v != "" else np.nan for v in values])
    return columns


def _require(columns, names, path):
    for name in names:
        if name not in columns:
            raise SchemaError(f"{path}: missing column {name!r} "
                              f"(found: {', '.join(columns)})")


def render_figure(spec):
    """Render one figure; returns the output path."""
    columns = load_csv(spec.csv)
    _require(columns, ["t"], spec.csv)
    t = columns.pop("t")
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    try:
        if spec.kind == "trajectory-comparison":
            _require(columns, ["reference", "markovian", "memory"], spec.csv)
            order = ["reference", "markovian", "memory"]
            ax.set_ylabel("x1(t)")
        elif spec.kind == "kernel-magnitudes":
            order = [n for n in columns if n.startswith("K_")]
            if not order:
                raise SchemaError(f"{spec.csv}: missing column 'K_*' "
                                  f"(found: {', '.join(['t', *columns])})")
            ax.set_ylabel("|K(t)|")
        else:  # error-curves
            order = [n for n in columns if n.startswith("err")]
            if not order:
                raise SchemaError(f"{spec.csv}: missing column 'err*' "
                                  f"(found: {', '.join(['t', *columns])})")
            ax.set_ylabel("L2 error")
        default_log = spec.kind == "kernel-magnitudes"
        log = spec.yscale == "log" or (spec.yscale == "" and default_log)
        for name in order:
            y = np.abs(columns[name]) if spec.kind == "kernel-magnitudes" \
                else columns[name]
            # keep legends readable when a kernel table has many components
            label = name if len(order) <= 12 else None
            ax.plot(t, y, label=label, linewidth=1.0)
        if log:
            ax.set_yscale("log")
        ax.set_xlabel("t")
        if spec.title:
            ax.set_title(spec.title)
        if len(order) <= 12:
            ax.legend(loc="best", fontsize="small")
        fig.tight_layout()
        fig.savefig(spec.output, dpi=150)
    finally:
        plt.close(fig)
    return spec.output


def render_figures(specs):
    return [render_figure(spec) for spec in specs]


def load_spec_file(path):
    with open(path) as handle:
        entries = json.load(handle)
    if not isinstance(entries, list):
        raise SchemaError(f"{path}: spec file must be a JSON list of figures")
    return [FigureSpec(**entry) for entry in entries]


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="Render figures from the toolkit's CSV outputs.")
    parser.add_argument("specfile", help="JSON list of figure specs")
    args = parser.parse_args(argv)
    try:
        specs = load_spec_file(args.specfile)
        for path in render_figures(specs):
            print(path)
    except (SchemaError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
