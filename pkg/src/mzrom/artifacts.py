"""Atomic persistence of experiment artifacts: CSVs, manifests, checkpoints."""

import json
import os
import tempfile

import numpy as np

OUTPUT_ROOT_ENV = "MZROM_OUTPUT_ROOT"


def default_output_root():
    return os.environ.get(OUTPUT_ROOT_ENV, "out")


def atomic_write_bytes(path, payload):
    """Write-temp-then-rename so a crash never leaves a partial artifact."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_value(value):
    if isinstance(value, float) or isinstance(value, np.floating):
        if np.isnan(value):
            return ""  # divergence shows up as empty cells
        return format(float(value), ".17g")
    return str(value)


def write_csv(path, columns):
    """columns: ordered {name: array}; all arrays share the leading length."""
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    length = arrays[0].shape[0]
    if any(a.shape[0] != length for a in arrays):
        raise ValueError("CSV columns must have equal length")
    lines = [",".join(names)]
    for i in range(length):
        lines.append(",".join(format_value(a[i]) for a in arrays))
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())


def write_json(path, payload):
    atomic_write_bytes(path, (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode())


def write_manifest(outdir, subcommand, config):
    from . import __version__

    write_json(os.path.join(outdir, "manifest.json"),
               {"toolkit_version": __version__, "subcommand": subcommand,
                "config": config})


def write_field_csv(path, z, u):
    write_csv(path, {"z": z, "u": u})


def write_spectral_csv(path, theta):
    k = np.arange(theta.shape[-1])
    write_csv(path, {"k": k, "re": theta.real, "im": theta.imag})
