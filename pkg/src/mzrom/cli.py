"""Command-line entry point for all experiments.

Parameter resolution: built-in defaults, then the subcommand's section of a
YAML config file (--config), then explicit flags. Every run writes a manifest
echoing the fully resolved parameters, so reruns from a manifest are
byte-identical.

Exit codes: 0 success, 1 validation error, 2 numerical failure,
3 divergence where divergence was not an allowed outcome.
"""

import argparse
import json
import os
import sys

import numpy as np
import yaml

from . import artifacts
from .dynamics import DivergenceError, NumericalFailureError
from .hermite import ScalingParams
from .linear_oracle import run_linear_oracle
from .mzkernel import save_kernel_table, load_kernel_table
from .nlshowcase import NLConfig, nl_experiment
from .spectral import SpectralState, grid, sample_initial_condition, solve_burgers, to_spectral
from .surrogate import (TrainConfig, build_training_set, load_checkpoint,
                        named_initial_field, save_checkpoint,
                        stability_experiment, train_surrogate)
from .vburgers import FIG6_ICS, VBConfig, vb_kernels, vb_rom_experiment

SCHEMAS = {
    "full-solve": {
        "ic": ("sin", "named IC (sin, expsin) or 'random'"),
        "seed": (0, "seed for random ICs"),
        "band_limit": (24, "band limit of random ICs"),
        "n_grid": (256, "grid size (power of two)"),
        "nu": (0.1, "viscosity"),
        "dt": (1e-4, "time step"),
        "t_final": (1.0, "horizon"),
        "scheme": ("rk4", "rk2 or rk4"),
    },
    "train-surrogate": {
        "n_ics": (8, "number of training initial conditions"),
        "n_windows": (32, "snapshot windows per IC"),
        "iterations": (150, "optimizer iterations"),
        "learning_rate": (2e-3, "optimizer step size"),
        "rollout_steps": (0, "0 = full 10-step rollout; 1 = teacher forcing"),
        "lr_decay": (0, "1 = cosine step-size decay"),
        "ls_init": (0, "1 = least-squares output-layer initialization"),
        "seed": (0, "global seed"),
    },
    "stability": {
        "checkpoint": ("", "network checkpoint (empty: train first)"),
        "m_values": ("3,12,127", "comma-separated low-pass cutoffs"),
        "ics": ("sin,expsin", "comma-separated named ICs"),
        "nu": (0.1, "viscosity"),
        "t_final": (4.0, "horizon"),
        "dt": (1e-3, "coupled-system step"),
        "seed": (0, "training seed when no checkpoint is given"),
    },
    "nl-demo": {
        "d": (3, "max polynomial degree"),
        "nq": (0, "quadrature order (0 = default for the degree)"),
        "t_kernel": (5.0, "kernel-table horizon"),
        "t_rom": (2.0, "ROM comparison horizon"),
        "dt_full": (1e-4, "full-order step"),
        "dt_kernel": (1e-3, "kernel/ROM step"),
    },
    "vb-kernels": {
        "m": (3, "resolved cutoff M"),
        "d": (3, "max polynomial degree"),
        "nq": (2, "quadrature order (full scale: 4)"),
        "nu": (0.1, "viscosity"),
        "t_final": (5.0, "horizon (full scale: 20)"),
        "dt_full": (1e-4, "full-order step"),
        "dt_kernel": (1e-3, "kernel step"),
    },
    "vb-rom": {
        "kernel_dir": ("", "directory with vb_kernels_d*.npz (empty: compute)"),
        "m": (3, "resolved cutoff M"),
        "d": (3, "max polynomial degree"),
        "nq": (2, "quadrature order"),
        "nu": (0.1, "viscosity"),
        "t_final": (5.0, "horizon"),
        "dt_full": (1e-4, "full-order step"),
        "dt_kernel": (1e-3, "kernel/ROM step"),
        "ics": (",".join(FIG6_ICS), "comma-separated named ICs"),
    },
    "oracle-linear": {
        "kernel_tol": (1e-4, "sup-norm tolerance for the kernels"),
        "rom_tol": (1e-3, "sup-norm tolerance for the ROM trajectory"),
    },
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mzrom", description="stabilized PDE-ML coupling and memory-kernel ROMs")
    parser.add_argument("--config", default="", help="YAML config file")
    parser.add_argument("--out", default="", help="output directory "
                        f"(default: $" + artifacts.OUTPUT_ROOT_ENV + " or ./out)")
    parser.add_argument("--workers", type=int, default=0,
                        help="ensemble concurrency bound (0 = sequential batch)")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, schema in SCHEMAS.items():
        sp = sub.add_parser(name)
        for key, (default, help_text) in schema.items():
            sp.add_argument(f"--{key.replace('_', '-')}", dest=key,
                            type=type(default), default=None, help=help_text)
    return parser


def resolve_params(args):
    schema = SCHEMAS[args.subcommand]
    params = {key: default for key, (default, _) in schema.items()}
    if args.config:
        if not os.path.exists(args.config):
            raise FileNotFoundError(f"config file not found: {args.config}")
        with open(args.config) as handle:
            loaded = yaml.safe_load(handle) or {}
        section = loaded.get(args.subcommand, {})
        unknown = set(section) - set(schema)
        if unknown:
            raise ValueError(f"unknown config keys for {args.subcommand}: {sorted(unknown)}")
        params.update(section)
    for key in schema:
        value = getattr(args, key)
        if value is not None:
            params[key] = value
    return params


def _outdir(args):
    out = args.out or artifacts.default_output_root()
    os.makedirs(out, exist_ok=True)
    return out


def cmd_full_solve(params, out):
    if params["ic"] == "random":
        state = sample_initial_condition(params["band_limit"], params["seed"],
                                         params["n_grid"])
        theta0 = state.theta
    else:
        u0 = named_initial_field(params["ic"], params["n_grid"])
        theta0 = to_spectral(u0)
    times, thetas = solve_burgers(theta0, params["nu"], params["dt"],
                                  params["t_final"], scheme=params["scheme"],
                                  sample_stride=max(1, int(round(
                                      params["t_final"] / params["dt"] / 100))))
    final = SpectralState(thetas[-1], params["n_grid"])
    artifacts.write_field_csv(os.path.join(out, "final_field.csv"),
                              grid(params["n_grid"]), final.field())
    artifacts.write_spectral_csv(os.path.join(out, "final_spectrum.csv"), thetas[-1])
    return 0


def cmd_train_surrogate(params, out):
    config = TrainConfig(n_ics=params["n_ics"], n_windows=params["n_windows"],
                         iterations=params["iterations"],
                         learning_rate=params["learning_rate"],
                         rollout_steps=params["rollout_steps"],
                         lr_decay=bool(params["lr_decay"]),
                         ls_init=bool(params["ls_init"]), seed=params["seed"])
    windows = build_training_set(config)
    net, losses = train_surrogate(windows, config)
    save_checkpoint(os.path.join(out, "surrogate.npz"), net)
    artifacts.write_csv(os.path.join(out, "training_loss.csv"),
                        {"iteration": np.arange(len(losses)), "loss": losses})
    return 0


def cmd_stability(params, out):
    if params["checkpoint"]:
        net = load_checkpoint(params["checkpoint"])
    else:
        config = TrainConfig(seed=params["seed"])
        net, _ = train_surrogate(build_training_set(config), config)
    cutoffs = [int(v) for v in str(params["m_values"]).split(",")]
    ics = str(params["ics"]).split(",")
    results = stability_experiment(net, cutoffs, ics, nu=params["nu"],
                                   t_final=params["t_final"], dt=params["dt"])
    events, sups = [], {}
    for name, curves in results.items():
        events.extend(curves.pop("events"))
        sups[name] = {str(m): (v if np.isfinite(v) else None)
                      for m, v in curves.pop("sup").items()}
        artifacts.write_csv(os.path.join(out, f"stability_{name}.csv"), curves)
    artifacts.write_json(os.path.join(out, "stability_events.json"),
                         {"events": events, "sup_norms": sups})
    return 0


def cmd_nl_demo(params, out):
    config = NLConfig(max_degree=params["d"], n_quad=params["nq"],
                      t_kernel=params["t_kernel"], t_rom=params["t_rom"],
                      dt_full=params["dt_full"], dt_kernel=params["dt_kernel"])
    result = nl_experiment(config)
    for x1, record in result.cases.items():
        columns = {"t": result.times, "reference": record["reference"],
                   "markovian": record["markovian"]}
        memory = record["memory"]
        if memory is None:
            memory = np.full_like(result.times, np.nan)
        columns["memory"] = memory
        label = format(x1, "g")
        artifacts.write_csv(
            os.path.join(out, f"nl_case_{label}_{config.max_degree}.csv"), columns)
    ktab = result.kernels.kernels
    kcols = {"t": result.kernels.dt * np.arange(ktab.shape[0])}
    for j in range(ktab.shape[1]):
        kcols[f"K_{j}"] = ktab[:, j, 0]
    artifacts.write_csv(os.path.join(out, f"nl_kernels_{config.max_degree}.csv"), kcols)
    artifacts.write_json(os.path.join(out, "nl_errors.json"),
                         {format(x1, "g"): err for x1, err in result.errors.items()})
    return 0


def _vb_config(params):
    return VBConfig(cutoff=params["m"], max_degree=params["d"], nu=params["nu"],
                    n_quad=params["nq"], t_final=params["t_final"],
                    dt_full=params["dt_full"], dt_kernel=params["dt_kernel"])


def cmd_vb_kernels(params, out):
    config = _vb_config(params)
    for degree, table in vb_kernels(config).items():
        save_kernel_table(os.path.join(out, f"vb_kernels_d{degree}.npz"), table)
    return 0


def cmd_vb_rom(params, out):
    config = _vb_config(params)
    if params["kernel_dir"]:
        kernels = {}
        for degree in {1, config.max_degree}:
            path = os.path.join(params["kernel_dir"], f"vb_kernels_d{degree}.npz")
            if not os.path.exists(path):
                raise FileNotFoundError(f"kernel table not found: {path}")
            kernels[degree] = load_kernel_table(path)
    else:
        kernels = vb_kernels(config)
    results = vb_rom_experiment(config, kernels, str(params["ics"]).split(","))
    events = []
    for name, curves in results.items():
        events.extend(curves.pop("events"))
        artifacts.write_csv(os.path.join(out, f"vb_{name}.csv"), curves)
    artifacts.write_json(os.path.join(out, "vb_events.json"), events)
    return 0


def cmd_oracle_linear(params, out):
    result = run_linear_oracle()
    artifacts.write_json(os.path.join(out, "oracle_linear.json"),
                         {"kernel_sup_error": result.kernel_sup_error,
                          "rom_sup_error": result.rom_sup_error})
    ok = (result.kernel_sup_error <= params["kernel_tol"]
          and result.rom_sup_error <= params["rom_tol"])
    if not ok:
        print(f"oracle-linear FAILED: kernel {result.kernel_sup_error:.3g}, "
              f"rom {result.rom_sup_error:.3g}", file=sys.stderr)
    return 0 if ok else 2


COMMANDS = {
    "full-solve": cmd_full_solve,
    "train-surrogate": cmd_train_surrogate,
    "stability": cmd_stability,
    "nl-demo": cmd_nl_demo,
    "vb-kernels": cmd_vb_kernels,
    "vb-rom": cmd_vb_rom,
    "oracle-linear": cmd_oracle_linear,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        params = resolve_params(args)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = _outdir(args)
    artifacts.write_manifest(out, args.subcommand, params)
    try:
        return COMMANDS[args.subcommand](params, out)
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 3
    except NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
