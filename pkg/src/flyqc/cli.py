"""Command-line interface: ``flyqc run | gradcheck | simulate``."""

import argparse
import json
import logging
import os
import sys
import time
import warnings

import numpy as np
import yaml

from . import config as config_mod
from .experiments import EXPERIMENTS, grid_from_config, shape_from_config
from .optimize import OptimizationError
from .propagation import IntegrationError, TailWarning
from .report import to_builtin, write_results, write_trace
from .units import mhz_to_angular
from .verify import gradient_check, simulate_ideal_emission

log = logging.getLogger("flyqc")


def _load(args, name=None):
    user = {}
    if args.config:
        with open(args.config) as fh:
            user = yaml.safe_load(fh) or {}
        if not isinstance(user, dict):
            raise config_mod.ConfigError("configuration document must be a mapping")
    if getattr(args, "experiment", None):
        name = args.experiment
    if getattr(args, "shape", None):
        user.setdefault("experiment", {}).setdefault("shape", {})["kind"] = args.shape
    return config_mod.resolve(user, seed=args.seed, strict=args.strict or None, name=name)


def cmd_run(args):
    cfg = _load(args)
    name = cfg["experiment"]["name"]
    if name == "simulate":
        return cmd_simulate(args, cfg)
    start = time.perf_counter()
    with warnings.catch_warnings():
        if cfg["strict"]:
            warnings.simplefilter("error", TailWarning)
        output = EXPERIMENTS[name](cfg)
    runtime = time.perf_counter() - start
    doc = write_results(args.out, name, cfg, output, runtime, figures=not args.no_figures)
    print(json.dumps({"experiment": name, "metrics": doc["metrics"]}, indent=2))
    print(f"results written to {os.path.join(args.out, 'results.json')}")
    return 0


def cmd_gradcheck(args):
    report = gradient_check(dim=args.dim, n_steps=args.steps, dt=args.dt, seed=args.seed or 0,
                            exact=args.exact)
    for obj, rec in report.items():
        if obj == "pullback_error":
            continue
        for ch in rec["error_dt"]:
            print(f"{obj:8s} {ch:6s} err(dt={rec['dt_ns'][0]:g})={rec['error_dt'][ch]:.3e} "
                  f"err(dt={rec['dt_ns'][1]:g})={rec['error_half_dt'][ch]:.3e} "
                  f"ratio={rec['ratio'][ch]:.3f}")
    print(f"pullback error {report['pullback_error']:.3e}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "gradcheck.json"), "w") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    return 0


def cmd_simulate(args, cfg=None):
    cfg = cfg or _load(args, name="simulate")
    grid = grid_from_config(cfg)
    shape = shape_from_config(cfg)
    start = time.perf_counter()
    gamma, state, analytic, target = simulate_ideal_emission(
        shape, grid, int(cfg["model"]["dim"]), mhz_to_angular(cfg["model"]["eta_MHz"]))
    metrics = {
        "shape": shape.kind.value,
        "max_abs_error_vs_analytic": float(np.max(np.abs(state.xi1 - analytic))),
        "shape_error_L2": float(np.sum(np.abs(state.xi1 - target) ** 2) * grid.dt),
        "single_photon_weight": state.single_photon_weight,
        "vacuum_population": abs(state.xi0) ** 2,
    }
    os.makedirs(args.out, exist_ok=True)
    write_trace(os.path.join(args.out, "simulate_trace.csv"),
                {"t_ns": grid.step_times, "gamma": gamma, "xi1_re": state.xi1.real,
                 "xi1_im": state.xi1.imag, "xi1_analytic": analytic, "xi1_target": target})
    doc = to_builtin({"experiment": "simulate", "runtime_s": time.perf_counter() - start,
                      "config": cfg, "metrics": metrics,
                      "files": {"traces": {"simulate": "simulate_trace.csv"}}})
    with open(os.path.join(args.out, "results.json"), "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    print(json.dumps(metrics, indent=2))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="flyqc", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log optimizer progress")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", metavar="PATH", help="YAML configuration document")
        sp.add_argument("--out", metavar="DIR", default="results", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override optimizer.seed")
        sp.add_argument("--strict", action="store_true", help="treat tail warnings as errors")

    run = sub.add_parser("run", help="run a configured experiment")
    common(run)
    run.add_argument("--experiment", choices=sorted(config_mod.EXPERIMENT_DEFAULTS),
                     help="override experiment.name")
    run.add_argument("--shape", choices=config_mod.SHAPES, help="override experiment.shape.kind")
    run.add_argument("--no-figures", action="store_true", help="skip matplotlib renders")
    run.set_defaults(func=cmd_run)

    gc = sub.add_parser("gradcheck", help="compare analytic and finite-difference gradients")
    common(gc)
    gc.set_defaults(out=None)
    gc.add_argument("--dim", type=int, default=5)
    gc.add_argument("--steps", type=int, default=200, help="steps at the coarse dt")
    gc.add_argument("--dt", type=float, default=0.1, help="coarse step (ns)")
    gc.add_argument("--exact", action="store_true", help="check exact step derivatives instead")
    gc.set_defaults(func=cmd_gradcheck)

    sim = sub.add_parser("simulate", help="undriven emission with the ideal coupling")
    common(sim)
    sim.add_argument("--shape", choices=config_mod.SHAPES, help="override experiment.shape.kind")
    sim.set_defaults(func=lambda a: cmd_simulate(a))
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except config_mod.ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (TailWarning, IntegrationError, OptimizationError) as exc:
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
