#!/usr/bin/env python3
"""Benchmark the compiled plant kernel against the pure-Python twin.

Runs the 16-module system for a configurable window on each available
backend and reports steps/s plus the speedup. The two trajectories are also
cross-checked so a speed win can never hide a physics regression.

Usage:
    python benchmarks/bench_backends.py [--duration 0.05] [--repeat 3]
"""

import argparse
import time

import numpy as np

from dcmmc import available_backends
from dcmmc.config import ConverterConfig, ToleranceSpec, apply_tolerances, derive_load
from dcmmc.plant import PlantParams, SimOptions, simulate


def run_once(cfg, params, duration, backend):
    t0 = time.perf_counter()
    rec = simulate(cfg, params, duration=duration,
                   options=SimOptions(backend=backend))
    return time.perf_counter() - t0, rec


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--duration", type=float, default=0.05,
                    help="simulated seconds per run (default 0.05)")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    cfg = ConverterConfig(delta_a=0.02, rng_seed=1)
    mods_u, mods_l = apply_tolerances(
        cfg, ToleranceSpec(spread_fraction=0.15), cfg.rng_seed)
    params = PlantParams.from_config(cfg, mods_u, mods_l, derive_load(cfg))
    n_steps = round(args.duration / cfg.dt_sim)

    results = {}
    recs = {}
    for backend in available_backends():
        best = min(run_once(cfg, params, args.duration, backend)[0]
                   for _ in range(args.repeat))
        _, recs[backend] = run_once(cfg, params, args.duration, backend)
        results[backend] = best
        print(f"{backend:>7}: {best:8.3f} s for {n_steps} steps "
              f"({n_steps / best / 1e3:8.1f} ksteps/s)")

    if len(recs) == 2:
        dv = np.abs(recs["cython"]["vcu"] - recs["python"]["vcu"]).max()
        print(f"cross-check: max |vcu_cython - vcu_python| = {dv:.3e} V")
        print(f"speedup: {results['python'] / results['cython']:.1f}x")
    else:
        print("compiled kernel unavailable; benchmarked the fallback only")


if __name__ == "__main__":
    main()
