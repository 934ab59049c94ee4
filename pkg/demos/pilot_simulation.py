"""Simulation study driver: quick pilot by default, full factorial on request.

Three pilot cells stress the marginalized estimator where it is hardest:
no heterogeneity with 3 studies, moderate heterogeneity with 10, and heavy
heterogeneity with 5.  Each cell reports coverage, width, and bias per
method, plus the mean disagreement between the sampled and quadrature
marginalization routes.

Modes
  (default)      3 cells x 100 iterations, a few minutes on one core
  --full-pilot   3 cells x 1000 iterations (about half an hour)
  --factorial    the full 5 x 4 x 3 x 2 grid at 4000 iterations per cell
                 with the production method set; this is the long-running
                 reproduction mode and takes days on a single core, so run
                 it with --workers set to the machine's core count

Run:  python3 demos/pilot_simulation.py [--full-pilot | --factorial]
"""

import argparse
import sys
import time
import warnings

import numpy as np

from cdmeta import (
    DEFAULT_METHODS,
    Method,
    MonteCarloSizeWarning,
    SimScenario,
    run_scenario,
    sim_results_to_csv,
)

PILOT_METHODS = (Method.EDGINGTON, Method.CD_EDGINGTON_MC, Method.CD_EDGINGTON_GAQ)
PILOT_CELLS = [
    dict(k=3, i2=0.0, seed=101),
    dict(k=10, i2=0.60, seed=102),
    dict(k=5, i2=0.90, seed=103),
]


def pilot_cells(n_sim):
    return [SimScenario(n_sim=n_sim, b=10_000, **cell) for cell in PILOT_CELLS]


def factorial_cells(n_sim):
    cells = []
    seed = 0
    for dist in ("normal", "skew-normal"):
        for k in (3, 5, 10, 20, 50):
            for i2 in (0.0, 0.3, 0.6, 0.9):
                for k_large in (0, 1, 2):
                    cells.append(
                        SimScenario(
                            k=k, i2=i2, k_large=k_large, effect_dist=dist,
                            n_sim=n_sim, b=10_000, seed=(2024, seed),
                        )
                    )
                    seed += 1
    return cells


def mc_gaq_differences(result):
    mc = result.rows[Method.CD_EDGINGTON_MC]
    gaq = result.rows[Method.CD_EDGINGTON_GAQ]
    ok = np.all(np.isfinite(mc[:, :3]), axis=1) & np.all(
        np.isfinite(gaq[:, :3]), axis=1
    )
    diffs = mc[ok, :3] - gaq[ok, :3]
    mean = diffs.mean(axis=0)
    mcse = diffs.std(axis=0, ddof=1) / np.sqrt(ok.sum())
    return mean, mcse


def run_pilot(n_sim, workers):
    for scenario in pilot_cells(n_sim):
        t0 = time.time()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", MonteCarloSizeWarning)
            result = run_scenario(scenario, PILOT_METHODS, workers=workers)
        print(
            f"\nk = {scenario.k}, I2 = {scenario.i2:.0%}, "
            f"{n_sim} iterations ({time.time() - t0:.0f} s)"
        )
        print(f"  {'method':<18s} {'coverage':>12s} {'width':>8s} {'bias':>8s}")
        for method in PILOT_METHODS:
            perf = result.performance[method]
            print(
                f"  {method.value:<18s} {perf.coverage:6.3f} "
                f"[{perf.coverage_mcse:.3f}] {perf.mean_width:8.3f} {perf.bias:8.4f}"
            )
        mean, mcse = mc_gaq_differences(result)
        print(
            "  MC - GAQ mean differences: "
            f"estimate {mean[0]:+.4f} [{mcse[0]:.4f}], "
            f"lower {mean[1]:+.4f} [{mcse[1]:.4f}], "
            f"upper {mean[2]:+.4f} [{mcse[2]:.4f}]"
        )


def run_factorial(n_sim, workers, out):
    cells = factorial_cells(n_sim)
    print(
        f"{len(cells)} cells x {n_sim} iterations with methods "
        f"{[m.value for m in DEFAULT_METHODS]}; this takes days on one core.",
        flush=True,
    )
    results = []
    for i, scenario in enumerate(cells, start=1):
        t0 = time.time()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", MonteCarloSizeWarning)
            results.append(run_scenario(scenario, workers=workers))
        print(
            f"[{i}/{len(cells)}] k={scenario.k} i2={scenario.i2:.0%} "
            f"k_large={scenario.k_large} {scenario.effect_dist.value} "
            f"({time.time() - t0:.0f} s)",
            flush=True,
        )
        with open(out, "w") as handle:
            handle.write(sim_results_to_csv(results))
    print(f"wrote {out}")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    mode = parser.add_mutually_exclusive_group()
    mode.add_argument("--full-pilot", action="store_true")
    mode.add_argument("--factorial", action="store_true")
    parser.add_argument("--n-sim", type=int, default=None, help="override iterations per cell")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", default="sim_results.csv", help="CSV path (factorial mode)")
    args = parser.parse_args(argv)

    if args.factorial:
        run_factorial(args.n_sim or 4000, args.workers, args.out)
    else:
        run_pilot(args.n_sim or (1000 if args.full_pilot else 100), args.workers)


if __name__ == "__main__":
    sys.exit(main())
