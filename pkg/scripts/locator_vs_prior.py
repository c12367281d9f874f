#!/usr/bin/env python3
"""Simulate a cohort and compare the baseline locator with the prior.

For each feature-noise level, prints the region cross entropy and the
regression error of the posterior mean, next to the prior-as-hypothesis
baseline.
"""

import argparse
import json
import time

import numpy as np

from accentloc.density import aggregate, mean
from accentloc.metrics import Trial, regression_error, trial_cross_entropy
from accentloc.sim import DEFAULT_CITIES, baseline_locator, build_population, simulate_speakers
from accentloc.spatial import grid_tessellation


def run(n, sigma_f, seed, move_prob, grid, regions, floor):
    pop = build_population(list(DEFAULT_CITIES))
    tess = grid_tessellation(pop.bbox, *regions)
    prior_r = aggregate(pop.prior, tess)
    prior_m = mean(pop.prior)
    speakers = simulate_speakers(pop, n, move_prob, seed, sigma_f)
    ce, ce0, pts, pts0 = [], [], [], []
    for s in speakers:
        post = baseline_locator(s.features, pop, sigma_f, resolution=grid)
        ref = aggregate(s.true_origin, tess)
        ce.append(trial_cross_entropy(ref, aggregate(post, tess), floor))
        ce0.append(trial_cross_entropy(ref, prior_r, floor))
        truth = mean(s.true_origin)
        pts.append(Trial(s.speaker_id, truth, mean(post)))
        pts0.append(Trial(s.speaker_id, truth, prior_m))
    return {
        "sigma_f": sigma_f,
        "cross_entropy": float(np.mean(ce)),
        "prior_cross_entropy": float(np.mean(ce0)),
        "regression_error_km": regression_error(pts),
        "prior_regression_error_km": regression_error(pts0),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--sigma", type=float, nargs="+", default=[10.0, 1.0, 0.5, 0.1])
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--move-prob", type=float, default=0.2)
    ap.add_argument("--grid", type=int, default=128)
    ap.add_argument("--regions", type=int, nargs=2, default=[5, 2], metavar=("NX", "NY"))
    ap.add_argument("--floor", type=float, default=1e-6)
    ap.add_argument("--json", help="also write the rows here")
    args = ap.parse_args()

    rows = []
    print(f"{'sigma_f':>8} {'H loc':>8} {'H prior':>8} {'E loc':>8} {'E prior':>8} {'sec':>6}")
    for sigma in args.sigma:
        t0 = time.perf_counter()
        r = run(args.n, sigma, args.seed, args.move_prob, (args.grid, args.grid), tuple(args.regions), args.floor)
        rows.append(r)
        print(
            f"{sigma:8.2f} {r['cross_entropy']:8.3f} {r['prior_cross_entropy']:8.3f} "
            f"{r['regression_error_km']:8.1f} {r['prior_regression_error_km']:8.1f} {time.perf_counter() - t0:6.1f}"
        )
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
