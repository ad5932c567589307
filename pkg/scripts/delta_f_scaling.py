#!/usr/bin/env python3
"""Relaxation-rate scaling with the perturbation strength.

For a range of delta_f values, measures the fitted early-time decay rate of
the initially perturbed quasi-particle modes in the mirror-symmetric scenario
and prints the rate normalized per collision-partner occupancy.  The
normalized rates should collapse onto one value: each perturbed mode relaxes
against partners whose occupancy is itself of order delta_f, so the raw rate
is linear in delta_f while the per-mode collision term is quadratic.

Example:
    python3 scripts/delta_f_scaling.py --n 16 --delta-f 1e-3 1e-2
"""

import argparse
import sys

import numpy as np

from latticekin import (BandStructure, BrillouinGrid, DistributionState,
                        IntegratorConfig, ModelParams, ScenarioKind,
                        ScenarioSpec, build_initial_state,
                        build_scattering_table, collision_rhs, evolve,
                        time_scale)


def decay_rate(grid, bands, table, params, delta_f, rel_tol):
    spec = ScenarioSpec(kind=ScenarioKind.SYMMETRIC, delta_f=delta_f)
    state0 = build_initial_state(grid, bands, spec)
    window = state0.f_plus > 0
    ts = time_scale(params)
    n_modes = grid.num_modes

    def rhs(t, y):
        s = DistributionState(y[:n_modes], y[n_modes:], t)
        return ts * np.concatenate(collision_rhs(s, table))

    samples = [(0.0, delta_f)]

    def track(t, y):
        samples.append((t, float(y[:n_modes][window].mean())))

    t_end = 0.35 / delta_f      # roughly the first ten percent of the decay
    config = IntegratorConfig(rel_tol=rel_tol, abs_tol=1e-14, dt_init=1.0,
                              dt_max=t_end / 12)
    evolve(0.0, np.concatenate([state0.f_plus, state0.f_minus]), rhs, t_end,
           config=config, on_step=track)
    t_arr = np.array([s[0] for s in samples])
    occ = np.array([s[1] for s in samples])
    slope, _ = np.polyfit(t_arr, np.log(occ), 1)
    return -slope


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--j-over-v", type=float, default=1e-3)
    p.add_argument("--delta-f", type=float, nargs="+",
                   default=[1e-3, 3e-3, 1e-2])
    p.add_argument("--rel-tol", type=float, default=1e-7)
    args = p.parse_args()

    params = ModelParams(hopping=args.j_over_v, interaction=1.0,
                         grid_size=args.n)
    grid = BrillouinGrid.create(args.n)
    bands = BandStructure.create(grid, params)
    print(f"building scattering table for {args.n}x{args.n} ...",
          file=sys.stderr)
    table = build_scattering_table(grid, bands, params)

    print(f"{'delta_f':>10s} {'rate':>12s} {'rate/delta_f':>14s}")
    for df0 in sorted(args.delta_f):
        rate = decay_rate(grid, bands, table, params, df0, args.rel_tol)
        print(f"{df0:10.3e} {rate:12.5e} {rate / df0:14.5e}")


if __name__ == "__main__":
    main()
