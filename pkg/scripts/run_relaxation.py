#!/usr/bin/env python3
"""Relaxation time-series experiment.

Evolves one of the built-in scenarios and records, per accepted integrator
step, the entropy H, the particle-hole distance D, and the hole occupation
averaged over three energy regions of the lower band (zone center, diamond
flanks, diamond).  Writes a CSV and prints the fitted inverse temperatures of
the final state.

Example:
    python3 scripts/run_relaxation.py --scenario asymmetric --n 16 \
        --delta-f 1e-2 --w1 0.14 --w2 0.15 --t-end 4e5 --out relax.csv
"""

import argparse
import sys
import time

import numpy as np

from latticekin import (BandStructure, BrillouinGrid, DistributionState,
                        InsufficientDataError, IntegratorConfig, ModelParams,
                        ScenarioKind, ScenarioSpec, build_initial_state,
                        build_scattering_table, collision_rhs, evolve,
                        fit_fermi_dirac, h_functional, particle_hole_distance,
                        time_scale)


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--scenario", choices=["symmetric", "asymmetric"],
                   default="symmetric")
    p.add_argument("--n", type=int, default=16, help="grid modes per side")
    p.add_argument("--j-over-v", type=float, default=1e-3)
    p.add_argument("--delta-f", type=float, default=1e-2)
    p.add_argument("--w1", type=float, default=0.05,
                   help="lower energy-window fraction")
    p.add_argument("--w2", type=float, default=0.15,
                   help="upper energy-window fraction")
    p.add_argument("--t-end", type=float, default=2e4,
                   help="end time in units of J^2/V^3")
    p.add_argument("--rel-tol", type=float, default=1e-5)
    p.add_argument("--dt-max", type=float, default=None,
                   help="step-size cap (default t_end / 20)")
    p.add_argument("--out", default="relaxation.csv")
    return p.parse_args()


def main():
    args = parse_args()
    params = ModelParams(hopping=args.j_over_v, interaction=1.0,
                         grid_size=args.n)
    grid = BrillouinGrid.create(args.n)
    bands = BandStructure.create(grid, params)
    print(f"building scattering table for {args.n}x{args.n} ...",
          file=sys.stderr)
    table = build_scattering_table(grid, bands, params)
    print(f"  {table.num_entries} entries, sigma = {table.sigma:.3e}",
          file=sys.stderr)

    spec = ScenarioSpec(kind=ScenarioKind(args.scenario),
                        delta_f=args.delta_f,
                        window_low=args.w1, window_high=args.w2)
    state0 = build_initial_state(grid, bands, spec)

    frac = (bands.e_minus - bands.e_minus.min()) / np.ptp(bands.e_minus)
    regions = {"center": frac <= 0.2,
               "flank": (frac > 0.35) & (frac < 0.65),
               "diamond": frac >= 0.85}

    ts = time_scale(params)
    n_modes = grid.num_modes

    def rhs(t, y):
        s = DistributionState(y[:n_modes], y[n_modes:], t)
        return ts * np.concatenate(collision_rhs(s, table))

    rows = []

    def record(t, y):
        s = DistributionState(y[:n_modes], y[n_modes:], t)
        holes = 1.0 - s.f_minus
        rows.append((t, h_functional(s), particle_hole_distance(s),
                     *(holes[m].mean() for m in regions.values())))

    record(0.0, np.concatenate([state0.f_plus, state0.f_minus]))
    config = IntegratorConfig(rel_tol=args.rel_tol, abs_tol=1e-12, dt_init=1.0,
                              dt_max=args.dt_max or args.t_end / 20)
    start = time.time()
    tf, yf = evolve(0.0, np.concatenate([state0.f_plus, state0.f_minus]),
                    rhs, args.t_end, config=config, on_step=record)
    print(f"evolved to t = {tf:g} in {time.time() - start:.1f}s "
          f"({len(rows) - 1} steps)", file=sys.stderr)

    header = "t,H,D," + ",".join(f"holes_{name}" for name in regions)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    print(f"wrote {args.out}", file=sys.stderr)

    final = DistributionState(yf[:n_modes], yf[n_modes:], tf)
    for label, occ, energies in (("f+", final.f_plus, bands.e_plus),
                                 ("1-f-", 1.0 - final.f_minus, bands.e_minus)):
        try:
            fit = fit_fermi_dirac(occ, energies)
        except InsufficientDataError:
            print(f"{label}: no Fermi-Dirac fit (saturated)")
            continue
        print(f"{label}: beta = {fit.beta:.6g}, mu = {fit.mu:.6g}, "
              f"rms residual = {fit.rms_residual:.3e}")


if __name__ == "__main__":
    main()
