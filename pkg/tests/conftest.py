"""Shared fixtures: desk-scale (16x16) setups and equilibration runs.

The two long relaxation runs are session-scoped because several acceptance
properties (conservation, H-theorem, staging, negative-temperature fits) are
read off the same trajectories.
"""

import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from latticekin import (BandStructure, BrillouinGrid, DistributionState,
                        IntegratorConfig, ModelParams, ScenarioKind,
                        ScenarioSpec, band_populations, build_initial_state,
                        build_scattering_table, collision_activity,
                        collision_rhs, crystal_momentum, evolve, h_functional,
                        particle_hole_distance, time_scale, total_energy)

DESK_N = 16
DESK_J_OVER_V = 1e-3
DESK_DELTA_F = 1e-2


@dataclass
class RelaxationRun:
    """Recorded trajectory of one desk-scale relaxation."""

    params: ModelParams
    grid: BrillouinGrid
    bands: BandStructure
    sigma: float
    initial: DistributionState
    final: DistributionState
    times: List[float]
    entropies: List[float]
    n_plus: List[float]
    n_minus: List[float]
    momenta: List[Tuple[float, float]]
    energies: List[float]
    distances: List[float]
    region_holes: List[Tuple[float, float, float]]   # center, flank, diamond
    drift_bound: float


def _run_relaxation(scenario: ScenarioSpec, t_end: float,
                    dt_max: float) -> RelaxationRun:
    params = ModelParams(hopping=DESK_J_OVER_V, interaction=1.0,
                         grid_size=DESK_N)
    grid = BrillouinGrid.create(DESK_N)
    bands = BandStructure.create(grid, params)
    table = build_scattering_table(grid, bands, params)
    state0 = build_initial_state(grid, bands, scenario)
    ts = time_scale(params)
    n_modes = grid.num_modes

    frac = (bands.e_minus - bands.e_minus.min()) \
        / (bands.e_minus.max() - bands.e_minus.min())
    center = frac <= 0.2
    flank = (frac > 0.35) & (frac < 0.65)
    diamond = frac >= 0.85

    def rhs(t, y):
        s = DistributionState(y[:n_modes], y[n_modes:], t)
        dfp, dfm = collision_rhs(s, table)
        return ts * np.concatenate([dfp, dfm])

    run = RelaxationRun(params, grid, bands, table.sigma, state0.copy(),
                        state0.copy(), [], [], [], [], [], [], [], [], 0.0)
    last_t = [0.0]

    def record(t, y):
        s = DistributionState(y[:n_modes], y[n_modes:], t)
        holes = 1.0 - s.f_minus
        np_, nm = band_populations(s, bands)
        px, py = crystal_momentum(s, bands)
        run.times.append(t)
        run.entropies.append(h_functional(s))
        run.n_plus.append(np_)
        run.n_minus.append(nm)
        run.momenta.append((float(px), float(py)))
        run.energies.append(total_energy(s, bands))
        run.distances.append(particle_hole_distance(s))
        run.region_holes.append((float(holes[center].mean()),
                                 float(holes[flank].mean()),
                                 float(holes[diamond].mean())))
        run.drift_bound += table.sigma * ts \
            * collision_activity(s, table) * (t - last_t[0])
        last_t[0] = t

    record(0.0, np.concatenate([state0.f_plus, state0.f_minus]))
    last_t[0] = 0.0
    config = IntegratorConfig(rel_tol=1e-5, abs_tol=1e-12, dt_init=1.0,
                              dt_max=dt_max)
    tf, yf = evolve(0.0, np.concatenate([state0.f_plus, state0.f_minus]),
                    rhs, t_end, config=config, on_step=record)
    run.final = DistributionState(yf[:n_modes].copy(), yf[n_modes:].copy(), tf)
    return run


@pytest.fixture(scope="session")
def symmetric_run() -> RelaxationRun:
    """Mirror-symmetric low-energy relaxation, evolved to equilibration."""
    spec = ScenarioSpec(kind=ScenarioKind.SYMMETRIC, delta_f=DESK_DELTA_F)
    return _run_relaxation(spec, t_end=20000.0, dt_max=2000.0)


@pytest.fixture(scope="session")
def asymmetric_run() -> RelaxationRun:
    """High-energy center-to-diamond relaxation, evolved to equilibration.

    The energy window [0.14, 0.15] perturbs eight modes in each band, so the
    particle and hole counts match and the two distributions can actually
    converge onto each other (the particle-hole kernel conserves each band
    number separately).
    """
    spec = ScenarioSpec(kind=ScenarioKind.ASYMMETRIC, delta_f=DESK_DELTA_F,
                        window_low=0.14, window_high=0.15)
    return _run_relaxation(spec, t_end=400000.0, dt_max=20000.0)


@pytest.fixture(scope="session")
def desk_setup():
    params = ModelParams(hopping=DESK_J_OVER_V, interaction=1.0,
                         grid_size=DESK_N)
    grid = BrillouinGrid.create(DESK_N)
    bands = BandStructure.create(grid, params)
    return params, grid, bands
