"""End-to-end physics acceptance: invariants, scaling laws, staging, fits.

These tests exercise the desk-scale configuration (16x16 grid, delta_f =
10^-2, particle-hole kernel, J/V = 10^-3) and include the two session-scoped
equilibration runs from conftest.
"""

import math

import numpy as np
import pytest

import oracles
from conftest import DESK_DELTA_F, DESK_J_OVER_V, DESK_N
from latticekin import (BandStructure, BrillouinGrid, ChannelSet,
                        DistributionState, IntegratorConfig, ModelParams,
                        STRONG_CHANNELS, ScenarioKind, ScenarioSpec,
                        build_initial_state, build_scattering_table,
                        collision_rhs, evolve, fit_fermi_dirac, ground_state,
                        matrix_element_strong, time_scale, weak_coupling_rhs)
from latticekin.cli import main
from latticekin.matrix_elements import matrix_element_full_idx


def desk_params(**kw):
    return ModelParams(hopping=DESK_J_OVER_V, interaction=1.0,
                       grid_size=DESK_N, **kw)


# 1. ground state is an exact fixed point ------------------------------------

def test_ground_state_exact_fixed_point(desk_setup):
    params, grid, bands = desk_setup
    table = build_scattering_table(grid, bands, params)
    dfp, dfm = collision_rhs(ground_state(grid), table)
    assert not dfp.any()
    assert not dfm.any()


# 2. conservation over a full symmetric equilibration run --------------------

def test_band_numbers_conserved(symmetric_run):
    run = symmetric_run
    assert max(run.n_plus) - min(run.n_plus) <= 1e-9
    assert max(run.n_minus) - min(run.n_minus) <= 1e-9


def test_crystal_momentum_conserved_mod_lattice(symmetric_run):
    px = np.array([p[0] for p in symmetric_run.momenta])
    py = np.array([p[1] for p in symmetric_run.momenta])
    for drift in (px - px[0], py - py[0]):
        wrapped = (drift + math.pi) % (2 * math.pi) - math.pi
        assert np.abs(wrapped).max() <= 1e-9


def test_energy_drift_within_activity_bound(symmetric_run):
    run = symmetric_run
    drift = abs(run.energies[-1] - run.energies[0])
    assert drift <= run.drift_bound


# 3. H-theorem across both scenarios ------------------------------------------

@pytest.mark.parametrize("fixture", ["symmetric_run", "asymmetric_run"])
def test_h_nondecreasing_per_step(fixture, request):
    run = request.getfixturevalue(fixture)
    h = np.array(run.entropies)
    assert h.size > 10
    assert np.diff(h).min() >= -1e-10


# 4. detailed balance: Fermi-Dirac states annihilate the rhs ------------------

def test_detailed_balance_fermi_dirac(desk_setup):
    params, grid, bands = desk_setup
    table = build_scattering_table(grid, bands, params)
    half = build_scattering_table(grid, bands, params, sigma=table.sigma / 2)
    mu = params.interaction / 2
    # activity scale of a comparably-occupied non-equilibrium state, used to
    # show the equilibrium residual is small rather than merely bounded
    ref_state = build_initial_state(
        grid, bands, ScenarioSpec(kind=ScenarioKind.SYMMETRIC, delta_f=0.05))
    ref_scale = np.abs(np.concatenate(collision_rhs(ref_state, table))).max()

    for beta in (20.0, -20.0, 1e3, -1e3, 1e6, -1e6):
        with np.errstate(over="ignore"):
            eq = DistributionState(
                1 / (np.exp(beta * (bands.e_plus - mu)) + 1),
                1 / (np.exp(beta * (bands.e_minus - mu)) + 1))
        resid = np.abs(np.concatenate(collision_rhs(eq, table))).max()
        assert resid <= 1e-3 * ref_scale      # ||rhs||_inf <= C sigma, C small
        if abs(beta) == 20.0:
            # residual is first order in the broadening: halving sigma
            # reduces it, by at most 4x and at least 1x
            resid_half = np.abs(
                np.concatenate(collision_rhs(eq, half))).max()
            assert resid > 0
            ratio = resid / resid_half
            assert 1.0 <= ratio <= 4.0


# 5. oracle equivalence on small grids ----------------------------------------

@pytest.mark.parametrize("n", [6, 8])
def test_ph_kernel_matches_naive_oracle(n):
    params = ModelParams(hopping=DESK_J_OVER_V, interaction=1.0, grid_size=n)
    grid = BrillouinGrid.create(n)
    bands = BandStructure.create(grid, params)
    table = build_scattering_table(grid, bands, params)
    rng = np.random.default_rng(n)
    state = DistributionState(rng.uniform(0, 0.25, grid.num_modes),
                              rng.uniform(0.75, 1.0, grid.num_modes))
    dfp, dfm = collision_rhs(state, table)
    rfp, rfm = oracles.ph_rhs_naive(state.f_plus, state.f_minus, bands,
                                    table.sigma)
    scale = max(np.abs(rfp).max(), np.abs(rfm).max())
    assert np.abs(dfp - rfp).max() <= 1e-12 * scale
    assert np.abs(dfm - rfm).max() <= 1e-12 * scale


@pytest.mark.parametrize("n", [6, 8])
def test_weak_kernel_matches_naive_oracle(n):
    params = ModelParams(hopping=0.4, interaction=1.0, grid_size=n,
                         channel_set=ChannelSet.WEAK_COUPLING)
    grid = BrillouinGrid.create(n)
    bands = BandStructure.create(grid, params)
    table = build_scattering_table(grid, bands, params)
    rng = np.random.default_rng(n + 1)
    f = rng.uniform(0, 1, grid.num_modes)
    df = weak_coupling_rhs(f, table)
    ref = oracles.weak_rhs_naive(f, bands, table.sigma)
    assert np.abs(df - ref).max() <= 1e-12 * np.abs(ref).max()


# 6. strong-limit matrix elements ---------------------------------------------

def test_strong_limit_closed_forms(desk_setup):
    params, grid, bands = desk_setup
    rng = np.random.default_rng(5)
    count = 1500
    k = rng.integers(0, grid.num_modes, count)
    p = rng.integers(0, grid.num_modes, count)
    q = rng.integers(0, grid.num_modes, count)
    pq, kq = grid.add_indices(p, q), grid.sub_indices(k, q)
    km = [grid.momenta[x] for x in (pq, p, kq, k)]
    v = params.interaction
    checked = 0
    for channel in STRONG_CHANNELS:
        full = matrix_element_full_idx(channel, pq, p, kq, k, bands)
        strong = matrix_element_strong(channel, *km, params)
        keep = np.maximum(np.abs(full), np.abs(strong)) >= v * v * 1e-12
        if not keep.any():
            continue        # channel negligible at this coupling everywhere
        checked += int(keep.sum())
        rel = np.abs(full[keep] - strong[keep]) / np.abs(strong[keep])
        assert rel.max() <= 1e-4
    assert checked >= 1000


# 7. delta_f scaling laws ------------------------------------------------------

def _initial_decay_rate(delta_f: float) -> float:
    """Fitted early-time decay rate of the perturbed-mode population."""
    params = desk_params()
    grid = BrillouinGrid.create(DESK_N)
    bands = BandStructure.create(grid, params)
    table = build_scattering_table(grid, bands, params)
    spec = ScenarioSpec(kind=ScenarioKind.SYMMETRIC, delta_f=delta_f)
    state0 = build_initial_state(grid, bands, spec)
    window = state0.f_plus > 0
    ts = time_scale(params)
    n_modes = grid.num_modes

    def rhs(t, y):
        s = DistributionState(y[:n_modes], y[n_modes:], t)
        return ts * np.concatenate(collision_rhs(s, table))

    samples = []

    def track(t, y):
        samples.append((t, float(y[:n_modes][window].mean())))

    # integrate over roughly the first ten percent of the decay
    t_end = 0.35 / delta_f
    config = IntegratorConfig(rel_tol=1e-7, abs_tol=1e-14, dt_init=1.0,
                              dt_max=t_end / 12)
    evolve(0.0, np.concatenate([state0.f_plus, state0.f_minus]), rhs, t_end,
           config=config, on_step=track)
    t_arr = np.array([0.0] + [s[0] for s in samples])
    occ = np.array([delta_f] + [s[1] for s in samples])
    slope, _ = np.polyfit(t_arr, np.log(occ), 1)
    return -slope


def test_relaxation_rate_linear_in_delta_f():
    rate_small = _initial_decay_rate(1e-3)
    rate_large = _initial_decay_rate(1e-2)
    ratio = rate_large / rate_small
    assert abs(ratio - 10.0) <= 1.0          # 10x within +-10%
    # normalized per collision-partner occupancy the rates collapse
    assert abs(rate_large / 1e-2 / (rate_small / 1e-3) - 1.0) <= 0.1


def test_rhs_quadratic_in_delta_f(desk_setup):
    params, grid, bands = desk_setup
    table = build_scattering_table(grid, bands, params)

    def rhs_for(delta_f):
        spec = ScenarioSpec(kind=ScenarioKind.SYMMETRIC, delta_f=delta_f)
        state = build_initial_state(grid, bands, spec)
        return np.concatenate(collision_rhs(state, table))

    r1 = rhs_for(1e-4)
    r2 = rhs_for(2e-4)
    live = np.abs(r1) > 1e-6 * np.abs(r1).max()
    ratio = r2[live] / r1[live]
    assert np.abs(ratio - 4.0).max() <= 0.04


# 8. two-stage relaxation and equalization ------------------------------------

def test_distance_collapses_and_stages(asymmetric_run):
    run = asymmetric_run
    d = np.array(run.distances)
    t = np.array(run.times)

    assert d[-1] <= d[0] / 100.0
    # eventually monotone decreasing: non-increasing after its maximum, up to
    # integrator noise once D sits at its ~1e-9 floor
    peak = int(np.argmax(d))
    tail = d[peak:]
    assert tail.size > 5
    assert np.all(np.diff(tail) <= 1e-5 * d[0])

    center, flank, diamond = (np.array(x) for x in zip(*run.region_holes))
    total_holes = float(DESK_N ** 2 - run.initial.f_minus.sum())
    uniform = total_holes / DESK_N ** 2

    # early stage: holes still near the zone center, flanks ahead of diamond
    early = t <= t[1] + 0.05 * (t[-1] - t[1])
    assert np.any(early & (center > 3 * flank) & (flank > diamond))

    # the flanks acquire occupation well before center and diamond equalize
    flank_on = t[np.argmax(flank >= 0.5 * uniform)]
    equalized = np.abs(center - diamond) <= 0.05 * uniform
    assert equalized[-1]
    t_equal = t[np.argmax(equalized)]
    assert flank_on < t_equal


# 9. negative-temperature equilibrium ------------------------------------------

def test_inverted_fermi_dirac_fits(asymmetric_run):
    run = asymmetric_run
    final = run.final

    fit_plus = fit_fermi_dirac(final.f_plus, run.bands.e_plus)
    assert fit_plus.beta < 0.0
    assert fit_plus.rms_residual \
        <= 0.05 * (final.f_plus.max() - final.f_plus.min())

    holes = 1.0 - final.f_minus
    fit_holes = fit_fermi_dirac(holes, run.bands.e_minus)
    beta_minus = -fit_holes.beta            # band beta from the hole fit
    assert beta_minus < 0.0
    assert fit_holes.rms_residual <= 0.05 * (holes.max() - holes.min())


# 10. band-structure numbers ----------------------------------------------------

def test_band_structure_numbers(desk_setup):
    params, grid, bands = desk_setup
    v, j = params.interaction, params.hopping
    assert bands.e_plus.min() - bands.e_minus.max() == v
    assert abs(bands.bandwidth - j * j / v) <= 1e-3 * j * j / v
    assert np.all(bands.e_plus + bands.e_minus == v)


# 11. byte-identical reruns ------------------------------------------------------

def test_reproducible_diagnostics(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        f"J_over_V = {DESK_J_OVER_V!r}\nN = {DESK_N}\n"
        f"delta_f = {DESK_DELTA_F!r}\nscenario = symmetric\n"
        "rel_tol = 1e-6\nt_end = 2\nsnapshots = 1\n", encoding="utf-8")
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["--threads", "1", "--out-dir", str(out1), "run", str(cfg)]) == 0
    assert main(["--threads", "1", "--out-dir", str(out2), "run", str(cfg)]) == 0
    assert (out1 / "diagnostics.csv").read_bytes() \
        == (out2 / "diagnostics.csv").read_bytes()
