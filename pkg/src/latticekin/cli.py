"""Command-line driver: run scenarios, dump band structures, verify invariants.

Exit codes: 0 success, 1 configuration/validation/cache errors or failed
verification checks, 2 step-size underflow during time evolution.

Output files are plain CSV plus a raw little-endian snapshot format (header
magic "LKSN"), so downstream plotting needs no dependency on this package.
All reductions run in a fixed order, so a given config and thread count
reproduces diagnostics.csv byte for byte.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import struct
import sys
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from . import reference
from .collision import (DistributionState, build_scattering_table,
                        collision_activity, collision_rhs, default_sigma,
                        load_table, save_table, weak_coupling_rhs)
from .diagnostics import (backreaction_rate, collect_record, h_functional,
                          total_energy)
from .errors import (ConfigValidationError, LatticeKinError,
                     StepUnderflowError, TableCacheError)
from .integrator import evolve, time_scale
from .lattice import BandStructure, BrillouinGrid, ChannelSet
from .matrix_elements import (STRONG_CHANNELS, matrix_element_full_idx,
                              matrix_element_strong)
from .scenarios import RunConfig, build_initial_state, load_config

_SNAP_MAGIC = b"LKSN"
_SNAP_VERSION = 1
_SNAP_HEADER = struct.Struct("<4sIId")

CSV_COLUMNS = ("t", "H", "E_total", "N_plus", "N_minus", "Px", "Py",
               "beta_plus", "beta_minus", "D", "dnA_dt")


def write_snapshot(path, n: int, t: float, f_plus: np.ndarray,
                   f_minus: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(_SNAP_HEADER.pack(_SNAP_MAGIC, _SNAP_VERSION, n, t))
        fh.write(np.ascontiguousarray(f_plus, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(f_minus, dtype="<f8").tobytes())


def read_snapshot(path) -> Tuple[int, float, np.ndarray, np.ndarray]:
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, version, n, t = _SNAP_HEADER.unpack_from(raw)
    if magic != _SNAP_MAGIC or version != _SNAP_VERSION:
        raise LatticeKinError(f"not a readable snapshot file: {path}")
    body = np.frombuffer(raw, dtype="<f8", offset=_SNAP_HEADER.size)
    if body.size != 2 * n * n:
        raise LatticeKinError(f"snapshot payload truncated: {path}")
    return n, t, body[:n * n].copy(), body[n * n:].copy()


def _fmt(value: Optional[float]) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "nan"
    return repr(float(value))


def _resolve_threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("LATTICEKIN_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigValidationError("LATTICEKIN_THREADS",
                                        f"not an integer: {env!r}")
    return 1


def _load_run_config(path: str, out_dir_override: Optional[str]) -> RunConfig:
    text = Path(path).read_text(encoding="utf-8")
    config = load_config(text)
    if out_dir_override:
        config = dataclasses.replace(
            config, output=dataclasses.replace(config.output,
                                               out_dir=out_dir_override))
    return config


def _obtain_table(config: RunConfig, grid, bands, sigma):
    cache = config.output.table_cache
    if cache and Path(cache).exists():
        return load_table(cache, grid, config.params, expected_sigma=sigma)
    table = build_scattering_table(grid, bands, config.params, sigma=sigma)
    if cache:
        save_table(table, cache)
    return table


def cmd_run(config_path: str, out_dir_override: Optional[str],
            threads: int) -> int:
    config = _load_run_config(config_path, out_dir_override)
    params, output = config.params, config.output
    grid = BrillouinGrid.create(params.grid_size)
    bands = BandStructure.create(grid, params)
    sigma = default_sigma(bands)
    table = _obtain_table(config, grid, bands, sigma)
    state0 = build_initial_state(grid, bands, config.scenario)

    out_dir = Path(output.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    ts = time_scale(params)
    n_modes = grid.num_modes

    def rhs(t, y):
        state = DistributionState(y[:n_modes], y[n_modes:], t)
        dfp, dfm = collision_rhs(state, table, threads=threads)
        return ts * np.concatenate([dfp, dfm])

    snapshot_times = sorted({0.0, output.t_end, *output.snapshot_times})
    rows: List[str] = []
    snap_index = [0]
    last_t = [0.0]
    bound_integral = [0.0]
    e0 = total_energy(state0, bands)

    def emit(t, y):
        state = DistributionState(y[:n_modes].copy(), y[n_modes:].copy(), t)
        rec = collect_record(state, bands,
                             backreaction=backreaction_rate(state, bands, sigma))
        rows.append(",".join(_fmt(v) for v in (
            rec.time, rec.entropy, rec.energy, rec.n_plus, rec.n_minus,
            rec.momentum_x, rec.momentum_y, rec.beta_plus, rec.beta_minus,
            rec.ph_distance, rec.backreaction)))
        write_snapshot(out_dir / f"snapshot_{snap_index[0]:04d}.lksn",
                       grid.n, t, state.f_plus, state.f_minus)
        snap_index[0] += 1

    def on_step(t, y):
        # accumulate the sigma-proportional energy-drift bound
        dt = t - last_t[0]
        state = DistributionState(y[:n_modes], y[n_modes:], t)
        bound_integral[0] += sigma * ts * collision_activity(state, table) * dt
        last_t[0] = t

    y0 = np.concatenate([state0.f_plus, state0.f_minus])
    emit(0.0, y0)
    if output.t_end > 0.0:
        _, y_final = evolve(0.0, y0, rhs, output.t_end,
                            config=config.integrator,
                            snapshot_times=[t for t in snapshot_times if t > 0],
                            on_snapshot=emit, on_step=on_step)
    else:
        y_final = y0

    (out_dir / "diagnostics.csv").write_text(
        ",".join(CSV_COLUMNS) + "\n" + "\n".join(rows) + "\n", encoding="utf-8")

    final_state = DistributionState(y_final[:n_modes], y_final[n_modes:],
                                    output.t_end)
    drift = abs(total_energy(final_state, bands) - e0)
    bound = bound_integral[0]
    summary = [
        f"table_entries = {table.num_entries}",
        f"sigma = {sigma!r}",
        f"energy_drift = {drift!r}",
        f"energy_drift_bound = {bound!r}",
        f"energy_drift_within_bound = {drift <= bound or drift == 0.0}",
    ]
    (out_dir / "run_summary.txt").write_text("\n".join(summary) + "\n",
                                             encoding="utf-8")
    return 0


def cmd_bands(config_path: str, out_dir_override: Optional[str]) -> int:
    config = _load_run_config(config_path, out_dir_override)
    grid = BrillouinGrid.create(config.params.grid_size)
    bands = BandStructure.create(grid, config.params)
    out_dir = Path(config.output.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["k_x,k_y,E_plus,E_minus"]
    for i in range(grid.num_modes):
        kx, ky = grid.momenta[i]
        lines.append(f"{float(kx)!r},{float(ky)!r},"
                     f"{float(bands.e_plus[i])!r},{float(bands.e_minus[i])!r}")
    (out_dir / "bands.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0


def _fermi(energies: np.ndarray, beta: float, mu: float) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / (np.exp(beta * (energies - mu)) + 1.0)


def cmd_verify(config_path: str, threads: int) -> int:
    """Built-in invariant suite on a small grid derived from the config."""
    config = _load_run_config(config_path, None)
    params = dataclasses.replace(config.params,
                                 grid_size=min(config.params.grid_size, 8))
    grid = BrillouinGrid.create(params.grid_size)
    bands = BandStructure.create(grid, params)
    sigma = default_sigma(bands)
    v = params.interaction
    rng = np.random.default_rng(0)
    results: List[Tuple[str, bool, str]] = []

    def check(name, ok, detail=""):
        results.append((name, bool(ok), detail))

    # oracle equivalence, particle-hole kernel
    state = DistributionState(rng.uniform(0, 0.2, grid.num_modes),
                              rng.uniform(0.8, 1.0, grid.num_modes))
    ph_params = dataclasses.replace(params, channel_set=ChannelSet.PH_ONLY)
    ph_bands = BandStructure.create(grid, ph_params)
    ph_sigma = default_sigma(ph_bands)
    table = build_scattering_table(grid, ph_bands, ph_params, sigma=ph_sigma)
    dfp, dfm = collision_rhs(state, table, threads=threads)
    rfp, rfm = reference.ph_rhs_reference(state.f_plus, state.f_minus,
                                          ph_bands, ph_sigma)
    scale = max(np.abs(rfp).max(), np.abs(rfm).max())
    err = max(np.abs(dfp - rfp).max(), np.abs(dfm - rfm).max()) / scale
    check("oracle_ph", err <= 1e-12, f"rel err {err:.3e}")

    # oracle equivalence, weak-coupling kernel
    weak_params = dataclasses.replace(params,
                                      channel_set=ChannelSet.WEAK_COUPLING)
    weak_bands = BandStructure.create(grid, weak_params)
    weak_sigma = default_sigma(weak_bands)
    weak_table = build_scattering_table(grid, weak_bands, weak_params,
                                        sigma=weak_sigma)
    f = rng.uniform(0, 1, grid.num_modes)
    df = weak_coupling_rhs(f, weak_table, threads=threads)
    rdf = reference.weak_rhs_reference(f, weak_bands, weak_sigma)
    werr = np.abs(df - rdf).max() / np.abs(rdf).max()
    check("oracle_weak", werr <= 1e-12, f"rel err {werr:.3e}")

    # conservation of band numbers and crystal momentum indices
    check("conservation_numbers",
          abs(dfp.sum()) <= 1e-12 * np.abs(dfp).sum()
          and abs(dfm.sum()) <= 1e-12 * max(np.abs(dfm).sum(), 1e-300),
          f"sum df+ {dfp.sum():.3e}, sum df- {dfm.sum():.3e}")
    # crystal momentum: the rhs momentum change must equal minus the sum of
    # per-entry umklapp defects (each a lattice vector times the entry rate)
    from .collision import _block_bracket
    mom = grid.momenta.T @ (dfp + dfm)
    defect = np.zeros(2)
    for block in table.blocks:
        contrib = table.sym_factor * block.weight \
            * _block_bracket(block, state.f_plus, state.f_minus)
        d = (grid.momenta[block.k_idx] + grid.momenta[block.p_idx]
             - grid.momenta[block.kq_idx] - grid.momenta[block.pq_idx])
        defect += contrib @ d
    resid = np.abs(mom + defect).max()
    scale = np.abs(dfp).sum() + np.abs(dfm).sum()
    check("conservation_momentum", resid <= 1e-12 * scale,
          f"|dP + umklapp| {resid:.3e} vs scale {scale:.3e}")

    # H-theorem on a short relaxation
    from .integrator import evolve as _evolve
    from .scenarios import ScenarioKind, ScenarioSpec, build_initial_state
    spec = ScenarioSpec(kind=ScenarioKind.SYMMETRIC, delta_f=1e-2)
    st = build_initial_state(grid, ph_bands, spec)
    ts = time_scale(ph_params)
    n_modes = grid.num_modes

    def rhs(t, y):
        s = DistributionState(y[:n_modes], y[n_modes:], t)
        a, b = collision_rhs(s, table, threads=threads)
        return ts * np.concatenate([a, b])

    h_values = []

    def track(t, y):
        h_values.append(h_functional(
            DistributionState(y[:n_modes], y[n_modes:], t)))

    rate = np.abs(rhs(0.0, np.concatenate([st.f_plus, st.f_minus]))).max()
    t_end = 0.05 * spec.delta_f / max(rate, 1e-300)
    _evolve(0.0, np.concatenate([st.f_plus, st.f_minus]), rhs, t_end,
            on_step=track)
    h_arr = np.array(h_values)
    check("h_monotone", h_arr.size >= 2 and np.all(np.diff(h_arr) >= -1e-10),
          f"{h_arr.size} steps, min dH {np.diff(h_arr).min():.3e}"
          if h_arr.size >= 2 else "too few steps")

    # detailed balance: Fermi-Dirac input, residual first order in sigma.
    # beta is kept moderate so 1 - f stays resolvable in double precision;
    # larger |beta| saturates to the exact ground state (residual bitwise 0).
    beta = 20.0 / v
    eq = DistributionState(_fermi(ph_bands.e_plus, beta, v / 2),
                           _fermi(ph_bands.e_minus, beta, v / 2))
    r1p, r1m = collision_rhs(eq, table)
    half_table = build_scattering_table(grid, ph_bands, ph_params,
                                        sigma=ph_sigma / 2)
    r2p, r2m = collision_rhs(eq, half_table)
    r1 = max(np.abs(r1p).max(), np.abs(r1m).max())
    r2 = max(np.abs(r2p).max(), np.abs(r2m).max())
    ratio = r1 / r2 if r2 > 0 else math.inf
    check("detailed_balance", r2 <= r1 and 1.0 <= ratio <= 4.0,
          f"residual {r1:.3e} (C = {r1 / ph_sigma:.3e}), halving ratio {ratio:.2f}")

    # gauge invariance: sign flips of eigenvector rows leave M unchanged
    flip = rng.integers(0, 2, grid.num_modes).astype(bool)
    flipped = BandStructure(
        grid=grid, params=ph_params, j_k=ph_bands.j_k, e_plus=ph_bands.e_plus,
        e_minus=ph_bands.e_minus, omega=ph_bands.omega,
        cos_alpha=np.where(flip, -ph_bands.cos_alpha, ph_bands.cos_alpha),
        sin_alpha=np.where(flip, -ph_bands.sin_alpha, ph_bands.sin_alpha))
    idx = rng.integers(0, grid.num_modes, (200, 4))
    gerr = 0.0
    for channel in STRONG_CHANNELS:
        m0 = matrix_element_full_idx(channel, idx[:, 0], idx[:, 1], idx[:, 2],
                                     idx[:, 3], ph_bands)
        m1 = matrix_element_full_idx(channel, idx[:, 0], idx[:, 1], idx[:, 2],
                                     idx[:, 3], flipped)
        gerr = max(gerr, float(np.abs(m0 - m1).max()))
    check("gauge_invariance", gerr <= 1e-12 * v ** 2, f"max |dM| {gerr:.3e}")

    # strong-coupling closed forms against the full matrix element
    serr = 0.0
    pairs = 0
    for channel in STRONG_CHANNELS:
        m_full = matrix_element_full_idx(channel, idx[:, 0], idx[:, 1],
                                         idx[:, 2], idx[:, 3], ph_bands)
        km = [grid.momenta[idx[:, i]] for i in range(4)]
        m_strong = matrix_element_strong(channel, *km, ph_params)
        keep = np.maximum(np.abs(m_full), np.abs(m_strong)) >= v * v * 1e-12
        if keep.any():
            pairs += int(keep.sum())
            serr = max(serr, float(np.abs((m_full[keep] - m_strong[keep])
                                          / m_strong[keep]).max()))
    check("strong_limit", serr <= 1e-4 and pairs > 0,
          f"max rel err {serr:.3e} over {pairs} samples")

    # back-reaction diagnostic against the explicit sub-lattice sums
    br = backreaction_rate(state, ph_bands, ph_sigma)
    br_ref = reference.backreaction_reference(state, ph_bands, ph_sigma)
    br_err = abs(br - br_ref) / max(abs(br_ref), 1e-300)
    check("backreaction_oracle", br_err <= 1e-12, f"rel err {br_err:.3e}")

    # table cache round trip and corruption detection
    import tempfile
    with tempfile.TemporaryDirectory() as tmp:
        cache = Path(tmp) / "table.lktb"
        save_table(table, cache)
        reloaded = load_table(cache, grid, ph_params, expected_sigma=ph_sigma)
        sp, sm = collision_rhs(state, reloaded, threads=threads)
        cache_ok = (np.array_equal(sp, dfp) and np.array_equal(sm, dfm))
        blob = bytearray(cache.read_bytes())
        blob[5] ^= 0xFF   # corrupt the header version
        cache.write_bytes(bytes(blob))
        try:
            load_table(cache, grid, ph_params, expected_sigma=ph_sigma)
            corrupt_ok = False
        except TableCacheError:
            corrupt_ok = True
        check("table_cache", cache_ok and corrupt_ok,
              "round trip bitwise, corruption detected" if cache_ok and corrupt_ok
              else "round trip or corruption check failed")

    failed = [name for name, ok, _ in results if not ok]
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name:24s} {detail}")
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}",
              file=sys.stderr)
        return 1
    print(f"all {len(results)} checks passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latticekin",
        description="Quantum Boltzmann relaxation of CDW lattice fermions")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads for the collision reduction "
                             "(default: LATTICEKIN_THREADS or 1)")
    parser.add_argument("--out-dir", default=None,
                        help="override the config's output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="reserved; the pipeline is deterministic")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (("run", "time-evolve a scenario and write outputs"),
                      ("bands", "write the band-structure CSV"),
                      ("verify", "run the built-in invariant suite")):
        p = sub.add_parser(name, help=doc)
        p.add_argument("config", help="path to a run config file")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        threads = _resolve_threads(args)
        if args.command == "run":
            return cmd_run(args.config, args.out_dir, threads)
        if args.command == "bands":
            return cmd_bands(args.config, args.out_dir)
        return cmd_verify(args.config, threads)
    except StepUnderflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (LatticeKinError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
