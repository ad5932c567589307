"""Pruned scattering tables and the Boltzmann collision right-hand side.

The collision integral is a large data-parallel reduction.  Admissible
(k, p, q) triples are enumerated once into an immutable table whose entries
carry the full rate weight

    weight = 2 pi * w^2 * M * G_sigma(dE),        w = 1/N^2,

with the energy-conserving delta regularized by a Gaussian G_sigma and
entries beyond |dE| > 6 sigma pruned (each discarded entry contributes
< 1e-8 relative weight).

Evaluation uses the pairwise-update formulation: per entry the occupancy
bracket B is computed once and all four participating mode derivatives are
updated with +-(sym * weight * B), which makes band-number and
crystal-momentum conservation exact by construction.  The symmetrization
factor ``sym`` corrects for the multiplicity with which the enumeration
visits each physical collision (an entry (k, p, q) and its image
(k-q, p+q, -q) describe the same collision, as do the partner-swapped
channel images in the full set), so the result equals the per-k integral
form entrywise.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import TableCacheError, TableTooLargeError
from .lattice import (BandStructure, BrillouinGrid, ChannelSet, ModelParams,
                      interaction_fourier)
from .matrix_elements import (PH_CHANNEL, STRONG_CHANNELS, Channel,
                              channel_code, channel_from_code,
                              matrix_element_full_idx)

TWO_PI = 2.0 * math.pi

#: Pruning cutoff in units of sigma.
CUTOFF_SIGMAS = 6.0

#: Default entry budget (~1 GiB of index + weight arrays).
DEFAULT_MAX_ENTRIES = 40_000_000

_CACHE_MAGIC = b"LKTB"
_CACHE_VERSION = 1
_CACHE_HEADER = struct.Struct("<4sIIBd")
_CACHE_ENTRY_DTYPE = np.dtype([("k", "<u4"), ("p", "<u4"), ("q", "<u4"),
                               ("channel", "u1"), ("weight", "<f8")])
_CHANNEL_SET_CODES = {ChannelSet.PH_ONLY: 0, ChannelSet.FULL: 1,
                      ChannelSet.WEAK_COUPLING: 2}


@dataclass
class DistributionState:
    """Dynamical state: band occupancies over the grid plus the current time.

    ``time`` is in reported units of J^2/V^3.  The strongly interacting
    ground state is f+ = 0, f- = 1.
    """

    f_plus: np.ndarray
    f_minus: np.ndarray
    time: float = 0.0

    def copy(self) -> "DistributionState":
        return DistributionState(self.f_plus.copy(), self.f_minus.copy(), self.time)

    def validate(self):
        for name, f in (("f_plus", self.f_plus), ("f_minus", self.f_minus)):
            if np.any(f < 0.0) or np.any(f > 1.0):
                raise ValueError(f"{name} leaves [0, 1]")


def ground_state(grid: BrillouinGrid, time: float = 0.0) -> DistributionState:
    m = grid.num_modes
    return DistributionState(np.zeros(m), np.ones(m), time)


def delta_kernel(delta_e, sigma: float):
    """Gaussian regularization of the energy delta, unit integral over dE."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    x = np.asarray(delta_e, dtype=float) / sigma
    return np.exp(-0.5 * x * x) / (sigma * math.sqrt(TWO_PI))


def default_sigma(band_structure: BandStructure) -> float:
    """Energy broadening sigma = eta * W / N.

    W is the bandwidth of the dispersion the active kernel conserves: the
    quasi-particle bandwidth for the two-band kernels, the bare J_k bandwidth
    for weak coupling.  This resolves the grid's energy spacing (~W/N)
    without washing out the band structure.
    """
    params = band_structure.params
    if params.channel_set is ChannelSet.WEAK_COUPLING:
        w = band_structure.weak_bandwidth
    else:
        w = band_structure.bandwidth
    return params.broadening_factor * w / params.grid_size


@dataclass(frozen=True)
class ChannelBlock:
    """Entries of one collision channel, index-sorted for a fixed reduction order."""

    channel: Channel
    k_idx: np.ndarray
    p_idx: np.ndarray
    q_idx: np.ndarray
    kq_idx: np.ndarray
    pq_idx: np.ndarray
    weight: np.ndarray

    def __len__(self):
        return self.k_idx.size


@dataclass(frozen=True)
class ScatteringTable:
    """Immutable pruned collision table for one (grid, params, sigma)."""

    grid: BrillouinGrid
    channel_set: ChannelSet
    sigma: float
    sym_factor: float
    blocks: List[ChannelBlock] = field(repr=False)

    @property
    def num_entries(self) -> int:
        return sum(len(b) for b in self.blocks)


def _band_energy(band_structure: BandStructure, band: int) -> np.ndarray:
    return band_structure.e_plus if band == 1 else band_structure.e_minus


def _gather_channel(grid: BrillouinGrid, band_structure: BandStructure,
                    channel: Channel, energies: Tuple[np.ndarray, np.ndarray,
                                                      np.ndarray, np.ndarray],
                    sigma: float, max_entries: int, weight_fn):
    """Enumerate admissible (k, p, q) for one channel, pruned at 6 sigma.

    ``energies`` are the per-leg energy tables (pq, p, kq, k);
    ``weight_fn(q_idx, k_sel, p_sel, kq_sel, pq_sel)`` returns the matrix
    element for the selected entries.  Returns (block arrays, total count);
    arrays are None once the running count exceeds the budget (counting
    continues so the required budget can be reported).
    """
    n_modes = grid.num_modes
    all_modes = np.arange(n_modes)
    e_pq, e_p, e_kq, e_k = energies
    v_all = interaction_fourier(grid.momenta, band_structure.params)
    w = grid.weight
    cutoff = CUTOFF_SIGMAS * sigma

    chunks = []
    total = 0
    over_budget = False
    for q in range(n_modes):
        if v_all[q] == 0.0:
            continue
        kq_of = grid.sub_indices(all_modes, q)
        pq_of = grid.add_indices(all_modes, q)
        de_k = e_kq[kq_of] - e_k            # over k
        de_p = e_pq[pq_of] - e_p            # over p
        mask = np.abs(de_p[:, None] + de_k[None, :]) <= cutoff
        count = int(mask.sum())
        if count == 0:
            continue
        total += count
        if total > max_entries:
            over_budget = True
            chunks = None
        if over_budget:
            continue
        p_sel, k_sel = np.nonzero(mask)
        kq_sel = kq_of[k_sel]
        pq_sel = pq_of[p_sel]
        de = de_p[p_sel] + de_k[k_sel]
        m_el = weight_fn(q, k_sel, p_sel, kq_sel, pq_sel)
        weight = TWO_PI * w * w * m_el * delta_kernel(de, sigma)
        chunks.append((k_sel, p_sel, np.full(count, q, dtype=np.int64),
                       kq_sel, pq_sel, weight))

    if over_budget:
        return None, total
    if not chunks:
        empty = np.empty(0, dtype=np.int64)
        return ChannelBlock(channel, empty, empty.copy(), empty.copy(),
                            empty.copy(), empty.copy(), np.empty(0)), 0

    cols = [np.concatenate([c[i] for c in chunks]) for i in range(6)]
    order = np.lexsort((cols[2], cols[1], cols[0]))  # sort by (k, p, q)
    cols = [c[order] for c in cols]
    for c in cols:
        c.setflags(write=False)
    block = ChannelBlock(channel, cols[0], cols[1], cols[2], cols[3], cols[4], cols[5])
    return block, total


def build_scattering_table(grid: BrillouinGrid, band_structure: BandStructure,
                           params: ModelParams, sigma: Optional[float] = None,
                           max_entries: int = DEFAULT_MAX_ENTRIES) -> ScatteringTable:
    """Build the pruned collision table for the configured channel set.

    Raises TableTooLargeError (reporting the required budget) if the pruned
    enumeration exceeds ``max_entries``.
    """
    if sigma is None:
        sigma = default_sigma(band_structure)
    v_all = interaction_fourier(grid.momenta, params)

    if params.channel_set is ChannelSet.WEAK_COUPLING:
        j = band_structure.j_k

        def weak_weight(q, k_sel, p_sel, kq_sel, pq_sel):
            v_q = v_all[q]
            v_x = v_all[grid.sub_indices(kq_sel, p_sel)]
            return v_q * (v_q - v_x)

        block, total = _gather_channel(grid, band_structure, PH_CHANNEL,
                                       (j, j, j, j), sigma, max_entries,
                                       weak_weight)
        if block is None:
            raise TableTooLargeError(total, max_entries)
        # each physical collision appears 4x: (k,p,q) ~ (k-q,p+q,-q) ~ (p,k,-q) ~ ...
        return ScatteringTable(grid, params.channel_set, sigma, 0.25, [block])

    if params.channel_set is ChannelSet.PH_ONLY:
        channels = (PH_CHANNEL,)
        sym = 0.5     # (k,p,q) ~ (k-q,p+q,-q); the 1100 partner is not enumerated
    else:
        channels = STRONG_CHANNELS
        sym = 0.25    # entry pairs plus partner-swapped channel images

    blocks = []
    grand_total = 0
    over = False
    for channel in channels:
        a, b, c, d = channel
        energies = (_band_energy(band_structure, a), _band_energy(band_structure, b),
                    _band_energy(band_structure, c), _band_energy(band_structure, d))

        if params.channel_set is ChannelSet.PH_ONLY:
            def weight_fn(q, k_sel, p_sel, kq_sel, pq_sel):
                return v_all[q] ** 2
        else:
            def weight_fn(q, k_sel, p_sel, kq_sel, pq_sel, _ch=channel):
                return matrix_element_full_idx(_ch, pq_sel, p_sel, kq_sel, k_sel,
                                               band_structure)

        block, total = _gather_channel(grid, band_structure, channel, energies,
                                       sigma, max_entries - grand_total, weight_fn)
        grand_total += total
        if block is None:
            over = True
        elif not over:
            blocks.append(block)
    if over:
        raise TableTooLargeError(grand_total, max_entries)
    return ScatteringTable(grid, params.channel_set, sigma, sym, blocks)


def _block_bracket(block: ChannelBlock, f_plus: np.ndarray, f_minus: np.ndarray):
    """Occupancy bracket B = forward - reverse for every entry of a block."""
    a, b, c, d = block.channel
    f_a = (f_plus if a == 1 else f_minus)[block.pq_idx]
    f_b = (f_plus if b == 1 else f_minus)[block.p_idx]
    f_c = (f_plus if c == 1 else f_minus)[block.kq_idx]
    f_d = (f_plus if d == 1 else f_minus)[block.k_idx]
    return f_d * f_b * (1.0 - f_c) * (1.0 - f_a) - f_a * f_c * (1.0 - f_d) * (1.0 - f_b)


def _accumulate_block(block: ChannelBlock, contrib: np.ndarray, n_modes: int,
                      df_plus: np.ndarray, df_minus: np.ndarray,
                      threads: int = 1):
    """Scatter-add +-contrib into the four participating slots.

    Accumulation is a fixed-order reduction (np.bincount over the sorted
    entry arrays); with threads > 1 the entries are split into contiguous
    partitions reduced independently and merged in partition order, so a
    given thread count is bitwise reproducible.
    """
    a, b, c, d = block.channel
    slots = ((d, block.k_idx, -1.0), (b, block.p_idx, -1.0),
             (c, block.kq_idx, 1.0), (a, block.pq_idx, 1.0))

    if threads <= 1 or len(block) < 2 * threads:
        for band, idx, sign in slots:
            target = df_plus if band == 1 else df_minus
            target += sign * np.bincount(idx, weights=contrib, minlength=n_modes)
        return

    bounds = np.linspace(0, len(block), threads + 1, dtype=np.int64)
    from concurrent.futures import ThreadPoolExecutor

    def partial(i):
        lo, hi = bounds[i], bounds[i + 1]
        dp = np.zeros(n_modes)
        dm = np.zeros(n_modes)
        for band, idx, sign in slots:
            target = dp if band == 1 else dm
            target += sign * np.bincount(idx[lo:hi], weights=contrib[lo:hi],
                                         minlength=n_modes)
        return dp, dm

    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(partial, range(threads)))
    for dp, dm in parts:      # fixed-order merge
        df_plus += dp
        df_minus += dm


def collision_rhs(state: DistributionState, table: ScatteringTable,
                  threads: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """Collision time derivatives (df+/dt, df-/dt), pure in (state, table)."""
    n_modes = table.grid.num_modes
    df_plus = np.zeros(n_modes)
    df_minus = np.zeros(n_modes)
    for block in table.blocks:
        bracket = _block_bracket(block, state.f_plus, state.f_minus)
        contrib = table.sym_factor * block.weight * bracket
        _accumulate_block(block, contrib, n_modes, df_plus, df_minus, threads)
    return df_plus, df_minus


def weak_coupling_rhs(f: np.ndarray, table: ScatteringTable,
                      threads: int = 1) -> np.ndarray:
    """Single-band metallic collision derivative df/dt."""
    if table.channel_set is not ChannelSet.WEAK_COUPLING:
        raise ValueError("table was not built for the weak-coupling kernel")
    n_modes = table.grid.num_modes
    df = np.zeros(n_modes)
    for block in table.blocks:
        f_pq = f[block.pq_idx]
        f_p = f[block.p_idx]
        f_kq = f[block.kq_idx]
        f_k = f[block.k_idx]
        bracket = f_k * f_p * (1.0 - f_kq) * (1.0 - f_pq) \
            - f_pq * f_kq * (1.0 - f_k) * (1.0 - f_p)
        contrib = table.sym_factor * block.weight * bracket
        _accumulate_block(block, contrib, n_modes, df, df, threads)
    return df


def collision_activity(state: DistributionState, table: ScatteringTable) -> float:
    """Sum over entries of |weight * B|; sigma times this bounds the energy drift."""
    total = 0.0
    for block in table.blocks:
        bracket = _block_bracket(block, state.f_plus, state.f_minus)
        total += float(np.abs(block.weight * bracket).sum())
    return total


def save_table(table: ScatteringTable, path) -> None:
    """Write the table cache (header + packed little-endian entry records)."""
    records = np.empty(table.num_entries, dtype=_CACHE_ENTRY_DTYPE)
    pos = 0
    for block in table.blocks:
        n = len(block)
        records["k"][pos:pos + n] = block.k_idx
        records["p"][pos:pos + n] = block.p_idx
        records["q"][pos:pos + n] = block.q_idx
        records["channel"][pos:pos + n] = channel_code(block.channel)
        records["weight"][pos:pos + n] = block.weight
        pos += n
    header = _CACHE_HEADER.pack(_CACHE_MAGIC, _CACHE_VERSION, table.grid.n,
                                _CHANNEL_SET_CODES[table.channel_set], table.sigma)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(records.tobytes())


def load_table(path, grid: BrillouinGrid, params: ModelParams,
               expected_sigma: Optional[float] = None) -> ScatteringTable:
    """Read and validate a table cache; raises TableCacheError on any mismatch."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _CACHE_HEADER.size:
        raise TableCacheError("file shorter than header")
    magic, version, n, cs_code, sigma = _CACHE_HEADER.unpack_from(raw)
    if magic != _CACHE_MAGIC:
        raise TableCacheError(f"bad magic {magic!r}")
    if version != _CACHE_VERSION:
        raise TableCacheError(f"unsupported version {version}")
    if n != grid.n:
        raise TableCacheError(f"grid size mismatch: cache {n}, run {grid.n}")
    if _CHANNEL_SET_CODES[params.channel_set] != cs_code:
        raise TableCacheError("channel set mismatch")
    if expected_sigma is not None and not math.isclose(sigma, expected_sigma,
                                                       rel_tol=1e-12):
        raise TableCacheError(f"sigma mismatch: cache {sigma}, run {expected_sigma}")
    body = raw[_CACHE_HEADER.size:]
    if len(body) % _CACHE_ENTRY_DTYPE.itemsize != 0:
        raise TableCacheError("truncated entry records")
    records = np.frombuffer(body, dtype=_CACHE_ENTRY_DTYPE)
    if not np.all(np.isfinite(records["weight"])):
        raise TableCacheError("non-finite weights")
    if records.size and (records["k"].max() >= grid.num_modes
                         or records["p"].max() >= grid.num_modes
                         or records["q"].max() >= grid.num_modes):
        raise TableCacheError("mode index out of range")

    sym = {ChannelSet.PH_ONLY: 0.5, ChannelSet.FULL: 0.25,
           ChannelSet.WEAK_COUPLING: 0.25}[params.channel_set]
    blocks = []
    for code in np.unique(records["channel"]):
        sel = records[records["channel"] == code]
        k_idx = sel["k"].astype(np.int64)
        p_idx = sel["p"].astype(np.int64)
        q_idx = sel["q"].astype(np.int64)
        order = np.lexsort((q_idx, p_idx, k_idx))
        k_idx, p_idx, q_idx = k_idx[order], p_idx[order], q_idx[order]
        weight = sel["weight"].astype(np.float64)[order]
        blocks.append(ChannelBlock(channel_from_code(int(code)), k_idx, p_idx,
                                   q_idx, grid.sub_indices(k_idx, q_idx),
                                   grid.add_indices(p_idx, q_idx), weight))
    return ScatteringTable(grid, params.channel_set, sigma, sym, blocks)
