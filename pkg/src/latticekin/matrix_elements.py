"""Transition matrix elements for quasi-particle / quasi-hole collisions.

Channels are labelled by four band indices (a, b, c, d), one per collision
leg in the momentum order (p+q, p, k-q, k); 1 is the particle band (+),
0 the hole band (-).  The particle-hole channel that dominates at strong
coupling is (0, 0, 1, 1).

``matrix_element_full`` is the ground truth (valid at any J/V); the
closed-form strong-coupling expressions are a fast path and are validated
against it, never trusted independently.
"""

from __future__ import annotations

from typing import Sequence, Tuple

import numpy as np

from .errors import UnsupportedChannelError
from .lattice import BandStructure, ModelParams, hopping_dispersion, interaction_fourier

Channel = Tuple[int, int, int, int]

PH_CHANNEL: Channel = (0, 0, 1, 1)

#: The six channels with closed strong-coupling forms; all other band
#: combinations are pair-creation processes across the gap, representable by
#: the full form but never energetically allowed at J << V.
STRONG_CHANNELS: Tuple[Channel, ...] = (
    (0, 0, 1, 1), (1, 1, 0, 0),
    (0, 0, 0, 0), (1, 1, 1, 1),
    (0, 1, 1, 0), (1, 0, 0, 1),
)

ALL_CHANNELS: Tuple[Channel, ...] = tuple(
    (a, b, c, d)
    for a in (0, 1) for b in (0, 1) for c in (0, 1) for d in (0, 1)
)


def channel_code(channel: Channel) -> int:
    """Pack a channel into one byte, bit order a b c d (a is the high bit)."""
    a, b, c, d = channel
    return (a << 3) | (b << 2) | (c << 1) | d


def channel_from_code(code: int) -> Channel:
    return ((code >> 3) & 1, (code >> 2) & 1, (code >> 1) & 1, code & 1)


def _o_entry(rows: Sequence[np.ndarray], band: int, sublattice: int, idx):
    """Rotation entry O^band_sublattice at the given mode indices.

    ``rows`` is the (O+A, O+B, O-A, O-B) tuple from
    :meth:`BandStructure.rotation_rows`; band 1 = +, sublattice 0 = A.
    """
    row = rows[0:2] if band == 1 else rows[2:4]
    return row[sublattice][idx]


def _bracket_sums(channel: Channel, rows, pq_idx, p_idx, kq_idx, k_idx):
    """Direct and exchange sub-lattice sums entering M^{abcd}.

    direct   A = sum_X O^a_X(p+q) O^b_X(p) O^c_{X'}(k-q) O^d_{X'}(k)
    exchange B = sum_Y O^a_Y(p+q) O^b_{Y'}(p) O^c_{Y'}(k-q) O^d_Y(k)

    with X', Y' the opposite sub-lattice.  Each eigenvector appears exactly
    once in each sum, so per-(mode, band) sign flips cancel pairwise in the
    products A*A and A*B.
    """
    a, b, c, d = channel
    direct = sum(
        _o_entry(rows, a, x, pq_idx) * _o_entry(rows, b, x, p_idx)
        * _o_entry(rows, c, 1 - x, kq_idx) * _o_entry(rows, d, 1 - x, k_idx)
        for x in (0, 1))
    exchange = sum(
        _o_entry(rows, a, y, pq_idx) * _o_entry(rows, b, 1 - y, p_idx)
        * _o_entry(rows, c, 1 - y, kq_idx) * _o_entry(rows, d, y, k_idx)
        for y in (0, 1))
    return direct, exchange


def matrix_element_full_idx(channel: Channel, pq_idx, p_idx, kq_idx, k_idx,
                            band_structure: BandStructure):
    """M^{abcd} evaluated on flat grid indices (vectorized).

    The momentum transfer q and the exchange momentum k-p-q are recovered
    from the leg indices: q = k - (k-q), k-p-q = (k-q) - p.
    """
    grid = band_structure.grid
    params = band_structure.params
    rows = band_structure.rotation_rows()
    q_idx = grid.sub_indices(k_idx, kq_idx)
    x_idx = grid.sub_indices(kq_idx, p_idx)
    v_q = interaction_fourier(grid.momenta[q_idx], params)
    v_x = interaction_fourier(grid.momenta[x_idx], params)
    direct, exchange = _bracket_sums(channel, rows, pq_idx, p_idx, kq_idx, k_idx)
    return v_q * direct * (v_q * direct - v_x * exchange)


def matrix_element_full(channel: Channel, k_pq, k_p, k_kq, k_k,
                        band_structure: BandStructure, params: ModelParams):
    """M^{abcd}_{p+q, p, k-q, k} from explicit grid momenta."""
    grid = band_structure.grid
    idx = [grid.index_of(k) for k in (k_pq, k_p, k_kq, k_k)]
    return float(matrix_element_full_idx(channel, *idx, band_structure))


def matrix_element_strong(channel: Channel, k_pq, k_p, k_kq, k_k,
                          params: ModelParams):
    """Closed-form strong-coupling (J << V) limit of M^{abcd}.

    Only the six channels in STRONG_CHANNELS are available; the expressions
    involve only even powers of the filling imbalance, so the sign of
    n^A - n^B is immaterial.
    """
    if tuple(channel) not in STRONG_CHANNELS:
        raise UnsupportedChannelError(f"no strong-coupling form for channel {channel}")
    k_pq, k_p, k_kq, k_k = (np.asarray(k, dtype=float)
                            for k in (k_pq, k_p, k_kq, k_k))
    j_pq = hopping_dispersion(k_pq, params)
    j_p = hopping_dispersion(k_p, params)
    j_kq = hopping_dispersion(k_kq, params)
    j_k = hopping_dispersion(k_k, params)
    v_q = interaction_fourier(k_k - k_kq, params)
    v_x = interaction_fourier(k_kq - k_p, params)
    delta_sq = (params.interaction * (params.filling_a - params.filling_b)) ** 2

    a, b, c, d = channel
    if (a, b, c, d) in ((0, 0, 1, 1), (1, 1, 0, 0)):
        return v_q * (v_q + v_x * (j_p * j_k + j_pq * j_kq) / delta_sq)
    if (a, b, c, d) in ((0, 0, 0, 0), (1, 1, 1, 1)):
        direct = j_pq * j_p + j_kq * j_k
        cross = j_pq * j_k + j_kq * j_p
        return v_q * direct / delta_sq ** 2 * (v_q * direct - v_x * cross)
    # (0,1,1,0) / (1,0,0,1): exchange-dominated particle-hole scattering
    pref = (j_pq * j_kq + j_p * j_k) / delta_sq
    return v_q * pref * (v_q * pref + v_x)


def backreaction_weight_idx(channel: Channel, pq_idx, p_idx, kq_idx, k_idx,
                            band_structure: BandStructure):
    """N^{abcd} on flat grid indices (vectorized).

    Differs from M^{abcd} by the prefactor J_k / omega_k and by the flipped
    band label on the last rotation factor of the direct sum.  Not gauge
    invariant under sign flips of the (k, .) eigenvectors (the d and d-bar
    factors pick up independent signs); invariant under all others.
    """
    grid = band_structure.grid
    params = band_structure.params
    rows = band_structure.rotation_rows()
    a, b, c, d = channel
    q_idx = grid.sub_indices(k_idx, kq_idx)
    x_idx = grid.sub_indices(kq_idx, p_idx)
    v_q = interaction_fourier(grid.momenta[q_idx], params)
    v_x = interaction_fourier(grid.momenta[x_idx], params)
    direct_bar, _ = _bracket_sums((a, b, c, 1 - d), rows, pq_idx, p_idx, kq_idx, k_idx)
    direct, exchange = _bracket_sums(channel, rows, pq_idx, p_idx, kq_idx, k_idx)
    pref = band_structure.j_k[k_idx] / band_structure.omega[k_idx]
    return pref * v_q * direct_bar * (v_q * direct - v_x * exchange)


def backreaction_weight(channel: Channel, k_pq, k_p, k_kq, k_k,
                        band_structure: BandStructure, params: ModelParams):
    """N^{abcd}_{p+q, p, k-q, k} from explicit grid momenta."""
    grid = band_structure.grid
    idx = [grid.index_of(k) for k in (k_pq, k_p, k_kq, k_k)]
    return float(backreaction_weight_idx(channel, *idx, band_structure))
