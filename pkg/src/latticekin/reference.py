"""Slow, literal evaluations of the kinetic equations for verification.

Everything here mirrors the per-mode integral forms directly: an explicit
sum over collision partners (p, q) for every mode k, with no table reuse, no
pairwise update trick and no symmetrization bookkeeping.  The production
path in :mod:`latticekin.collision` must agree with these to near machine
precision; `latticekin verify` runs that comparison on small grids.

The same Gaussian delta and 6 sigma support cutoff are applied, since the
regularization is part of the model definition, not of the optimization.
"""

from __future__ import annotations

import math

import numpy as np

from .collision import CUTOFF_SIGMAS, DistributionState, delta_kernel
from .lattice import BandStructure
from .matrix_elements import ALL_CHANNELS

TWO_PI = 2.0 * math.pi


def ph_rhs_reference(f_plus: np.ndarray, f_minus: np.ndarray,
                     band_structure: BandStructure, sigma: float):
    """Particle-hole collision term, one explicit partner sum per mode.

    d f+_k / dt = -2 pi w^2 sum_{p,q} V_q^2 G(E-_{p+q} - E-_p + E+_{k-q} - E+_k)
                  [f+_k f-_p (1-f+_{k-q})(1-f-_{p+q}) - reversed]

    and the analogous hole equation for d f-_p / dt from the same triples.
    """
    grid = band_structure.grid
    n_modes = grid.num_modes
    all_modes = np.arange(n_modes)
    e_plus, e_minus = band_structure.e_plus, band_structure.e_minus
    v = _interaction_table(band_structure)
    w = grid.weight
    cutoff = CUTOFF_SIGMAS * sigma

    df_plus = np.zeros(n_modes)
    df_minus = np.zeros(n_modes)
    for q in range(n_modes):
        if v[q] == 0.0:
            continue
        kq_of = grid.sub_indices(all_modes, q)
        pq_of = grid.add_indices(all_modes, q)
        for k in range(n_modes):
            kq = kq_of[k]
            de_k = e_plus[kq] - e_plus[k]
            for p in range(n_modes):
                pq = pq_of[p]
                de = e_minus[pq] - e_minus[p] + de_k
                if abs(de) > cutoff:
                    continue
                forward = f_plus[k] * f_minus[p] \
                    * (1.0 - f_plus[kq]) * (1.0 - f_minus[pq])
                reverse = f_minus[pq] * f_plus[kq] \
                    * (1.0 - f_plus[k]) * (1.0 - f_minus[p])
                rate = TWO_PI * w * w * v[q] ** 2 \
                    * float(delta_kernel(de, sigma)) * (forward - reverse)
                df_plus[k] -= rate
                df_minus[p] -= rate
    return df_plus, df_minus


def weak_rhs_reference(f: np.ndarray, band_structure: BandStructure,
                       sigma: float) -> np.ndarray:
    """Single-band metallic collision term with the interference kernel.

    d f_k / dt = -2 pi w^2 sum_{p,q} V_q (V_q - V_{k-p-q})
                 G(J_{p+q} - J_p + J_{k-q} - J_k) [fermionic bracket]
    """
    grid = band_structure.grid
    n_modes = grid.num_modes
    all_modes = np.arange(n_modes)
    j = band_structure.j_k
    v = _interaction_table(band_structure)
    w = grid.weight
    cutoff = CUTOFF_SIGMAS * sigma

    df = np.zeros(n_modes)
    for q in range(n_modes):
        if v[q] == 0.0:
            continue
        kq_of = grid.sub_indices(all_modes, q)
        pq_of = grid.add_indices(all_modes, q)
        for k in range(n_modes):
            kq = kq_of[k]
            de_k = j[kq] - j[k]
            for p in range(n_modes):
                pq = pq_of[p]
                de = j[pq] - j[p] + de_k
                if abs(de) > cutoff:
                    continue
                x = grid.sub_indices(kq, p)
                kernel = v[q] * (v[q] - v[x])
                forward = f[k] * f[p] * (1.0 - f[kq]) * (1.0 - f[pq])
                reverse = f[pq] * f[kq] * (1.0 - f[k]) * (1.0 - f[p])
                df[k] -= TWO_PI * w * w * kernel \
                    * float(delta_kernel(de, sigma)) * (forward - reverse)
    return df


def _interaction_table(band_structure: BandStructure) -> np.ndarray:
    from .lattice import interaction_fourier
    return interaction_fourier(band_structure.grid.momenta,
                               band_structure.params)


def _rotation_table(band_structure: BandStructure) -> np.ndarray:
    """O[band, sublattice, mode] with band index 1 = +, 0 = -; sublattice 0 = A."""
    n_modes = band_structure.grid.num_modes
    o = np.empty((2, 2, n_modes))
    o[1, 0] = band_structure.cos_alpha
    o[1, 1] = band_structure.sin_alpha
    o[0, 0] = -band_structure.sin_alpha
    o[0, 1] = band_structure.cos_alpha
    return o


def backreaction_reference(state: DistributionState,
                           band_structure: BandStructure, sigma: float) -> float:
    """Sub-lattice imbalance drift from explicit sub-lattice sums.

    Same observable as :func:`latticekin.diagnostics.backreaction_rate`, but
    built from the O-matrix table with literal sums over the sub-lattice
    labels X, Y of both factors.
    """
    grid = band_structure.grid
    n_modes = grid.num_modes
    all_modes = np.arange(n_modes)
    o = _rotation_table(band_structure)
    v = _interaction_table(band_structure)
    e_of = {1: band_structure.e_plus, 0: band_structure.e_minus}
    f_of = {1: state.f_plus, 0: state.f_minus}
    pref_k = band_structure.j_k / band_structure.omega
    w = grid.weight
    cutoff = CUTOFF_SIGMAS * sigma

    total = 0.0
    for q in range(n_modes):
        kq_of = grid.sub_indices(all_modes, q)
        pq_of = grid.add_indices(all_modes, q)
        x_of = grid.sub_indices(kq_of[:, None], all_modes[None, :])  # [k, p]
        for channel in ALL_CHANNELS:
            a, b, c, d = channel
            de = (e_of[a][pq_of][:, None]
                  - e_of[b][:, None]
                  + e_of[c][kq_of][None, :]
                  - e_of[d][None, :])          # [p, k]
            mask = np.abs(de) <= cutoff
            if not mask.any():
                continue
            direct = np.zeros((n_modes, n_modes))
            direct_bar = np.zeros((n_modes, n_modes))
            exchange = np.zeros((n_modes, n_modes))
            for x in (0, 1):
                left = o[a, x, pq_of][:, None] * o[b, x, :][:, None]
                direct += left * (o[c, 1 - x, kq_of] * o[d, 1 - x, :])[None, :]
                direct_bar += left * (o[c, 1 - x, kq_of]
                                      * o[1 - d, 1 - x, :])[None, :]
                exchange += (o[a, x, pq_of][:, None] * o[b, 1 - x, :][:, None]
                             * o[c, 1 - x, kq_of][None, :]) * o[d, x, :][None, :]
            weight = pref_k[None, :] * v[q] * direct_bar \
                * (v[q] * direct - v[x_of].T * exchange)
            bracket = (f_of[d][None, :] * f_of[b][:, None]
                       * (1 - f_of[c][kq_of][None, :])
                       * (1 - f_of[a][pq_of][:, None])
                       - f_of[a][pq_of][:, None] * f_of[c][kq_of][None, :]
                       * (1 - f_of[d][None, :]) * (1 - f_of[b][:, None]))
            g = delta_kernel(de, sigma)
            total += float((weight * g * bracket)[mask].sum())
    return -TWO_PI * w ** 3 * total
