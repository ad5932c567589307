"""Naive scalar implementations used as oracles by the test suite.

Everything here is written in the most literal style possible: explicit
Python loops, no vectorization, no shared helpers with the package beyond
the grid index arithmetic and the band-structure arrays it is checking
against.  Slow on purpose; use small grids.
"""

import math

import numpy as np

CUTOFF_SIGMAS = 6.0


def gauss(de, sigma):
    return math.exp(-de * de / (2.0 * sigma * sigma)) / (sigma * math.sqrt(2.0 * math.pi))


def v_of(q_momentum, v):
    return 0.5 * v * (math.cos(q_momentum[0]) + math.cos(q_momentum[1]))


def ph_rhs_naive(f_plus, f_minus, bands, sigma):
    """Per-mode particle-hole collision sums, straight from the rate equation."""
    grid = bands.grid
    n = grid.num_modes
    params = bands.params
    w = 1.0 / n
    ep, em = bands.e_plus, bands.e_minus
    dfp = np.zeros(n)
    dfm = np.zeros(n)
    cut = CUTOFF_SIGMAS * sigma
    for k in range(n):
        for p in range(n):
            for q in range(n):
                kq = int(grid.sub_indices(k, q))
                pq = int(grid.add_indices(p, q))
                de = em[pq] - em[p] + ep[kq] - ep[k]
                if abs(de) > cut:
                    continue
                vq = v_of(grid.momenta[k] - grid.momenta[kq], params.interaction)
                fwd = f_plus[k] * f_minus[p] * (1 - f_plus[kq]) * (1 - f_minus[pq])
                rev = f_minus[pq] * f_plus[kq] * (1 - f_plus[k]) * (1 - f_minus[p])
                c = 2 * math.pi * w * w * vq * vq * gauss(de, sigma) * (fwd - rev)
                dfp[k] -= c
                dfm[p] -= c
    return dfp, dfm


def weak_rhs_naive(f, bands, sigma):
    """Per-mode single-band collision sum with the interference cross-section."""
    grid = bands.grid
    n = grid.num_modes
    params = bands.params
    w = 1.0 / n
    j = bands.j_k
    df = np.zeros(n)
    cut = CUTOFF_SIGMAS * sigma
    for k in range(n):
        for p in range(n):
            for q in range(n):
                kq = int(grid.sub_indices(k, q))
                pq = int(grid.add_indices(p, q))
                de = j[pq] - j[p] + j[kq] - j[k]
                if abs(de) > cut:
                    continue
                vq = v_of(grid.momenta[k] - grid.momenta[kq], params.interaction)
                vx = v_of(grid.momenta[kq] - grid.momenta[p], params.interaction)
                fwd = f[k] * f[p] * (1 - f[kq]) * (1 - f[pq])
                rev = f[pq] * f[kq] * (1 - f[k]) * (1 - f[p])
                df[k] -= 2 * math.pi * w * w * vq * (vq - vx) \
                    * gauss(de, sigma) * (fwd - rev)
    return df


def count_admissible_triples(bands, sigma):
    """Brute-force count of ph-channel (k, p, q) entries within the cutoff."""
    grid = bands.grid
    n = grid.num_modes
    ep, em = bands.e_plus, bands.e_minus
    cut = CUTOFF_SIGMAS * sigma
    count = 0
    for q in range(n):
        if v_of(grid.momenta[q], bands.params.interaction) == 0.0:
            continue
        for k in range(n):
            kq = int(grid.sub_indices(k, q))
            for p in range(n):
                pq = int(grid.add_indices(p, q))
                if abs(em[pq] - em[p] + ep[kq] - ep[k]) <= cut:
                    count += 1
    return count


def o_entry(bands, band, sublattice, idx):
    """Rotation entry O^band_sublattice(mode); band 1 = +, sublattice 0 = A."""
    if band == 1:
        return bands.cos_alpha[idx] if sublattice == 0 else bands.sin_alpha[idx]
    return -bands.sin_alpha[idx] if sublattice == 0 else bands.cos_alpha[idx]


def matrix_element_naive(channel, pq, p, kq, k, bands):
    """Literal double sub-lattice sum for M^{abcd} on flat mode indices."""
    grid = bands.grid
    a, b, c, d = channel
    vq = v_of(grid.momenta[k] - grid.momenta[kq], bands.params.interaction)
    vx = v_of(grid.momenta[kq] - grid.momenta[p], bands.params.interaction)
    total = 0.0
    for x in (0, 1):
        first = (o_entry(bands, a, x, pq) * o_entry(bands, b, x, p)
                 * o_entry(bands, c, 1 - x, kq) * o_entry(bands, d, 1 - x, k))
        for y in (0, 1):
            second = vq * (o_entry(bands, a, y, pq) * o_entry(bands, b, y, p)
                           * o_entry(bands, c, 1 - y, kq)
                           * o_entry(bands, d, 1 - y, k)) \
                - vx * (o_entry(bands, a, y, pq) * o_entry(bands, b, 1 - y, p)
                        * o_entry(bands, c, 1 - y, kq) * o_entry(bands, d, y, k))
            total += vq * first * second
    return total


def backreaction_weight_naive(channel, pq, p, kq, k, bands):
    """Literal N^{abcd}: J_k/omega_k prefactor and d-bar on the first factor."""
    grid = bands.grid
    a, b, c, d = channel
    vq = v_of(grid.momenta[k] - grid.momenta[kq], bands.params.interaction)
    vx = v_of(grid.momenta[kq] - grid.momenta[p], bands.params.interaction)
    total = 0.0
    for x in (0, 1):
        first = (o_entry(bands, a, x, pq) * o_entry(bands, b, x, p)
                 * o_entry(bands, c, 1 - x, kq) * o_entry(bands, 1 - d, 1 - x, k))
        for y in (0, 1):
            second = vq * (o_entry(bands, a, y, pq) * o_entry(bands, b, y, p)
                           * o_entry(bands, c, 1 - y, kq)
                           * o_entry(bands, d, 1 - y, k)) \
                - vx * (o_entry(bands, a, y, pq) * o_entry(bands, b, 1 - y, p)
                        * o_entry(bands, c, 1 - y, kq) * o_entry(bands, d, y, k))
            total += vq * first * second
    return bands.j_k[k] / bands.omega[k] * total


def backreaction_naive(f_plus, f_minus, bands, sigma):
    """Literal triple-momentum, 16-channel sum for the imbalance drift."""
    grid = bands.grid
    n = grid.num_modes
    w = 1.0 / n
    e = {1: bands.e_plus, 0: bands.e_minus}
    f = {1: f_plus, 0: f_minus}
    cut = CUTOFF_SIGMAS * sigma
    total = 0.0
    for k in range(n):
        for p in range(n):
            for q in range(n):
                kq = int(grid.sub_indices(k, q))
                pq = int(grid.add_indices(p, q))
                for a in (0, 1):
                    for b in (0, 1):
                        for c in (0, 1):
                            for d in (0, 1):
                                de = e[a][pq] - e[b][p] + e[c][kq] - e[d][k]
                                if abs(de) > cut:
                                    continue
                                fwd = f[d][k] * f[b][p] \
                                    * (1 - f[c][kq]) * (1 - f[a][pq])
                                rev = f[a][pq] * f[c][kq] \
                                    * (1 - f[d][k]) * (1 - f[b][p])
                                nw = backreaction_weight_naive(
                                    (a, b, c, d), pq, p, kq, k, bands)
                                total += nw * gauss(de, sigma) * (fwd - rev)
    return -2 * math.pi * w ** 3 * total
