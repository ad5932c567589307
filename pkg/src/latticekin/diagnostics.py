"""Observables, conservation monitors, and thermalization diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .collision import CUTOFF_SIGMAS, DistributionState, delta_kernel
from .errors import InsufficientDataError
from .lattice import BandStructure
from .matrix_elements import ALL_CHANNELS, backreaction_weight_idx

TWO_PI = 2.0 * math.pi


def _entropy_density(f: np.ndarray) -> float:
    """-(1/N^2) sum [f ln f + (1-f) ln(1-f)] with the 0 ln 0 = 0 convention."""
    with np.errstate(divide="ignore", invalid="ignore"):
        s = f * np.log(f) + (1.0 - f) * np.log(1.0 - f)
    s = np.where((f <= 0.0) | (f >= 1.0), 0.0, s)
    return -float(s.sum()) / f.size


def h_functional(state: DistributionState) -> float:
    """Boltzmann entropy of the occupancies, summed over both bands.

    Zero for any pure step distribution (ground state, saturated windows);
    2 ln 2 per band pair when both bands sit at f = 1/2.  Non-decreasing
    under the collision dynamics.
    """
    return _entropy_density(state.f_plus) + _entropy_density(state.f_minus)


def total_energy(state: DistributionState, band_structure: BandStructure) -> float:
    """Quasi-particle energy (1/N^2) sum_k (E+ f+ + E- f-)."""
    w = band_structure.grid.weight
    return w * float(band_structure.e_plus @ state.f_plus
                     + band_structure.e_minus @ state.f_minus)


def band_populations(state: DistributionState,
                     band_structure: BandStructure) -> Tuple[float, float]:
    """Per-band particle numbers (N+, N-), each conserved separately."""
    w = band_structure.grid.weight
    return w * float(state.f_plus.sum()), w * float(state.f_minus.sum())


def crystal_momentum(state: DistributionState,
                     band_structure: BandStructure) -> np.ndarray:
    """Total crystal momentum (1/N^2) sum_k k (f+ + f- - 1).

    The filled-band background is subtracted so the ground state carries
    exactly (0, 0).  Because momenta live on the torus [-pi, pi)^2, the value
    is meaningful modulo 2 pi and collisions conserve it up to multiples of
    2 pi / N^2 when an umklapp wrap occurs.
    """
    w = band_structure.grid.weight
    excess = state.f_plus + state.f_minus - 1.0
    return w * (band_structure.grid.momenta.T @ excess)


def particle_hole_distance(state: DistributionState) -> float:
    """RMS deviation from particle-hole symmetry f-(k) = 1 - f+(k).

    Zero for the ground state and for any perturbation built symmetrically in
    both bands; order delta_f for a single-band excitation.
    """
    dev = state.f_plus + state.f_minus - 1.0
    return math.sqrt(float(dev @ dev) / dev.size)


@dataclass(frozen=True)
class FermiFit:
    """Least-squares Fermi-Dirac fit of one band's occupancies.

    beta is the inverse temperature (negative for inverted populations), mu
    the chemical potential.  ``max_residual`` and ``rms_residual`` measure
    |f - f_fit| over the modes used.  ``degenerate`` marks a flat
    distribution, for which beta = 0 and mu is reported as the mean energy.
    """

    beta: float
    mu: float
    max_residual: float
    rms_residual: float
    num_modes_used: int
    degenerate: bool = False


#: Occupancies closer than this to 0 or 1 carry no slope information and are
#: excluded from Fermi-Dirac fits.
FIT_SATURATION = 1e-12


def fit_fermi_dirac(f: np.ndarray, energies: np.ndarray,
                    saturation: float = FIT_SATURATION) -> FermiFit:
    """Fit f(E) = 1/(exp(beta (E - mu)) + 1) by linear regression in logit space.

    Saturated modes (f within ``saturation`` of 0 or 1) are dropped; at least
    three usable modes spanning more than one distinct energy are required,
    otherwise InsufficientDataError.  A flat occupancy yields the degenerate
    fit beta = 0, mu = mean energy.
    """
    f = np.asarray(f, dtype=float)
    energies = np.asarray(energies, dtype=float)
    usable = (f >= saturation) & (f <= 1.0 - saturation)
    fu, eu = f[usable], energies[usable]
    if fu.size < 3:
        raise InsufficientDataError(
            f"only {fu.size} non-saturated modes, need at least 3")
    if np.ptp(eu) == 0.0:
        raise InsufficientDataError("all usable modes share one energy")

    y = np.log(fu) - np.log1p(-fu)          # logit(f) = -beta (E - mu)
    design = np.stack([eu, np.ones_like(eu)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    beta = -float(slope)

    if abs(beta) * np.ptp(eu) < 1e-12:      # flat in logit space
        mu = float(eu.mean())
        resid = fu - float(fu.mean())
        return FermiFit(0.0, mu, float(np.abs(resid).max()),
                        float(np.sqrt(np.mean(resid ** 2))), int(fu.size), True)

    mu = float(intercept) / beta
    with np.errstate(over="ignore"):
        f_fit = 1.0 / (np.exp(beta * (eu - mu)) + 1.0)
    resid = fu - f_fit
    return FermiFit(beta, mu, float(np.abs(resid).max()),
                    float(np.sqrt(np.mean(resid ** 2))), int(fu.size), False)


def backreaction_rate(state: DistributionState, band_structure: BandStructure,
                      sigma: float) -> float:
    """Leading-order drift of the sub-lattice imbalance, dn^A/dt = -dn^B/dt.

    Evaluates -2 pi w^3 sum over all sixteen band-label channels and all
    (k, p, q) of the backreaction weight N^{abcd} times the regularized
    energy delta and the occupancy bracket, with the same 6 sigma pruning as
    the collision table.  This is a diagnostic of how strongly the dynamics
    would dress the frozen CDW background, not part of the evolution.
    """
    grid = band_structure.grid
    n_modes = grid.num_modes
    all_modes = np.arange(n_modes)
    cutoff = CUTOFF_SIGMAS * sigma
    w = grid.weight
    f_of = {1: state.f_plus, 0: state.f_minus}
    e_of = {1: band_structure.e_plus, 0: band_structure.e_minus}

    total = 0.0
    for q in range(n_modes):
        kq_of = grid.sub_indices(all_modes, q)
        pq_of = grid.add_indices(all_modes, q)
        for channel in ALL_CHANNELS:
            a, b, c, d = channel
            de_k = e_of[c][kq_of] - e_of[d]
            de_p = e_of[a][pq_of] - e_of[b]
            mask = np.abs(de_p[:, None] + de_k[None, :]) <= cutoff
            if not mask.any():
                continue
            p_sel, k_sel = np.nonzero(mask)
            kq_sel, pq_sel = kq_of[k_sel], pq_of[p_sel]
            weight = backreaction_weight_idx(channel, pq_sel, p_sel, kq_sel,
                                             k_sel, band_structure)
            g = delta_kernel(de_p[p_sel] + de_k[k_sel], sigma)
            f_a, f_b = f_of[a][pq_sel], f_of[b][p_sel]
            f_c, f_d = f_of[c][kq_sel], f_of[d][k_sel]
            bracket = f_d * f_b * (1 - f_c) * (1 - f_a) \
                - f_a * f_c * (1 - f_d) * (1 - f_b)
            total += float(weight @ (g * bracket))
    return -TWO_PI * w ** 3 * total


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One row of the run diagnostics time series."""

    time: float
    entropy: float
    energy: float
    n_plus: float
    n_minus: float
    momentum_x: float
    momentum_y: float
    beta_plus: Optional[float]
    beta_minus: Optional[float]
    ph_distance: float
    backreaction: Optional[float] = None


def collect_record(state: DistributionState, band_structure: BandStructure,
                   backreaction: Optional[float] = None) -> DiagnosticsRecord:
    """Evaluate the standard diagnostics on one state.

    Fermi fits are attempted per band and reported as None while the
    distribution is too saturated or too far from thermal form to fit.
    """
    n_plus, n_minus = band_populations(state, band_structure)
    px, py = crystal_momentum(state, band_structure)

    def try_beta(f, energies):
        try:
            return fit_fermi_dirac(f, energies).beta
        except InsufficientDataError:
            return None

    return DiagnosticsRecord(
        time=state.time,
        entropy=h_functional(state),
        energy=total_energy(state, band_structure),
        n_plus=n_plus,
        n_minus=n_minus,
        momentum_x=float(px),
        momentum_y=float(py),
        beta_plus=try_beta(state.f_plus, band_structure.e_plus),
        beta_minus=try_beta(state.f_minus, band_structure.e_minus),
        ph_distance=particle_hole_distance(state),
        backreaction=backreaction,
    )
