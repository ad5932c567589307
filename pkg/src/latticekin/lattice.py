"""Square-lattice Brillouin zone, CDW two-band spectrum, and sub-lattice rotations.

The model lives on a 2D bipartite square lattice at half filling.  The
checkerboard mean field splits the spectrum into a quasi-particle band E+ and
a quasi-hole band E-, separated by a gap of order the repulsion V, with both
bands dispersing only through second-order hopping (bandwidth ~ J^2/V).

Conventions fixed here and relied on everywhere else:

* dispersion  J_k = (J/2)(cos kx + cos ky)   (coordination number Z = 4)
* interaction V_q = (V/2)(cos qx + cos qy)
* Brillouin zone [-pi, pi)^2 sampled by an N x N grid, integration measure
  (1/N^2) * sum over modes
* sub-lattice rotation O indexed [band, sublattice] with band row + = (cos a,
  sin a) and band row - = (-sin a, cos a); cos a carries sgn(J_k), sgn(0) = +1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigValidationError, DegenerateBandsError

TWO_PI = 2.0 * math.pi

# Strong-coupling closed forms drop corrections of relative order (J/V)^2;
# beyond this ratio the ph_only kernel is not a controlled approximation.
PH_ONLY_MAX_J_OVER_V = 0.1


class ChannelSet(enum.Enum):
    """Which collision channels enter the kinetic equation."""

    PH_ONLY = "ph_only"
    FULL = "full"
    WEAK_COUPLING = "weak_coupling"


@dataclass(frozen=True)
class ModelParams:
    """Immutable physics definition of a run.

    Energies are in absolute units; internally all code sets ``interaction``
    to 1 so that reported times come out in units of J^2/V^3 after the output
    conversion (see :mod:`latticekin.integrator`).
    """

    hopping: float
    interaction: float
    filling_a: float = 0.0
    filling_b: float = 1.0
    grid_size: int = 50
    broadening_factor: float = 2.0
    channel_set: ChannelSet = ChannelSet.PH_ONLY

    def __post_init__(self):
        if not self.hopping > 0:
            raise ConfigValidationError("hopping", "J must be > 0")
        if not self.interaction > 0:
            raise ConfigValidationError("interaction", "V must be > 0")
        for name, value in (("filling_a", self.filling_a),
                            ("filling_b", self.filling_b)):
            if not 0.0 <= value <= 1.0:
                raise ConfigValidationError(name, "fillings must lie in [0, 1]")
        if abs(self.filling_a + self.filling_b - 1.0) > 1e-12:
            raise ConfigValidationError(
                "filling_a", "sub-lattice fillings must add up to 1 (half filling)")
        if self.grid_size < 4 or self.grid_size % 2 != 0:
            raise ConfigValidationError("grid_size", "N must be even and >= 4")
        if not self.broadening_factor > 0:
            raise ConfigValidationError("broadening_factor", "eta must be > 0")
        if (self.channel_set is ChannelSet.PH_ONLY
                and self.hopping / self.interaction > PH_ONLY_MAX_J_OVER_V):
            raise ConfigValidationError(
                "channel_set",
                f"ph_only requires J/V <= {PH_ONLY_MAX_J_OVER_V} "
                f"(got {self.hopping / self.interaction:g}); use channel_set=full")

    @property
    def j_over_v(self) -> float:
        return self.hopping / self.interaction

    @property
    def gap(self) -> float:
        """CDW gap V^A - V^B = V (n^B - n^A) between the band edges."""
        return self.interaction * (self.filling_b - self.filling_a)


def wrap_momentum(k):
    """Wrap momentum components into [-pi, pi)."""
    return np.mod(np.asarray(k, dtype=float) + math.pi, TWO_PI) - math.pi


def hopping_dispersion(k, params: ModelParams):
    """Single-particle dispersion J_k = (J/2)(cos kx + cos ky).

    Even in k, maximal value J at the zone center, vanishing on the diamond
    |kx| + |ky| = pi.
    """
    k = np.asarray(k, dtype=float)
    return 0.5 * params.hopping * (np.cos(k[..., 0]) + np.cos(k[..., 1]))


def interaction_fourier(q, params: ModelParams):
    """Nearest-neighbour interaction Fourier component V_q = (V/2)(cos qx + cos qy)."""
    q = np.asarray(q, dtype=float)
    return 0.5 * params.interaction * (np.cos(q[..., 0]) + np.cos(q[..., 1]))


def band_energies(k, params: ModelParams):
    """Quasi-particle and quasi-hole energies (E+, E-) at momentum k.

    E+- = (V +- omega_k)/2 with omega_k = sqrt((V^A - V^B)^2 + 4 J_k^2),
    V^A = V n^B and V^B = V n^A.  E- is computed as V - E+ so the sum rule
    E+ + E- = V holds exactly in floating point (Sterbenz: V/2 <= E+ <= V
    guarantees the subtraction is exact).
    """
    v = params.interaction
    jk = hopping_dispersion(k, params)
    omega = np.hypot(params.gap, 2.0 * jk)
    e_plus = 0.5 * (v + omega)
    e_minus = v - e_plus
    return e_plus, e_minus


def rotation_matrix(k, params: ModelParams):
    """Sub-lattice rotation entries (cos alpha_k, sin alpha_k).

    cos alpha carries the sign of J_k (with sgn(0) = +1), sin alpha >= 0.
    The 2x2 matrix [[cos, sin], [-sin, cos]] is orthogonal and reduces to the
    identity on the diamond where J_k = 0.

    Raises DegenerateBandsError where omega_k = 0 (only possible at equal
    fillings with J_k = 0).
    """
    jk = np.asarray(hopping_dispersion(k, params))
    delta = params.gap
    omega = np.hypot(delta, 2.0 * jk)
    if np.any(omega == 0.0):
        raise DegenerateBandsError("omega_k = 0: rotation undefined")
    sign = np.where(jk < 0.0, -1.0, 1.0)
    cos_a = sign * np.sqrt(np.maximum(omega + delta, 0.0) / (2.0 * omega))
    sin_a = np.sqrt(np.maximum(omega - delta, 0.0) / (2.0 * omega))
    return cos_a, sin_a


@dataclass(frozen=True)
class BrillouinGrid:
    """N x N momentum grid over [-pi, pi)^2 with exact wrap arithmetic.

    Modes are indexed flat as idx = ix * N + iy with component
    k(i) = 2 pi i / N - pi.  Sums and differences of grid modes land exactly
    on grid modes; all wrapping is done on the integer indices.
    """

    n: int
    ix: np.ndarray = field(repr=False)
    iy: np.ndarray = field(repr=False)
    momenta: np.ndarray = field(repr=False)

    @classmethod
    def create(cls, n: int) -> "BrillouinGrid":
        ii, jj = np.divmod(np.arange(n * n), n)
        k = TWO_PI * np.stack([ii, jj], axis=1) / n - math.pi
        return cls(n=n, ix=ii.astype(np.int64), iy=jj.astype(np.int64), momenta=k)

    @property
    def num_modes(self) -> int:
        return self.n * self.n

    @property
    def weight(self) -> float:
        """Integration weight per mode, fixing the absolute rate normalization."""
        return 1.0 / (self.n * self.n)

    def add_indices(self, a, b):
        """Flat index of mode k_a + k_b (wrapped)."""
        n = self.n
        return ((self.ix[a] + self.ix[b] + n // 2) % n) * n \
            + (self.iy[a] + self.iy[b] + n // 2) % n

    def sub_indices(self, a, b):
        """Flat index of mode k_a - k_b (wrapped)."""
        n = self.n
        return ((self.ix[a] - self.ix[b] + n // 2) % n) * n \
            + (self.iy[a] - self.iy[b] + n // 2) % n

    def neg_indices(self, a):
        """Flat index of mode -k_a (wrapped)."""
        n = self.n
        return ((-self.ix[a]) % n) * n + (-self.iy[a]) % n

    def index_of(self, k) -> int:
        """Flat index of an explicit momentum; must be a grid mode."""
        k = wrap_momentum(k)
        i = (np.asarray(k) + math.pi) * self.n / TWO_PI
        idx = np.rint(i).astype(np.int64)
        if not np.allclose(i, idx, atol=1e-9):
            raise ValueError(f"momentum {k} is not a mode of the {self.n}x{self.n} grid")
        return int((idx[..., 0] % self.n) * self.n + idx[..., 1] % self.n)


@dataclass(frozen=True)
class BandStructure:
    """Per-mode spectrum and rotation entries, precomputed once per run.

    Immutable after construction; safe for unrestricted concurrent reads.
    """

    grid: BrillouinGrid
    params: ModelParams
    j_k: np.ndarray = field(repr=False)
    e_plus: np.ndarray = field(repr=False)
    e_minus: np.ndarray = field(repr=False)
    omega: np.ndarray = field(repr=False)
    cos_alpha: np.ndarray = field(repr=False)
    sin_alpha: np.ndarray = field(repr=False)

    @classmethod
    def create(cls, grid: BrillouinGrid, params: ModelParams) -> "BandStructure":
        k = grid.momenta
        jk = hopping_dispersion(k, params)
        e_plus, e_minus = band_energies(k, params)
        omega = np.hypot(params.gap, 2.0 * jk)
        cos_a, sin_a = rotation_matrix(k, params)
        for arr in (jk, e_plus, e_minus, omega, cos_a, sin_a):
            arr.setflags(write=False)
        return cls(grid=grid, params=params, j_k=jk, e_plus=e_plus,
                   e_minus=e_minus, omega=omega, cos_alpha=cos_a, sin_alpha=sin_a)

    @property
    def bandwidth(self) -> float:
        """Quasi-particle bandwidth W = max E+ - min E+ (~ J^2/V for J << V)."""
        return float(self.e_plus.max() - self.e_plus.min())

    @property
    def weak_bandwidth(self) -> float:
        """Bandwidth of the bare dispersion J_k, used by the weak-coupling kernel."""
        return float(self.j_k.max() - self.j_k.min())

    def rotation_rows(self):
        """O entries as four flat arrays (O+A, O+B, O-A, O-B) per mode."""
        return (self.cos_alpha, self.sin_alpha, -self.sin_alpha, self.cos_alpha)
