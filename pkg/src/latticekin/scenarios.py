"""Initial conditions and run-configuration parsing.

Perturbed regions are selected by energy windows given as fractions of the
bandwidth, measured from the relevant band edge, rather than by hand-picked
mode lists; this keeps the construction grid-size independent.  The defaults
[0.05, 0.15] sit close to, but not at, the band edge.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .collision import DistributionState, ground_state
from .errors import ConfigParseError, ConfigValidationError, EmptyRegionError
from .integrator import IntegratorConfig
from .lattice import BandStructure, BrillouinGrid, ChannelSet, ModelParams


class ScenarioKind(enum.Enum):
    GROUND = "ground"
    #: particles just above the gap, holes mirrored just below: D = 0.
    SYMMETRIC = "symmetric"
    #: particles near the gap edge, holes at the zone center: D > 0.
    ASYMMETRIC = "asymmetric"
    #: caller-supplied mode lists (API only, not reachable from config files).
    CUSTOM = "custom"


@dataclass(frozen=True)
class ScenarioSpec:
    """Which initial condition to build and how strongly to perturb it."""

    kind: ScenarioKind = ScenarioKind.SYMMETRIC
    delta_f: float = 1e-7
    window_low: float = 0.05
    window_high: float = 0.15
    #: explicit flat mode indices for CUSTOM, one list per band.
    custom_plus: Tuple[int, ...] = ()
    custom_minus: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind is not ScenarioKind.GROUND:
            if not 0.0 <= self.delta_f <= 0.5:
                raise ConfigValidationError("delta_f", "need 0 <= delta_f <= 0.5")
        if not 0.0 <= self.window_low <= self.window_high <= 1.0:
            raise ConfigValidationError("w1", "need 0 <= w1 <= w2 <= 1")


def _window_modes(energies: np.ndarray, from_edge: str, lo: float, hi: float):
    """Modes whose energy lies within [lo, hi] of the bandwidth from an edge."""
    width = float(energies.max() - energies.min())
    if from_edge == "bottom":
        frac = (energies - energies.min()) / width
    else:
        frac = (energies.max() - energies) / width
    mask = (frac >= lo) & (frac <= hi)
    if not mask.any():
        raise EmptyRegionError(
            f"no modes with ({from_edge}-referenced) energy fraction in "
            f"[{lo}, {hi}]; widen the window or refine the grid")
    return mask


def init_ground(grid: BrillouinGrid) -> DistributionState:
    """Strong-coupling ground state: empty + band, filled - band."""
    return ground_state(grid)


def init_symmetric(grid: BrillouinGrid, band_structure: BandStructure,
                   spec: ScenarioSpec) -> DistributionState:
    """Mirror-symmetric low-energy excitation.

    f+ = delta_f on modes with (E+ - min E+)/W in the window; f- = 1 - delta_f
    on the mirror modes ((max E- - E-)/W in the same window).  Because
    E+ + E- = V, both windows select the same k set and the state satisfies
    f+ = 1 - f- exactly (D = 0).
    """
    state = ground_state(grid)
    plus = _window_modes(band_structure.e_plus, "bottom",
                         spec.window_low, spec.window_high)
    minus = _window_modes(band_structure.e_minus, "top",
                          spec.window_low, spec.window_high)
    state.f_plus[plus] = spec.delta_f
    state.f_minus[minus] = 1.0 - spec.delta_f
    return state


def init_asymmetric(grid: BrillouinGrid, band_structure: BandStructure,
                    spec: ScenarioSpec) -> DistributionState:
    """High-energy excitation with disjoint supports.

    Particles sit near the bottom of the + band (along the zone diamond);
    holes sit near the bottom of the - band (zone center and corners), far
    from the particles in both momentum and in-band energy.
    """
    state = ground_state(grid)
    plus = _window_modes(band_structure.e_plus, "bottom",
                         spec.window_low, spec.window_high)
    minus = _window_modes(band_structure.e_minus, "bottom",
                          spec.window_low, spec.window_high)
    state.f_plus[plus] = spec.delta_f
    state.f_minus[minus] = 1.0 - spec.delta_f
    return state


def init_custom(grid: BrillouinGrid, spec: ScenarioSpec) -> DistributionState:
    state = ground_state(grid)
    plus = np.asarray(spec.custom_plus, dtype=np.int64)
    minus = np.asarray(spec.custom_minus, dtype=np.int64)
    if plus.size + minus.size == 0:
        raise EmptyRegionError("custom scenario lists no perturbed modes")
    state.f_plus[plus] = spec.delta_f
    state.f_minus[minus] = 1.0 - spec.delta_f
    return state


def build_initial_state(grid: BrillouinGrid, band_structure: BandStructure,
                        spec: ScenarioSpec) -> DistributionState:
    if spec.kind is ScenarioKind.GROUND:
        return init_ground(grid)
    if spec.kind is ScenarioKind.SYMMETRIC:
        return init_symmetric(grid, band_structure, spec)
    if spec.kind is ScenarioKind.ASYMMETRIC:
        return init_asymmetric(grid, band_structure, spec)
    return init_custom(grid, spec)


@dataclass(frozen=True)
class OutputPlan:
    """Where and when results are written (times in J^2/V^3 units)."""

    t_end: float = 100.0
    snapshot_times: Tuple[float, ...] = ()
    out_dir: str = "out"
    table_cache: Optional[str] = None

    def __post_init__(self):
        if not self.t_end >= 0:
            raise ConfigValidationError("t_end", "must be >= 0")
        for t in self.snapshot_times:
            if not 0.0 <= t <= self.t_end:
                raise ConfigValidationError(
                    "snapshots", f"snapshot time {t} outside [0, t_end]")


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    scenario: ScenarioSpec
    integrator: IntegratorConfig
    output: OutputPlan


_CONFIG_KEYS = ("J_over_V", "V", "N", "eta", "channel_set", "scenario",
                "delta_f", "w1", "w2", "rel_tol", "abs_tol", "t_end",
                "snapshots", "out_dir", "table_cache")

_DEFAULTS = {
    "V": "1", "eta": "2", "channel_set": "ph_only", "scenario": "symmetric",
    "delta_f": "1e-7", "w1": "0.05", "w2": "0.15", "rel_tol": "1e-8",
    "abs_tol": "1e-12", "t_end": "100", "snapshots": "", "out_dir": "out",
    "table_cache": "",
}


def _parse_float(raw: str, key: str, line: int, column: int) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ConfigParseError(f"{key}: not a number: {raw!r}", line, column)
    if not math.isfinite(value):
        raise ConfigParseError(f"{key}: must be finite", line, column)
    return value


def load_config(text: str) -> RunConfig:
    """Parse the `key = value` config format (strict: unknown keys fail).

    Missing keys take documented defaults; J_over_V and N are required.
    Raises ConfigParseError with 1-based line/column on malformed text and
    ConfigValidationError (from the constructed objects) on bad values.
    """
    values = dict(_DEFAULTS)
    positions = {}
    seen = set()
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0]
        if not line.strip():
            continue
        if "=" not in line:
            raise ConfigParseError("expected `key = value`", lineno,
                                   len(line) - len(line.lstrip()) + 1)
        key_part, value_part = line.split("=", 1)
        key = key_part.strip()
        column = len(key_part) - len(key_part.lstrip()) + 1
        if key not in _CONFIG_KEYS:
            raise ConfigParseError(f"unknown key {key!r}", lineno, column)
        if key in seen:
            raise ConfigParseError(f"duplicate key {key!r}", lineno, column)
        seen.add(key)
        values[key] = value_part.strip()
        positions[key] = (lineno, line.index("=") + 2)

    for required in ("J_over_V", "N"):
        if required not in seen:
            raise ConfigParseError(f"missing required key {required!r}", 1, 1)

    def fnum(key):
        line, col = positions.get(key, (1, 1))
        return _parse_float(values[key], key, line, col)

    v = fnum("V")
    n_raw = values["N"]
    line, col = positions.get("N", (1, 1))
    try:
        n = int(n_raw)
    except ValueError:
        raise ConfigParseError(f"N: not an integer: {n_raw!r}", line, col)

    cs_raw = values["channel_set"]
    try:
        channel_set = ChannelSet(cs_raw)
    except ValueError:
        raise ConfigValidationError(
            "channel_set", f"unknown value {cs_raw!r}; expected one of "
            + ", ".join(c.value for c in ChannelSet))
    if channel_set is ChannelSet.WEAK_COUPLING:
        raise ConfigValidationError(
            "channel_set", "weak_coupling is an API-level kernel; scenario "
            "runs use ph_only or full")

    sc_raw = values["scenario"]
    if sc_raw not in ("ground", "symmetric", "asymmetric"):
        raise ConfigValidationError(
            "scenario", f"unknown value {sc_raw!r}; expected ground, "
            "symmetric or asymmetric")

    params = ModelParams(hopping=fnum("J_over_V") * v, interaction=v,
                         grid_size=n, broadening_factor=fnum("eta"),
                         channel_set=channel_set)
    scenario = ScenarioSpec(kind=ScenarioKind(sc_raw), delta_f=fnum("delta_f"),
                            window_low=fnum("w1"), window_high=fnum("w2"))
    integrator = IntegratorConfig(rel_tol=fnum("rel_tol"),
                                  abs_tol=fnum("abs_tol"))

    snap_raw = values["snapshots"].strip()
    snapshot_times: Tuple[float, ...] = ()
    if snap_raw:
        line, col = positions.get("snapshots", (1, 1))
        snapshot_times = tuple(_parse_float(part.strip(), "snapshots", line, col)
                               for part in snap_raw.split(","))
    output = OutputPlan(t_end=fnum("t_end"), snapshot_times=snapshot_times,
                        out_dir=values["out_dir"] or "out",
                        table_cache=values["table_cache"] or None)
    return RunConfig(params, scenario, integrator, output)


def serialize_config(config: RunConfig) -> str:
    """Render a RunConfig back to config text; load_config round-trips it."""
    p, s, i, o = config.params, config.scenario, config.integrator, config.output
    lines = [
        f"J_over_V = {p.j_over_v!r}",
        f"V = {p.interaction!r}",
        f"N = {p.grid_size}",
        f"eta = {p.broadening_factor!r}",
        f"channel_set = {p.channel_set.value}",
        f"scenario = {s.kind.value}",
        f"delta_f = {s.delta_f!r}",
        f"w1 = {s.window_low!r}",
        f"w2 = {s.window_high!r}",
        f"rel_tol = {i.rel_tol!r}",
        f"abs_tol = {i.abs_tol!r}",
        f"t_end = {o.t_end!r}",
        f"snapshots = {', '.join(repr(t) for t in o.snapshot_times)}",
        f"out_dir = {o.out_dir}",
        f"table_cache = {o.table_cache or ''}",
    ]
    return "\n".join(lines) + "\n"
