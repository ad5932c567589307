"""Adaptive explicit time stepping for occupancy dynamics.

Dormand-Prince 5(4) embedded pair with a PI step-size controller.  On top of
the usual local error test, a trial step is rejected whenever any occupancy
leaves [0, 1] by more than abs_tol; accepted occupancies are clamped back
into range, so the invariant 0 <= f <= 1 holds exactly between steps and the
collision bracket never sees unphysical arguments.

Times are handled in reported units of J^2/V^3 (the natural relaxation scale
at strong coupling); :func:`time_scale` converts the internal collision rate
to those units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Tuple

import numpy as np

from .errors import ConfigValidationError, StepUnderflowError
from .lattice import ModelParams

# Dormand-Prince 5(4) tableau.  b5 propagates (order 5), b4 is the embedded
# order-4 weight row used for the error estimate (FSAL stage included).
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                   -92097 / 339200, 187 / 2100, 1 / 40])


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and step-size limits for the adaptive integrator."""

    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    dt_init: float = 1e-3
    dt_min: float = 1e-14
    dt_max: float = math.inf
    safety: float = 0.9
    max_growth: float = 5.0
    max_shrink: float = 0.1

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ConfigValidationError("rel_tol", "tolerances must be > 0")
        if not 0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise ConfigValidationError(
                "dt_init", "need 0 < dt_min <= dt_init <= dt_max")
        if not 0 < self.safety < 1:
            raise ConfigValidationError(
                "safety", "safety factor must lie in (0, 1)")


def time_scale(params: ModelParams) -> float:
    """Reported time unit J^2/V^3 expressed in internal (1/energy) units.

    Multiplying the internal collision rate by this factor yields df/dt in
    reported units, so relaxation curves at different J/V collapse.
    """
    return params.hopping ** 2 / params.interaction ** 3


def _error_norm(err: np.ndarray, y0: np.ndarray, y1: np.ndarray,
                rel_tol: float, abs_tol: float) -> float:
    scale = abs_tol + rel_tol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _attempt_step(t: float, y: np.ndarray,
                  rhs: Callable[[float, np.ndarray], np.ndarray],
                  dt: float, config: IntegratorConfig,
                  f0: Optional[np.ndarray] = None,
                  range_limits: Optional[Tuple[float, float]] = (0.0, 1.0)):
    """Attempt one embedded step from (t, y) with trial size dt.

    Returns (accepted, t_new, y_new, dt_next, f_new) where f_new is the rhs
    at the accepted point (FSAL reuse) or None on rejection.  ``f0`` lets the
    caller pass the already-known rhs at (t, y).  A step is rejected if the
    error norm exceeds 1 or, when ``range_limits`` is set, if any component
    strays outside the limits by more than abs_tol; accepted values are
    clamped to the limits.  Rejections have no side effects on (t, y).
    """
    if f0 is None:
        f0 = rhs(t, y)
    k = [f0]
    for i in range(1, 7):
        yi = y + dt * sum(a * ki for a, ki in zip(_DP_A[i], k))
        k.append(rhs(t + _DP_C[i] * dt, yi))
    k = np.array(k)
    y5 = y + dt * (_DP_B5 @ k)
    err = dt * ((_DP_B5 - _DP_B4) @ k)

    norm = _error_norm(err, y, y5, config.rel_tol, config.abs_tol)
    out_of_range = False
    if range_limits is not None:
        lo, hi = range_limits
        out_of_range = bool(np.any(y5 < lo - config.abs_tol)
                            or np.any(y5 > hi + config.abs_tol))

    if norm > 1.0 or out_of_range:
        if norm > 1.0:
            factor = max(config.max_shrink, config.safety * norm ** -0.2)
        else:
            factor = 0.5
        return False, t, y, dt * factor, None

    if norm == 0.0:
        factor = config.max_growth
    else:
        factor = min(config.max_growth,
                     max(config.max_shrink, config.safety * norm ** -0.2))
    dt_next = min(dt * factor, config.dt_max)
    if range_limits is not None:
        y5 = np.clip(y5, range_limits[0], range_limits[1])
        f_new = rhs(t + dt, y5)       # FSAL stage invalid after clamping
    else:
        f_new = k[6]
    return True, t + dt, y5, dt_next, f_new


def step_adaptive(t: float, y: np.ndarray,
                  rhs: Callable[[float, np.ndarray], np.ndarray],
                  dt: float, config: IntegratorConfig,
                  range_limits: Optional[Tuple[float, float]] = (0.0, 1.0)):
    """Take one accepted adaptive step, shrinking dt until it succeeds.

    Returns (t_new, y_new, dt_used, dt_next).  Raises StepUnderflowError if
    the controller drives the trial size below dt_min before acceptance.
    """
    dt = min(dt, config.dt_max)
    f0 = rhs(t, y)
    while True:
        accepted, t_new, y_new, dt_next, _ = _attempt_step(
            t, y, rhs, dt, config, f0=f0, range_limits=range_limits)
        if accepted:
            return t_new, y_new, dt, dt_next
        if dt_next < config.dt_min:
            raise StepUnderflowError(
                f"step size {dt_next:g} fell below dt_min {config.dt_min:g} "
                f"at t = {t:g}")
        dt = dt_next


def evolve(t0: float, y0: np.ndarray, rhs: Callable[[float, np.ndarray], np.ndarray],
           t_end: float, config: IntegratorConfig = IntegratorConfig(),
           snapshot_times: Iterable[float] = (),
           on_snapshot: Optional[Callable[[float, np.ndarray], None]] = None,
           on_step: Optional[Callable[[float, np.ndarray], None]] = None,
           range_limits: Optional[Tuple[float, float]] = (0.0, 1.0)):
    """Integrate y' = rhs(t, y) from t0 to t_end with adaptive steps.

    Steps are truncated so every requested snapshot time is hit exactly;
    ``on_snapshot`` fires at those times and ``on_step`` after every accepted
    step.  Raises StepUnderflowError if the controller drives dt below
    dt_min.  Returns (t_end, y(t_end)).
    """
    snaps: List[float] = sorted(t for t in snapshot_times if t0 < t <= t_end)
    t, y = t0, np.array(y0, dtype=float)
    dt = min(config.dt_init, config.dt_max)
    f0 = rhs(t, y)
    si = 0

    while t < t_end:
        target = snaps[si] if si < len(snaps) else t_end
        trial = min(dt, target - t)
        accepted, t_new, y_new, dt_next, f_new = _attempt_step(
            t, y, rhs, trial, config, f0=f0, range_limits=range_limits)
        if accepted:
            t, y, f0 = t_new, y_new, f_new
            # keep the controller's preferred size, not the truncated one
            dt = dt_next if trial >= dt else max(dt, dt_next)
            if on_step is not None:
                on_step(t, y)
            while si < len(snaps) and t >= snaps[si] - 1e-15 * max(1.0, abs(t)):
                if on_snapshot is not None:
                    on_snapshot(snaps[si], y)
                si += 1
        else:
            dt = dt_next
        if dt < config.dt_min:
            raise StepUnderflowError(
                f"step size {dt:g} fell below dt_min {config.dt_min:g} at t = {t:g}")
    return t, y
