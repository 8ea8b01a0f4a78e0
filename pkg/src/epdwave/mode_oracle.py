"""
mode_oracle.py

Brute-force reference values: adaptive Dormand-Prince 5(4) integration of
  - the per-mode ODE   v'' + |xi|^2 v + (mu/t) v' = g(t)
  - the Bessel ODE     z^2 y'' + z y' + (z^2 - nu^2) y = 0

Used by the tests and the validate-specfun suite to check specfun and
propagator. Not on the solver's hot path.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np

from epdwave.errors import PropagatorDomainError, StepSizeUnderflowError
from epdwave.propagator import DampingParams

logger = logging.getLogger(__name__)

Value = Union[float, np.ndarray]
Rhs = Callable[[float, np.ndarray], np.ndarray]

TOL_RANGE: Tuple[float, float] = (1e-13, 1e-6)

# Dormand-Prince 5(4) tableau; last stage doubles as the next first stage (FSAL)
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
# 5th minus 4th order weights
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

_SAFETY = 0.9
_GROW_MAX = 5.0
_SHRINK_MIN = 0.2
_SCALE_FLOOR = 1e-300


@dataclass(frozen=True)
class OdeResult:
    t_final: float
    state: Tuple[Value, Value]
    est_error: float
    steps: int
    rejected: int = 0


def _check_tol(tol: float) -> None:
    lo, hi = TOL_RANGE
    if not (lo <= tol <= hi):
        raise ValueError(f"tol must lie in [{lo:g}, {hi:g}]; got {tol!r}")


def _error_norm(err_vec: np.ndarray, y: np.ndarray, y_new: np.ndarray, weights) -> float:
    # relative to the weighted size of each mode's state vector (axis 0 holds (y, y'))
    scale = np.maximum(np.max(np.abs(weights * y), axis=0), np.max(np.abs(weights * y_new), axis=0))
    return float(np.max(np.max(np.abs(weights * err_vec), axis=0) / np.maximum(scale, _SCALE_FLOOR)))


def dormand_prince(
    rhs: Rhs,
    t0: float,
    y0: np.ndarray,
    t1: float,
    tol: float,
    weights=1.0,
    max_steps: int = 2_000_000,
) -> OdeResult:
    """
    Integrate y' = rhs(t, y) from t0 to t1 (either direction). Each accepted
    step has |w*err| <= tol * |w*y| per mode, with `weights` w broadcast
    against y.
    """
    y = np.array(y0, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if t1 == t0:
        return OdeResult(t_final=float(t1), state=(_unpack(y[0]), _unpack(y[1])), est_error=0.0, steps=0)

    direction = 1.0 if t1 > t0 else -1.0
    t = float(t0)
    h = direction * min(abs(t1 - t0), 1e-2)
    k = [rhs(t, y)] + [None] * 6
    steps = rejected = 0
    worst = 0.0

    while direction * (t1 - t) > 0.0:
        if abs(h) > abs(t1 - t):
            h = t1 - t
        for i in range(1, 7):
            incr = sum(a * k[m] for m, a in enumerate(_A[i]) if a != 0.0)
            k[i] = rhs(t + _C[i] * h, y + h * incr)
        # stage 6 argument is the 5th order solution
        y_new = y + h * sum(a * k[m] for m, a in enumerate(_A[6]) if a != 0.0)
        err_vec = h * sum(e * k[m] for m, e in enumerate(_E) if e != 0.0)
        err = _error_norm(err_vec, y, y_new, weights)
        if not np.isfinite(err):
            raise StepSizeUnderflowError(f"non-finite error estimate at t={t!r}")

        if err <= tol:
            t = t1 if abs(t1 - (t + h)) <= 1e-15 * max(1.0, abs(t1)) else t + h
            y = y_new
            k[0] = k[6]
            steps += 1
            worst = max(worst, err)
            if steps > max_steps:
                raise StepSizeUnderflowError(f"exceeded {max_steps} steps at t={t!r}")
        else:
            rejected += 1

        factor = _GROW_MAX if err == 0.0 else _SAFETY * (tol / err) ** 0.2
        h *= min(_GROW_MAX, max(_SHRINK_MIN, factor))
        if abs(h) < 1e-14 * max(1.0, abs(t)):
            raise StepSizeUnderflowError(f"step size underflow at t={t!r} (h={h!r}, err={err:.3e})")

    return OdeResult(
        t_final=float(t1),
        state=(_unpack(y[0]), _unpack(y[1])),
        est_error=worst,
        steps=steps,
        rejected=rejected,
    )


def _unpack(v: np.ndarray) -> Value:
    return float(v) if np.ndim(v) == 0 else np.array(v)


def integrate_mode(
    params: DampingParams,
    ximag: Value,
    tau: float,
    y0: Value,
    y0p: Value,
    t_end: float,
    tol: float,
    forcing: Optional[Callable[[float], float]] = None,
) -> OdeResult:
    """
    (v, v')(t_end) for v'' + |xi|^2 v + (mu/t) v' = forcing(t) with (v, v')(tau) = (y0, y0p).
    `ximag`, `y0`, `y0p` may be arrays to carry a batch of modes on one step sequence.
    """
    if tau < 1.0 or t_end < tau:
        raise PropagatorDomainError(f"need 1 <= tau <= t_end; got tau={tau!r}, t_end={t_end!r}")
    _check_tol(tol)
    xi2 = np.asarray(ximag, dtype=float) ** 2
    mu = params.mu

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        accel = -xi2 * y[0] - (mu / t) * y[1]
        if forcing is not None:
            accel = accel + forcing(t)
        return np.array([y[1], accel])

    y_start = np.array(np.broadcast_arrays(np.asarray(y0, float), np.asarray(y0p, float), xi2)[:2])
    # v' ~ |xi| v for an oscillating mode; weigh it down so both components count alike
    weights = np.array(np.broadcast_arrays(np.ones_like(xi2), 1.0 / np.maximum(np.sqrt(xi2), 1.0)))
    return dormand_prince(rhs, tau, y_start, t_end, tol, weights=weights)


def integrate_bessel(order: float, z0: float, y0: float, y0p: float, z_end: float, tol: float) -> OdeResult:
    """Transport (y, y') along z^2 y'' + z y' + (z^2 - order^2) y = 0 from z0 to z_end."""
    if not (0.0 < z0 < z_end):
        raise ValueError(f"need 0 < z0 < z_end; got z0={z0!r}, z_end={z_end!r}")
    _check_tol(tol)
    nu2 = order * order

    def rhs(z: float, y: np.ndarray) -> np.ndarray:
        return np.array([y[1], -y[1] / z - (1.0 - nu2 / (z * z)) * y[0]])

    return dormand_prince(rhs, z0, np.array([y0, y0p], dtype=float), z_end, tol)
