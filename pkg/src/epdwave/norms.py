"""
norms.py

Weighted norms used to measure decay and contraction.

  - mixed_norm     : ||v(r w) r^(1/p)||_{L^p_r L^q_w}, by bilinear resampling onto a polar grid
  - z_apply/z_norm : vector fields {1, dt, d1, d2, L0, L1, L2, Omega12} and their summed norms
  - dz_norm        : sum over a in {t, 1, 2} of ||d_a u||_{Z,1,2}
  - x_norm         : sup_t t^(1-delta) ||u||_{Z,1,2} + t ||du||_{Z,1,2}
  - zone_norms     : spectral mass split over |xi| >= 1, |xi| < 1 <= t|xi|, t|xi| < 1
  - decay_fit      : least squares slope of log value against log t
  - ks_ratio       : ||u||_inf / (t^(1/2) (||u||_{Z,1,2} + ||du||_{Z,1,2}))
  - energy         : 1/2 int |dt v|^2 + |grad v|^2, and its dissipation rate
  - data_norms     : the six data terms bounding the nonlinear iteration
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Dict, Literal, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, ndimage

from epdwave.errors import ConfigError, FitError, MissingForcingError
from epdwave.fields import CauchyData, GridSpec, SpectralState, Trajectory, dealiased_power_hat

logger = logging.getLogger(__name__)

ZFIELDS: Tuple[str, ...] = ("identity", "dt", "d1", "d2", "L0", "L1", "L2", "Omega12")
DerivativeAxis = Literal["t", "1", "2"]

MIN_FIT_SAMPLES = 8


# ---- Parameter types
@dataclass(frozen=True)
class MixedNormSpec:
    p_radial: float = 2.0
    q_angular: float = 2.0
    n_r: int = 0          # 0 -> 2n of the field's grid
    n_theta: int = 256

    def __post_init__(self) -> None:
        for name, value in (("p_radial", self.p_radial), ("q_angular", self.q_angular)):
            if not (value >= 1.0):
                raise ConfigError(f"{name} must be in [1, inf]; got {value!r}")
        if self.n_theta < 64:
            raise ConfigError(f"n_theta must be >= 64; got {self.n_theta!r}")
        if self.n_r < 0:
            raise ConfigError(f"n_r must be >= 0; got {self.n_r!r}")

    def radial_points(self, grid: GridSpec) -> int:
        n_r = self.n_r or 2 * grid.n
        if n_r < grid.n:
            raise ConfigError(f"n_r must be >= grid n = {grid.n}; got {n_r}")
        return n_r


L2 = MixedNormSpec()


@dataclass(frozen=True)
class ZNormValue:
    order_s: int
    pq: MixedNormSpec
    value: float
    breakdown: Dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class ContractionParams:
    eps1: float
    eps2: float = 0.1

    def __post_init__(self) -> None:
        if not (0.0 < self.eps1 < 1.0):
            raise ConfigError(f"eps1 must lie in (0, 1); got {self.eps1!r}")
        if not (self.eps2 > 0.0):
            raise ConfigError(f"eps2 must be > 0; got {self.eps2!r}")

    @property
    def delta(self) -> float:
        return 2.0 * self.eps1 / (1.0 + self.eps1)

    @property
    def kappa(self) -> float:
        return (1.0 - self.eps1) / (1.0 + self.eps1)

    @property
    def q_tilde(self) -> float:
        # 1/(1+eps1) = 1/2 + 1/q_tilde
        return 2.0 * (1.0 + self.eps1) / (1.0 - self.eps1)

    @property
    def q_bar(self) -> float:
        # 1/2 = 1/(2+eps2) + 1/q_bar
        return 2.0 * (2.0 + self.eps2) / self.eps2

    def conditions(self, p: float) -> Tuple[float, float]:
        """Left-hand sides of the two integrability conditions; both must be < -1."""
        first = 1.0 + (p - 1.0 - self.kappa) / 2.0 + p * (self.delta - 1.0)
        second = 1.0 + p * (self.delta - 1.0)
        return first, second

    def admissible(self, p: float) -> bool:
        return all(c < -1.0 for c in self.conditions(p))

    @staticmethod
    def eps1_ceiling(p: float) -> float:
        """Supremum of admissible eps1 for power p (0 when nothing is admissible)."""
        kappa_star = max((p + 3.0) / (1.0 + 2.0 * p), 2.0 / p)
        if kappa_star >= 1.0:
            return 0.0
        return (1.0 - kappa_star) / (1.0 + kappa_star)

    @classmethod
    def default_for(cls, p: float, fallback: float = 0.05) -> "ContractionParams":
        ceiling = cls.eps1_ceiling(p)
        if ceiling <= 0.0:
            logger.warning(f"no admissible eps1 for p={p:g}; falling back to eps1={fallback:g}")
            return cls(eps1=fallback)
        return cls(eps1=0.9 * ceiling)


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    intercept: float
    rms_residual: float
    window: Tuple[float, float]
    samples: int


# ---- Mixed norms
@lru_cache(maxsize=32)
def _polar_layout(n: int, L: float, n_r: int, n_theta: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    dx = 2.0 * L / n
    r = np.linspace(0.0, L, n_r)
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    rr, tt = np.meshgrid(r, theta, indexing="ij")
    coords = np.stack([(rr * np.cos(tt) + L) / dx, (rr * np.sin(tt) + L) / dx]).reshape(2, -1)
    return r, theta, coords


def polar_samples(values: np.ndarray, grid: GridSpec, spec: MixedNormSpec = L2) -> Tuple[np.ndarray, np.ndarray]:
    """(r, |v(r, theta)|) with shape (n_r,), (n_r, n_theta)."""
    r, _, coords = _polar_layout(grid.n, grid.L, spec.radial_points(grid), spec.n_theta)
    sampled = ndimage.map_coordinates(np.asarray(values, dtype=float), coords, order=1, mode="grid-wrap")
    return r, np.abs(sampled).reshape(r.size, spec.n_theta)


def mixed_norm(values: np.ndarray, grid: GridSpec, spec: MixedNormSpec = L2) -> float:
    r, a = polar_samples(values, grid, spec)
    q, p = spec.q_angular, spec.p_radial
    dtheta = 2.0 * np.pi / spec.n_theta
    if math.isinf(q):
        inner = a.max(axis=1)
    else:
        inner = (np.sum(a**q, axis=1) * dtheta) ** (1.0 / q)
    if math.isinf(p):
        return float(inner.max())
    return float(integrate.trapezoid(inner**p * r, r) ** (1.0 / p))


# ---- Vector fields
def z_fields(state: SpectralState) -> Dict[str, np.ndarray]:
    grid = state.grid
    x1, x2 = grid.coords
    ik1, ik2 = grid.derivative_symbols
    t = state.time
    v = np.fft.ifft2(state.vhat).real
    vt = np.fft.ifft2(state.vthat).real
    v1 = np.fft.ifft2(ik1 * state.vhat).real
    v2 = np.fft.ifft2(ik2 * state.vhat).real
    return {
        "identity": v,
        "dt": vt,
        "d1": v1,
        "d2": v2,
        "L0": t * vt + x1 * v1 + x2 * v2,
        "L1": t * v1 + x1 * vt,
        "L2": t * v2 + x2 * vt,
        "Omega12": x1 * v2 - x2 * v1,
    }


def z_apply(state: SpectralState, name: str) -> np.ndarray:
    if name not in ZFIELDS:
        raise KeyError(f"unknown vector field {name!r}; expected one of {ZFIELDS}")
    return z_fields(state)[name]


def derivative_state(state: SpectralState, axis: DerivativeAxis, mu: float) -> SpectralState:
    """
    State of d_a v. For a = t the second time derivative comes from the equation,
    dt^2 v = Lap v - (mu/t) dt v + F, so forced states must carry F.
    """
    grid = state.grid
    if axis in ("1", "2"):
        symbol = grid.derivative_symbols[int(axis) - 1]
        forcing = None if state.forcing_hat is None else symbol * state.forcing_hat
        return replace(state, vhat=symbol * state.vhat, vthat=symbol * state.vthat, forcing_hat=forcing)
    if axis != "t":
        raise KeyError(f"derivative axis must be 't', '1' or '2'; got {axis!r}")
    if state.forced and state.forcing_hat is None:
        raise MissingForcingError(f"dt^2 v at t={state.time:g} needs the |u|^p snapshot of this state")
    vtt = -(grid.kmag**2) * state.vhat - (mu / state.time) * state.vthat
    if state.forcing_hat is not None:
        vtt = vtt + state.forcing_hat
    return SpectralState(time=state.time, vhat=state.vthat, vthat=vtt, grid=grid)


def z_norm(state: SpectralState, s: int = 1, spec: MixedNormSpec = L2) -> ZNormValue:
    if s not in (0, 1):
        raise ValueError(f"s must be 0 or 1; got {s!r}")
    if s == 0:
        value = mixed_norm(np.fft.ifft2(state.vhat).real, state.grid, spec)
        return ZNormValue(order_s=0, pq=spec, value=value, breakdown={"identity": value})
    breakdown = {name: mixed_norm(f, state.grid, spec) for name, f in z_fields(state).items()}
    return ZNormValue(order_s=1, pq=spec, value=float(sum(breakdown.values())), breakdown=breakdown)


def dz_norm(state: SpectralState, mu: float, spec: MixedNormSpec = L2) -> float:
    return float(sum(z_norm(derivative_state(state, a, mu), 1, spec).value for a in ("t", "1", "2")))


def x_norm_terms(traj: Trajectory, spec: MixedNormSpec = L2) -> Tuple[np.ndarray, np.ndarray]:
    """Per lattice time: (||u||_{Z,1,2}, ||du||_{Z,1,2})."""
    z_u = np.array([z_norm(st, 1, spec).value for st in traj.states])
    z_du = np.array([dz_norm(st, traj.mu, spec) for st in traj.states])
    return z_u, z_du


def x_weighted(times: np.ndarray, z_u: np.ndarray, z_du: np.ndarray, cparams: ContractionParams) -> np.ndarray:
    return times ** (1.0 - cparams.delta) * z_u + times * z_du


def x_norm(traj: Trajectory, cparams: ContractionParams, spec: MixedNormSpec = L2) -> float:
    if len(traj.states) == 0:
        return 0.0
    z_u, z_du = x_norm_terms(traj, spec)
    return float(np.max(x_weighted(np.asarray(traj.times), z_u, z_du, cparams)))


# ---- Spectral diagnostics
def _parseval(grid: GridSpec) -> float:
    return grid.cell_area / float(grid.n * grid.n)


def zone_norms(state: SpectralState) -> Tuple[float, float, float]:
    k = state.grid.kmag
    t = state.time
    mass = np.abs(state.vhat) ** 2 * _parseval(state.grid)
    a1 = k >= 1.0
    a3 = t * k < 1.0
    a2 = ~a1 & ~a3
    return float(mass[a1].sum()), float(mass[a2].sum()), float(mass[a3].sum())


def energy(state: SpectralState) -> float:
    k2 = state.grid.kmag ** 2
    total = np.abs(state.vthat) ** 2 + k2 * np.abs(state.vhat) ** 2
    return 0.5 * float(total.sum()) * _parseval(state.grid)


def energy_dissipation(state: SpectralState, mu: float) -> float:
    """(mu/t) int |dt v|^2, the rate at which energy is lost."""
    return (mu / state.time) * float((np.abs(state.vthat) ** 2).sum()) * _parseval(state.grid)


def linf(state: SpectralState) -> float:
    return float(np.max(np.abs(np.fft.ifft2(state.vhat).real)))


def ks_ratio(
    state: SpectralState,
    mu: float,
    spec: MixedNormSpec = L2,
    z: Optional[float] = None,
    dz: Optional[float] = None,
) -> float:
    """`z` and `dz` may pass in norms the caller already has."""
    sup = linf(state)
    if sup == 0.0:
        return 0.0
    z = z_norm(state, 1, spec).value if z is None else z
    dz = dz_norm(state, mu, spec) if dz is None else dz
    denom = math.sqrt(state.time) * (z + dz)
    return 0.0 if denom == 0.0 else sup / denom


# ---- Fits
def decay_fit(
    times: Sequence[float],
    values: Sequence[float],
    window: Optional[Tuple[float, float]] = None,
) -> DecayFit:
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    lo, hi = window if window is not None else (float(t.min()), float(t.max()))
    keep = (t >= lo) & (t <= hi)
    t, v = t[keep], v[keep]
    if t.size < MIN_FIT_SAMPLES:
        raise FitError(f"decay fit needs >= {MIN_FIT_SAMPLES} samples in [{lo:g}, {hi:g}]; got {t.size}")
    if np.any(~(v > 0.0)):
        raise FitError(f"decay fit needs positive values; got min {float(np.min(v))!r}")
    x, y = np.log(t), np.log(v)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return DecayFit(
        exponent=float(slope),
        intercept=float(intercept),
        rms_residual=float(np.sqrt(np.mean(resid**2))),
        window=(float(lo), float(hi)),
        samples=int(t.size),
    )


# ---- Data norms
DATA_TERMS = ("u0_Z12", "grad_u0_Z12", "u1_Z12", "u1_Z1eps", "u0_plus_u1_Z1eps", "u0_plus_u1_Z12")


def data_norms(data: CauchyData, mu: float, p: float, epsilon: float, cparams: ContractionParams) -> Dict[str, float]:
    """
    The six data terms and their sum ("total"). At t = 1: dt u = u1 and
    dt^2 u = Lap u0 - mu u1 + eps^(p-1) |u0|^p.
    """
    grid = data.grid
    forcing = epsilon ** (p - 1.0) * dealiased_power_hat(data.u0, p) if epsilon > 0.0 else np.zeros((grid.n, grid.n))
    state = SpectralState(
        time=1.0,
        vhat=np.fft.fft2(data.u0),
        vthat=np.fft.fft2(data.u1),
        grid=grid,
        forcing_hat=forcing,
        forced=True,
    )
    weak = MixedNormSpec(p_radial=1.0 + cparams.eps1, q_angular=2.0)
    velocity = derivative_state(state, "t", mu)
    combined = replace(state, forcing_hat=None, forced=False).plus(velocity)
    terms = {
        "u0_Z12": z_norm(state, 1).value,
        "grad_u0_Z12": sum(z_norm(derivative_state(state, a, mu), 1).value for a in ("1", "2")),
        "u1_Z12": z_norm(velocity, 1).value,
        "u1_Z1eps": z_norm(velocity, 1, weak).value,
        "u0_plus_u1_Z1eps": z_norm(combined, 1, weak).value,
        "u0_plus_u1_Z12": z_norm(combined, 1).value,
    }
    terms["total"] = float(sum(terms.values()))
    return terms
