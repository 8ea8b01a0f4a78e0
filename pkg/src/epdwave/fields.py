"""
fields.py

Grid and state containers shared by the solver, the norms and the CLI.

  - GridSpec      : periodic box [-L, L)^2 with n points per axis
  - SpectralState : (vhat, vthat) at one time, plus the |u|^p snapshot of
                    the forcing when the state came from a forced run
  - CauchyData    : compactly supported data (u0, u1) at t = 1
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional, Tuple

import numpy as np

from epdwave.errors import ConfigError, GridMismatchError

logger = logging.getLogger(__name__)

MIN_POINTS = 64
DEFAULT_SAMPLES = 40
# spacing that resolves the unit bump
BUMP_DX = 0.0625


@dataclass(frozen=True)
class GridSpec:
    n: int
    domain_half_width: float

    def __post_init__(self) -> None:
        n = int(self.n)
        if n < MIN_POINTS or n & (n - 1):
            raise ConfigError(f"grid must be a power of two >= {MIN_POINTS}; got {self.n!r}")
        if not np.isfinite(self.domain_half_width) or self.domain_half_width <= 0.0:
            raise ConfigError(f"domain must be > 0; got {self.domain_half_width!r}")

    @classmethod
    def for_final_time(cls, n: int, t_max: float) -> "GridSpec":
        """Box wide enough that data in B(0,1) cannot wrap around before t_max: L = 2(1 + T)."""
        grid = cls(n=n, domain_half_width=2.0 * (1.0 + t_max))
        if grid.dx > BUMP_DX:
            logger.warning(
                f"GridSpec: dx={grid.dx:.3g} for n={n}, T={t_max:g} is coarser than {BUMP_DX:g}; "
                f"the unit bump is under-resolved and spreads slightly beyond |x| <= t"
            )
        return grid

    def check_final_time(self, t_max: float) -> None:
        needed = 2.0 * t_max
        if self.domain_half_width < needed:
            raise ConfigError(
                f"domain must be >= 2*tmax = {needed:g} to avoid wrap-around; got {self.domain_half_width:g}"
            )

    @property
    def L(self) -> float:
        return float(self.domain_half_width)

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def cell_area(self) -> float:
        return self.dx * self.dx

    @cached_property
    def x(self) -> np.ndarray:
        return -self.L + self.dx * np.arange(self.n)

    @cached_property
    def coords(self) -> Tuple[np.ndarray, np.ndarray]:
        """(x1, x2) meshes; axis 0 runs along x1."""
        return tuple(np.meshgrid(self.x, self.x, indexing="ij"))  # type: ignore[return-value]

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        # (pi/L) * {-n/2, ..., n/2-1} in FFT order
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    @cached_property
    def k_mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return tuple(np.meshgrid(self.wavenumbers, self.wavenumbers, indexing="ij"))  # type: ignore[return-value]

    @cached_property
    def kmag(self) -> np.ndarray:
        k1, k2 = self.k_mesh
        return np.hypot(k1, k2)

    @cached_property
    def derivative_symbols(self) -> Tuple[np.ndarray, np.ndarray]:
        """i*xi_1, i*xi_2 with the Nyquist row/column zeroed so real fields stay real."""
        k = self.wavenumbers.copy()
        k[self.n // 2] = 0.0
        k1, k2 = np.meshgrid(k, k, indexing="ij")
        return 1j * k1, 1j * k2

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        mask = np.zeros((self.n, self.n), dtype=bool)
        mask[self.n // 2, :] = True
        mask[:, self.n // 2] = True
        return mask

    def radius(self) -> np.ndarray:
        x1, x2 = self.coords
        return np.hypot(x1, x2)


def time_lattice(t_final: float, samples: int = DEFAULT_SAMPLES, t0: float = 1.0) -> np.ndarray:
    """Geometric lattice t_m = t0 * gamma^m covering [t0, t_final] with `samples` points."""
    if t_final < t0:
        raise ConfigError(f"tmax must be >= {t0:g}; got {t_final!r}")
    if samples < 2 or t_final == t0:
        return np.array([t0])
    times = np.geomspace(t0, t_final, samples)
    times[0], times[-1] = t0, t_final
    return times


def refine_lattice(times: np.ndarray, refine: int) -> np.ndarray:
    """`refine` equal steps in log t per lattice interval; every lattice time is kept exactly."""
    times = np.asarray(times, dtype=float)
    if refine < 1:
        raise ValueError(f"refine must be >= 1; got {refine!r}")
    if times.size < 2 or refine == 1:
        return times.copy()
    s = np.log(times)
    spacing = np.diff(s)
    if not np.allclose(spacing, spacing.mean(), rtol=1e-9, atol=0.0):
        raise ValueError("refine_lattice needs a geometric lattice")
    fine = np.exp(np.linspace(s[0], s[-1], (times.size - 1) * refine + 1))
    fine[::refine] = times
    return fine


# ---- States
@dataclass(frozen=True)
class SpectralState:
    time: float
    vhat: np.ndarray
    vthat: np.ndarray
    grid: GridSpec
    forcing_hat: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    forced: bool = field(default=False, compare=False)

    @classmethod
    def from_physical(cls, time: float, v: np.ndarray, vt: np.ndarray, grid: GridSpec) -> "SpectralState":
        return cls(time=float(time), vhat=np.fft.fft2(v), vthat=np.fft.fft2(vt), grid=grid)

    @classmethod
    def zeros(cls, time: float, grid: GridSpec) -> "SpectralState":
        z = np.zeros((grid.n, grid.n), dtype=complex)
        return cls(time=float(time), vhat=z, vthat=z.copy(), grid=grid)

    def physical(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.fft.ifft2(self.vhat).real, np.fft.ifft2(self.vthat).real

    def displacement(self) -> np.ndarray:
        return np.fft.ifft2(self.vhat).real

    def scaled(self, c: float) -> "SpectralState":
        forcing = None if self.forcing_hat is None else c * self.forcing_hat
        return replace(self, vhat=c * self.vhat, vthat=c * self.vthat, forcing_hat=forcing)

    def plus(self, other: "SpectralState", c: float = 1.0) -> "SpectralState":
        """self + c*other; forcing snapshots combine the same way."""
        self.require_same_grid(other)
        forcing = None
        if self.forcing_hat is not None or other.forcing_hat is not None:
            mine = self.forcing_hat if self.forcing_hat is not None else 0.0
            theirs = other.forcing_hat if other.forcing_hat is not None else 0.0
            forcing = mine + c * theirs
        return replace(
            self,
            vhat=self.vhat + c * other.vhat,
            vthat=self.vthat + c * other.vthat,
            forcing_hat=forcing,
            forced=self.forced or other.forced,
        )

    def require_same_grid(self, other: "SpectralState") -> None:
        if self.grid != other.grid:
            raise GridMismatchError(f"grid mismatch: {self.grid} vs {other.grid}")


# ---- Dealiased powers
def _pad_index(n: int) -> np.ndarray:
    # positions of the n coarse modes inside a 2n-point spectrum
    return np.fft.fftfreq(n, d=1.0 / n).astype(int) % (2 * n)


def padded_power(u: np.ndarray, p: float) -> np.ndarray:
    """|u|^p evaluated on the 2x zero-padded physical grid (shape 2n x 2n)."""
    n = u.shape[0]
    uhat = np.fft.fft2(u)
    uhat[n // 2, :] = 0.0
    uhat[:, n // 2] = 0.0
    fine = np.zeros((2 * n, 2 * n), dtype=complex)
    idx = _pad_index(n)
    fine[np.ix_(idx, idx)] = uhat
    u_fine = np.fft.ifft2(fine).real * 4.0
    return np.abs(u_fine) ** p


def dealiased_power_hat(u: np.ndarray, p: float) -> np.ndarray:
    """Spectrum of |u|^p on the n x n grid after 2x padding and truncation; Nyquist modes zeroed."""
    n = u.shape[0]
    if u.shape != (n, n):
        raise GridMismatchError(f"expected a square field; got shape {u.shape}")
    what = np.fft.fft2(padded_power(u, p))
    idx = _pad_index(n)
    out = what[np.ix_(idx, idx)] / 4.0
    out[n // 2, :] = 0.0
    out[:, n // 2] = 0.0
    return out


# ---- Data
def bump(grid: GridSpec, radius: float = 1.0, amplitude: float = 1.0) -> np.ndarray:
    """amplitude * exp(1 - 1/(1 - (|x|/radius)^2)) inside |x| < radius, 0 outside."""
    r2 = (grid.radius() / radius) ** 2
    inside = r2 < 1.0
    out = np.zeros_like(r2)
    out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
    return out


PROFILES = ("generic", "cancel")


@dataclass(frozen=True)
class CauchyData:
    u0: np.ndarray
    u1: np.ndarray
    grid: GridSpec
    profile: str = "custom"

    @classmethod
    def from_case(cls, grid: GridSpec, case: str) -> "CauchyData":
        """
        generic : u0 = bump, u1 = narrower bump (u0 + u1 != 0)
        cancel  : u0 = bump, u1 = -u0
        """
        u0 = bump(grid)
        if case == "generic":
            u1 = bump(grid, radius=0.6, amplitude=0.5)
        elif case == "cancel":
            u1 = -u0
        else:
            raise ConfigError(f"case must be one of {PROFILES}; got {case!r}")
        return cls(u0=u0, u1=u1, grid=grid, profile=f"bump/{case}")

    def initial_state(self, epsilon: float = 1.0) -> SpectralState:
        return SpectralState.from_physical(1.0, epsilon * self.u0, epsilon * self.u1, self.grid)


@dataclass(frozen=True)
class Trajectory:
    """States on a time lattice; `mu` is kept so time derivatives can be formed from the equation."""

    times: np.ndarray
    states: Tuple[SpectralState, ...]
    mu: float

    def __post_init__(self) -> None:
        if len(self.times) != len(self.states):
            raise ValueError(f"{len(self.times)} times but {len(self.states)} states")

    def __len__(self) -> int:
        return len(self.states)

    @property
    def grid(self) -> GridSpec:
        return self.states[0].grid

    def minus(self, other: "Trajectory") -> "Trajectory":
        if len(self) != len(other) or not np.array_equal(self.times, other.times):
            raise GridMismatchError("trajectories live on different time lattices")
        return replace(self, states=tuple(a.plus(b, -1.0) for a, b in zip(self.states, other.states)))

    def scaled(self, c: float) -> "Trajectory":
        return replace(self, states=tuple(s.scaled(c) for s in self.states))

    def subset(self, indices) -> "Trajectory":
        idx = list(indices)
        return replace(self, times=np.asarray(self.times)[idx], states=tuple(self.states[i] for i in idx))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(s.vhat)) and np.all(np.isfinite(s.vthat)) for s in self.states)
