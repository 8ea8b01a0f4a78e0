"""
propagator.py

Exact Fourier-multiplier solution operator for the per-mode damped oscillator

    v'' + |xi|^2 v + (mu/t) v' = 0,    v(tau) = a,  v'(tau) = b,
    v(t) = Psi0(t, tau, |xi|) a + Psi1(t, tau, |xi|) b.

With rho = -(mu-1)/2, z = t|xi|, s = tau|xi| and C = (pi/2) csc(rho pi):

    d^k/dt^k Psi_j = C |xi|^(1+k-j) t^rho tau^(1-rho)
                     [ J_{-(rho-1+j)}(s) J_{rho-k}(z) - (-1)^(1+k-j) J_{rho-1+j}(s) J_{-(rho-k)}(z) ]

for k in {0, 1}; the k = 2 expression carries an extra t^-1 d/dt Psi_j term.
The Hankel determinant form is kept as an independent verification path.

Special cases:
  - |xi| = 0         : closed form of v'' + (mu/t) v' = 0
  - 0 < |xi| < 1e-3  : quadratic in |xi|^2 through 0, 5e-4 and 1e-3

RadialCache evaluates a whole frequency grid per (t, tau) pair on the distinct
magnitudes only and scatters back.
"""

from __future__ import annotations

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, Tuple, Union

import numpy as np

from epdwave.errors import ConfigError, NonFiniteError, PropagatorDomainError
from epdwave.specfun import _bessel_j_core, hankel, sinpi

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

MU_RANGE: Tuple[float, float] = (2.0, 3.0)
ENDPOINT_TOL = 1e-12
SMALL_XI = 1e-3


# ---- Parameters
@dataclass(frozen=True)
class DampingParams:
    mu: float
    p_exponent: float = 2.5
    epsilon: float = 1e-3
    allow_subcritical: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        lo, hi = MU_RANGE
        if not math.isfinite(self.mu) or not (lo + ENDPOINT_TOL < self.mu < hi - ENDPOINT_TOL):
            raise ConfigError(f"mu must lie strictly inside ({lo:g}, {hi:g}); got {self.mu!r}")
        p_floor = 1.0 if self.allow_subcritical else 2.0
        if not math.isfinite(self.p_exponent) or self.p_exponent <= p_floor:
            raise ConfigError(f"p must be > {p_floor:g}; got {self.p_exponent!r}")
        if not math.isfinite(self.epsilon) or self.epsilon < 0.0:
            raise ConfigError(f"eps must be >= 0; got {self.epsilon!r}")

    @classmethod
    def exploratory(cls, mu: float, p_exponent: float, epsilon: float = 1e-3) -> "DampingParams":
        """Same as the constructor but admits 1 < p <= 2 (phase scans below the Fujita exponent)."""
        return cls(mu=mu, p_exponent=p_exponent, epsilon=epsilon, allow_subcritical=True)

    @property
    def rho(self) -> float:
        return -(self.mu - 1.0) / 2.0


def fujita_exponent(dim: float) -> float:
    return 1.0 + 2.0 / dim


def strauss_exponent(dim: float) -> float:
    """Positive root of (n-1)p^2 - (n+1)p - 2 = 0."""
    if dim <= 1.0:
        raise ValueError(f"Strauss exponent needs dimension > 1; got {dim!r}")
    return ((dim + 1.0) + math.sqrt(dim * dim + 10.0 * dim - 7.0)) / (2.0 * (dim - 1.0))


@dataclass(frozen=True)
class PropagatorSample:
    t: float
    tau: float
    ximag: float
    psi: np.ndarray      # psi[k][j] = d^k/dt^k Psi_j
    psi_tt: np.ndarray   # psi_tt[j] = d^2/dt^2 Psi_j


# ---- Evaluation kernels
def _zero_frequency(mu: float, k: int, j: int, t: np.ndarray, tau: np.ndarray) -> np.ndarray:
    if j == 0:
        return np.ones_like(t) if k == 0 else np.zeros_like(t)
    ratio = tau / t
    if k == 0:
        return tau * (1.0 - ratio ** (mu - 1.0)) / (mu - 1.0)
    if k == 1:
        return ratio**mu
    return -(mu / t) * ratio**mu


def _jform_main(rho: float, k: int, j: int, t: np.ndarray, tau: np.ndarray, xi: np.ndarray) -> np.ndarray:
    a = rho - 1.0 + j
    b = rho - k
    s = tau * xi
    z = t * xi
    ja_neg, _ = _bessel_j_core(-a, s)
    ja, _ = _bessel_j_core(a, s)
    jb, _ = _bessel_j_core(b, z)
    jb_neg, _ = _bessel_j_core(-b, z)
    sign = (-1.0) ** (1 + k - j)
    det = ja_neg * jb - sign * ja * jb_neg
    pref = (0.5 * np.pi / float(sinpi(rho))) * xi ** (1 + k - j) * t**rho * tau ** (1.0 - rho)
    return pref * det


def _jform(rho: float, k: int, j: int, t: np.ndarray, tau: np.ndarray, xi: np.ndarray) -> np.ndarray:
    out = _jform_main(rho, k, j, t, tau, xi)
    if k == 2:
        out = out + _jform_main(rho, 1, j, t, tau, xi) / t
    return out


def _quadratic_in_square(xi: np.ndarray, f0: np.ndarray, f1: np.ndarray, f2: np.ndarray, h: float) -> np.ndarray:
    # Lagrange through x = 0, h^2/4, h^2 with x = xi^2
    x = xi * xi
    x1, x2 = 0.25 * h * h, h * h
    l0 = (x - x1) * (x - x2) / (x1 * x2)
    l1 = x * (x - x2) / (x1 * (x1 - x2))
    l2 = x * (x - x1) / (x2 * (x2 - x1))
    return l0 * f0 + l1 * f1 + l2 * f2


def _check_domain(t: np.ndarray, tau: np.ndarray, xi: np.ndarray) -> None:
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(tau)) and np.all(np.isfinite(xi))):
        raise PropagatorDomainError("propagator got non-finite t, tau or |xi|")
    if np.any(tau < 1.0):
        raise PropagatorDomainError(f"tau must be >= 1; got {float(np.min(tau))!r}")
    bad = t < tau
    if np.any(bad):
        raise PropagatorDomainError(
            f"t must be >= tau; got t={float(t[bad].flat[0])!r} < tau={float(tau[bad].flat[0])!r}"
        )
    if np.any(xi < 0.0):
        raise PropagatorDomainError(f"|xi| must be >= 0; got {float(np.min(xi))!r}")


def _evaluate(params: DampingParams, k: int, j: int, t: ArrayLike, tau: ArrayLike, ximag: ArrayLike) -> np.ndarray:
    t, tau, xi = np.broadcast_arrays(
        np.asarray(t, dtype=float), np.asarray(tau, dtype=float), np.asarray(ximag, dtype=float)
    )
    _check_domain(t, tau, xi)
    shape = t.shape
    t, tau, xi = t.ravel(), tau.ravel(), xi.ravel()
    rho, mu = params.rho, params.mu

    out = np.empty(t.shape)
    zero = xi == 0.0
    small = (xi > 0.0) & (xi < SMALL_XI)
    regular = xi >= SMALL_XI

    if zero.any():
        out[zero] = _zero_frequency(mu, k, j, t[zero], tau[zero])
    if regular.any():
        out[regular] = _jform(rho, k, j, t[regular], tau[regular], xi[regular])
    if small.any():
        ts, taus = t[small], tau[small]
        f0 = _zero_frequency(mu, k, j, ts, taus)
        f1 = _jform(rho, k, j, ts, taus, np.full_like(ts, 0.5 * SMALL_XI))
        f2 = _jform(rho, k, j, ts, taus, np.full_like(ts, SMALL_XI))
        out[small] = _quadratic_in_square(xi[small], f0, f1, f2, SMALL_XI)

    if not np.all(np.isfinite(out)):
        raise NonFiniteError(f"non-finite multiplier d^{k}Psi{j} (mu={mu!r})")
    return out.reshape(shape)


def _out(value: np.ndarray):
    return float(value) if np.ndim(value) == 0 else value


def _check_index(name: str, value: int, allowed: Tuple[int, ...]) -> None:
    if value not in allowed:
        raise ValueError(f"{name} must be one of {allowed}; got {value!r}")


# ---- Public surface
def psi(params: DampingParams, k: int, j: int, t: ArrayLike, tau: ArrayLike, ximag: ArrayLike):
    """d^k/dt^k Psi_j(t, tau, |xi|) from the real Bessel-J form."""
    _check_index("k", k, (0, 1))
    _check_index("j", j, (0, 1))
    return _out(_evaluate(params, k, j, t, tau, ximag))


def psi_tt(params: DampingParams, j: int, t: ArrayLike, tau: ArrayLike, ximag: ArrayLike):
    _check_index("j", j, (0, 1))
    return _out(_evaluate(params, 2, j, t, tau, ximag))


def _hankel_main(rho: float, k: int, j: int, t: np.ndarray, tau: np.ndarray, xi: np.ndarray) -> np.ndarray:
    a = rho - 1.0 + j
    b = rho - k
    z = t * xi
    s = tau * xi
    det = hankel("plus", b, z) * hankel("minus", a, s) - hankel("minus", b, z) * hankel("plus", a, s)
    pref = (-1.0) ** j * (0.25j * np.pi) * xi ** (1 + k - j) * t**rho * tau ** (1.0 - rho)
    return pref * det


def psi_hankel(params: DampingParams, k: int, j: int, t: ArrayLike, tau: ArrayLike, ximag: ArrayLike):
    """
    Hankel determinant form of d^k/dt^k Psi_j; k = 2 gives the second derivative.
    Complex valued; the imaginary part is rounding noise.
    """
    _check_index("k", k, (0, 1, 2))
    _check_index("j", j, (0, 1))
    t, tau, xi = np.broadcast_arrays(
        np.asarray(t, dtype=float), np.asarray(tau, dtype=float), np.asarray(ximag, dtype=float)
    )
    _check_domain(t, tau, xi)
    if np.any(xi <= 0.0):
        raise PropagatorDomainError("Hankel form needs |xi| > 0")
    rho = params.rho
    value = _hankel_main(rho, k, j, t, tau, xi)
    if k == 2:
        value = value + _hankel_main(rho, 1, j, t, tau, xi) / t
    if not np.all(np.isfinite(value)):
        raise NonFiniteError(f"non-finite Hankel multiplier d^{k}Psi{j} (mu={params.mu!r})")
    return complex(value) if np.ndim(value) == 0 else value


def propagator_matrix(params: DampingParams, t: ArrayLike, tau: ArrayLike, ximag: ArrayLike) -> np.ndarray:
    """S(t, tau) = [[Psi0, Psi1], [dPsi0, dPsi1]]; shape (..., 2, 2) for array input."""
    rows = [[_evaluate(params, k, j, t, tau, ximag) for j in (0, 1)] for k in (0, 1)]
    return np.moveaxis(np.array(rows), (0, 1), (-2, -1))


def sample(params: DampingParams, t: float, tau: float, ximag: float) -> PropagatorSample:
    return PropagatorSample(
        t=float(t),
        tau=float(tau),
        ximag=float(ximag),
        psi=propagator_matrix(params, t, tau, ximag),
        psi_tt=np.array([psi_tt(params, 0, t, tau, ximag), psi_tt(params, 1, t, tau, ximag)]),
    )


# ---- Grid cache
class RadialCache:
    """
    Multipliers for one frequency grid, evaluated once per distinct |xi| and
    per (t, tau) pair, kept in a bounded LRU store.

    Fill it from a single thread; reads of returned arrays are safe anywhere.
    """

    def __init__(self, params: DampingParams, magnitudes: np.ndarray, max_entries: int = 2048, key: object = None):
        self.params = params
        self.key = key
        self.shape = magnitudes.shape
        self.shells, inverse = np.unique(np.asarray(magnitudes, dtype=float).ravel(), return_inverse=True)
        self.inverse = inverse.ravel()
        self.max_entries = max_entries
        self._store: "OrderedDict[Tuple[float, float, str], np.ndarray]" = OrderedDict()
        self.hits = 0
        self.misses = 0
        logger.info(f"RadialCache: {magnitudes.size} modes on {self.shells.size} shells (mu={params.mu})")

    def _shell_values(self, t: float, tau: float, which: str) -> np.ndarray:
        key = (float(t), float(tau), which)
        hit = self._store.get(key)
        if hit is not None:
            self.hits += 1
            self._store.move_to_end(key)
            return hit
        self.misses += 1
        if which == "matrix":
            pairs = [(0, 0), (0, 1), (1, 0), (1, 1)]
        else:
            pairs = [(0, 1), (1, 1)]
        values = np.stack([_evaluate(self.params, k, j, t, tau, self.shells) for k, j in pairs])
        self._store[key] = values
        if len(self._store) > self.max_entries:
            self._store.popitem(last=False)
        return values

    def _expand(self, shell_row: np.ndarray) -> np.ndarray:
        return shell_row[self.inverse].reshape(self.shape)

    def matrix(self, t: float, tau: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(Psi0, Psi1, dPsi0, dPsi1) on the full grid."""
        values = self._shell_values(t, tau, "matrix")
        return tuple(self._expand(row) for row in values)  # type: ignore[return-value]

    def velocity(self, t: float, tau: float) -> Tuple[np.ndarray, np.ndarray]:
        """(Psi1, dPsi1) on the full grid; the pair the Duhamel integral needs."""
        values = self._shell_values(t, tau, "velocity")
        return self._expand(values[0]), self._expand(values[1])

    def stats(self) -> Dict[str, int]:
        return {"entries": len(self._store), "hits": self.hits, "misses": self.misses}
