"""
specfun.py

Bessel functions of the first kind J_nu and Hankel functions H_nu^(+/-) for
real order nu in [-4, 4] and positive real argument z in [1e-8, 1e6].

Regimes:
  - z <= 15 : power series with compensated (Neumaier) summation
  - z >  15 : Hankel large-argument expansion, 12 terms

All functions broadcast over numpy arrays of (order, z), return a float for
scalar input and keep no state between calls.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Literal, Tuple, Union

import numpy as np

from epdwave.errors import OrderTooCloseToIntegerError, SpecfunDomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]
HankelKind = Literal["plus", "minus"]

ORDER_BAND: Tuple[float, float] = (-4.0, 4.0)
ARGUMENT_BAND: Tuple[float, float] = (1e-8, 1e6)
SWITCH_POINT = 15.0
SERIES_TERMS = 64
ASYMPTOTIC_TERMS = 12
INTEGER_GUARD = 1e-6
DEFAULT_TOLERANCE = 1e-9

_EPS = float(np.finfo(float).eps)

# ---- Gamma (Lanczos g=7, 9 coefficients)
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class BesselEval:
    order: float
    argument: float
    value: float
    abs_error_estimate: float


@dataclass(frozen=True)
class HankelEval:
    kind: HankelKind
    order: float
    argument: float
    value: complex


def sinpi(x: ArrayLike) -> np.ndarray:
    """sin(pi*x) with exact zeros at integers (argument reduced before scaling by pi)."""
    x = np.asarray(x, dtype=float)
    n = np.rint(x)
    sign = np.where(np.mod(n, 2.0) == 0.0, 1.0, -1.0)
    return sign * np.sin(np.pi * (x - n))


def cospi(x: ArrayLike) -> np.ndarray:
    return sinpi(np.asarray(x, dtype=float) + 0.5)


def _lanczos(x: np.ndarray) -> np.ndarray:
    # valid for x >= 0.5
    x = x - 1.0
    acc = np.full_like(x, _LANCZOS_COEF[0])
    for i, c in enumerate(_LANCZOS_COEF[1:], start=1):
        acc = acc + c / (x + i)
    t = x + _LANCZOS_G + 0.5
    return _SQRT_2PI * np.power(t, x + 0.5) * np.exp(-t) * acc


def gamma(x: ArrayLike) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    low = x < 0.5
    out[~low] = _lanczos(x[~low])
    xl = x[low]
    with np.errstate(divide="ignore"):
        out[low] = np.pi / (sinpi(xl) * _lanczos(1.0 - xl))
    return out


def rgamma(x: ArrayLike) -> np.ndarray:
    """1/Gamma(x); exactly zero at the poles 0, -1, -2, ..."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    low = x < 0.5
    out[~low] = 1.0 / _lanczos(x[~low])
    xl = x[low]
    out[low] = sinpi(xl) * _lanczos(1.0 - xl) / np.pi
    return out


# ---- Regimes
def _series(order: np.ndarray, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    half = 0.5 * z
    step = -(half * half)
    term = np.power(half, order) * rgamma(order + 1.0)
    total = term.copy()
    comp = np.zeros_like(total)
    weight = 2.0 * np.abs(term)
    for k in range(1, SERIES_TERMS):
        term = term * step / (k * (order + k))
        s = total + term
        comp += np.where(np.abs(total) >= np.abs(term), (total - s) + term, (term - s) + total)
        total = s
        # rounding in term k grows with the number of recurrence steps
        weight += (k + 2.0) * np.abs(term)
    return total + comp, _EPS * weight


def _asymptotic(order: np.ndarray, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    mu4 = 4.0 * order * order
    inv_z = 1.0 / z
    coef = np.ones_like(z)
    p_sum = np.ones_like(z)
    q_sum = np.zeros_like(z)
    for k in range(1, ASYMPTOTIC_TERMS):
        coef = coef * (mu4 - (2 * k - 1) ** 2) * inv_z / (8.0 * k)
        if k % 2 == 0:
            p_sum += (-1.0) ** (k // 2) * coef
        else:
            q_sum += (-1.0) ** ((k - 1) // 2) * coef
    k = ASYMPTOTIC_TERMS
    tail = np.abs(coef * (mu4 - (2 * k - 1) ** 2) * inv_z / (8.0 * k))
    omega = z - (0.5 * order + 0.25) * np.pi
    amp = np.sqrt(2.0 / (np.pi * z))
    value = amp * (p_sum * np.cos(omega) - q_sum * np.sin(omega))
    err = amp * (tail + _EPS * (z + np.abs(p_sum) + np.abs(q_sum)))
    return value, err


def _bessel_j_core(order: ArrayLike, z: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """Unchecked J_order(z) and its absolute error estimate, in the broadcast shape."""
    order = np.asarray(order, dtype=float)
    z = np.asarray(z, dtype=float)
    shape = np.broadcast(order, z).shape
    o = np.broadcast_to(order, shape).ravel()
    zz = np.broadcast_to(z, shape).ravel()

    value = np.empty(o.shape)
    err = np.empty(o.shape)

    series = zz <= SWITCH_POINT
    if series.any():
        os_ = o[series]
        negative_integer = (os_ < 0.0) & (os_ == np.rint(os_))
        # J_{-n} = (-1)^n J_n
        effective = np.where(negative_integer, -os_, os_)
        v, e = _series(effective, zz[series])
        sign = np.where(negative_integer & (np.mod(np.rint(os_), 2.0) != 0.0), -1.0, 1.0)
        value[series] = sign * v
        err[series] = e
    if (~series).any():
        v, e = _asymptotic(o[~series], zz[~series])
        value[~series] = v
        err[~series] = e
    return value.reshape(shape), err.reshape(shape)


def _validate(order: np.ndarray, z: np.ndarray) -> None:
    if not (np.all(np.isfinite(order)) and np.all(np.isfinite(z))):
        raise SpecfunDomainError("Bessel evaluation got a non-finite order or argument")
    if np.any(z <= 0.0):
        raise SpecfunDomainError(f"Bessel argument must be positive; got {float(np.min(z))!r}")
    lo, hi = ARGUMENT_BAND
    if np.any(z < lo) or np.any(z > hi):
        raise SpecfunDomainError(
            f"Bessel argument outside supported band [{lo:g}, {hi:g}]: "
            f"min={float(np.min(z))!r}, max={float(np.max(z))!r}"
        )
    lo, hi = ORDER_BAND
    if np.any(order < lo) or np.any(order > hi):
        raise SpecfunDomainError(
            f"Bessel order outside supported band [{lo:g}, {hi:g}]: "
            f"min={float(np.min(order))!r}, max={float(np.max(order))!r}"
        )


def _out(value: np.ndarray):
    return float(value) if np.ndim(value) == 0 else value


# ---- Public surface
def bessel_j(order: ArrayLike, z: ArrayLike):
    order = np.asarray(order, dtype=float)
    z = np.asarray(z, dtype=float)
    _validate(order, z)
    value, _ = _bessel_j_core(order, z)
    return _out(value)


def bessel_j_eval(order: float, z: float) -> BesselEval:
    _validate(np.asarray(order, dtype=float), np.asarray(z, dtype=float))
    value, err = _bessel_j_core(order, z)
    return BesselEval(order=float(order), argument=float(z), value=float(value), abs_error_estimate=float(err))


def bessel_j_prime(order: ArrayLike, z: ArrayLike):
    """J'_nu(z) = J_{nu-1}(z) - (nu/z) J_nu(z)."""
    order = np.asarray(order, dtype=float)
    z = np.asarray(z, dtype=float)
    _validate(order, z)
    lower, _ = _bessel_j_core(order - 1.0, z)
    same, _ = _bessel_j_core(order, z)
    return _out(lower - (order / z) * same)


def hankel(kind: HankelKind, order: ArrayLike, z: ArrayLike):
    """
    H^+_nu = i csc(nu pi) (e^{-i nu pi} J_nu - J_{-nu})
    H^-_nu = i csc(nu pi) (J_{-nu} - e^{i nu pi} J_nu)
    """
    if kind not in ("plus", "minus"):
        raise ValueError(f"hankel kind must be 'plus' or 'minus'; got {kind!r}")
    order = np.asarray(order, dtype=float)
    z = np.asarray(z, dtype=float)
    _validate(order, z)
    gap = np.abs(order - np.rint(order))
    if np.any(gap < INTEGER_GUARD):
        raise OrderTooCloseToIntegerError(
            f"Hankel order within {INTEGER_GUARD:g} of an integer (min gap {float(np.min(gap)):.3e})"
        )
    j_pos, _ = _bessel_j_core(order, z)
    j_neg, _ = _bessel_j_core(-order, z)
    csc = 1.0 / sinpi(order)
    c, s = cospi(order), sinpi(order)
    if kind == "plus":
        value = 1j * csc * ((c - 1j * s) * j_pos - j_neg)
    else:
        value = 1j * csc * (j_neg - (c + 1j * s) * j_pos)
    return complex(value) if np.ndim(value) == 0 else value


def hankel_eval(kind: HankelKind, order: float, z: float) -> HankelEval:
    return HankelEval(kind=kind, order=float(order), argument=float(z), value=complex(hankel(kind, order, z)))


if __name__ == "__main__":
    # quick look: python -m epdwave.specfun
    for nu, x in [(-0.5, math.pi), (0.5, math.pi), (-0.75, 1.0), (-0.75, 50.0)]:
        ev = bessel_j_eval(nu, x)
        print(f"J_{nu}({x:.6g}) = {ev.value:.17g}  (err ~ {ev.abs_error_estimate:.1e})")
