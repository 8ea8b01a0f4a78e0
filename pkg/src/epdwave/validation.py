#!/usr/bin/env python3
"""
validation.py

Numerical checks of the special functions and the propagator against closed
forms, identities and the Runge-Kutta oracle. Each check reports its worst
observed error next to the threshold it must stay under.

Returns (run_specfun_suite) a DataFrame with columns:
  ['check', 'worst_error', 'threshold', 'passed', 'samples']
"""

from __future__ import annotations

import logging
import math
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from epdwave.mode_oracle import integrate_bessel, integrate_mode
from epdwave.propagator import DampingParams, propagator_matrix, psi, psi_hankel, psi_tt
from epdwave.specfun import SWITCH_POINT, _bessel_j_core, bessel_j, bessel_j_prime, hankel, sinpi

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["check", "worst_error", "threshold", "passed", "samples"]
MU_SET = (2.1, 2.5, 2.9)

# crossovers between the small- and large-argument envelopes
LARGE_Z = 10.0
SMALL_Z = 0.5
ENVELOPE_SLACK = 0.1


# ---- Error scales
def determinant_scale(params: DampingParams, k: int, j: int, t, tau, ximag) -> np.ndarray:
    """Size of the two products in the J-form determinant times its prefactor; the natural error scale."""
    rho = params.rho
    t, tau, xi = (np.asarray(v, dtype=float) for v in (t, tau, ximag))
    a, b = rho - 1.0 + j, rho - k
    s, z = tau * xi, t * xi
    terms = np.abs(_bessel_j_core(-a, s)[0] * _bessel_j_core(b, z)[0]) + np.abs(
        _bessel_j_core(a, s)[0] * _bessel_j_core(-b, z)[0]
    )
    pref = abs(0.5 * math.pi / float(sinpi(rho))) * xi ** (1 + k - j) * t**rho * tau ** (1.0 - rho)
    return pref * terms


def _hankel_terms(params: DampingParams, k: int, j: int, t, tau, ximag) -> np.ndarray:
    rho = params.rho
    t, tau, xi = (np.asarray(v, dtype=float) for v in (t, tau, ximag))
    a, b = rho - 1.0 + j, rho - k
    s, z = tau * xi, t * xi
    terms = np.abs(hankel("plus", b, z) * hankel("minus", a, s)) + np.abs(hankel("minus", b, z) * hankel("plus", a, s))
    return 0.25 * math.pi * xi ** (1 + k - j) * t**rho * tau ** (1.0 - rho) * terms


def form_scale(params: DampingParams, k: int, j: int, t, tau, ximag) -> np.ndarray:
    """
    Larger of the J-form and Hankel-form term sizes for d^k Psi_j (k = 2 adds the
    k = 1 terms over t). The Hankel products cancel to far below their own size at
    small arguments, so agreement is only meaningful against this scale.
    """
    def both(kk: int) -> np.ndarray:
        return np.maximum(determinant_scale(params, kk, j, t, tau, ximag), _hankel_terms(params, kk, j, t, tau, ximag))

    scale = both(k)
    if k == 2:
        scale = scale + both(1) / np.asarray(t, dtype=float)
    return scale


def mode_amplitude(value, derivative, ximag) -> np.ndarray:
    """sqrt(v^2 + (v'/max(|xi|,1))^2): an oscillating mode's envelope, nonzero through zero crossings."""
    w = np.maximum(np.asarray(ximag, dtype=float), 1.0)
    return np.hypot(np.asarray(value, dtype=float), np.asarray(derivative, dtype=float) / w)


# ---- Special-function checks
def _noninteger_orders(rng: np.random.Generator, size: int, lo: float, hi: float, gap: float) -> np.ndarray:
    nu = rng.uniform(lo, hi, size)
    near = np.abs(nu - np.rint(nu)) < gap
    nu[near] += 2.0 * gap * np.where(nu[near] >= np.rint(nu[near]), 1.0, -1.0)
    return nu


def check_half_integer(rng: np.random.Generator, samples: int) -> float:
    z = np.concatenate([rng.uniform(0.1, 6.0, samples), rng.uniform(20.0, 100.0, samples)])
    amp = np.sqrt(2.0 / (np.pi * z))
    closed = {
        0.5: amp * np.sin(z),
        -0.5: amp * np.cos(z),
        1.5: amp * (np.sin(z) / z - np.cos(z)),
        -1.5: amp * (-np.cos(z) / z - np.sin(z)),
    }
    return max(float(np.max(np.abs(bessel_j(nu, z) - ref))) for nu, ref in closed.items())


def check_wronskian(rng: np.random.Generator, samples: int) -> float:
    nu = _noninteger_orders(rng, samples, -3.5, 3.5, 0.01)
    z = np.exp(rng.uniform(math.log(0.1), math.log(100.0), samples))
    w = bessel_j(nu, z) * bessel_j_prime(-nu, z) - bessel_j_prime(nu, z) * bessel_j(-nu, z)
    return float(np.max(np.abs(w + 2.0 * np.sin(nu * np.pi) / (np.pi * z))))


def check_bessel_ode(rng: np.random.Generator, samples: int) -> float:
    """Largest residual of z^2 y'' + z y' + (z^2 - nu^2) y divided by (1 + z^2)."""
    nu = rng.uniform(-2.9, 2.9, samples)
    z = np.exp(rng.uniform(math.log(0.1), math.log(100.0), samples))
    y = _bessel_j_core(nu, z)[0]
    jm1 = _bessel_j_core(nu - 1.0, z)[0]
    jm2 = _bessel_j_core(nu - 2.0, z)[0]
    yp = jm1 - (nu / z) * y
    ypp = (jm2 - ((nu - 1.0) / z) * jm1) - (nu / z) * yp + (nu / z**2) * y
    residual = z**2 * ypp + z * yp + (z**2 - nu**2) * y
    return float(np.max(np.abs(residual) / (1.0 + z**2)))


def check_hankel_identities(rng: np.random.Generator, samples: int) -> Tuple[float, float]:
    nu = _noninteger_orders(rng, samples, -3.5, 3.5, 0.05)
    z = np.exp(rng.uniform(math.log(0.1), math.log(100.0), samples))
    hp = hankel("plus", nu, z)
    hm = hankel("minus", nu, z)
    scale = 1.0 + np.abs(hp)
    conj_gap = float(np.max(np.abs(hm - np.conj(hp)) / scale))
    sum_gap = float(np.max(np.abs(hp + hm - 2.0 * bessel_j(nu, z)) / scale))
    return conj_gap, sum_gap


def check_regime_continuity(rng: np.random.Generator, samples: int) -> float:
    nu = rng.uniform(-4.0, 4.0, samples)
    below = bessel_j(nu, SWITCH_POINT - 1e-9)
    above = bessel_j(nu, SWITCH_POINT + 1e-9)
    return float(np.max(np.abs(above - below)))


def envelope_excess(values: Callable[[np.ndarray], np.ndarray], weight: Callable[[np.ndarray], np.ndarray],
                    fit_z: np.ndarray, check_z: np.ndarray) -> float:
    """Fit C = max |f| * weight on fit_z, then return max(|f| * weight / C) - 1 on check_z."""
    c = float(np.max(np.abs(values(fit_z)) * weight(fit_z)))
    if c == 0.0:
        return 0.0
    return float(np.max(np.abs(values(check_z)) * weight(check_z) / c) - 1.0)


def check_envelopes() -> float:
    """Large-z |f| <= C z^(-1/2) and small-z |J_nu| <= C z^nu, |H_nu| <= C z^(-|nu|) with one fitted C each."""
    worst = -math.inf
    fit_large = np.linspace(LARGE_Z, 200.0, 400)
    check_large = np.linspace(LARGE_Z, 1000.0, 4000)
    fit_small = np.geomspace(1e-3, SMALL_Z, 40)
    check_small = np.geomspace(1e-6, SMALL_Z, 400)
    for mu in MU_SET:
        rho = DampingParams(mu=mu).rho
        for nu in (rho, -rho, rho - 1.0, 1.0 - rho):
            worst = max(worst, envelope_excess(lambda z: bessel_j(nu, z), np.sqrt, fit_large, check_large))
            worst = max(worst, envelope_excess(lambda z: bessel_j(nu, z), lambda z: z ** (-nu), fit_small, check_small))
            for kind in ("plus", "minus"):
                worst = max(worst, envelope_excess(lambda z: hankel(kind, nu, z), np.sqrt, fit_large, check_large))
                worst = max(worst, envelope_excess(lambda z: hankel(kind, nu, z), lambda z: z ** abs(nu), fit_small, check_small))
    return max(worst, 0.0)


def check_rk_transport(rng: np.random.Generator, samples: int) -> float:
    """Carry (J_nu, J_nu') from z = 0.5 to z_end along the Bessel ODE; error relative to max(1, |J_nu(0.5)|)."""
    worst = 0.0
    cases = [(-0.5, math.pi), (-0.75, 20.0)]
    cases += [(float(nu), float(ze)) for nu, ze in zip(rng.uniform(-3.5, 3.5, min(samples, 6)), rng.uniform(2.0, 40.0, 6))]
    for nu, z_end in cases:
        start = bessel_j(nu, 0.5)
        res = integrate_bessel(nu, 0.5, start, bessel_j_prime(nu, 0.5), z_end, 1e-11)
        worst = max(worst, abs(res.state[0] - bessel_j(nu, z_end)) / max(1.0, abs(start)))
    return worst


# ---- Propagator checks
def check_coincidence(rng: np.random.Generator, samples: int) -> float:
    worst = 0.0
    xi = np.concatenate([[0.0, 1e-4, 1e-3], np.exp(rng.uniform(math.log(1e-3), math.log(100.0), samples))])
    for mu in MU_SET:
        params = DampingParams(mu=mu)
        tau = float(rng.uniform(1.0, 10.0))
        s = propagator_matrix(params, tau, tau, xi)
        # velocity row measured in units of |xi|
        row_scale = np.stack([np.ones_like(xi), np.maximum(xi, 1.0)], axis=-1)[..., None]
        worst = max(worst, float(np.max(np.abs(s - np.eye(2)) / row_scale)))
        worst = max(worst, float(np.max(np.abs(psi_tt(params, 0, tau, tau, xi) + xi**2) / (1.0 + xi**2))))
        worst = max(worst, float(np.max(np.abs(psi_tt(params, 1, tau, tau, xi) + mu / tau))))
    return worst


def _random_triples(rng: np.random.Generator, samples: int, t_max: float, xi_max: float):
    t = np.exp(rng.uniform(0.0, math.log(t_max), samples))
    tau = np.exp(rng.uniform(0.0, 1.0, samples) * np.log(t))
    xi = np.exp(rng.uniform(math.log(1e-3), math.log(xi_max), samples))
    return t, tau, xi


def check_form_agreement(rng: np.random.Generator, samples: int) -> Tuple[float, float]:
    """(worst real-part gap, worst imaginary part), both over form_scale."""
    worst_re = worst_im = 0.0
    for mu in MU_SET:
        params = DampingParams(mu=mu)
        t, tau, xi = _random_triples(rng, samples, 100.0, 50.0)
        for k in (0, 1, 2):
            for j in (0, 1):
                h = psi_hankel(params, k, j, t, tau, xi)
                jv = psi_tt(params, j, t, tau, xi) if k == 2 else psi(params, k, j, t, tau, xi)
                scale = np.maximum(form_scale(params, k, j, t, tau, xi), np.abs(jv))
                worst_re = max(worst_re, float(np.max(np.abs(h.real - jv) / scale)))
                worst_im = max(worst_im, float(np.max(np.abs(h.imag) / scale)))
    return worst_re, worst_im


def check_oracle(t_max: float = 20.0, xi_max: float = 10.0, tol: float = 1e-9) -> Tuple[float, int]:
    """Max error of all four multipliers against RK, relative to each column's mode envelope; also the sample count."""
    worst = 0.0
    count = 0
    xi = np.linspace(0.0, xi_max, 20)
    t_values = np.geomspace(1.0, t_max, 6)
    for mu in MU_SET:
        params = DampingParams(mu=mu)
        for tau in (1.0, float(np.sqrt(t_max))):
            for t in t_values[t_values >= tau]:
                count += 4 * xi.size
                s = propagator_matrix(params, t, tau, xi)
                for j, (y0, y0p) in enumerate(((1.0, 0.0), (0.0, 1.0))):
                    ref = integrate_mode(params, xi, float(tau), y0, y0p, float(t), tol)
                    amp = mode_amplitude(ref.state[0], ref.state[1], xi)
                    amp = np.maximum(amp, 1e-300)
                    gap_v = np.abs(s[:, 0, j] - ref.state[0]) / amp
                    gap_d = np.abs(s[:, 1, j] - ref.state[1]) / (amp * np.maximum(xi, 1.0))
                    worst = max(worst, float(np.max(gap_v)), float(np.max(gap_d)))
    return worst, count


def check_semigroup_liouville(rng: np.random.Generator, samples: int) -> Tuple[float, float]:
    semigroup = liouville = 0.0
    for mu in MU_SET:
        params = DampingParams(mu=mu)
        xi = np.concatenate([[0.0, 0.1, 1.0, 10.0], np.exp(rng.uniform(math.log(1e-3), math.log(50.0), samples))])
        two = np.einsum("...ij,...jk->...ik", propagator_matrix(params, 4.0, 2.0, xi), propagator_matrix(params, 2.0, 1.0, xi))
        one = propagator_matrix(params, 4.0, 1.0, xi)
        env = np.max(np.abs(one), axis=(-2, -1), keepdims=True)
        semigroup = max(semigroup, float(np.max(np.abs(two - one) / env)))
        t, tau, xr = _random_triples(rng, samples, 100.0, 50.0)
        m = propagator_matrix(params, t, tau, xr)
        det = np.linalg.det(m)
        # the two products cancel down to (tau/t)^mu; measure against their size
        size = np.abs(m[:, 0, 0] * m[:, 1, 1]) + np.abs(m[:, 0, 1] * m[:, 1, 0])
        liouville = max(liouville, float(np.max(np.abs(det - (tau / t) ** mu) / size)))
    return semigroup, liouville


# ---- Suite
DEFAULT_THRESHOLDS: Dict[str, float] = {
    "half_integer_closed_form": 1e-12,
    "wronskian": 1e-9,
    "bessel_ode_residual": 1e-8,
    "hankel_conjugate": 1e-12,
    "hankel_sum": 1e-12,
    "regime_continuity": 1e-9,
    "asymptotic_envelope": ENVELOPE_SLACK,
    "rk_transport": 1e-7,
    "propagator_coincidence": 1e-10,
    "propagator_form_agreement": 1e-8,
    "propagator_form_imaginary": 1e-9,
    "propagator_oracle": 1e-6,
    "propagator_semigroup": 1e-7,
    "propagator_liouville": 1e-7,
}


def run_specfun_suite(samples: int = 100, seed: int = 0, tol: Optional[float] = None, full: bool = False) -> pd.DataFrame:
    """
    Run every check; `tol` replaces all thresholds. `full` runs the oracle
    comparison over t <= 100, |xi| <= 50 instead of t <= 20, |xi| <= 10.
    """
    rng = np.random.default_rng(seed)
    results: List[Tuple[str, float, int]] = []

    results.append(("half_integer_closed_form", check_half_integer(rng, samples), 2 * samples))
    results.append(("wronskian", check_wronskian(rng, samples), samples))
    results.append(("bessel_ode_residual", check_bessel_ode(rng, samples), samples))
    conj_gap, sum_gap = check_hankel_identities(rng, samples)
    results.append(("hankel_conjugate", conj_gap, samples))
    results.append(("hankel_sum", sum_gap, samples))
    results.append(("regime_continuity", check_regime_continuity(rng, samples), samples))
    results.append(("asymptotic_envelope", check_envelopes(), len(MU_SET) * 4))
    results.append(("rk_transport", check_rk_transport(rng, samples), 2 + min(samples, 6)))
    results.append(("propagator_coincidence", check_coincidence(rng, samples), len(MU_SET) * (samples + 3)))
    re_gap, im_gap = check_form_agreement(rng, samples)
    results.append(("propagator_form_agreement", re_gap, len(MU_SET) * 6 * samples))
    results.append(("propagator_form_imaginary", im_gap, len(MU_SET) * 6 * samples))
    oracle, oracle_count = check_oracle(100.0, 50.0, tol=1e-11) if full else check_oracle()
    results.append(("propagator_oracle", oracle, oracle_count))
    semigroup, liouville = check_semigroup_liouville(rng, samples)
    results.append(("propagator_semigroup", semigroup, len(MU_SET) * (samples + 4)))
    results.append(("propagator_liouville", liouville, len(MU_SET) * samples))

    rows = []
    for name, worst, count in results:
        threshold = tol if tol is not None else DEFAULT_THRESHOLDS[name]
        rows.append(
            {"check": name, "worst_error": float(worst), "threshold": float(threshold),
             "passed": bool(worst <= threshold), "samples": int(count)}
        )
        logger.info(f"{name}: worst={worst:.3e} threshold={threshold:.1e}")
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


if __name__ == "__main__":
    report = run_specfun_suite(samples=20)
    print(report.to_string(index=False))
