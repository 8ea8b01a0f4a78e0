import math

import numpy as np
import pytest

from epdwave.errors import ConfigError, PropagatorDomainError
from epdwave.fields import GridSpec
from epdwave.mode_oracle import integrate_mode
from epdwave.propagator import (
    SMALL_XI,
    DampingParams,
    RadialCache,
    fujita_exponent,
    propagator_matrix,
    psi,
    psi_hankel,
    psi_tt,
    sample,
    strauss_exponent,
)
from epdwave.validation import determinant_scale, form_scale, mode_amplitude


@pytest.mark.parametrize(
    "kwargs",
    [
        {"mu": 2.0},
        {"mu": 3.0},
        {"mu": 1.5},
        {"mu": math.nan},
        {"mu": 2.5, "p_exponent": 2.0},
        {"mu": 2.5, "epsilon": -1e-3},
    ],
)
def test_damping_params_bounds(kwargs):
    with pytest.raises(ConfigError):
        DampingParams(**kwargs)


def test_exploratory_params_admit_low_powers():
    params = DampingParams.exploratory(2.5, 1.5)
    assert params.p_exponent == 1.5
    assert params.rho == pytest.approx(-0.75)
    with pytest.raises(ConfigError):
        DampingParams.exploratory(2.5, 1.0)


def test_critical_exponents():
    assert fujita_exponent(2) == 2.0
    assert strauss_exponent(2) == pytest.approx((3.0 + math.sqrt(17.0)) / 2.0)
    n = 4.5
    p = strauss_exponent(n)
    assert (n - 1.0) * p * p - (n + 1.0) * p - 2.0 == pytest.approx(0.0, abs=1e-12)


def test_zero_frequency_closed_forms(params_each_mu):
    mu = params_each_mu.mu
    t, tau = 7.0, 2.0
    r = tau / t
    assert psi(params_each_mu, 0, 0, t, tau, 0.0) == 1.0
    assert psi(params_each_mu, 1, 0, t, tau, 0.0) == 0.0
    assert psi(params_each_mu, 0, 1, t, tau, 0.0) == pytest.approx(tau * (1.0 - r ** (mu - 1.0)) / (mu - 1.0), rel=1e-14)
    assert psi(params_each_mu, 1, 1, t, tau, 0.0) == pytest.approx(r**mu, rel=1e-14)
    assert psi_tt(params_each_mu, 1, t, tau, 0.0) == pytest.approx(-(mu / t) * r**mu, rel=1e-14)


def test_coincidence_is_identity(params_each_mu):
    tau = 3.0
    xi = np.concatenate([[0.0, 1e-4, SMALL_XI], np.geomspace(1e-3, 100.0, 40)])
    s = propagator_matrix(params_each_mu, tau, tau, xi)
    row_scale = np.stack([np.ones_like(xi), np.maximum(xi, 1.0)], axis=-1)[..., None]
    assert np.max(np.abs(s - np.eye(2)) / row_scale) <= 1e-10
    assert np.allclose(psi_tt(params_each_mu, 0, tau, tau, xi), -(xi**2), rtol=1e-10, atol=1e-10)
    assert np.allclose(psi_tt(params_each_mu, 1, tau, tau, xi), -params_each_mu.mu / tau, rtol=1e-10)


def test_small_frequency_branch_is_continuous(params):
    t, tau = 12.0, 1.5
    for k, j in ((0, 0), (0, 1), (1, 0), (1, 1)):
        below = psi(params, k, j, t, tau, SMALL_XI * (1 - 1e-9))
        above = psi(params, k, j, t, tau, SMALL_XI * (1 + 1e-9))
        assert abs(below - above) <= 1e-9 * max(1.0, abs(above))
        near_zero = psi(params, k, j, t, tau, 1e-7)
        assert near_zero == pytest.approx(psi(params, k, j, t, tau, 0.0), rel=1e-8, abs=1e-10)


def test_second_derivative_satisfies_mode_equation(params_each_mu, rng):
    mu = params_each_mu.mu
    t = np.exp(rng.uniform(0.0, math.log(80.0), 200))
    tau = np.exp(rng.uniform(0.0, 1.0, 200) * np.log(t))
    xi = np.exp(rng.uniform(math.log(1e-3), math.log(30.0), 200))
    for j in (0, 1):
        lhs = psi_tt(params_each_mu, j, t, tau, xi)
        rhs = -(xi**2) * psi(params_each_mu, 0, j, t, tau, xi) - (mu / t) * psi(params_each_mu, 1, j, t, tau, xi)
        scale = (
            determinant_scale(params_each_mu, 2, j, t, tau, xi)
            + (1.0 + mu) / t * determinant_scale(params_each_mu, 1, j, t, tau, xi)
            + xi**2 * determinant_scale(params_each_mu, 0, j, t, tau, xi)
        )
        assert np.max(np.abs(lhs - rhs) / scale) <= 1e-8


def test_hankel_form_agrees_with_bessel_form(params_each_mu, rng):
    t = np.exp(rng.uniform(0.0, math.log(100.0), 300))
    tau = np.exp(rng.uniform(0.0, 1.0, 300) * np.log(t))
    xi = np.exp(rng.uniform(math.log(1e-2), math.log(50.0), 300))
    for k in (0, 1, 2):
        for j in (0, 1):
            h = psi_hankel(params_each_mu, k, j, t, tau, xi)
            ref = psi_tt(params_each_mu, j, t, tau, xi) if k == 2 else psi(params_each_mu, k, j, t, tau, xi)
            scale = np.maximum(np.abs(ref), form_scale(params_each_mu, k, j, t, tau, xi))
            assert np.max(np.abs(h.real - ref) / scale) <= 1e-8
            assert np.max(np.abs(h.imag) / scale) <= 1e-9


def test_semigroup_and_liouville(params_each_mu):
    mu = params_each_mu.mu
    xi = np.array([0.0, 5e-4, 0.1, 1.0, 3.7, 10.0, 40.0])
    two_step = np.einsum(
        "...ij,...jk->...ik", propagator_matrix(params_each_mu, 9.0, 3.0, xi), propagator_matrix(params_each_mu, 3.0, 1.2, xi)
    )
    one_step = propagator_matrix(params_each_mu, 9.0, 1.2, xi)
    env = np.max(np.abs(one_step), axis=(-2, -1), keepdims=True)
    assert np.max(np.abs(two_step - one_step) / env) <= 1e-7

    det = np.linalg.det(one_step)
    size = np.abs(one_step[:, 0, 0] * one_step[:, 1, 1]) + np.abs(one_step[:, 0, 1] * one_step[:, 1, 0])
    assert np.max(np.abs(det - (1.2 / 9.0) ** mu) / size) <= 1e-7


@pytest.mark.parametrize("xi", [0.0, 0.37, 2.0, 9.0])
def test_matches_runge_kutta_oracle(params_each_mu, xi):
    t, tau = 18.0, 1.7
    s = propagator_matrix(params_each_mu, t, tau, xi)
    for j, (y0, y0p) in enumerate(((1.0, 0.0), (0.0, 1.0))):
        ref = integrate_mode(params_each_mu, xi, tau, y0, y0p, t, 1e-10)
        amp = math.hypot(ref.state[0], ref.state[1] / max(xi, 1.0))
        assert abs(s[0, j] - ref.state[0]) <= 1e-6 * amp
        assert abs(s[1, j] - ref.state[1]) <= 1e-6 * amp * max(xi, 1.0)


def test_sample_bundles_all_multipliers(params):
    smp = sample(params, 5.0, 2.0, 1.3)
    assert smp.psi.shape == (2, 2)
    assert smp.psi[1, 1] == pytest.approx(psi(params, 1, 1, 5.0, 2.0, 1.3))
    assert smp.psi_tt[0] == pytest.approx(psi_tt(params, 0, 5.0, 2.0, 1.3))


@pytest.mark.parametrize("t, tau, xi", [(2.0, 0.5, 1.0), (1.5, 2.0, 1.0), (3.0, 2.0, -1.0), (math.inf, 2.0, 1.0)])
def test_domain_errors(params, t, tau, xi):
    with pytest.raises(PropagatorDomainError):
        psi(params, 0, 0, t, tau, xi)


def test_hankel_form_needs_positive_frequency(params):
    with pytest.raises(PropagatorDomainError):
        psi_hankel(params, 0, 1, 2.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        psi(params, 2, 0, 2.0, 1.0, 1.0)


def test_radial_cache_matches_direct_evaluation(params):
    grid = GridSpec(n=64, domain_half_width=8.0)
    cache = RadialCache(params, grid.kmag, max_entries=2)
    p00, p01, p10, p11 = cache.matrix(4.0, 1.5)
    direct = propagator_matrix(params, 4.0, 1.5, grid.kmag)
    assert np.allclose(p01, direct[..., 0, 1], rtol=1e-13, atol=0.0)
    assert np.allclose(p10, direct[..., 1, 0], rtol=1e-13, atol=0.0)

    psi1, dpsi1 = cache.velocity(4.0, 1.5)
    assert np.array_equal(psi1, p01)
    assert np.array_equal(dpsi1, p11)

    cache.matrix(4.0, 1.5)
    cache.matrix(5.0, 1.5)
    stats = cache.stats()
    assert stats["entries"] == 2
    assert stats["hits"] == 1
    assert stats["misses"] == 3


def test_second_derivative_matches_difference_of_first(params):
    # one difference of dPsi keeps rounding at ~1e-12 / h instead of 1e-12 / h^2
    rng = np.random.default_rng(11)
    t = rng.uniform(2.0, 30.0, 50)
    tau = rng.uniform(1.0, 1.5, 50)
    xi = rng.uniform(0.01, 5.0, 50)
    h = 1e-4
    for j in (0, 1):
        fd = (psi(params, 1, j, t + h, tau, xi) - psi(params, 1, j, t - h, tau, xi)) / (2 * h)
        got = psi_tt(params, j, t, tau, xi)
        scale = np.maximum(1.0, determinant_scale(params, 0, j, t, tau, xi)) * np.maximum(1.0, xi**2)
        assert np.max(np.abs(got - fd) / scale) <= 1e-5


def _oracle_gaps(params, t, tau, xi):
    s = propagator_matrix(params, t, tau, xi)
    gaps = []
    for j, (y0, y0p) in enumerate(((1.0, 0.0), (0.0, 1.0))):
        ref = integrate_mode(params, xi, tau, y0, y0p, t, 1e-11)
        amp = mode_amplitude(ref.state[0], ref.state[1], xi)
        gaps.append(np.max(np.abs(s[..., 0, j] - ref.state[0]) / amp))
        gaps.append(np.max(np.abs(s[..., 1, j] - ref.state[1]) / (amp * np.maximum(xi, 1.0))))
    return max(gaps)


def test_small_frequency_quadratic_matches_oracle(params_each_mu):
    xi = np.array([1e-5, 1e-4, 4e-4, 9e-4])
    assert np.all((xi > 0.0) & (xi < SMALL_XI))
    for t, tau in ((3.0, 1.5), (20.0, 1.0)):
        assert _oracle_gaps(params_each_mu, t, tau, xi) <= 5e-6


@pytest.mark.parametrize("t, tau, xi", [(100.0, 1.0, 0.5), (100.0, 90.0, 20.0), (100.0, 96.0, 50.0)])
def test_late_times_match_oracle(params, t, tau, xi):
    assert _oracle_gaps(params, t, tau, np.array([xi])) <= 1e-6
