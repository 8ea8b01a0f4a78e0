import logging
import math

import numpy as np
import pytest

from epdwave.errors import GridMismatchError, PropagatorDomainError, QuadratureError
from epdwave.fields import CauchyData, GridSpec, SpectralState, Trajectory, dealiased_power_hat, time_lattice
from epdwave.mode_oracle import integrate_mode
from epdwave.norms import ContractionParams, dz_norm
from epdwave.propagator import DampingParams
from epdwave.solver import (
    LatticeIterate,
    QuadSpec,
    SampledForcing,
    apply_nonlinearity,
    contraction_ratio,
    duhamel,
    duhamel_with_estimate,
    linear_evolve,
    linear_iterate,
    linear_trajectory,
    make_cache,
    picard_map,
    solve_semilinear,
)


def test_evolve_to_same_time_is_identity(params, generic_data):
    state = generic_data.initial_state()
    same = linear_evolve(state, 1.0, params)
    np.testing.assert_array_equal(same.vhat, state.vhat)
    assert same.vhat is not state.vhat


def test_evolve_composes(params, generic_data):
    cache = make_cache(params, generic_data.grid)
    state = generic_data.initial_state()
    direct = linear_evolve(state, 3.0, params, cache)
    stepped = linear_evolve(linear_evolve(state, 1.7, params, cache), 3.0, params, cache)
    scale = np.abs(state.vhat).max() + np.abs(state.vthat).max()
    np.testing.assert_allclose(stepped.vhat, direct.vhat, atol=1e-8 * scale)
    np.testing.assert_allclose(stepped.vthat, direct.vthat, atol=1e-8 * scale)


def test_evolve_refuses_to_go_back(params, generic_data):
    state = linear_evolve(generic_data.initial_state(), 2.0, params)
    with pytest.raises(PropagatorDomainError):
        linear_evolve(state, 1.5, params)


def test_cache_must_match_grid_and_mu(params, generic_data):
    other = make_cache(params, GridSpec(n=64, domain_half_width=20.0))
    with pytest.raises(GridMismatchError):
        linear_evolve(generic_data.initial_state(), 2.0, params, other)
    wrong_mu = make_cache(DampingParams(mu=2.1), generic_data.grid)
    with pytest.raises(GridMismatchError):
        linear_evolve(generic_data.initial_state(), 2.0, params, wrong_mu)


def test_mean_mode_follows_zero_frequency_solution(params, generic_data):
    times = time_lattice(3.0, 6)
    traj = linear_trajectory(generic_data, params, times)
    u0_hat = np.fft.fft2(generic_data.u0)[0, 0].real
    u1_hat = np.fft.fft2(generic_data.u1)[0, 0].real
    mu = params.mu
    for t, st in zip(times, traj.states):
        psi1 = (1.0 - t ** (1.0 - mu)) / (mu - 1.0)
        want = params.epsilon * (u0_hat + psi1 * u1_hat)
        assert st.vhat[0, 0].real == pytest.approx(want, rel=1e-9)
        assert st.vthat[0, 0].real == pytest.approx(params.epsilon * u1_hat * t ** (-mu), rel=1e-9)


def test_duhamel_of_constant_forcing(params, small_grid):
    c = 0.3
    mu = params.mu
    t = 3.0
    n = small_grid.n

    def forcing(tau):
        return np.full((n, n), c)

    res = duhamel_with_estimate(forcing, t, QuadSpec(tol=1e-8), small_grid, params)
    value = np.fft.ifft2(res.state.vhat).real
    deriv = np.fft.ifft2(res.state.vthat).real
    want = c / (mu - 1.0) * ((t * t - 1.0) / 2.0 - (t * t - t ** (1.0 - mu)) / (mu + 1.0))
    want_dt = c / (mu - 1.0) * (t - (2.0 * t + (mu - 1.0) * t ** (-mu)) / (mu + 1.0))
    np.testing.assert_allclose(value, want, rtol=1e-7)
    np.testing.assert_allclose(deriv, want_dt, rtol=1e-7)
    assert res.error_estimate <= 1e-8
    assert len(res.history) >= 1


def test_duhamel_at_start_time_is_zero(params, small_grid):
    state = duhamel(lambda tau: np.ones((64, 64)), 1.0, QuadSpec(), small_grid, params)
    assert not state.vhat.any()
    with pytest.raises(PropagatorDomainError):
        duhamel(lambda tau: np.ones((64, 64)), 0.5, QuadSpec(), small_grid, params)


def test_strict_quadrature_raises(params, small_grid):
    x1, _ = small_grid.coords

    def forcing(tau):
        return np.cos(3.0 * x1 * tau)

    with pytest.raises(QuadratureError) as info:
        duhamel(forcing, 3.0, QuadSpec(tol=1e-14, max_levels=1, strict=True), small_grid, params)
    assert len(info.value.history) == 1


def test_lenient_quadrature_keeps_last_level(params, small_grid):
    x1, _ = small_grid.coords
    res = duhamel_with_estimate(
        lambda tau: np.cos(3.0 * x1 * tau), 3.0, QuadSpec(tol=1e-14, max_levels=1, strict=False), small_grid, params
    )
    assert res.error_estimate > 1e-14
    assert np.all(np.isfinite(res.state.vhat))


def test_sampled_forcing_needs_lattice_time(params, small_grid):
    times = time_lattice(3.0, 5)
    spectra = tuple(np.zeros((64, 64), complex) for _ in times)
    with pytest.raises(ValueError):
        duhamel(SampledForcing(times=times, spectra=spectra), 2.0, QuadSpec(), small_grid, params)


def test_quad_spec_bounds():
    with pytest.raises(ValueError):
        QuadSpec(nodes=4)
    with pytest.raises(ValueError):
        QuadSpec(tol=0.0)


def test_nonlinearity():
    u = np.full((64, 64), -2.0)
    np.testing.assert_allclose(apply_nonlinearity(u, 2.5), 2.0**2.5, rtol=1e-12)
    assert not apply_nonlinearity(np.zeros((64, 64)), 3.0).any()
    with pytest.raises(ValueError):
        apply_nonlinearity(u, 0.0)


def test_picard_map_states_carry_forcing(params, generic_data):
    times = time_lattice(3.0, 6)
    linear = linear_trajectory(generic_data, params, times)
    mapped = picard_map(linear, generic_data, params)
    assert len(mapped) == len(times)
    assert all(st.forced and st.forcing_hat is not None for st in mapped.states)
    assert math.isfinite(dz_norm(mapped.states[-1], params.mu))


def test_picard_map_rejects_other_grid(params, generic_data):
    other = GridSpec(n=64, domain_half_width=12.0)
    st = SpectralState.zeros(1.0, other)
    traj = Trajectory(times=np.array([1.0]), states=(st,), mu=params.mu)
    with pytest.raises(GridMismatchError):
        picard_map(traj, generic_data, params)


def test_zero_data_converges_at_once(generic_data):
    params = DampingParams(mu=2.5, p_exponent=2.5, epsilon=0.0)
    traj, report = solve_semilinear(generic_data, params, 3.0, 1e-9, 5, samples=8)
    assert report.converged
    assert report.iterations == 1
    assert report.diff_xnorms == [0.0]
    assert all(not st.vhat.any() for st in traj.states)


def test_small_data_contracts(params, generic_data):
    seen = []
    traj, report = solve_semilinear(
        generic_data, params, 3.0, 1e-9, 10, samples=12,
        on_iteration=lambda k, d, ratio, xnorm: seen.append(k),
    )
    assert report.converged
    assert seen == list(range(1, report.iterations + 1))
    assert math.isnan(report.max_ratio) or report.max_ratio <= 0.5
    assert len(traj) == 12
    assert report.final_xnorm > 0
    assert report.residual <= 1e-6


def test_large_data_diverges(generic_data):
    params = DampingParams(mu=2.5, p_exponent=2.5, epsilon=10.0)
    _, report = solve_semilinear(generic_data, params, 3.0, 1e-9, 10, samples=8)
    assert report.status == "diverged"
    assert report.message


def test_solver_arguments(params, generic_data):
    with pytest.raises(ValueError):
        solve_semilinear(generic_data, params, 3.0, 1e-9, 0)


def test_contraction_ratio_of_identical_trajectories(params, generic_data):
    times = time_lattice(3.0, 6)
    u = linear_trajectory(generic_data, params, times)
    assert math.isnan(contraction_ratio(u, u, generic_data, params, ContractionParams(eps1=0.2)))


def test_contraction_ratio_small_for_small_data(params, generic_data):
    times = time_lattice(3.0, 6)
    u = linear_trajectory(generic_data, params, times)
    ratio = contraction_ratio(u, u.scaled(0.5), generic_data, params, ContractionParams(eps1=0.2))
    assert 0.0 < ratio < 0.5


def _single_mode(grid, m):
    x1, _ = grid.coords
    return np.cos(math.pi * m * x1 / grid.L)


def test_single_mode_matches_mode_oracle(params, small_grid):
    m = 3
    xi = math.pi * m / small_grid.L
    phi = _single_mode(small_grid, m)
    state = SpectralState.from_physical(1.0, 0.7 * phi, -0.2 * phi, small_grid)
    out = linear_evolve(state, 3.0, params)
    ref = integrate_mode(params, xi, 1.0, 0.7, -0.2, 3.0, 1e-11)
    got = out.displacement()
    np.testing.assert_allclose(got, ref.state[0] * phi, atol=1e-8)


def test_forced_single_mode_matches_mode_oracle(params, small_grid):
    m = 2
    xi = math.pi * m / small_grid.L
    phi = _single_mode(small_grid, m)
    res = duhamel_with_estimate(lambda tau: phi, 3.0, QuadSpec(tol=1e-9), small_grid, params)
    ref = integrate_mode(params, xi, 1.0, 0.0, 0.0, 3.0, 1e-11, forcing=lambda t: 1.0)
    np.testing.assert_allclose(res.state.displacement(), ref.state[0] * phi, atol=1e-7)
    np.testing.assert_allclose(np.fft.ifft2(res.state.vthat).real, ref.state[1] * phi, atol=1e-7)


def test_nonlinear_part_is_homogeneous(params, generic_data):
    times = time_lattice(3.0, 6)
    u = linear_trajectory(generic_data, params, times)
    linear = linear_trajectory(generic_data, params, times)
    base = picard_map(u, generic_data, params, linear=linear).minus(linear)
    lam = 2.0
    scaled = picard_map(u.scaled(lam), generic_data, params, linear=linear).minus(linear)
    factor = lam**params.p_exponent
    for a, b in zip(base.states, scaled.states):
        np.testing.assert_allclose(b.vhat, factor * a.vhat, rtol=1e-9, atol=1e-9 * factor * np.abs(a.vhat).max() + 1e-300)


def _conj_reflect(a):
    # a(-k) on the FFT index layout
    return np.conj(np.roll(np.flip(a), 1, axis=(0, 1)))


def test_real_fields_keep_hermitian_spectra(params, generic_data, small_grid):
    state = linear_evolve(generic_data.initial_state(), 2.5, params)
    forced = duhamel(lambda tau: tau * generic_data.u0, 2.0, QuadSpec(strict=False), small_grid, params)
    power = dealiased_power_hat(state.displacement(), params.p_exponent)
    for a in (state.vhat, state.vthat, forced.vhat, forced.vthat, power):
        assert np.max(np.abs(a - _conj_reflect(a))) <= 1e-12 * np.max(np.abs(a))


def test_finite_propagation_speed(params):
    grid = GridSpec(n=256, domain_half_width=8.0)
    data = CauchyData.from_case(grid, "generic")
    cache = make_cache(params, grid)
    start = data.initial_state()
    r = grid.radius()
    for t in (2.0, 3.0, 4.0):
        u = linear_evolve(start, t, params, cache).displacement()
        outside = r > t + 3.0 * grid.dx
        assert np.sum(u[outside] ** 2) <= 1e-6 * np.sum(u**2)


def test_sampled_constant_forcing_matches_closed_form(params, small_grid):
    c = 0.3
    mu = params.mu
    n = small_grid.n
    times = time_lattice(3.0, 41)
    spectrum = np.zeros((n, n), dtype=complex)
    spectrum[0, 0] = c * n * n
    forcing = SampledForcing(times=times, spectra=tuple(spectrum for _ in times))
    for m, rtol in ((40, 1e-7), (39, 1e-6)):
        t = float(times[m])
        res = duhamel_with_estimate(forcing, t, QuadSpec(strict=False), small_grid, params)
        want = c / (mu - 1.0) * ((t * t - 1.0) / 2.0 - (t * t - t ** (1.0 - mu)) / (mu + 1.0))
        want_dt = c / (mu - 1.0) * (t - (2.0 * t + (mu - 1.0) * t ** (-mu)) / (mu + 1.0))
        np.testing.assert_allclose(res.state.displacement(), want, rtol=rtol)
        np.testing.assert_allclose(np.fft.ifft2(res.state.vthat).real, want_dt, rtol=rtol)
        assert res.error_estimate <= 1e-7


def test_two_node_lattice_has_no_estimate(params, small_grid):
    times = time_lattice(3.0, 2)
    forcing = SampledForcing(times=times, spectra=tuple(np.ones((64, 64), complex) for _ in times))
    res = duhamel_with_estimate(forcing, 3.0, QuadSpec(strict=False), small_grid, params)
    assert math.isnan(res.error_estimate)
    assert np.all(np.isfinite(res.state.vhat))
    with pytest.raises(QuadratureError):
        duhamel(forcing, 3.0, QuadSpec(), small_grid, params)


def test_refined_lattice_tightens_duhamel(params):
    # |u_lin|^p at the nonlinear run's final time and lattice
    grid = GridSpec.for_final_time(128, 20.0)
    data = CauchyData.from_case(grid, "generic")
    times = time_lattice(20.0, 40)
    cache = make_cache(params, grid, max_entries=8192)
    quad = QuadSpec(strict=False)
    results = {}
    for r in (1, 4, 8):
        it = linear_iterate(data, params, times, r, cache)
        results[r] = duhamel_with_estimate(it.forcing, 20.0, quad, grid, params, cache)
        del it
    ref = results[8].state.vhat
    err = {r: np.linalg.norm(results[r].state.vhat - ref) / np.linalg.norm(ref) for r in (1, 4)}
    assert err[1] > 1e-5
    assert results[1].error_estimate > 1e-5
    assert err[4] < err[1] / 20.0
    assert results[4].error_estimate < results[1].error_estimate


def test_coarse_lattice_warns(params, generic_data, caplog):
    times = time_lattice(3.0, 6)
    linear = linear_trajectory(generic_data, params, times)
    with caplog.at_level(logging.WARNING, logger="epdwave.solver"):
        picard_map(linear, generic_data, params)
    warned = [r for r in caplog.records if r.name == "epdwave.solver" and r.levelno == logging.WARNING]
    assert any("lattice quadrature estimate" in r.getMessage() for r in warned)
    with pytest.raises(QuadratureError):
        picard_map(linear, generic_data, params, quad=QuadSpec())


def test_solver_reports_quadrature(params, generic_data, caplog):
    with caplog.at_level(logging.WARNING, logger="epdwave.solver"):
        traj, report = solve_semilinear(generic_data, params, 3.0, 1e-9, 10, samples=12)
    assert report.refine in (4, 8)
    assert math.isfinite(report.quadrature_estimate) and report.quadrature_estimate > 0.0
    assert report.iterate.stride == report.refine
    assert len(report.iterate.forcing.times) == 11 * report.refine + 1
    np.testing.assert_array_equal(report.iterate.traj.times, traj.times)
    if report.quadrature_estimate > QuadSpec().tol:
        assert any("quadrature estimate" in r.getMessage() for r in caplog.records if r.name == "epdwave.solver")


def test_lattice_iterate(params, generic_data):
    times = time_lattice(3.0, 5)
    it = linear_iterate(generic_data, params, times, 2)
    assert it.stride == 2
    assert len(it.forcing.times) == 9
    np.testing.assert_array_equal(it.traj.times, times)
    half = it.scaled(-0.5)
    factor = 0.5**params.p_exponent
    for a, b in zip(it.forcing.spectra, half.forcing.spectra):
        np.testing.assert_allclose(b, factor * a, rtol=1e-14, atol=0.0)
    np.testing.assert_allclose(half.traj.states[-1].vhat, -0.5 * it.traj.states[-1].vhat, rtol=1e-14, atol=0.0)
    with pytest.raises(GridMismatchError):
        LatticeIterate(traj=it.traj, forcing=it.forcing, stride=3, p_exponent=params.p_exponent)
    plain = linear_trajectory(generic_data, params, times)
    with pytest.raises(GridMismatchError):
        contraction_ratio(it, plain, generic_data, params, ContractionParams(eps1=0.2))
