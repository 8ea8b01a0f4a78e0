import logging
import math

import numpy as np
import pytest

from epdwave.errors import ConfigError, FitError, MissingForcingError
from epdwave.fields import CauchyData, GridSpec, SpectralState, Trajectory
from epdwave.norms import (
    DATA_TERMS,
    L2,
    ContractionParams,
    MixedNormSpec,
    data_norms,
    decay_fit,
    derivative_state,
    dz_norm,
    energy,
    energy_dissipation,
    ks_ratio,
    linf,
    mixed_norm,
    x_norm,
    z_apply,
    z_norm,
    zone_norms,
)


@pytest.fixture
def gaussian_grid():
    return GridSpec(n=128, domain_half_width=8.0)


def _gaussian(grid):
    x1, x2 = grid.coords
    return np.exp(-(x1**2 + x2**2))


def test_l2_mixed_norm_of_gaussian(gaussian_grid):
    # int exp(-2 r^2) over the plane is pi/2
    value = mixed_norm(_gaussian(gaussian_grid), gaussian_grid, L2)
    assert value == pytest.approx(math.sqrt(math.pi / 2.0), rel=5e-3)


def test_sup_mixed_norm_of_gaussian(gaussian_grid):
    spec = MixedNormSpec(p_radial=math.inf, q_angular=math.inf)
    assert mixed_norm(_gaussian(gaussian_grid), gaussian_grid, spec) == pytest.approx(1.0, rel=1e-9)


def test_mixed_norm_spec_bounds(small_grid):
    with pytest.raises(ConfigError):
        MixedNormSpec(p_radial=0.5)
    with pytest.raises(ConfigError):
        MixedNormSpec(n_theta=16)
    with pytest.raises(ConfigError):
        MixedNormSpec(n_r=10).radial_points(small_grid)
    assert L2.radial_points(small_grid) == 2 * small_grid.n


def test_contraction_params():
    c = ContractionParams(eps1=0.2)
    assert c.delta == pytest.approx(0.4 / 1.2)
    assert c.kappa == pytest.approx(0.8 / 1.2)
    assert 1.0 / (1.0 + c.eps1) == pytest.approx(0.5 + 1.0 / c.q_tilde)
    assert 0.5 == pytest.approx(1.0 / (2.0 + c.eps2) + 1.0 / c.q_bar)
    for bad in (0.0, 1.0, -0.3):
        with pytest.raises(ConfigError):
            ContractionParams(eps1=bad)


def test_default_eps1_is_admissible():
    p = 4.0
    c = ContractionParams.default_for(p)
    assert c.eps1 == pytest.approx(0.9 * ContractionParams.eps1_ceiling(p))
    assert c.admissible(p)


def test_default_eps1_fallback_warns(caplog):
    assert ContractionParams.eps1_ceiling(2.0) == 0.0
    with caplog.at_level(logging.WARNING, logger="epdwave.norms"):
        c = ContractionParams.default_for(2.0)
    assert c.eps1 == 0.05
    assert "falling back" in caplog.text


def test_zero_state_norms(small_grid):
    state = SpectralState.zeros(2.0, small_grid)
    assert z_norm(state, 1).value == 0.0
    assert dz_norm(state, 2.5) == 0.0
    assert energy(state) == 0.0
    assert linf(state) == 0.0
    assert ks_ratio(state, 2.5) == 0.0


def test_z_norm_orders(generic_data):
    state = generic_data.initial_state()
    z0 = z_norm(state, 0)
    z1 = z_norm(state, 1)
    assert z0.value == pytest.approx(z1.breakdown["identity"])
    assert set(z1.breakdown) == {"identity", "dt", "d1", "d2", "L0", "L1", "L2", "Omega12"}
    assert z1.value == pytest.approx(sum(z1.breakdown.values()))
    with pytest.raises(ValueError):
        z_norm(state, 2)


def test_rotation_field_vanishes_on_radial_data(gaussian_grid):
    g = _gaussian(gaussian_grid)
    state = SpectralState.from_physical(1.0, g, g, gaussian_grid)
    omega = z_apply(state, "Omega12")
    assert np.abs(omega).max() < 1e-9
    with pytest.raises(KeyError):
        z_apply(state, "L3")


def test_forced_state_needs_forcing_snapshot(small_grid, generic_data):
    state = generic_data.initial_state()
    forced = SpectralState(time=2.0, vhat=state.vhat, vthat=state.vthat, grid=small_grid, forced=True)
    with pytest.raises(MissingForcingError):
        derivative_state(forced, "t", 2.5)
    with pytest.raises(KeyError):
        derivative_state(state, "x", 2.5)


def test_second_time_derivative_from_equation(small_grid):
    x1, x2 = small_grid.coords
    k = 2 * np.pi / small_grid.L
    v = np.cos(k * x1)
    state = SpectralState.from_physical(2.0, v, np.zeros_like(v), small_grid)
    d = derivative_state(state, "t", 2.5)
    np.testing.assert_allclose(d.vhat, state.vthat)
    np.testing.assert_allclose(np.fft.ifft2(d.vthat).real, -(k**2) * v, atol=1e-10)


def test_zone_norms_split_parseval(generic_data):
    state = generic_data.initial_state()
    state = SpectralState(time=3.0, vhat=state.vhat, vthat=state.vthat, grid=state.grid)
    zones = zone_norms(state)
    grid = generic_data.grid
    total = float(np.sum(generic_data.u0**2)) * grid.cell_area
    assert sum(zones) == pytest.approx(total, rel=1e-10)
    assert all(z >= 0 for z in zones)


def test_energy_and_dissipation(generic_data):
    state = generic_data.initial_state()
    grid = generic_data.grid
    kinetic = 0.5 * float(np.sum(generic_data.u1**2)) * grid.cell_area
    assert energy(state) > kinetic
    assert energy_dissipation(state, 2.5) == pytest.approx(2.5 * 2 * kinetic, rel=1e-10)


def test_x_norm_is_weighted_sup(generic_data):
    state = generic_data.initial_state()
    cparams = ContractionParams(eps1=0.2)
    traj = Trajectory(times=np.array([1.0]), states=(state,), mu=2.5)
    expected = z_norm(state, 1).value + dz_norm(state, 2.5)
    assert x_norm(traj, cparams) == pytest.approx(expected)
    later = SpectralState(time=4.0, vhat=state.vhat, vthat=state.vthat, grid=state.grid)
    traj2 = Trajectory(times=np.array([1.0, 4.0]), states=(state, later), mu=2.5)
    assert x_norm(traj2, cparams) >= x_norm(traj, cparams)


def test_decay_fit_recovers_power_law():
    t = np.geomspace(1.0, 100.0, 30)
    fit = decay_fit(t, 3.0 * t ** -0.75)
    assert fit.exponent == pytest.approx(-0.75, abs=1e-10)
    assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-10)
    assert fit.rms_residual < 1e-10
    windowed = decay_fit(t, 3.0 * t ** -0.75, (10.0, 100.0))
    assert windowed.samples < 30


def test_decay_fit_errors():
    t = np.geomspace(1.0, 100.0, 30)
    with pytest.raises(FitError):
        decay_fit(t[:5], t[:5])
    with pytest.raises(FitError):
        decay_fit(t, np.zeros_like(t))
    with pytest.raises(FitError):
        decay_fit(t, t, (50.0, 60.0))


def test_data_norms_terms(small_grid):
    data = CauchyData.from_case(small_grid, "generic")
    norms = data_norms(data, 2.5, 2.5, 1e-3, ContractionParams(eps1=0.2))
    assert set(norms) == set(DATA_TERMS) | {"total"}
    assert norms["total"] == pytest.approx(sum(norms[k] for k in DATA_TERMS))
    assert all(norms[k] > 0 for k in DATA_TERMS)
    no_forcing = data_norms(data, 2.5, 2.5, 0.0, ContractionParams(eps1=0.2))
    assert no_forcing["u0_Z12"] == norms["u0_Z12"]


def test_l2_mixed_norm_of_disk_indicator():
    grid = GridSpec(n=256, domain_half_width=4.0)
    disk = (grid.radius() < 1.0).astype(float)
    assert mixed_norm(disk, grid, L2) == pytest.approx(math.sqrt(math.pi), rel=2e-2)


def test_z_norm_is_homogeneous(generic_data):
    state = generic_data.initial_state()
    assert z_norm(state.scaled(-3.0), 1).value == pytest.approx(3.0 * z_norm(state, 1).value, rel=1e-12)
    later = SpectralState(time=4.0, vhat=state.vhat, vthat=state.vthat, grid=state.grid)
    assert ks_ratio(later.scaled(5.0), 2.5) == pytest.approx(ks_ratio(later, 2.5), rel=1e-12)


def test_scaling_field_of_spatially_constant_state(small_grid):
    t = 2.5
    ones = np.ones((small_grid.n, small_grid.n))
    state = SpectralState.from_physical(t, t * ones, ones, small_grid)
    np.testing.assert_allclose(z_apply(state, "L0"), t, rtol=1e-12)


def test_intermediate_zone_empty_at_start(generic_data):
    _, middle, _ = zone_norms(generic_data.initial_state())
    assert middle == 0.0


def _random_gaussian_state(grid, rng):
    x1, x2 = grid.coords
    c1, c2 = rng.uniform(-1.5, 1.5, 2)
    v = rng.normal() * np.exp(-((x1 - c1) ** 2 + (x2 - c2) ** 2) / rng.uniform(0.5, 2.0))
    vt = rng.normal() * np.exp(-((x1 + c2) ** 2 + (x2 - c1) ** 2) / rng.uniform(0.5, 2.0))
    return SpectralState.from_physical(2.0, v, vt, grid)


def test_z_norm_triangle_inequality(gaussian_grid, rng):
    for _ in range(5):
        a = _random_gaussian_state(gaussian_grid, rng)
        b = _random_gaussian_state(gaussian_grid, rng)
        for s in (0, 1):
            total = z_norm(a.plus(b), s).value
            assert total <= z_norm(a, s).value + z_norm(b, s).value + 1e-10


def test_d1_field_matches_finite_difference(gaussian_grid):
    g = _gaussian(gaussian_grid)
    state = SpectralState.from_physical(1.0, g, np.zeros_like(g), gaussian_grid)
    h = gaussian_grid.dx
    # fourth-order central difference along x1 (axis 0)
    fd = (-np.roll(g, -2, axis=0) + 8.0 * np.roll(g, -1, axis=0) - 8.0 * np.roll(g, 1, axis=0) + np.roll(g, 2, axis=0)) / (12.0 * h)
    np.testing.assert_allclose(z_apply(state, "d1"), fd, atol=1e-3)
    x1, _ = gaussian_grid.coords
    np.testing.assert_allclose(z_apply(state, "d1"), -2.0 * x1 * g, atol=1e-10)


def test_ks_ratio_reuses_given_norms(generic_data):
    state = generic_data.initial_state()
    z = z_norm(state, 1).value
    dz = dz_norm(state, 2.5)
    assert ks_ratio(state, 2.5, z=z, dz=dz) == pytest.approx(ks_ratio(state, 2.5), rel=1e-14)
    assert ks_ratio(state, 2.5, z=2.0 * z, dz=2.0 * dz) == pytest.approx(0.5 * ks_ratio(state, 2.5), rel=1e-12)
