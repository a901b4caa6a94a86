import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import gaussian
from fracthartree.dynamics import (PicardDivergence, Trajectory, duhamel_J, duhamel_trajectory,
                                   energy, evolve, free_flow, free_propagate, local_time_datum,
                                   local_time_probe, mass, picard_iterate, rescale,
                                   rescale_trajectory, scattering_extract)
from fracthartree.estimates import loglog_slope
from fracthartree.littlewood_paley import project_gt
from fracthartree.spectral import (ModelParams, RadialGrid, forward_transform, l2_norm)

P15 = ModelParams(alpha=1.5, sigma=1.0)


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="dt \\* rho_max")
        yield


def sup_l2(a, grid):
    return float(np.sqrt(np.max(np.abs(a) ** 2 @ grid.radial_weights)))


def test_free_propagate_identity_at_zero(grid):
    f = gaussian(grid)
    assert l2_norm(free_propagate(f, 0.0, P15) - f) < 1e-15


@given(st.floats(-50, 50), st.sampled_from([1.0, 1.25, 1.5, 2.0]))
def test_free_flow_unitary(t, alpha):
    g = RadialGrid(512, 32.0)
    f = g.field(lambda r: np.exp(-r**2 / 2) * (1 + r))
    assert l2_norm(free_propagate(f, t, alpha)) == pytest.approx(l2_norm(f), rel=1e-10)


def test_free_schrodinger_gaussian_closed_form(grid):
    # symbol e^{-it|xi|^2}: e^{-r^2/2} -> (1 + 2it)^{-3/2} exp(-r^2 / (2 (1 + 2it)))
    t = 1.3
    u = free_propagate(gaussian(grid), t, 2.0).values
    z = 1 + 2j * t
    exact = z**-1.5 * np.exp(-grid.r**2 / (2 * z))
    assert np.max(np.abs(u - exact)) < 1e-6


def test_free_flow_group_property(grid):
    f = gaussian(grid)
    a = free_propagate(free_propagate(f, 0.7, P15), 1.1, P15)
    assert l2_norm(a - free_propagate(f, 1.8, P15)) < 1e-12


def test_evolve_sigma_zero_is_free_flow(grid):
    p = ModelParams(alpha=1.5, sigma=0.0)
    f = gaussian(grid, norm=0.5)
    tr = evolve(f, 2.0, p, 0.05)
    ref = free_flow(f, tr.times, p)
    assert sup_l2(tr.values - ref.values, grid) < 1e-10


@pytest.mark.parametrize("sigma", [1.0, -1.0])
def test_mass_and_energy_conservation(grid, sigma):
    p = ModelParams(alpha=1.5, sigma=sigma)
    f = gaussian(grid, norm=0.5)
    tr = evolve(f, 10.0, p, 0.0125, save_every=100)
    assert np.max(np.abs(tr.mass - tr.mass[0])) / tr.mass[0] < 1e-8
    assert np.max(np.abs(tr.energy - tr.energy[0])) / abs(tr.energy[0]) < 1e-5


def test_energy_drift_is_second_order(grid):
    f = gaussian(grid, norm=0.5)
    drifts = []
    for dt in (0.1, 0.05, 0.025):
        tr = evolve(f, 5.0, P15, dt, save_every=1000)
        drifts.append(np.max(np.abs(tr.energy - tr.energy[0])))
    order = loglog_slope([0.1, 0.05, 0.025], drifts)
    assert 1.8 <= order <= 2.2


def test_gauge_covariance_sample_exact(grid):
    f = gaussian(grid, norm=0.4)
    c = np.exp(0.9j)
    a = evolve(f * c, 1.0, P15, 0.05).values
    b = c * evolve(f, 1.0, P15, 0.05).values
    assert np.max(np.abs(a - b)) < 1e-14


def test_energy_of_zero_and_kinetic_oracle(grid):
    assert energy(grid.zeros(), P15) == 0.0
    f = gaussian(grid)
    p0 = ModelParams(alpha=1.5, sigma=0.0)
    F = forward_transform(f).values
    kin = 0.5 * (grid.rho**1.5 * np.abs(F) ** 2) @ grid.spectral_weights
    # independent oracle: 0.5 (2 pi)^-3 int rho^1.5 (2 pi)^3 e^{-rho^2} 4 pi rho^2 drho
    from scipy import integrate
    quad = 0.5 * integrate.quad(lambda p: p**3.5 * np.exp(-p * p) * 4 * np.pi, 0, np.inf)[0]
    assert energy(f, p0) == pytest.approx(kin, rel=1e-12)
    assert energy(f, p0) == pytest.approx(quad, rel=1e-6)


def test_mass_is_squared_norm(grid):
    f = gaussian(grid)
    assert mass(f) == pytest.approx(l2_norm(f) ** 2, rel=1e-14)


def test_rescale_identity_and_mass(grid):
    f = gaussian(grid)
    assert l2_norm(rescale(f, 1.0) - f) < 1e-14
    assert mass(rescale(f, 2.0)) == pytest.approx(mass(f), rel=1e-6)
    assert mass(rescale(f, 0.5)) == pytest.approx(mass(f), rel=1e-6)


def test_rescale_commutes_with_free_flow():
    # the alpha = 1.5 flow has an algebraic tail; a 128 box keeps truncation below 1e-6
    g = RadialGrid(4096, 128.0)
    f = gaussian(g)
    lam, t = 2.0, 0.8
    a = rescale(free_propagate(f, t, P15), lam, P15)
    b = free_propagate(rescale(f, lam, P15), t / lam**1.5, P15)
    assert l2_norm(a - b) < 1e-6 * l2_norm(a)


def test_rescale_commutes_with_free_flow_alpha_two(grid):
    p = ModelParams(alpha=2.0)
    f = gaussian(grid)
    a = rescale(free_propagate(f, 0.8, p), 2.0, p)
    b = free_propagate(rescale(f, 2.0, p), 0.8 / 4, p)
    assert l2_norm(a - b) < 1e-12


def test_rescale_guards(small_grid):
    f = small_grid.field(lambda r: np.exp(-r**2 / 50))
    with pytest.raises(ValueError):
        rescale(f, 0.1)


def test_duhamel_zero_third_slot(grid):
    f = gaussian(grid, norm=0.3)
    u = free_flow(f, np.linspace(0, 1, 21), P15)
    z = u.with_values(np.zeros_like(u.values))
    assert l2_norm(duhamel_J(u, u, z, 1.0)) == 0.0


def test_duhamel_homogeneity(grid):
    f = gaussian(grid, norm=0.3)
    u = free_flow(f, np.linspace(0, 1, 21), P15)
    c = 0.7 * np.exp(0.4j)
    cu = u.with_values(c * u.values)
    w = 1.0
    lhs = duhamel_J(cu, cu, cu, 1.0, ref_width=w).values
    rhs = abs(c) ** 2 * c * duhamel_J(u, u, u, 1.0, ref_width=w).values
    assert np.max(np.abs(lhs - rhs)) < 1e-8 * np.max(np.abs(rhs))


def test_duhamel_step_refinement_second_order(grid):
    f = gaussian(grid, norm=0.3)
    vals = []
    for n in (10, 20, 160):
        u = free_flow(f, np.linspace(0, 1, n + 1), P15)
        vals.append(duhamel_J(u, u, u, 1.0, ref_width=1.0))
    e1, e2 = l2_norm(vals[0] - vals[2]), l2_norm(vals[1] - vals[2])
    assert 3.0 < e1 / e2 < 5.0


def test_duhamel_requires_mesh_from_zero(grid):
    f = gaussian(grid, norm=0.3)
    u = free_flow(f, np.linspace(0.5, 1, 6), P15)
    with pytest.raises(ValueError):
        duhamel_trajectory(u, u, u)


def test_picard_sigma_zero_converges_immediately(grid):
    p = ModelParams(alpha=1.5, sigma=0.0)
    res = picard_iterate(gaussian(grid, norm=0.05), 5.0, p, dt=0.05)
    assert res.converged and res.diffs[0] == 0.0


def test_picard_contraction_and_match(grid):
    f = gaussian(grid, norm=0.05)
    res = picard_iterate(f, 5.0, P15, k_max=6, dt=0.05)
    r = res.ratios[np.isfinite(res.ratios)]
    assert np.all(r < 0.5)
    tr = evolve(f, 5.0, P15, 0.05)
    assert sup_l2(res.limit.values - tr.values, grid) < 1e-9
    # fixed point satisfies the Duhamel equation
    J = duhamel_trajectory(res.limit, res.limit, res.limit, ref_width=1.0)
    free = free_flow(f, res.limit.times, P15)
    resid = res.limit.values - (free.values + 1j * J.values)
    assert sup_l2(resid, grid) < 1e-8


def test_picard_divergence_is_raised(grid):
    f = gaussian(grid, norm=30.0)
    with pytest.raises(PicardDivergence) as info:
        picard_iterate(f, 20.0, P15, k_max=6, n_steps=40)
    assert info.value.result is not None


def test_scattering_sigma_zero(grid):
    p = ModelParams(alpha=1.5, sigma=0.0)
    tr = evolve(gaussian(grid, norm=0.2), 4.0, p, 0.05)
    rec = scattering_extract(tr, [1.0, 2.0, 4.0])
    assert np.max(rec.distances) < 1e-10


def test_scattering_and_rescaled_run():
    g = RadialGrid(4096, 512.0)
    f = gaussian(g, norm=0.2)
    probes = [5.0, 10.0, 20.0, 40.0]
    tr = evolve(f, 40.0, P15, 0.02)
    d = scattering_extract(tr, probes).consecutive()
    assert np.all(np.diff(d) < 0)
    lam = 2.0
    idx = [tr.index_of(t) for t in probes]
    sub = Trajectory(tr.times[idx], tr.values[idx], g, P15, tr.dt)
    tr2 = rescale_trajectory(sub, lam)
    d2 = scattering_extract(tr2, [t / lam**1.5 for t in probes]).consecutive()
    assert np.all(np.diff(d2) < 0)
    np.testing.assert_allclose(d2, d, rtol=1e-6)


def test_trajectory_validation(grid):
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 0.0]), np.zeros((2, grid.n_points)), grid, P15, 0.1)
    tr = free_flow(gaussian(grid), np.linspace(0, 1, 5), P15)
    with pytest.raises(ValueError):
        tr.at(0.3)


def test_local_time_datum_membership(grid):
    r, lam = 2.0, 4.0
    phi = local_time_datum(grid, r, lam)
    assert l2_norm(phi) <= r
    assert l2_norm(project_gt(phi, lam)) <= 2.0**-10 / r


def test_local_time_sigma_zero_is_bracket_maximal(grid):
    p = ModelParams(alpha=1.5, sigma=0.0)
    res = local_time_probe(2.0, 4, p, grid=grid, bisections=4)
    assert res.bracket_maximal


def test_local_time_Lambda_slope(grid):
    Ls = [2, 4, 8, 16]
    T = [local_time_probe(2.0, L, P15, grid=grid, bisections=10).T_star for L in Ls]
    assert abs(loglog_slope(Ls, T) + 1.5) <= 0.2


def test_local_time_r_slope_follows_amplitude_scaling(grid):
    # for a fixed profile the Picard ratios depend on r^2 T only, so T* ~ r^-2
    rs = [1.0, 2.0, 4.0]
    T = [local_time_probe(r, 4, P15, grid=grid, bisections=10).T_star for r in rs]
    assert abs(loglog_slope(rs, T) + 2.0) <= 0.3


@pytest.mark.xfail(strict=True, reason="T* ~ r^-2 for fixed-profile data; see notes on the r^-4 "
                                       "worst-case bound")
def test_local_time_r_slope_worst_case_band(grid):
    rs = [1.0, 2.0, 4.0]
    T = [local_time_probe(r, 4, P15, grid=grid, bisections=10).T_star for r in rs]
    assert -5.0 <= loglog_slope(rs, T) <= -3.0
