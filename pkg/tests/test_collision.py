import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from bgklab.collision import (
    CollisionParams,
    bgk_rhs,
    collision_frequency,
    linearized_L,
    local_maxwellian,
    matched_maxwellian,
    project_P,
    relax_exact,
)
from bgklab.errors import DegenerateStateError
from bgklab.velocity import WeightParams, build_grid, integrate, moments


@pytest.fixture(scope="module")
def grid():
    return build_grid(24, 8.0, WeightParams(0.0, 0.1))


def _random_near_equilibrium(grid, rng, amp=5e-2):
    f = amp * rng.standard_normal(grid.n_nodes) * grid.sqrt_mu
    F = grid.mu + grid.sqrt_mu * f
    return np.maximum(F, 0.0)


def test_frequency_examples():
    assert collision_frequency(CollisionParams(0.0, 0.0), 3.0, 0.5) == 1.0
    assert collision_frequency(CollisionParams(2.0, -1.0), 1.0, 1.0) == 1.0
    assert collision_frequency(CollisionParams(1.0, 0.5), 4.0, 0.25) == pytest.approx(2.0)
    with pytest.raises(DegenerateStateError):
        collision_frequency(CollisionParams(), -1.0, 1.0)


def test_local_maxwellian_examples(grid):
    M = local_maxwellian(grid, 1.0, np.zeros(3), 1.0)
    assert np.max(np.abs(M - grid.mu) / grid.mu) <= 1e-15
    M2 = local_maxwellian(grid, 2.0, np.zeros(3), 1.0)
    assert np.allclose(M2, 2.0 * grid.mu, rtol=1e-15)
    rng = np.random.default_rng(0)
    for _ in range(5):
        rho = 1.0 + 0.05 * rng.standard_normal()
        U = 0.05 * rng.standard_normal(3)
        T = 1.0 + 0.05 * rng.standard_normal()
        r, u, t = moments(grid, local_maxwellian(grid, rho, U, T))
        assert abs(r - rho) <= 1e-7
        assert np.allclose(u, U, atol=1e-7)
        assert abs(t - T) <= 1e-7


def test_matched_maxwellian_moments_exact(grid):
    rho, U, T = 1.03, np.array([0.02, -0.01, 0.04]), 0.97
    M = matched_maxwellian(grid, rho, U, T)
    r, u, t = moments(grid, M)
    assert abs(r - rho) <= 1e-14
    assert np.allclose(u, U, atol=1e-14)
    assert abs(t - T) <= 1e-13


def test_bgk_rhs_collision_invariants(grid):
    rng = np.random.default_rng(2)
    params = CollisionParams(1.0, 0.5)
    worst = 0.0
    for _ in range(100):
        F = _random_near_equilibrium(grid, rng)
        rhs = bgk_rhs(params, grid, F)
        scale = float(np.max(np.abs(F)))
        for poly in (np.ones(grid.n_nodes), grid.vx, grid.vy, grid.vz, grid.vsq):
            worst = max(worst, abs(integrate(grid, rhs * poly)) / scale)
    assert worst <= 1e-8


def test_bgk_rhs_vanishes_at_equilibria(grid):
    params = CollisionParams()
    assert np.max(np.abs(bgk_rhs(params, grid, grid.mu))) <= 1e-12
    M = local_maxwellian(grid, 1.1, np.array([0.05, 0.0, -0.02]), 0.95)
    # a Maxwellian is mapped near zero: only the quadrature defect remains
    assert np.max(np.abs(bgk_rhs(params, grid, M))) <= 1e-9


def test_relax_exact_limits(grid):
    params = CollisionParams()
    rng = np.random.default_rng(3)
    F = _random_near_equilibrium(grid, rng)
    assert np.array_equal(relax_exact(params, grid, F, 0.0), F)
    far = relax_exact(params, grid, F, 50.0)
    from bgklab.collision import _discrete_moment_vector, moments_from_vector
    rho, U, T = moments_from_vector(_discrete_moment_vector(grid, F))
    M = matched_maxwellian(grid, rho, U, T)
    assert np.max(np.abs(far - M)) <= 1e-15 * np.max(M)


def test_relax_exact_conserves_and_preserves_positivity(grid):
    params = CollisionParams(1.0, 0.5)
    rng = np.random.default_rng(4)
    F = _random_near_equilibrium(grid, rng)
    m0 = [integrate(grid, F * p) for p in
          (np.ones(grid.n_nodes), grid.vx, grid.vy, grid.vz, grid.vsq)]
    out = relax_exact(params, grid, F, 0.7)
    m1 = [integrate(grid, out * p) for p in
          (np.ones(grid.n_nodes), grid.vx, grid.vy, grid.vz, grid.vsq)]
    assert np.allclose(m0, m1, rtol=0, atol=1e-12)
    assert out.min() >= 0.0


def test_relax_exact_vs_rk_oracle(grid):
    # independent high-order time integration of dF/dt = nu (M - F) with nu
    # and M frozen by moment invariance
    params = CollisionParams(1.0, 0.5)
    rng = np.random.default_rng(5)
    F = _random_near_equilibrium(grid, rng)
    rho, U, T = moments(grid, F)
    nu = collision_frequency(params, rho, T)
    M = matched_maxwellian(grid, rho, U, T)
    sol = solve_ivp(lambda t, y: nu * (M - y), (0.0, 0.9), F,
                    rtol=1e-11, atol=1e-14, method="RK45")
    ours = relax_exact(params, grid, F, 0.9)
    assert np.max(np.abs(ours - sol.y[:, -1])) <= 1e-8 * np.max(np.abs(F))


def test_relaxation_rate_is_nu(grid):
    # fitting log ||F(t) - M|| over a pure relaxation run recovers nu
    params = CollisionParams(1.0, 0.5)
    rng = np.random.default_rng(6)
    F = _random_near_equilibrium(grid, rng)
    rho, U, T = moments(grid, F)
    nu = collision_frequency(params, rho, T)
    M = matched_maxwellian(grid, rho, U, T)
    ts = np.linspace(0.0, 2.0, 21)
    norms = []
    for t in ts:
        norms.append(np.max(np.abs(relax_exact(params, grid, F, t) - M)))
    slope = np.polyfit(ts, np.log(norms), 1)[0]
    assert abs(-slope - nu) <= 5e-3 * nu


def test_projection_examples(grid):
    Pf, coef = project_P(grid, grid.chi[2])
    assert abs(coef[2] - 1.0) <= 1e-8
    assert np.max(np.abs(coef[[0, 1, 3, 4]])) <= 1e-8
    odd = grid.vx * grid.vy * grid.sqrt_mu
    Podd, _ = project_P(grid, odd)
    assert np.max(np.abs(Podd)) <= 1e-10


def test_projection_idempotent_and_orthogonal(grid):
    rng = np.random.default_rng(7)
    f = rng.standard_normal(grid.n_nodes) * grid.sqrt_mu
    Pf, coef = project_P(grid, f)
    PPf, coef2 = project_P(grid, Pf)
    assert np.max(np.abs(PPf - Pf)) <= 1e-12 * max(1.0, np.max(np.abs(Pf)))
    resid = f - Pf
    assert np.max(np.abs(grid.coefficients(resid))) <= 1e-10


def test_linearized_L(grid):
    rng = np.random.default_rng(8)
    span = rng.standard_normal(5) @ grid.chi
    assert np.max(np.abs(linearized_L(grid, span))) <= 1e-12
    f = rng.standard_normal(grid.n_nodes) * grid.sqrt_mu
    Lf = linearized_L(grid, f)
    LLf = linearized_L(grid, Lf)
    assert np.max(np.abs(LLf - Lf)) <= 1e-12
    # dissipativity of the microscopic part: <Lf, f> = ||Lf||^2 >= 0
    lhs = grid.inner(Lf, f)
    rhs = grid.inner(Lf, Lf)
    assert lhs >= 0.0
    assert abs(lhs - rhs) <= 1e-10 * max(rhs, 1.0)
