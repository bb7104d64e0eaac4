import math

import numpy as np
import pytest

from bgklab.boundary import (
    apply_reflection,
    build_wall,
    coercivity_identity,
    diffuse_reflect,
    diffuse_reflect_perturbation,
    net_flux,
    pgamma_perturbation,
)
from bgklab.errors import ConfigError, NumericsError
from bgklab.velocity import WeightParams, build_grid

SQRT_TWO_PI = math.sqrt(2.0 * math.pi)


@pytest.fixture(scope="module")
def grid():
    return build_grid(24, 7.0, WeightParams(0.0, 0.1))


@pytest.fixture(scope="module")
def wall(grid):
    return build_wall(grid, np.array([1.0, 0.0, 0.0]))


def test_partition(grid, wall):
    assert wall.out_idx.size == wall.in_idx.size
    assert wall.out_idx.size + wall.in_idx.size == grid.n_nodes
    assert np.all(wall.nv[wall.out_idx] > 0)
    assert np.all(wall.nv[wall.in_idx] < 0)


def test_grazing_nodes_excluded():
    # a tilted normal can place lattice nodes exactly on n.v = 0
    g = build_grid(8, 6.0, WeightParams(2.0, 0.0))
    n = np.array([1.0, -1.0, 0.0]) / math.sqrt(2.0)
    w = build_wall(g, n)
    assert w.out_idx.size + w.in_idx.size < g.n_nodes
    grazing = np.setdiff1d(np.arange(g.n_nodes),
                           np.concatenate([w.out_idx, w.in_idx]))
    assert np.max(np.abs(w.nv[grazing])) <= 1e-14


def test_bad_normal(grid):
    with pytest.raises(ConfigError):
        build_wall(grid, np.array([1.0, 1.0, 0.0]))


def test_normalization_exact(grid, wall):
    half = np.dot(grid.q[wall.in_idx] * grid.mu[wall.in_idx],
                  -wall.nv[wall.in_idx])
    assert wall.cmu_tilde * half == 1.0
    # discrete constant approaches sqrt(2 pi) at second order in the spacing
    errs = []
    for n_v in (16, 32, 64):
        g = build_grid(n_v, 7.0, WeightParams(0.0, 0.1))
        w = build_wall(g, np.array([1.0, 0.0, 0.0]))
        errs.append(abs(w.cmu_tilde - SQRT_TWO_PI))
    assert errs[1] < errs[0] and errs[2] < errs[1]
    rate = math.log2(errs[1] / errs[2])
    assert 1.7 <= rate <= 2.3


def test_wall_equilibrium_fixed_points(grid, wall):
    reflected = apply_reflection(wall, grid.mu)
    assert np.max(np.abs(reflected - grid.mu) / grid.mu) <= 1e-14
    f_in = diffuse_reflect_perturbation(wall, grid.sqrt_mu)
    assert np.max(np.abs(f_in - grid.sqrt_mu[wall.in_idx])
                  / grid.sqrt_mu[wall.in_idx]) <= 1e-14


def test_zero_input_zero_output(grid, wall):
    assert np.max(np.abs(diffuse_reflect(wall, np.zeros(grid.n_nodes)))) == 0.0


def test_zero_mass_flux_and_positivity(grid, wall):
    rng = np.random.default_rng(0)
    for _ in range(20):
        F = np.abs(rng.standard_normal(grid.n_nodes)) * grid.mu
        out = apply_reflection(wall, F)
        assert out.min() >= 0.0
        assert abs(net_flux(wall, out)) <= 1e-14 * np.max(np.abs(F))


def test_perturbation_consistency(grid, wall):
    # reflecting F = mu + sqrt(mu) f must agree with the perturbation form
    rng = np.random.default_rng(1)
    f = rng.standard_normal(grid.n_nodes) * grid.sqrt_mu
    F = grid.mu + grid.sqrt_mu * f
    F_in = diffuse_reflect(wall, F)
    f_in = diffuse_reflect_perturbation(wall, f)
    F_in_from_pert = grid.mu[wall.in_idx] + grid.sqrt_mu[wall.in_idx] * f_in
    assert np.max(np.abs(F_in - F_in_from_pert)) <= 1e-12 * np.max(np.abs(F))


def test_perturbation_flux_cancellation(grid, wall):
    # odd-in-v1 perturbations carry zero flux into the wall integral
    f_odd = grid.vx * grid.sqrt_mu
    z = wall.cmu_tilde * float(
        np.dot(wall.flux_weight_out * grid.sqrt_mu, f_odd))
    direct = wall.cmu_tilde * float(
        np.dot(grid.q[wall.out_idx] * wall.nv[wall.out_idx]
               * grid.sqrt_mu[wall.out_idx], f_odd[wall.out_idx]))
    assert z == pytest.approx(direct, rel=1e-12)
    # and an even-in-v1 shape reproduces the half-space moment it should
    f_even = grid.sqrt_mu
    z_even = wall.cmu_tilde * float(
        np.dot(wall.flux_weight_out * grid.sqrt_mu, f_even))
    assert z_even == pytest.approx(1.0, abs=1e-14)


def test_coercivity_identity(grid, wall):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        f = rng.standard_normal(grid.n_nodes) * grid.sqrt_mu
        f[wall.in_idx] = pgamma_perturbation(wall, f)[wall.in_idx]
        lhs, rhs, gap = coercivity_identity(wall, f)
        assert rhs >= 0.0
        worst = max(worst, gap / (1.0 + abs(rhs)))
    assert worst <= 1e-10


def test_coercivity_special_cases(grid, wall):
    lhs, rhs, gap = coercivity_identity(wall, grid.sqrt_mu)
    assert abs(lhs) <= 1e-14 and abs(rhs) <= 1e-14 and gap <= 1e-14
    lhs, rhs, gap = coercivity_identity(wall, np.zeros(grid.n_nodes))
    assert lhs == rhs == gap == 0.0


def test_coercivity_rejects_bc_violation(grid, wall):
    rng = np.random.default_rng(3)
    f = rng.standard_normal(grid.n_nodes) * grid.sqrt_mu
    with pytest.raises(NumericsError):
        coercivity_identity(wall, f)
