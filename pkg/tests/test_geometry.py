import numpy as np
import pytest

from bgklab.errors import ConfigError, DomainError
from bgklab.geometry import (
    Domain,
    backward_exit,
    backward_exit_batch,
    contains,
    outward_normal,
    outward_normal_batch,
)


def test_contains_examples():
    slab = Domain.slab(1.0)
    assert contains(slab, 0.5)
    assert not contains(slab, 1.0)
    assert not contains(slab, -0.1)
    ball = Domain.ball(1.0)
    assert not contains(ball, [0.0, 0.0, 2.0])
    assert contains(ball, [0.1, 0.2, -0.3])


def test_bad_domain():
    with pytest.raises(ConfigError):
        Domain("cube", 1.0)
    with pytest.raises(ConfigError):
        Domain.slab(0.0)


def test_outward_normals():
    slab = Domain.slab(1.0)
    assert np.allclose(outward_normal(slab, 0.0), [-1.0, 0.0, 0.0])
    assert np.allclose(outward_normal(slab, 1.0), [1.0, 0.0, 0.0])
    with pytest.raises(DomainError):
        outward_normal(slab, 0.5)
    ball = Domain.ball(1.0)
    assert np.allclose(outward_normal(ball, [0.0, 0.0, 1.0]), [0.0, 0.0, 1.0])
    disk = Domain.disk(2.0)
    n = outward_normal(disk, [0.0, 2.0])
    assert np.allclose(n, [0.0, 1.0, 0.0])
    assert abs(np.linalg.norm(n) - 1.0) < 1e-14


def test_backward_exit_examples():
    slab = Domain.slab(1.0)
    tb, xb = backward_exit(slab, 0.5, [1.0, 0.0, 0.0])
    assert tb == pytest.approx(0.5)
    assert xb[0] == 0.0
    assert backward_exit(slab, 0.5, [0.0, 1.0, 0.0]) is None
    disk = Domain.disk(1.0)
    tb, xb = backward_exit(disk, [0.0, 0.0], [2.0, 0.0, 0.3])
    assert tb == pytest.approx(0.5)
    assert np.allclose(xb, [-1.0, 0.0])


def test_boundary_start_exits_immediately_only_outward():
    ball = Domain.ball(1.0)
    # n.v < 0 at x=(1,0,0) means v points inward; backward ray exits at once
    tb, xb = backward_exit(ball, [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0])
    assert tb == 0.0
    # n.v > 0: backward ray travels inward first, crossing the ball
    tb, xb = backward_exit(ball, [1.0, 0.0, 0.0], [1.0, 0.0, 0.0])
    assert tb == pytest.approx(2.0)
    assert np.allclose(xb, [-1.0, 0.0, 0.0])


@pytest.mark.parametrize("domain", [Domain.slab(1.3), Domain.disk(0.9), Domain.ball(1.1)])
def test_backward_exit_properties(domain):
    rng = np.random.default_rng(11)
    n_trials = 10_000
    dim = domain.position_dim
    if domain.kind == "slab":
        X = rng.uniform(0.0, domain.size, size=(n_trials, 1))
    else:
        X = rng.uniform(-domain.size, domain.size, size=(n_trials, dim))
        inside = np.sum(X * X, axis=1) < (0.99 * domain.size) ** 2
        X = X[inside]
    V = rng.standard_normal((X.shape[0], 3))
    tb, XB = backward_exit_batch(domain, X, V)
    ok = np.isfinite(tb)
    assert ok.mean() > 0.99
    X, V, tb, XB = X[ok], V[ok], tb[ok], XB[ok]
    # boundary equation satisfied to 1e-10
    if domain.kind == "slab":
        bdry_err = np.minimum(np.abs(XB[:, 0]), np.abs(XB[:, 0] - domain.size))
    else:
        bdry_err = np.abs(np.sqrt(np.sum(XB * XB, axis=1)) - domain.size)
    assert np.max(bdry_err) <= 1e-10
    # interior at tb/2, exterior just past tb
    mid = X - 0.5 * tb[:, None] * V[:, :dim]
    past = X - tb[:, None] * (1.0 + 1e-6) * V[:, :dim]
    if domain.kind == "slab":
        assert np.all((mid[:, 0] > 0) & (mid[:, 0] < domain.size))
        assert np.all((past[:, 0] <= 0) | (past[:, 0] >= domain.size))
    else:
        assert np.all(np.sum(mid * mid, axis=1) < domain.size**2)
        assert np.all(np.sum(past * past, axis=1) >= domain.size**2 * (1 - 1e-12))
    # interior point lies on the inward side of the exit normal
    normals = outward_normal_batch(domain, XB)
    gap = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        dxv = np.zeros(3)
        dxv[:dim] = X[i] - XB[i]
        gap[i] = float(normals[i] @ dxv)
    assert np.max(gap) <= 1e-12


def test_disk_stable_root_no_cancellation():
    # grazing-ish ray with q < 0 exercises the rationalized root branch
    disk = Domain.disk(1.0)
    x = np.array([0.999999, 0.0])
    v = np.array([-1e3, 1e-3, 0.0])
    tb, xb = backward_exit(disk, x, v)
    assert tb > 0.0
    assert abs(np.linalg.norm(xb) - 1.0) <= 1e-12
