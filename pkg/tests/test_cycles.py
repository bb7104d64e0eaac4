import math

import numpy as np
import pytest
from scipy import stats

from bgklab.cycles import (
    estimate_survival,
    make_stream,
    sample_cycle,
    sample_wall_velocity,
    start_grid_worst_case,
    survival_profile,
    wall_speed_cdf,
)
from bgklab.errors import ConfigError
from bgklab.geometry import Domain


def test_wall_sampler_support_and_moments():
    rng = make_stream(7, 0)
    n = np.array([0.0, -1.0, 0.0])
    samples = np.array([sample_wall_velocity(rng, n) for _ in range(50_000)])
    speeds = samples @ n
    assert np.all(speeds > 0.0)
    # E[n.v] = sqrt(pi/2); tangential means vanish
    se = math.sqrt((4.0 - math.pi) / 2.0) / math.sqrt(speeds.size)
    assert abs(speeds.mean() - math.sqrt(math.pi / 2.0)) <= 3.0 * se
    tang = samples - speeds[:, None] * n
    assert np.max(np.abs(tang.mean(axis=0))) <= 3.0 / math.sqrt(speeds.size)


def test_wall_sampler_ks():
    rng = make_stream(11, 3)
    n = np.array([1.0, 0.0, 0.0])
    speeds = np.array([sample_wall_velocity(rng, n) @ n for _ in range(100_000)])
    assert stats.kstest(speeds, wall_speed_cdf).pvalue > 0.01


def test_sample_cycle_structure():
    dom = Domain.slab(1.0)
    rng = make_stream(1, 0)
    for i in range(2000):
        cyc = sample_cycle(dom, t0=4.0, x=0.37, v=np.array([0.8, 0.1, -0.2]),
                           k_max=6, rng=rng)
        assert not cyc.degenerate
        times = np.array(cyc.times)
        assert np.all(np.diff(times) < 0.0) or times.size <= 1
        if times.size:
            assert times[0] < 4.0
        for xk, vk in zip(cyc.positions, cyc.velocities):
            assert xk[0] in (0.0, 1.0)
            n1 = -1.0 if xk[0] == 0.0 else 1.0
            assert n1 * vk[0] > 0.0
        if cyc.survived:
            assert cyc.bounce_count == 6


def test_sample_cycle_immediate_timeout():
    dom = Domain.slab(1.0)
    rng = make_stream(2, 0)
    cyc = sample_cycle(dom, t0=0.1, x=0.5, v=np.array([1.0, 0.0, 0.0]),
                       k_max=3, rng=rng)
    assert not cyc.survived and cyc.bounce_count == 0
    # tangential start never exits: flagged degenerate
    cyc2 = sample_cycle(dom, t0=1.0, x=0.5, v=np.array([0.0, 1.0, 0.0]),
                        k_max=3, rng=rng)
    assert cyc2.degenerate


def test_survival_conventions_and_monotonicity():
    dom = Domain.slab(1.0)
    est0 = estimate_survival(dom, 10.0, 0, 2000, 5)
    assert est0.p_hat == 1.0 and est0.ci_halfwidth == 0.0
    prof = survival_profile(dom, 10.0, 15, 20_000, 5)
    assert np.all(np.diff(prof.p_hat) <= 0.0)
    assert prof.p_hat[0] == 1.0
    assert np.all((prof.p_hat >= 0.0) & (prof.p_hat <= 1.0))
    # one-bounce survival with a huge horizon is near certain
    big = estimate_survival(dom, 1e6, 1, 2000, 6)
    assert big.p_hat > 0.999


def test_survival_reproducible_and_consistent():
    dom = Domain.slab(1.0)
    a = estimate_survival(dom, 12.0, 7, 5000, 99)
    b = estimate_survival(dom, 12.0, 7, 5000, 99)
    assert a.p_hat == b.p_hat and a.ci_halfwidth == b.ci_halfwidth
    prof = survival_profile(dom, 12.0, 7, 5000, 99)
    assert a.p_hat == prof.p_hat[7]
    c = estimate_survival(dom, 12.0, 7, 5000, 100)
    assert c.p_hat != a.p_hat  # different stream, different estimate
    assert a.ci_halfwidth == pytest.approx(
        1.96 * math.sqrt(a.p_hat * (1 - a.p_hat) / 5000), rel=1e-12)


def test_survival_guards():
    dom = Domain.slab(1.0)
    with pytest.raises(ConfigError):
        estimate_survival(dom, 10.0, 3, 100, 0)
    with pytest.raises(ConfigError):
        survival_profile(dom, 10.0, 0, 2000, 0)


def test_superlinear_decay_in_t0():
    # for k = ceil(0.5 T0^{5/4}) the log-survival falls superlinearly in T0
    dom = Domain.slab(1.0)
    ps = []
    for t0 in (10.0, 20.0, 40.0):
        k = math.ceil(0.5 * t0**1.25)
        ps.append(estimate_survival(dom, t0, k, 30_000, 17).p_hat)
    assert ps[0] > ps[1] > ps[2] > 0.0


@pytest.mark.parametrize("dom", [Domain.disk(1.0), Domain.ball(1.0)])
def test_curved_domains_run(dom):
    prof = survival_profile(dom, 8.0, 6, 10_000, 3)
    assert np.all(np.diff(prof.p_hat) <= 0.0)
    assert 0.0 <= prof.p_hat[6] <= 1.0
    rng = make_stream(4, 1)
    start = np.zeros(dom.position_dim)
    cyc = sample_cycle(dom, 5.0, start, np.array([0.9, 0.2, 0.1]), 4, rng)
    for xk in cyc.positions:
        assert abs(np.linalg.norm(xk) - dom.size) <= 1e-10


def test_start_grid_worst_case():
    dom = Domain.slab(1.0)
    worst, where = start_grid_worst_case(dom, 10.0, 5, 4000, 21, n_starts=3)
    averaged = estimate_survival(dom, 10.0, 5, 4000, 21).p_hat
    assert worst >= averaged - 0.03
    assert where is not None
