"""Monte Carlo sampler of backward stochastic cycles off diffuse walls.

A cycle starts at (t0, x, v), follows the backward free-streaming ray to its
first wall hit, and at every hit resamples an outgoing velocity from the wall
probability measure

    d sigma = c_mu mu(v) (n.v) dv   on {n.v > 0},

i.e. standard normal tangential components and wall-normal speed with density
s exp(-s^2/2), inverted exactly as s = sqrt(-2 log(1-u)).  The cycle either
reaches time zero within k bounces or survives them all; the survival
probability P(t_k > 0) is what the estimators report.

Randomness is counter-based: one Philox generator keyed by the base seed
produces a single uniform block with a fixed per-sample width, so sample i
owns the contiguous counter range [i*width, (i+1)*width) and estimates are
bit-reproducible regardless of how the work is scheduled.  The per-sample
column layout is fixed for every domain kind (3 position draws, 3 initial
velocity draws, then 3 per bounce); unused columns still occupy their slots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import ConfigError
from .geometry import Domain, backward_exit, backward_exit_batch, outward_normal_batch

SQRT_HALF_PI = math.sqrt(0.5 * math.pi)
_CLIP = 1e-16


def wall_speed_cdf(s):
    """CDF of the wall-normal speed under d sigma: 1 - exp(-s^2/2)."""
    s = np.asarray(s, dtype=float)
    return 1.0 - np.exp(-0.5 * s * s)


def make_stream(base_seed: int, sample_index: int) -> np.random.Generator:
    """Per-sample splittable stream for the single-trajectory API."""
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(sample_index),))
    return np.random.Generator(np.random.Philox(ss))


def _tangent_frame(normal):
    n = np.asarray(normal, dtype=float)
    pick = int(np.argmin(np.abs(n)))
    e = np.zeros(3)
    e[pick] = 1.0
    t1 = np.cross(n, e)
    t1 /= math.sqrt(float(t1 @ t1))
    t2 = np.cross(n, t1)
    return t1, t2


def sample_wall_velocity(rng: np.random.Generator, normal) -> np.ndarray:
    """Exact draw from d sigma at a wall with outward normal n (n.v > 0)."""
    n = np.asarray(normal, dtype=float)
    if abs(float(n @ n) - 1.0) > 1e-9:
        raise ConfigError("wall normal must be a unit vector")
    u = rng.random()
    s = math.sqrt(-2.0 * math.log1p(-u))
    t1, t2 = _tangent_frame(n)
    z1, z2 = rng.standard_normal(2)
    return s * n + z1 * t1 + z2 * t2


@dataclass
class CycleSample:
    """One realized backward cycle."""

    t0: float
    x0: np.ndarray
    v0: np.ndarray
    times: list            # t_k at each wall hit, strictly decreasing
    positions: list        # x_k on the boundary
    velocities: list       # v_k sampled at x_k (outgoing half, n.v > 0)
    survived: bool         # True if all k_max bounces happened before t = 0
    bounce_count: int
    degenerate: bool = False


def sample_cycle(domain: Domain, t0: float, x, v, k_max: int,
                 rng: np.random.Generator) -> CycleSample:
    """Sample one backward cycle with at most k_max wall hits."""
    if k_max < 1:
        raise ConfigError("k_max must be >= 1")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    v = np.asarray(v, dtype=float)
    times, positions, velocities = [], [], []
    t = float(t0)
    cur_x, cur_v = x, v
    for k in range(k_max):
        hit = backward_exit(domain, cur_x, cur_v)
        if hit is None:
            return CycleSample(t0, x, v, times, positions, velocities,
                               survived=False, bounce_count=k, degenerate=True)
        tb, xb = hit
        t = t - tb
        if t <= 0.0:
            return CycleSample(t0, x, v, times, positions, velocities,
                               survived=False, bounce_count=k)
        n = outward_normal_batch(domain, xb[None, :])[0]
        v_new = sample_wall_velocity(rng, n)
        times.append(t)
        positions.append(xb)
        velocities.append(v_new)
        cur_x, cur_v = xb, v_new
    return CycleSample(t0, x, v, times, positions, velocities,
                       survived=True, bounce_count=k_max)


@dataclass
class SurvivalEstimate:
    k: int
    t0: float
    n_samples: int
    p_hat: float
    ci_halfwidth: float
    seed: int
    degenerate_count: int = 0


@dataclass
class SurvivalProfile:
    t0: float
    n_samples: int
    seed: int
    p_hat: np.ndarray          # indexed by bounce count 0..k_max
    ci_halfwidth: np.ndarray
    degenerate_count: int


def _uniform_block(base_seed: int, n_samples: int, width: int) -> np.ndarray:
    gen = np.random.Generator(np.random.Philox(key=np.uint64(base_seed)))
    return gen.random((n_samples, width))


def _uniform_starts(domain: Domain, U):
    """Interior starting positions from uniform draws (columns 0..2)."""
    if domain.kind == "slab":
        return (U[:, 0] * domain.size)[:, None]
    if domain.kind == "disk":
        r = domain.size * np.sqrt(U[:, 0])
        ang = 2.0 * math.pi * U[:, 1]
        return np.column_stack([r * np.cos(ang), r * np.sin(ang)])
    r = domain.size * U[:, 0] ** (1.0 / 3.0)
    z = 2.0 * U[:, 1] - 1.0
    ang = 2.0 * math.pi * U[:, 2]
    s = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    return r[:, None] * np.column_stack([s * np.cos(ang), s * np.sin(ang), z])


def _wall_velocities(domain: Domain, normals, u_speed, u_t1, u_t2):
    """Vectorized draws from d sigma at many wall points."""
    n = normals.shape[0]
    s = np.sqrt(-2.0 * np.log1p(-np.clip(u_speed, 0.0, 1.0 - _CLIP)))
    z1 = ndtri(np.clip(u_t1, _CLIP, 1.0 - _CLIP))
    z2 = ndtri(np.clip(u_t2, _CLIP, 1.0 - _CLIP))
    if domain.kind == "slab":
        V = np.empty((n, 3))
        V[:, 0] = s * normals[:, 0]
        V[:, 1] = z1
        V[:, 2] = z2
        return V
    pick = np.argmin(np.abs(normals), axis=1)
    e = np.zeros_like(normals)
    e[np.arange(n), pick] = 1.0
    t1 = np.cross(normals, e)
    t1 /= np.linalg.norm(t1, axis=1)[:, None]
    t2 = np.cross(normals, t1)
    return s[:, None] * normals + z1[:, None] * t1 + z2[:, None] * t2


def survival_profile(domain: Domain, t0: float, k_max: int, n_samples: int,
                     base_seed: int, start_x=None) -> SurvivalProfile:
    """P(t_k > 0) for every k <= k_max on one nested sample population.

    Starts are uniform over the domain (or pinned to ``start_x``) with v0
    drawn from the global Maxwellian.  Nestedness of the survival events
    makes the estimates exactly non-increasing in k within a profile.
    """
    if n_samples < 1 or k_max < 1:
        raise ConfigError("survival_profile needs n_samples >= 1 and k_max >= 1")
    width = 6 + 3 * max(0, k_max - 1)
    U = _uniform_block(base_seed, n_samples, width)

    if start_x is None:
        X = _uniform_starts(domain, U)
    else:
        start = np.atleast_1d(np.asarray(start_x, dtype=float))
        X = np.tile(start, (n_samples, 1))
    V = ndtri(np.clip(U[:, 3:6], _CLIP, 1.0 - _CLIP))  # v0 ~ mu

    alive = np.ones(n_samples, dtype=bool)
    t_rem = np.full(n_samples, float(t0))
    p = np.zeros(k_max + 1)
    ci = np.zeros(k_max + 1)
    p[0] = 1.0

    tb, cur_X = backward_exit_batch(domain, X, V)
    degenerate = ~np.isfinite(tb)
    n_eff = int(n_samples - degenerate.sum())
    if n_eff == 0:
        raise ConfigError("all sampled rays were degenerate")
    alive &= ~degenerate
    tb = np.where(np.isfinite(tb), tb, 0.0)

    for k in range(1, k_max + 1):
        t_rem = t_rem - tb
        alive &= t_rem > 0.0
        p[k] = float(alive.sum()) / n_eff
        ci[k] = 1.96 * math.sqrt(max(p[k] * (1.0 - p[k]), 0.0) / n_eff)
        if k == k_max:
            break
        col = 6 + 3 * (k - 1)
        normals = outward_normal_batch(domain, cur_X)
        V = _wall_velocities(domain, normals, U[:, col], U[:, col + 1], U[:, col + 2])
        tb, cur_X = backward_exit_batch(domain, cur_X, V)
        fresh = ~np.isfinite(tb) & alive
        if np.any(fresh):
            alive &= ~fresh   # measure-zero rays that never exit again
        tb = np.where(np.isfinite(tb), tb, 0.0)

    return SurvivalProfile(float(t0), n_samples, int(base_seed), p, ci,
                           int(degenerate.sum()))


def estimate_survival(domain: Domain, t0: float, k: int, n_samples: int,
                      base_seed: int) -> SurvivalEstimate:
    """Monte Carlo estimate of P(t_k > 0); k = 0 returns 1 by convention."""
    if n_samples < 1000:
        raise ConfigError("estimate_survival needs n_samples >= 1000")
    if k == 0:
        return SurvivalEstimate(0, float(t0), n_samples, 1.0, 0.0, int(base_seed))
    prof = survival_profile(domain, t0, k, n_samples, base_seed)
    return SurvivalEstimate(k, float(t0), n_samples, float(prof.p_hat[k]),
                            float(prof.ci_halfwidth[k]), int(base_seed),
                            prof.degenerate_count)


def start_grid_worst_case(domain: Domain, t0: float, k: int, n_samples: int,
                          base_seed: int, n_starts: int = 5):
    """Worst observed survival over a deterministic grid of starting points.

    The sup over phase-space starts is not directly samplable; this pins the
    starting position to a coarse interior grid (v0 still ~ mu) and reports
    the largest estimate together with that position.
    """
    worst = -1.0
    worst_start = None
    for i in range(n_starts):
        frac = (i + 0.5) / n_starts
        if domain.kind == "slab":
            start = np.array([frac * domain.size])
        elif domain.kind == "disk":
            start = np.array([(2.0 * frac - 1.0) * 0.9 * domain.size, 0.0])
        else:
            start = np.array([(2.0 * frac - 1.0) * 0.9 * domain.size, 0.0, 0.0])
        prof = survival_profile(domain, t0, k, n_samples, base_seed, start_x=start)
        if prof.p_hat[k] > worst:
            worst = float(prof.p_hat[k])
            worst_start = start
    return worst, worst_start
