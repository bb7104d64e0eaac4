"""Bounded spatial domains (slab, disk, ball) and backward ray-exit queries.

Positions are scalars for the slab (x1 in [0, L]; velocities remain 3-D and
the walls carry normals -e1 / +e1), planar 2-vectors for the disk, and
3-vectors for the ball.  Outward normals are always returned as 3-vectors so
they pair directly with velocities.

The backward exit time of (x, v) is the largest s >= 0 with x - s v still in
the closed domain; ``backward_exit`` returns ``None`` when the backward ray
never leaves (tangential slab velocity, zero planar velocity in the disk,
zero velocity).  A start exactly on the boundary exits immediately (t_b = 0)
only if n(x).v < 0, i.e. the backward ray leaves at once; otherwise the ray
first travels inward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError

BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class Domain:
    """Slab of length L (kind="slab"), disk or ball of radius R."""

    kind: str
    size: float

    def __post_init__(self):
        if self.kind not in ("slab", "disk", "ball"):
            raise ConfigError(f"unknown domain kind {self.kind!r}")
        if not self.size > 0.0:
            raise ConfigError("domain size must be positive")

    @staticmethod
    def slab(length: float) -> "Domain":
        return Domain("slab", float(length))

    @staticmethod
    def disk(radius: float) -> "Domain":
        return Domain("disk", float(radius))

    @staticmethod
    def ball(radius: float) -> "Domain":
        return Domain("ball", float(radius))

    @property
    def position_dim(self) -> int:
        return {"slab": 1, "disk": 2, "ball": 3}[self.kind]


def _pos(domain: Domain, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (domain.position_dim,):
        raise ConfigError(
            f"{domain.kind} positions have dimension {domain.position_dim}, got shape {x.shape}"
        )
    return x


def contains(domain: Domain, x) -> bool:
    """True iff x is strictly interior to the domain."""
    x = _pos(domain, x)
    if not np.all(np.isfinite(x)):
        raise ConfigError("position must be finite")
    if domain.kind == "slab":
        return 0.0 < x[0] < domain.size
    return float(np.dot(x, x)) < domain.size**2


def outward_normal(domain: Domain, xb) -> np.ndarray:
    """Unit outward normal (3-vector) at a boundary point."""
    xb = _pos(domain, xb)
    if domain.kind == "slab":
        if abs(xb[0]) <= BOUNDARY_TOL:
            return np.array([-1.0, 0.0, 0.0])
        if abs(xb[0] - domain.size) <= BOUNDARY_TOL:
            return np.array([1.0, 0.0, 0.0])
        raise DomainError(f"point x1={xb[0]} is not on a slab wall")
    r = math.sqrt(float(np.dot(xb, xb)))
    if abs(r - domain.size) > BOUNDARY_TOL:
        raise DomainError(f"point at radius {r} is not on the boundary R={domain.size}")
    n = np.zeros(3)
    n[: xb.size] = xb / r
    return n


def _ball_exit_time(x, v, radius):
    # Backward ray x - s v; largest root of |x - s v|^2 = R^2 with s > 0,
    # written in the cancellation-free form.
    vv = float(np.dot(v, v))
    if vv == 0.0:
        return None
    q = float(np.dot(x, v))
    c = radius**2 - float(np.dot(x, x))
    disc = q * q + vv * c
    if disc < 0.0:
        disc = 0.0
    root = math.sqrt(disc)
    if c <= 0.0:
        # On (or numerically outside) the boundary: exits immediately only if
        # the backward ray leaves, i.e. n.v < 0 <=> q < 0.
        if q < 0.0:
            return 0.0
    if q >= 0.0:
        return (q + root) / vv
    return c / (root - q)


def backward_exit(domain: Domain, x, v):
    """Backward exit (t_b, x_b), or None if the backward ray never exits.

    x_b lies on the boundary to within 1e-10 of the boundary equation and is
    returned in the domain's position dimension.
    """
    x = _pos(domain, x)
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise ConfigError("velocity must be a 3-vector")
    if not np.all(np.isfinite(v)):
        raise ConfigError("velocity must be finite")

    if domain.kind == "slab":
        v1 = v[0]
        if v1 == 0.0:
            return None
        if v1 > 0.0:
            tb = x[0] / v1
            xb = np.array([0.0])
        else:
            tb = (x[0] - domain.size) / v1
            xb = np.array([domain.size])
        return float(tb), xb

    vpos = v[: domain.position_dim]
    tb = _ball_exit_time(x, vpos, domain.size)
    if tb is None:
        return None
    xb = x - tb * vpos
    # project exactly onto the boundary equation
    r = math.sqrt(float(np.dot(xb, xb)))
    if r > 0.0:
        xb = xb * (domain.size / r)
    return float(tb), xb


# Vectorized exit queries used by the cycle sampler.  Positions come in as
# (n, dim) arrays, velocities as (n, 3); no-exit rays get t_b = +inf.

def backward_exit_batch(domain: Domain, X, V):
    X = np.asarray(X, dtype=float)
    V = np.asarray(V, dtype=float)
    n = X.shape[0]
    if domain.kind == "slab":
        v1 = V[:, 0]
        tb = np.full(n, np.inf)
        xb = np.empty((n, 1))
        xb[:, 0] = np.nan
        pos = v1 > 0.0
        neg = v1 < 0.0
        tb[pos] = X[pos, 0] / v1[pos]
        xb[pos, 0] = 0.0
        tb[neg] = (X[neg, 0] - domain.size) / v1[neg]
        xb[neg, 0] = domain.size
        return tb, xb

    d = domain.position_dim
    Vp = V[:, :d]
    vv = np.sum(Vp * Vp, axis=1)
    q = np.sum(X * Vp, axis=1)
    c = domain.size**2 - np.sum(X * X, axis=1)
    disc = np.maximum(q * q + vv * c, 0.0)
    root = np.sqrt(disc)
    with np.errstate(divide="ignore", invalid="ignore"):
        tb = np.where(q >= 0.0, (q + root) / vv, c / (root - q))
    tb = np.where(vv == 0.0, np.inf, tb)
    XB = X - tb[:, None] * Vp
    r = np.sqrt(np.sum(XB * XB, axis=1))
    good = np.isfinite(tb) & (r > 0.0)
    XB[good] *= (domain.size / r[good])[:, None]
    return tb, XB


def outward_normal_batch(domain: Domain, XB):
    """Unit outward normals (n, 3) at boundary points (n, dim)."""
    XB = np.asarray(XB, dtype=float)
    n = XB.shape[0]
    out = np.zeros((n, 3))
    if domain.kind == "slab":
        out[:, 0] = np.where(XB[:, 0] <= 0.5 * domain.size, -1.0, 1.0)
        return out
    d = domain.position_dim
    r = np.sqrt(np.sum(XB * XB, axis=1))
    out[:, :d] = XB / r[:, None]
    return out
