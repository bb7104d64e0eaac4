"""Truncated 3-D velocity lattice: quadrature, Maxwellian and basis tabulations.

The grid is a tensor-product midpoint lattice on [-v_max, v_max]^3 with an
even per-axis node count, so nodes come in exact +/- pairs and none lies on a
coordinate plane.  The midpoint rule on a uniform lattice integrates smooth
rapidly-decaying functions over the full line with only aliasing + truncation
error, which keeps full-space Gaussian moments accurate to ~1e-11 already at
24 nodes per axis and v_max = 7.

Tabulated per node: the global Maxwellian mu(v) = (2*pi)^{-3/2} exp(-|v|^2/2),
sqrt(mu), the weight w(v) = (1+|v|)^beta exp(theta |v|^2), and the five
orthonormal basis functions

    chi_0 = sqrt(mu),  chi_i = v_i sqrt(mu) (i=1..3),
    chi_4 = (|v|^2 - 3)/sqrt(6) * sqrt(mu).

With this normalization the Gram matrix is the identity and <f, chi_4>
coincides with the conserved energy-chart variable G = (rho|U|^2 + 3 rho T
- 3 rho)/sqrt(6).  Pass ``paper_chi4=True`` to reproduce the (|v|^2 - 3)/2
variant instead (Gram entry 3/2; comparison only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateStateError, NumericsError

SQRT_TWO_PI = math.sqrt(2.0 * math.pi)
SQRT6 = math.sqrt(6.0)

RHO_FLOOR = 1e-12
TEMP_FLOOR = 1e-12

DEFAULT_QUAD_TOL = 1e-8


@dataclass(frozen=True)
class WeightParams:
    """Exponents of the velocity weight (1+|v|)^beta * exp(theta*|v|^2)."""

    beta: float = 0.0
    theta: float = 0.1

    def check(self) -> "WeightParams":
        """Validate admissibility; returns self so it chains in constructors."""
        if self.theta == 0.0:
            if not self.beta > 1.5:
                raise ConfigError(
                    "weight params: beta > 3/2 is required for theta = 0 "
                    f"(got beta={self.beta})"
                )
        elif 0.0 < self.theta < 0.25:
            if self.beta < 0.0:
                raise ConfigError(
                    "weight params: beta >= 0 is required for 0 < theta < 1/4 "
                    f"(got beta={self.beta})"
                )
        else:
            raise ConfigError(
                f"weight params: theta must lie in [0, 1/4) (got theta={self.theta})"
            )
        return self


def weight_value(wp: WeightParams, v) -> np.ndarray | float:
    """Evaluate w(v) = (1+|v|)^beta * exp(theta |v|^2) at one or many velocities.

    ``v`` is a length-3 vector or an (..., 3) array.
    """
    wp.check()
    v = np.asarray(v, dtype=float)
    speed = np.sqrt(np.sum(v * v, axis=-1))
    out = (1.0 + speed) ** wp.beta * np.exp(wp.theta * speed * speed)
    return float(out) if out.ndim == 0 else out


class VelocityGrid:
    """Immutable tabulation container; build with :func:`build_grid`."""

    def __init__(self, n_per_axis, v_max, wp, paper_chi4=False):
        self.n_per_axis = int(n_per_axis)
        self.v_max = float(v_max)
        self.wp = wp
        self.paper_chi4 = bool(paper_chi4)
        self.h = 2.0 * self.v_max / self.n_per_axis

        axis = -self.v_max + (np.arange(self.n_per_axis) + 0.5) * self.h
        vx, vy, vz = np.meshgrid(axis, axis, axis, indexing="ij")
        self.axis_nodes = axis
        self.vx = np.ascontiguousarray(vx.ravel())
        self.vy = np.ascontiguousarray(vy.ravel())
        self.vz = np.ascontiguousarray(vz.ravel())
        self.n_nodes = self.vx.size
        self.nodes = np.stack([self.vx, self.vy, self.vz], axis=1)
        self.vsq = self.vx**2 + self.vy**2 + self.vz**2

        self.q = np.full(self.n_nodes, self.h**3)
        self.mu = np.exp(-0.5 * self.vsq) / (2.0 * math.pi) ** 1.5
        self.sqrt_mu = np.sqrt(self.mu)
        speed = np.sqrt(self.vsq)
        self.w = (1.0 + speed) ** wp.beta * np.exp(wp.theta * self.vsq)

        energy_poly = (self.vsq - 3.0) / (2.0 if paper_chi4 else SQRT6)
        self.chi = np.stack(
            [
                self.sqrt_mu,
                self.vx * self.sqrt_mu,
                self.vy * self.sqrt_mu,
                self.vz * self.sqrt_mu,
                energy_poly * self.sqrt_mu,
            ]
        )
        # chi pre-multiplied by quadrature weights: <f, chi_i> = chi_q @ f
        self.chi_q = self.chi * self.q

        self.mass_defect = abs(integrate(self, self.mu) - 1.0)
        gram = (self.chi_q @ self.chi.T)
        self.gram = gram
        self.gram_defect = float(np.max(np.abs(gram - np.eye(5))))
        self.quad_tol = max(DEFAULT_QUAD_TOL, 10.0 * self.mass_defect)

    def coefficients(self, f) -> np.ndarray:
        """Basis inner products <f, chi_i>, i = 0..4, batched over leading axes."""
        return np.asarray(f) @ self.chi_q.T

    def inner(self, f, g) -> float:
        """Plain quadrature inner product sum_j q_j f_j g_j."""
        return float(np.dot(self.q * np.asarray(f), np.asarray(g)))

    def __repr__(self):
        return (
            f"VelocityGrid(n={self.n_per_axis}^3, v_max={self.v_max}, "
            f"beta={self.wp.beta}, theta={self.wp.theta})"
        )


def build_grid(n_v: int, v_max: float, wp: WeightParams, paper_chi4: bool = False) -> VelocityGrid:
    """Build the velocity lattice and all per-node tabulations.

    Requires an even n_v >= 8 and v_max >= 6; wp must be admissible.  The
    measured Maxwellian mass defect is recorded and, on coarse grids, widens
    ``grid.quad_tol`` beyond the 1e-8 default.
    """
    wp.check()
    if n_v < 8 or n_v % 2 != 0:
        raise ConfigError(f"n_v must be an even integer >= 8 (got {n_v})")
    if v_max < 6.0:
        raise ConfigError(f"v_max must be >= 6 (got {v_max})")
    return VelocityGrid(n_v, v_max, wp, paper_chi4=paper_chi4)


def integrate(grid: VelocityGrid, values) -> float:
    """Quadrature sum over nodes with compensated summation in fixed node order.

    Raises NumericsError naming the first offending node if any value is not
    finite.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_nodes,):
        raise ConfigError(
            f"integrate expects a per-node field of shape ({grid.n_nodes},), got {values.shape}"
        )
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise NumericsError(f"non-finite value at velocity node {bad}")
    return math.fsum((grid.q * values).tolist())


def moments(grid: VelocityGrid, F, rho_floor: float = RHO_FLOOR):
    """Macroscopic moments (rho, U, T) of an absolute per-node field F.

    rho = int F,  rho U = int F v,  3 rho T = int F |v - U|^2.
    """
    F = np.asarray(F, dtype=float)
    rho = integrate(grid, F)
    if rho < rho_floor:
        raise DegenerateStateError(f"density {rho:.3e} below floor {rho_floor:.1e}")
    ux = integrate(grid, F * grid.vx) / rho
    uy = integrate(grid, F * grid.vy) / rho
    uz = integrate(grid, F * grid.vz) / rho
    U = np.array([ux, uy, uz])
    pec = (grid.vx - ux) ** 2 + (grid.vy - uy) ** 2 + (grid.vz - uz) ** 2
    T = integrate(grid, F * pec) / (3.0 * rho)
    if T <= TEMP_FLOOR:
        raise DegenerateStateError(f"temperature {T:.3e} at/below floor {TEMP_FLOOR:.1e}")
    return rho, U, T
