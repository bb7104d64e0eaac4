"""Norms, exponential decay fitting, and discrete conservation-law residuals.

The macroscopic fields of a perturbation f are a = <f,chi_0>, b_i = <f,chi_i>
and c = <f,chi_4>; with the orthonormal energy basis vector the exact local
conservation laws on the slab read

    d_t a + d_x b1 = 0
    d_t b_i + d_x( delta_{i1} (a + sqrt(2/3) c) ) + d_x Theta_{i1}(f_perp) = 0
    d_t c + sqrt(2/3) d_x b1 + (10/sqrt(6)) d_x Lambda_1(f_perp) = 0

with the microscopic flux functionals

    Theta_{ij}(f) = <(v_i v_j - delta_ij |v|^2/3) sqrt(mu), f>,
    Lambda_j(f)  = (1/10) <(|v|^2 - 5) v_j sqrt(mu), f>.

Theta is kept trace-free so that it annihilates Pf exactly; on microscopic
arguments it coincides with the (v_i v_j - 1) variant, the difference being a
combination of chi_0 and chi_4.  Residuals are formed with centered
differences in time and space on interior cells, so a first-order solver run
shows residual norms shrinking ~2x under simultaneous (dx, dt) halving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FitError
from .velocity import VelocityGrid, weight_value

SQRT_2_3 = math.sqrt(2.0 / 3.0)
ENERGY_FLUX_COEF = 10.0 / math.sqrt(6.0)   # multiplies Lambda (which carries 1/10)


def weighted_linf(grid: VelocityGrid, f, wp=None) -> float:
    """max over cells and nodes of w(v) |f|."""
    w = grid.w if wp is None else weight_value(wp, grid.nodes)
    return float(np.max(w * np.abs(np.asarray(f, dtype=float))))


def l2_norm(grid: VelocityGrid, f, dx: float) -> float:
    """sqrt( sum_cells dx sum_nodes q f^2 )."""
    f = np.atleast_2d(np.asarray(f, dtype=float))
    return math.sqrt(float(dx * np.sum(f * f @ grid.q)))


@dataclass
class DecayFit:
    lam: float
    C: float
    r2: float
    t_lo: float
    t_hi: float
    n_points: int
    n_excluded: int


def fit_decay(times, values, window) -> DecayFit:
    """Least squares of log(value) vs t on the window; lam is the decay rate.

    Nonpositive values inside the window are excluded (count reported);
    fewer than 10 usable points raises FitError.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    t_lo, t_hi = float(window[0]), float(window[1])
    sel = (t >= t_lo) & (t <= t_hi)
    t, v = t[sel], v[sel]
    usable = v > 0.0
    n_excluded = int(np.sum(~usable))
    t, v = t[usable], v[usable]
    if t.size < 10:
        raise FitError(f"decay fit needs >= 10 positive points in window, got {t.size}")
    y = np.log(v)
    tbar, ybar = t.mean(), y.mean()
    dt, dy = t - tbar, y - ybar
    slope = float(np.dot(dt, dy) / np.dot(dt, dt))
    intercept = ybar - slope * tbar
    resid = y - (intercept + slope * t)
    ss_tot = float(np.dot(dy, dy))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.dot(resid, resid)) / ss_tot
    return DecayFit(-slope, math.exp(intercept), r2, t_lo, t_hi, int(t.size), n_excluded)


def _theta_polys(grid: VelocityGrid):
    v = (grid.vx, grid.vy, grid.vz)
    polys = np.empty((3, 3, grid.n_nodes))
    for i in range(3):
        for j in range(3):
            polys[i, j] = v[i] * v[j] * grid.sqrt_mu
            if i == j:
                polys[i, j] -= grid.vsq / 3.0 * grid.sqrt_mu
    return polys


def theta_moments(grid: VelocityGrid, f) -> np.ndarray:
    """Trace-free stress functional Theta_{ij}(f), shape (3, 3)."""
    f = np.asarray(f, dtype=float)
    polys = _theta_polys(grid)
    return np.einsum("ijn,n->ij", polys, grid.q * f)


def lambda_moments(grid: VelocityGrid, f) -> np.ndarray:
    """Heat-flux functional Lambda_j(f) = (1/10) <(|v|^2-5) v_j sqrt(mu), f>."""
    f = np.asarray(f, dtype=float)
    base = (grid.vsq - 5.0) * grid.sqrt_mu * grid.q * f
    return 0.1 * np.array(
        [np.dot(grid.vx, base), np.dot(grid.vy, base), np.dot(grid.vz, base)]
    )


@dataclass
class MacroSeries:
    """Per-output-time macroscopic snapshots recorded by a solver run."""

    t: np.ndarray          # (n_t,)
    a: np.ndarray          # (n_t, n_x)
    b: np.ndarray          # (n_t, n_x, 3)
    c: np.ndarray          # (n_t, n_x)
    theta_x: np.ndarray    # (n_t, n_x, 3): Theta_{i1}(f_perp)
    lambda_x: np.ndarray   # (n_t, n_x):   Lambda_1(f_perp)


@dataclass
class ConservationResiduals:
    r_mass: np.ndarray      # (n_t-2, n_x-2)
    r_momentum: np.ndarray  # (n_t-2, n_x-2, 3)
    r_energy: np.ndarray    # (n_t-2, n_x-2)

    def norms(self):
        def rms(x):
            return float(np.sqrt(np.mean(np.square(x))))
        return rms(self.r_mass), rms(self.r_momentum), rms(self.r_energy)


def conservation_residuals(series: MacroSeries, dx: float) -> ConservationResiduals:
    """Centered-in-time, centered-in-space residuals of the three local laws.

    Time derivatives use the recorded output cadence; boundary cells and the
    first/last snapshots are excluded (no centered stencil there).
    """
    t = series.t
    if t.size < 3:
        raise ConfigError("conservation residuals need at least 3 snapshots")
    dt_out = np.diff(t)
    if np.max(np.abs(dt_out - dt_out[0])) > 1e-12 * max(dt_out[0], 1.0):
        raise ConfigError("snapshots must be equally spaced in time")
    dt = float(dt_out[0])

    def ddt(x):
        return (x[2:] - x[:-2]) / (2.0 * dt)

    def ddx(x):
        return (x[:, 2:] - x[:, :-2]) / (2.0 * dx)

    mid_t = slice(1, -1)
    mid_x = slice(1, -1)

    r_mass = ddt(series.a)[:, mid_x] + ddx(series.b[mid_t, :, 0])
    pressure = series.a + SQRT_2_3 * series.c
    r_mom = np.empty(r_mass.shape + (3,))
    for i in range(3):
        flux = series.theta_x[:, :, i].copy()
        if i == 0:
            flux += pressure
        r_mom[:, :, i] = ddt(series.b[:, :, i])[:, mid_x] + ddx(flux[mid_t])
    r_energy = (
        ddt(series.c)[:, mid_x]
        + SQRT_2_3 * ddx(series.b[mid_t, :, 0])
        + ENERGY_FLUX_COEF * ddx(series.lambda_x[mid_t])
    )
    return ConservationResiduals(r_mass, r_mom, r_energy)
