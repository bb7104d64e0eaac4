"""BGK relaxation machinery for a single spatial cell.

local_maxwellian is the analytic formula
    M(v) = rho (2 pi T)^{-3/2} exp(-|v - U|^2 / (2T)),
whose discrete moments recover (rho, U, T) only to quadrature accuracy
(~1e-11 on the default grid).  The relaxation substep instead targets
matched_maxwellian: the same formula with (rho, U, T) corrected by one
closed-form Newton step so that the *discrete* moments match exactly.  That
makes relax_exact conserve mass, momentum and energy to roundoff at any dt,
keeps tabulated mu an exact fixed point, and does not change the formula the
operators are built from (the parameter shift is the size of the quadrature
defect).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateStateError
from .velocity import RHO_FLOOR, TEMP_FLOOR, VelocityGrid


@dataclass(frozen=True)
class CollisionParams:
    """Collision frequency exponents: nu = rho^eta * T^omega."""

    eta: float = 0.0
    omega: float = 0.0


def collision_frequency(params: CollisionParams, rho: float, T: float) -> float:
    if rho <= 0.0 or T <= 0.0:
        raise DegenerateStateError("collision frequency needs rho > 0 and T > 0")
    return rho**params.eta * T**params.omega


def local_maxwellian(grid: VelocityGrid, rho: float, U, T: float) -> np.ndarray:
    """Analytic local Maxwellian tabulated on the grid nodes."""
    if rho <= 0.0 or T <= 0.0:
        raise DegenerateStateError(f"local Maxwellian needs rho, T > 0 (got {rho}, {T})")
    U = np.asarray(U, dtype=float)
    pec = (grid.vx - U[0]) ** 2 + (grid.vy - U[1]) ** 2 + (grid.vz - U[2]) ** 2
    return rho / (2.0 * math.pi * T) ** 1.5 * np.exp(-pec / (2.0 * T))


def _discrete_moment_vector(grid, F):
    # (int F, int F v, int F |v|^2) with plain dot products; the matched
    # Maxwellian below is defined relative to exactly these sums.
    q = grid.q
    return np.array(
        [
            np.dot(q, F),
            np.dot(q * grid.vx, F),
            np.dot(q * grid.vy, F),
            np.dot(q * grid.vz, F),
            np.dot(q * grid.vsq, F),
        ]
    )


def moments_from_vector(m):
    rho = m[0]
    if rho < RHO_FLOOR:
        raise DegenerateStateError(f"density {rho:.3e} below floor")
    U = m[1:4] / rho
    T = (m[4] / rho - float(U @ U)) / 3.0
    if T <= TEMP_FLOOR:
        raise DegenerateStateError(f"temperature {T:.3e} at/below floor")
    return rho, U, T


def matched_maxwellian(grid: VelocityGrid, rho: float, U, T: float) -> np.ndarray:
    """Gaussian whose discrete (mass, momentum, energy) equal the targets.

    One Newton step on the analytic parameters closes the ~1e-11 quadrature
    defect quadratically, i.e. to roundoff.
    """
    U = np.asarray(U, dtype=float)
    target = np.array(
        [rho, rho * U[0], rho * U[1], rho * U[2], rho * (float(U @ U) + 3.0 * T)]
    )
    M0 = local_maxwellian(grid, rho, U, T)
    defect = target - _discrete_moment_vector(grid, M0)
    # closed-form solve of the (lower-triangular in blocks) moment Jacobian
    d_rho = defect[0]
    d_U = (defect[1:4] - U * d_rho) / rho
    d_T = (defect[4] - (float(U @ U) + 3.0 * T) * d_rho - 2.0 * rho * float(U @ d_U)) / (3.0 * rho)
    return local_maxwellian(grid, rho + d_rho, U + d_U, T + d_T)


def bgk_rhs(params: CollisionParams, grid: VelocityGrid, F) -> np.ndarray:
    """nu (M(F) - F) for one cell; its five collision-invariant moments vanish
    to quadrature accuracy."""
    from .velocity import moments

    F = np.asarray(F, dtype=float)
    rho, U, T = moments(grid, F)
    nu = collision_frequency(params, rho, T)
    return nu * (local_maxwellian(grid, rho, U, T) - F)


def relax_exact(params: CollisionParams, grid: VelocityGrid, F, dt: float) -> np.ndarray:
    """Exact integrator of dF/dt = nu (M(F) - F) over one step.

    The moments (hence nu and the target Maxwellian) are invariant under pure
    relaxation, so the flow is the convex combination
        F' = e^{-nu dt} F + (1 - e^{-nu dt}) M.
    Unconditionally stable, conservative, and positivity preserving.
    """
    F = np.asarray(F, dtype=float)
    if dt < 0.0:
        raise DegenerateStateError("relax_exact needs dt >= 0")
    rho, U, T = moments_from_vector(_discrete_moment_vector(grid, F))
    nu = collision_frequency(params, rho, T)
    alpha = math.exp(-nu * dt)
    M = matched_maxwellian(grid, rho, U, T)
    return alpha * F + (1.0 - alpha) * M


def project_P(grid: VelocityGrid, f):
    """Orthogonal projection onto span{chi_0..chi_4}.

    Returns (Pf, coef) with coef = (a, b1, b2, b3, c).
    """
    f = np.asarray(f, dtype=float)
    coef = grid.coefficients(f)
    Pf = coef @ grid.chi
    return Pf, coef


def linearized_L(grid: VelocityGrid, f) -> np.ndarray:
    """Microscopic part (I - P) f."""
    Pf, _ = project_P(grid, f)
    return np.asarray(f, dtype=float) - Pf
