"""Taylor expansion of the BGK operator in the conserved chart.

The collision frequency and the local Maxwellian are differentiated in the
conserved variables c = (rho, rho U, G) with

    G = (rho |U|^2 + 3 rho T - 3 rho) / sqrt(6),

along the straight path c(theta) = (1,0,0) + theta * (c - (1,0,0)) from the
global equilibrium.  The fundamental theorem of calculus then gives the exact
identities

    nu  = 1 + sum_i <f, chi_i> int_0^1 Q_i(theta) dtheta,
    M(F) = mu + (Pf) sqrt(mu)
         + sum_ij <f,chi_i><f,chi_j> int_0^1 Q_ij(theta) (1-theta) dtheta,

because with the normalized basis the coefficients <f, chi_i> are exactly the
conserved increments (rho-1, rho U, G).  Q_i is the chart gradient of
rho^eta T^omega and Q_ij the chart Hessian of the theta-Maxwellian; both are
assembled analytically through the chain-rule matrix

    J[i][k] = d p_k / d c_i,   p = (rho, U, T),

whose rows are (1, -U_i/rho, (|U|^2 - 3T + 3)/(3 rho)), (0, 1/rho,
-2U_i/(3 rho)) and (0, 0, sqrt(2/3)/rho).  The remainder term of the
Maxwellian expansion feeds the four-part nonlinear operator

    Gamma(f) = nu_p Pf - nu_p f + R mu^{-1/2} + nu_p R mu^{-1/2}
             = Gamma_1 + Gamma_2 + Gamma_3 + Gamma_4,

and the direct-definition evaluation nu (M(F) - F)/sqrt(mu) + (I-P)f serves
as its oracle: the two agree up to theta-quadrature error alone.  The
mu^{-1/2} amplification is evaluated inside a single fused exponent so grid
corners cannot overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .collision import CollisionParams, collision_frequency, project_P
from .errors import DegenerateStateError
from .velocity import SQRT6, VelocityGrid, moments, weight_value

SQRT_2_3 = math.sqrt(2.0 / 3.0)

# Lemma-2.4-style working regime guard for theta-interpolated states.
SMALLNESS_FLOOR = 0.5


def conserved_chart(rho: float, U, T: float) -> np.ndarray:
    """(rho, rho U, G) with G = (rho|U|^2 + 3 rho T - 3 rho)/sqrt(6)."""
    U = np.asarray(U, dtype=float)
    usq = float(U @ U)
    G = (rho * usq + 3.0 * rho * T - 3.0 * rho) / SQRT6
    return np.array([rho, rho * U[0], rho * U[1], rho * U[2], G])


def chart_to_primitive(c):
    """Invert the chart: (rho, U, T) from (rho, m, G)."""
    c = np.asarray(c, dtype=float)
    rho = c[0]
    if rho <= 0.0:
        raise DegenerateStateError("chart point has nonpositive density")
    m = c[1:4]
    U = m / rho
    T = (SQRT6 * c[4] + 3.0 * rho - float(m @ m) / rho) / (3.0 * rho)
    if T <= 0.0:
        raise DegenerateStateError("chart point has nonpositive temperature")
    return rho, U, T


@dataclass(frozen=True)
class ThetaState:
    """State interpolated linearly in the conserved chart from equilibrium."""

    theta: float
    rho: float
    U: np.ndarray
    T: float
    G: float

    @staticmethod
    def from_target(rho: float, U, T: float, theta: float, strict: bool = True) -> "ThetaState":
        U = np.asarray(U, dtype=float)
        usq = float(U @ U)
        G = (rho * usq + 3.0 * rho * T - 3.0 * rho) / SQRT6
        rho_t = 1.0 + theta * (rho - 1.0)
        m_t = theta * rho * U
        G_t = theta * G
        if rho_t <= 0.0:
            raise DegenerateStateError(f"theta-state density {rho_t:.3e} <= 0")
        U_t = m_t / rho_t
        T_t = 1.0 + (SQRT6 * G_t - rho_t * float(U_t @ U_t)) / (3.0 * rho_t)
        if T_t <= 0.0:
            raise DegenerateStateError(f"theta-state temperature {T_t:.3e} <= 0")
        if strict and (rho_t <= SMALLNESS_FLOOR or T_t <= SMALLNESS_FLOOR):
            raise DegenerateStateError(
                "theta-state outside the smallness regime "
                f"(rho={rho_t:.3f}, T={T_t:.3f}; both must exceed {SMALLNESS_FLOOR})"
            )
        return ThetaState(float(theta), float(rho_t), U_t, float(T_t), float(G_t))


class ThetaQuadrature:
    """Gauss-Legendre nodes on [0, 1] for the theta integrals.

    ``weights`` integrate plain integrands (sum to 1); ``weights_remainder``
    carry the (1 - theta) factor of the second-order remainder (sum to 1/2).
    ``second_order`` selects which set :meth:`integrate` applies.
    """

    def __init__(self, n: int = 32, second_order: bool = False):
        x, w = np.polynomial.legendre.leggauss(int(n))
        self.n = int(n)
        self.nodes = 0.5 * (x + 1.0)
        self.weights = 0.5 * w
        self.weights_remainder = self.weights * (1.0 - self.nodes)
        self.second_order = bool(second_order)

    def integrate(self, values_at_nodes) -> float:
        w = self.weights_remainder if self.second_order else self.weights
        return float(np.dot(w, np.asarray(values_at_nodes)))


def chart_jacobian(rho: float, U, T: float) -> np.ndarray:
    """The 5x5 chain-rule matrix J[i][k] = d(rho, U, T)_k / d(rho, rho U, G)_i."""
    if rho <= 0.0 or T <= 0.0:
        raise DegenerateStateError("chart Jacobian needs rho, T > 0")
    U = np.asarray(U, dtype=float)
    usq = float(U @ U)
    J = np.zeros((5, 5))
    J[0, 0] = 1.0
    J[0, 1:4] = -U / rho
    J[0, 4] = (-3.0 * T + usq + 3.0) / (3.0 * rho)
    for i in range(3):
        J[1 + i, 1 + i] = 1.0 / rho
        J[1 + i, 4] = -2.0 * U[i] / (3.0 * rho)
    J[4, 4] = SQRT_2_3 / rho
    return J


def q_i_eval(params: CollisionParams, ts: ThetaState) -> np.ndarray:
    """Chart gradient of rho^eta T^omega at a theta-state (5-vector)."""
    J = chart_jacobian(ts.rho, ts.U, ts.T)
    grad_p = np.zeros(5)
    grad_p[0] = params.eta * ts.rho ** (params.eta - 1.0) * ts.T**params.omega
    grad_p[4] = params.omega * ts.T ** (params.omega - 1.0) * ts.rho**params.eta
    return J @ grad_p


def nu_p(params: CollisionParams, grid: VelocityGrid, f, tq: ThetaQuadrature) -> float:
    """sum_i <f, chi_i> int_0^1 Q_i dtheta; equals rho^eta T^omega - 1 up to
    theta-quadrature error in the smallness regime."""
    f = np.asarray(f, dtype=float)
    F = grid.mu + grid.sqrt_mu * f
    rho, U, T = moments(grid, F)
    coef = grid.coefficients(f)
    qbar = np.zeros(5)
    for w, t in zip(tq.weights, tq.nodes):
        ts = ThetaState.from_target(rho, U, T, t)
        qbar += w * q_i_eval(params, ts)
    return float(coef @ qbar)


def _hessian_ingredients(ts: ThetaState, vx, vy, vz):
    """Shared per-node pieces of the chart gradient/Hessian of M(theta)."""
    rho, U, T = ts.rho, ts.U, ts.T
    xi = (vx - U[0], vy - U[1], vz - U[2])
    S = xi[0] ** 2 + xi[1] ** 2 + xi[2] ** 2
    E = (S - 3.0 * T) / (2.0 * T * T)
    u_dot_xi = U[0] * xi[0] + U[1] * xi[1] + U[2] * xi[2]
    usq = float(U @ U)
    poly = usq - 3.0 * T + 3.0

    # h_j such that (D_c M)_j = h_j * M; each h_j carries exactly one 1/rho.
    h = [
        (1.0 - u_dot_xi / T + poly * E / 3.0) / rho,
        (xi[0] / T - (2.0 * U[0] / 3.0) * E) / rho,
        (xi[1] / T - (2.0 * U[1] / 3.0) * E) / rho,
        (xi[2] / T - (2.0 * U[2] / 3.0) * E) / rho,
        SQRT_2_3 * E / rho,
    ]
    return xi, S, E, u_dot_xi, poly, h


def chart_gradient_M(ts: ThetaState, vx, vy, vz, weighted: bool = False):
    """First chart derivative D_{(rho, rho U, G)} M(theta), shape (5, n).

    At equilibrium this is exactly (chi_0..chi_4) * sqrt(mu) nodewise.  With
    ``weighted=True`` the result carries the extra mu^{-1/2} factor, fused
    into the exponent.
    """
    vx, vy, vz = (np.asarray(a, dtype=float) for a in (vx, vy, vz))
    _, _, _, _, _, h = _hessian_ingredients(ts, vx, vy, vz)
    M = _maxwellian_factor(ts, vx, vy, vz, weighted)
    return np.stack([hj * M for hj in h])


def _maxwellian_factor(ts: ThetaState, vx, vy, vz, weighted: bool):
    rho, U, T = ts.rho, ts.U, ts.T
    S = (vx - U[0]) ** 2 + (vy - U[1]) ** 2 + (vz - U[2]) ** 2
    if not weighted:
        return rho / (2.0 * math.pi * T) ** 1.5 * np.exp(-S / (2.0 * T))
    # M(theta) * mu^{-1/2} in one exponent; bounded for T < 2.
    vsq = vx**2 + vy**2 + vz**2
    pref = rho / (2.0 * math.pi * T) ** 1.5 * (2.0 * math.pi) ** 0.75
    return pref * np.exp(-S / (2.0 * T) + 0.25 * vsq)


def q_ij_matrix(grid_or_nodes, ts: ThetaState, weighted: bool = False) -> np.ndarray:
    """Chart Hessian of M(theta): shape (5, 5, n).

    Assembled from the chain rule D^2_c M = J . D_p(J . grad_p M . M): the
    rho-derivative of the gradient column vanishes identically (each column
    entry is h_j M with h_j ~ 1/rho and M ~ rho), so only the U and T
    derivatives contribute.  ``weighted=True`` multiplies by mu^{-1/2} inside
    the fused exponent (the Gamma_3/Gamma_4 combination).
    """
    if isinstance(grid_or_nodes, VelocityGrid):
        vx, vy, vz = grid_or_nodes.vx, grid_or_nodes.vy, grid_or_nodes.vz
    else:
        nodes = np.atleast_2d(np.asarray(grid_or_nodes, dtype=float))
        vx, vy, vz = nodes[:, 0], nodes[:, 1], nodes[:, 2]

    rho, U, T = ts.rho, ts.U, ts.T
    xi, S, E, u_dot_xi, poly, h = _hessian_ingredients(ts, vx, vy, vz)
    M = _maxwellian_factor(ts, vx, vy, vz, weighted)

    dE_dT = -S / T**3 + 1.5 / (T * T)
    dE_dU = [-xi[k] / (T * T) for k in range(3)]

    # dh_j/dU_k and dh_j/dT, each divided by rho like h itself
    dh = np.empty((4, 5) + vx.shape)  # k = U1, U2, U3, T
    for k in range(3):
        dh[k, 0] = (-(xi[k] - U[k]) / T + (2.0 * U[k] / 3.0) * E + poly * dE_dU[k] / 3.0) / rho
        for i in range(3):
            dh[k, 1 + i] = (
                (-(1.0 if i == k else 0.0) / T)
                - (2.0 / 3.0 if i == k else 0.0) * E
                + (2.0 * U[i] / 3.0) * (-dE_dU[k])  # sign: -(2U_i/3) dE/dU_k
            ) / rho
        dh[k, 4] = SQRT_2_3 * dE_dU[k] / rho
    dh[3, 0] = (u_dot_xi / (T * T) - E + poly * dE_dT / 3.0) / rho
    for i in range(3):
        dh[3, 1 + i] = (-xi[i] / (T * T) - (2.0 * U[i] / 3.0) * dE_dT) / rho
    dh[3, 4] = SQRT_2_3 * dE_dT / rho

    # gradient of log M in the primitives (U and T components)
    g = [xi[0] / T, xi[1] / T, xi[2] / T, E]

    J = chart_jacobian(rho, U, T)
    B = np.empty_like(dh)  # B[k][j] = d/dp_k (h_j M)
    for k in range(4):
        for j in range(5):
            B[k, j] = (dh[k, j] + h[j] * g[k]) * M
    return np.einsum("ik,kj...->ij...", J[:, 1:5], B)


def q_ij_eval(grid: VelocityGrid, ts: ThetaState, v) -> np.ndarray:
    """Chart Hessian of M(theta) at velocity node(s) v: (5,5) or (5,5,m)."""
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    out = q_ij_matrix(np.atleast_2d(v), ts, weighted=False)
    return out[:, :, 0] if single else out


def qij_weighted_integral(grid: VelocityGrid, rho: float, U, T: float,
                          tq: ThetaQuadrature) -> np.ndarray:
    """A_ij(v) = int_0^1 Q_ij(theta, v) (1 - theta) dtheta * mu^{-1/2}, (5,5,n)."""
    A = np.zeros((5, 5, grid.n_nodes))
    for w, t in zip(tq.weights_remainder, tq.nodes):
        ts = ThetaState.from_target(rho, U, T, t)
        A += w * q_ij_matrix(grid, ts, weighted=True)
    return A


@dataclass
class GammaParts:
    """The four pieces of the nonlinear operator at one cell."""

    g1: np.ndarray
    g2: np.ndarray
    g3: np.ndarray
    g4: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.g1 + self.g2 + self.g3 + self.g4


def gamma_expansion(params: CollisionParams, grid: VelocityGrid, f,
                    tq: ThetaQuadrature) -> GammaParts:
    """Gamma via the chart expansion: (nu_p Pf, -nu_p f, R mu^{-1/2}, nu_p R mu^{-1/2})."""
    f = np.asarray(f, dtype=float)
    F = grid.mu + grid.sqrt_mu * f
    rho, U, T = moments(grid, F)
    coef = grid.coefficients(f)
    Pf, _ = project_P(grid, f)

    qbar = np.zeros(5)
    for w, t in zip(tq.weights, tq.nodes):
        qbar += w * q_i_eval(params, ThetaState.from_target(rho, U, T, t))
    nup = float(coef @ qbar)

    A = qij_weighted_integral(grid, rho, U, T, tq)
    R = np.einsum("i,j,ijn->n", coef, coef, A)
    return GammaParts(nup * Pf, -nup * f, R, nup * R)


def gamma_direct(params: CollisionParams, grid: VelocityGrid, f) -> np.ndarray:
    """Exact-definition Gamma: nu (M(F) - F)/sqrt(mu) + (I - P) f.

    This is the oracle for gamma_expansion; M(F)/sqrt(mu) is evaluated with
    the mu^{-1/2} fused into the exponent.
    """
    f = np.asarray(f, dtype=float)
    F = grid.mu + grid.sqrt_mu * f
    rho, U, T = moments(grid, F)
    nu = collision_frequency(params, rho, T)
    target = ThetaState(1.0, rho, np.asarray(U, dtype=float), T,
                        float(conserved_chart(rho, U, T)[4]))
    M_over_sqrt_mu = _maxwellian_factor(target, grid.vx, grid.vy, grid.vz, weighted=True)
    Pf, _ = project_P(grid, f)
    return nu * (M_over_sqrt_mu - grid.sqrt_mu - f) + (f - Pf)


@dataclass
class ControlProbe:
    delta: float
    macro_inf: float
    ratio: float


def macroscopic_control_probe(grid: VelocityGrid, f, wp=None) -> ControlProbe:
    """Measured ratio ||(rho-1, U, T-1)||_inf / ||w f||_inf over the cells of f."""
    f = np.atleast_2d(np.asarray(f, dtype=float))
    w = grid.w if wp is None else weight_value(wp, grid.nodes)
    delta = float(np.max(w * np.abs(f)))
    macro = 0.0
    for cell in f:
        F = grid.mu + grid.sqrt_mu * cell
        rho, U, T = moments(grid, F)
        macro = max(macro, abs(rho - 1.0), float(np.max(np.abs(U))), abs(T - 1.0))
    ratio = 0.0 if delta == 0.0 else macro / delta
    return ControlProbe(delta, macro, ratio)


def gamma_stability_probe(params: CollisionParams, grid: VelocityGrid, f1, f2,
                          tq: ThetaQuadrature) -> float:
    """||w (Gamma(f1) - Gamma(f2))||_inf / (delta ||w (f1 - f2)||_inf),
    with delta = max(||w f1||, ||w f2||); 0 when f1 == f2 exactly."""
    f1 = np.asarray(f1, dtype=float)
    f2 = np.asarray(f2, dtype=float)
    if np.array_equal(f1, f2):
        return 0.0
    w = grid.w
    delta = max(float(np.max(w * np.abs(f1))), float(np.max(w * np.abs(f2))))
    dgamma = gamma_expansion(params, grid, f1, tq).total - gamma_expansion(params, grid, f2, tq).total
    denom = delta * float(np.max(w * np.abs(f1 - f2)))
    if denom == 0.0:
        return 0.0
    return float(np.max(w * np.abs(dgamma))) / denom
