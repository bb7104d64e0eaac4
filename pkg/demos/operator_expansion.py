"""Check the chart expansion of the collision operator against its definition.

The nonlinear remainder Gamma(f) can be evaluated two independent ways: by
assembling the four expansion parts (nu_p Pf, -nu_p f, the Hessian remainder,
and their product) from the conserved-chart derivatives, or directly from
nu (M(F) - F)/sqrt(mu) + (I - P)f.  The two agree up to theta-quadrature
error, several orders below the quadratic smallness of the operator itself.
The script sweeps the perturbation amplitude to exhibit the quadratic and
cubic scalings of the individual parts.
"""

import numpy as np

from bgklab import (
    CollisionParams,
    ThetaQuadrature,
    build_grid,
    WeightParams,
    gamma_direct,
    gamma_expansion,
    macroscopic_control_probe,
    nu_p,
)
from bgklab.velocity import moments


def main():
    grid = build_grid(24, 7.0, WeightParams(0.0, 0.1))
    tq = ThetaQuadrature(32)
    params = CollisionParams(1.0, 0.5)
    rng = np.random.default_rng(0)
    shape = rng.standard_normal(grid.n_nodes) * grid.sqrt_mu
    shape /= np.max(grid.w * np.abs(shape))

    print("collision frequency exponents: eta = 1, omega = 0.5")
    print("nu_p identity: the chart path integral reproduces rho^eta T^omega - 1")
    f = 1e-2 * shape
    F = grid.mu + grid.sqrt_mu * f
    rho, _, T = moments(grid, F)
    lhs = nu_p(params, grid, f, tq)
    rhs = rho**params.eta * T**params.omega - 1.0
    print(f"  nu_p = {lhs: .10e}   direct = {rhs: .10e}   gap = {abs(lhs-rhs):.1e}")

    print("\namplitude sweep (32 theta nodes):")
    print("  delta     |direct - parts|   bound 1e-6*|wf|   "
          "|wG1|/d^2  |wG3|/d^2  |wG4|/d^3")
    for delta in (1e-2, 1e-3, 1e-4):
        f = delta * shape
        parts = gamma_expansion(params, grid, f, tq)
        gap = np.max(np.abs(gamma_direct(params, grid, f) - parts.total))
        bound = 1e-6 * np.max(grid.w * np.abs(f))
        n1 = np.max(grid.w * np.abs(parts.g1)) / delta**2
        n3 = np.max(grid.w * np.abs(parts.g3)) / delta**2
        n4 = np.max(grid.w * np.abs(parts.g4)) / delta**3
        print(f"  {delta:7.0e}  {gap:14.3e}    {bound:14.3e}    "
              f"{n1:9.4f}  {n3:9.4f}  {n4:9.4f}")

    print("\nmacroscopic control (||rho-1, U, T-1|| / ||w f||):")
    for delta in (1e-2, 1e-3, 1e-4):
        probe = macroscopic_control_probe(grid, delta * shape)
        print(f"  delta {delta:7.0e}: ratio {probe.ratio:.4f}")


if __name__ == "__main__":
    main()
