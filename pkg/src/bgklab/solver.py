"""Slab initial-boundary value solver and the two iteration schemes.

The nonlinear evolution advances the absolute distribution F by operator
splitting: per-velocity-node upwind transport in x1 with diffuse-reflection
ghost values at both walls, and the exact relaxation substep toward the
moment-matched local Maxwellian (Strang by default, Lie available).  With
first-order transport every substep is a convex combination of nonnegative
data, so positivity is structural; mass is conserved to roundoff because the
wall renormalization makes the reflected inflow cancel the upwind outflow
exactly and the relaxation target reproduces the discrete moments exactly.

``mode="linear"`` evolves the perturbation f with the linearized collision
substep f' = Pf + e^{-dt}(f - Pf) and the perturbation-form wall operator;
this is the configuration whose L2 norm must decay monotonically.

Two iteration schemes over a stored time horizon:

* linear_picard_solve: f^{l+1} solves d_t f + v d_x f + f = P f^l + g with
  the wall source damped by (1 - 1/j) and taken from the previous iterate.
* positivity_iteration: F^{l+1} solves d_t F + v d_x F =
  nu^l (M(F^l) - F^{l+1}) with the wall inflow built from F^l; every update
  is a nonnegative affine combination, so iterates stay nonnegative.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .boundary import build_wall
from .collision import CollisionParams
from .diagnostics import MacroSeries, weighted_linf
from .errors import ConfigError, SchemeViolationError
from .state import ABSOLUTE
from .velocity import VelocityGrid, WeightParams, build_grid

NEGATIVITY_TOL = -1e-13
MASS_DRIFT_TOL = 1e-10
TRAJECTORY_BYTES_LIMIT = 2 << 30

IC_PRESETS = ("cosine-density", "cosine-temperature", "gaussian-bump", "random")


@dataclass
class SolverConfig:
    n_x: int = 64
    length: float = 2.0
    cfl: float = 0.9
    dt: float | None = None
    t_final: float = 10.0
    delta: float = 1e-2
    ic: str = "cosine-density"
    n_v: int = 24
    v_max: float = 7.0
    weight: WeightParams = field(default_factory=WeightParams)
    collision: CollisionParams = field(default_factory=CollisionParams)
    transport_order: int = 1
    limiter: str = "minmod"
    splitting: str = "strang"
    mode: str = "nonlinear"
    out_interval: float = 0.1
    seed: int = 0
    fit_window: tuple = (2.0, 10.0)

    def validate(self) -> "SolverConfig":
        self.weight.check()
        if self.n_x < 2:
            raise ConfigError("n_x must be >= 2")
        if not 0.0 < self.cfl <= 1.0:
            raise ConfigError(f"CFL must lie in (0, 1], got {self.cfl}")
        if self.delta < 0.0:
            raise ConfigError("delta must be >= 0")
        if self.ic not in IC_PRESETS:
            raise ConfigError(f"unknown initial-condition preset {self.ic!r}")
        if self.transport_order not in (1, 2):
            raise ConfigError("transport_order must be 1 or 2")
        if self.limiter not in ("minmod", "none"):
            raise ConfigError("limiter must be 'minmod' or 'none'")
        if self.splitting not in ("strang", "lie"):
            raise ConfigError("splitting must be 'strang' or 'lie'")
        if self.mode not in ("nonlinear", "linear"):
            raise ConfigError("mode must be 'nonlinear' or 'linear'")
        if self.out_interval <= 0.0 or self.t_final <= 0.0:
            raise ConfigError("t_final and out_interval must be positive")
        dt_max = self.cfl * self.dx / self.v_max
        if self.dt is not None and self.dt > dt_max * (1.0 + 1e-12):
            raise ConfigError(
                f"dt={self.dt} violates the CFL bound {dt_max:.3e} "
                f"(CFL {self.cfl}, dx {self.dx:.3e}, v_max {self.v_max})"
            )
        return self

    @property
    def dx(self) -> float:
        return self.length / self.n_x

    def resolve_dt(self):
        """Time step and per-output step count; dt divides out_interval."""
        dt_max = self.cfl * self.dx / self.v_max if self.dt is None else self.dt
        per_out = max(1, math.ceil(self.out_interval / dt_max - 1e-12))
        return self.out_interval / per_out, per_out


def cell_centers(cfg: SolverConfig) -> np.ndarray:
    return (np.arange(cfg.n_x) + 0.5) * cfg.dx


def initial_perturbation(cfg: SolverConfig, grid: VelocityGrid) -> np.ndarray:
    """Zero-total-mass perturbation presets, amplitude delta."""
    x = cell_centers(cfg)
    if cfg.ic == "cosine-density":
        prof = np.cos(2.0 * math.pi * x / cfg.length)
        return cfg.delta * prof[:, None] * grid.chi[0][None, :]
    if cfg.ic == "cosine-temperature":
        prof = np.cos(2.0 * math.pi * x / cfg.length)
        return cfg.delta * prof[:, None] * grid.chi[4][None, :]
    if cfg.ic == "gaussian-bump":
        prof = np.exp(-(((x - 0.5 * cfg.length) / (0.1 * cfg.length)) ** 2))
        prof = prof - prof.mean()  # keep the total perturbation mass zero
        return cfg.delta * prof[:, None] * grid.chi[0][None, :]
    rng = np.random.default_rng(cfg.seed)
    coef = rng.standard_normal((cfg.n_x, 5))
    f = coef @ grid.chi
    # remove the discrete total mass exactly (Gram cross terms included)
    cell_mass = f @ (grid.q * grid.chi[0])
    f -= cell_mass.mean() / grid.gram[0, 0] * grid.chi[0][None, :]
    scale = np.max(grid.w * np.abs(f))
    return cfg.delta * f / scale


@dataclass
class RunRecord:
    t: np.ndarray
    linf_w: np.ndarray
    l2: np.ndarray
    mass: np.ndarray
    pert_mass: np.ndarray
    min_F: np.ndarray
    flux_residual: np.ndarray
    macro: MacroSeries
    config: SolverConfig
    final_data: np.ndarray = None   # F (nonlinear) or f (linear) at t_final

    def rows(self):
        for k in range(self.t.size):
            yield (self.t[k], self.linf_w[k], self.l2[k], self.mass[k],
                   self.min_F[k], self.flux_residual[k])


class SlabBGK:
    """Stateful driver holding the grid, walls, and tabulated wall profiles."""

    def __init__(self, cfg: SolverConfig):
        cfg.validate()
        self.cfg = cfg
        self.grid = build_grid(cfg.n_v, cfg.v_max, cfg.weight)
        g = self.grid
        self.wall_l = build_wall(g, np.array([-1.0, 0.0, 0.0]))
        self.wall_r = build_wall(g, np.array([1.0, 0.0, 0.0]))
        self.dt, self.steps_per_out = cfg.resolve_dt()
        self.n_out = int(round(cfg.t_final / cfg.out_interval))
        if abs(self.n_out * cfg.out_interval - cfg.t_final) > 1e-9 * cfg.t_final:
            raise ConfigError("t_final must be a multiple of out_interval")

        # perturbation-form wall factors (used in linear mode / Picard)
        self.pert_flux_l = self.wall_l.flux_weight_out * g.sqrt_mu
        self.pert_flux_r = self.wall_r.flux_weight_out * g.sqrt_mu
        mask_l = np.zeros(g.n_nodes)
        mask_l[self.wall_l.in_idx] = 1.0
        mask_r = np.zeros(g.n_nodes)
        mask_r[self.wall_r.in_idx] = 1.0
        self.pert_emission_l = self.wall_l.cmu_tilde * g.sqrt_mu * mask_l
        self.pert_emission_r = self.wall_r.cmu_tilde * g.sqrt_mu * mask_r

        # moment weights and flux-functional tabulations
        self.mom_w = np.ascontiguousarray(
            np.stack([g.q, g.q * g.vx, g.q * g.vy, g.q * g.vz, g.q * g.vsq])
        )
        tp = np.empty((3, g.n_nodes))
        vcomp = (g.vx, g.vy, g.vz)
        for i in range(3):
            tp[i] = vcomp[i] * g.vx * g.sqrt_mu
            if i == 0:
                tp[i] -= g.vsq / 3.0 * g.sqrt_mu
        self.theta_x_q = tp * g.q
        self.lambda_x_q = 0.1 * (g.vsq - 5.0) * g.vx * g.sqrt_mu * g.q
        self._neg_warned = False

    # -- wall ghosts ------------------------------------------------------

    def _outgoing_faces(self, data, dt):
        """Outgoing wall-face values; second-order transport reconstructs
        them with the same one-sided slopes the sweep uses, so the reflected
        inflow cancels the outgoing numerical flux exactly."""
        if self.cfg.transport_order == 1 or data.shape[0] < 2:
            return data[0], data[-1]
        cour = self.grid.vx * (dt / self.cfg.dx)
        s0 = data[1] - data[0]
        sN = data[-1] - data[-2]
        face_l = data[0] - 0.5 * (1.0 + cour) * s0
        face_r = data[-1] + 0.5 * (1.0 - cour) * sN
        return face_l, face_r

    def ghosts_absolute(self, F, dt):
        face_l, face_r = self._outgoing_faces(F, dt)
        phi_l = float(self.wall_l.flux_weight_out @ face_l)
        phi_r = float(self.wall_r.flux_weight_out @ face_r)
        return self.wall_l.emission * phi_l, self.wall_r.emission * phi_r

    def ghosts_perturbation(self, f, dt, damping: float = 1.0):
        # emission profiles already carry cmu * sqrt(mu) on the incoming half
        face_l, face_r = self._outgoing_faces(f, dt)
        gl = damping * self.pert_emission_l * float(self.pert_flux_l @ face_l)
        gr = damping * self.pert_emission_r * float(self.pert_flux_r @ face_r)
        return gl, gr

    # -- substeps ---------------------------------------------------------

    def transport(self, data, dt, ghost_l, ghost_r):
        g = self.grid
        cour = g.vx * (dt / self.cfg.dx)
        out = np.empty_like(data)
        if self.cfg.transport_order == 1:
            _kernels.upwind1(data, cour, ghost_l, ghost_r, out)
        else:
            _kernels.muscl2(data, cour, ghost_l, ghost_r,
                            self.cfg.limiter == "minmod", out)
        return out

    def relax_nonlinear(self, F, dt):
        g = self.grid
        out = np.empty_like(F)
        macro = np.empty((F.shape[0], 6))
        _kernels.relax_cells(F, g.axis_nodes, g.h**3, dt,
                             self.cfg.collision.eta, self.cfg.collision.omega,
                             out, macro)
        if macro[:, 0].min() < 0.0:
            bad = int(np.flatnonzero(macro[:, 0] < 0.0)[0])
            raise SchemeViolationError(f"degenerate moments in cell {bad}")
        return out, macro

    def relax_linear(self, f, dt):
        g = self.grid
        out = np.empty_like(f)
        _kernels.project_relax(f, g.chi, g.chi_q, math.exp(-dt), out)
        return out

    def step(self, data, dt=None):
        """One full splitting step; data is F (nonlinear) or f (linear)."""
        dt = self.dt if dt is None else dt
        nonlinear = self.cfg.mode == "nonlinear"

        def relax(d, h):
            return self.relax_nonlinear(d, h)[0] if nonlinear else self.relax_linear(d, h)

        def trans(d):
            gl, gr = (self.ghosts_absolute(d, dt) if nonlinear
                      else self.ghosts_perturbation(d, dt))
            return self.transport(d, dt, gl, gr)

        if self.cfg.splitting == "strang":
            return relax(trans(relax(data, 0.5 * dt)), 0.5 * dt)
        return relax(trans(data), dt)

    # -- diagnostics ------------------------------------------------------

    def perturbation_of(self, data):
        if self.cfg.mode == "linear":
            return data
        return (data - self.grid.mu) / self.grid.sqrt_mu

    def absolute_of(self, data):
        if self.cfg.mode == "nonlinear":
            return data
        return self.grid.mu + self.grid.sqrt_mu * data

    def total_mass(self, data):
        F = self.absolute_of(data)
        return float(self.cfg.dx * np.dot(F.sum(axis=0), self.grid.q))

    def wall_flux_residual(self, data):
        """Net discrete mass flux through both walls for the scheme's own
        face values with the reflected inflow; zero up to roundoff."""
        F = self.absolute_of(data)
        g = self.grid
        face_l, face_r = self._outgoing_faces(F, self.dt)
        res = 0.0
        for wall, face in ((self.wall_l, face_l), (self.wall_r, face_r)):
            phi = float(wall.flux_weight_out @ face)
            trace = face.copy()
            trace[wall.in_idx] = wall.emission[wall.in_idx] * phi
            res += abs(float(np.dot(g.q * wall.nv, trace)))
        return res

    def macro_row(self, f):
        coef = np.empty((f.shape[0], 5))
        _kernels.cell_coefficients(f, self.grid.chi_q, coef)
        f_perp = f - coef @ self.grid.chi
        # einsum keeps these reductions single-threaded and order-fixed
        theta_x = np.einsum("cn,kn->ck", f_perp, self.theta_x_q)
        lambda_x = np.einsum("cn,n->c", f_perp, self.lambda_x_q)
        return coef, theta_x, lambda_x

    # -- main loop --------------------------------------------------------

    def run(self) -> RunRecord:
        cfg = self.cfg
        g = self.grid
        f0 = initial_perturbation(cfg, g)
        data = f0 if cfg.mode == "linear" else g.mu + g.sqrt_mu * f0

        n_rec = self.n_out + 1
        rec = {name: np.zeros(n_rec) for name in
               ("t", "linf_w", "l2", "mass", "pert_mass", "min_F", "flux_residual")}
        a = np.zeros((n_rec, cfg.n_x))
        b = np.zeros((n_rec, cfg.n_x, 3))
        c = np.zeros((n_rec, cfg.n_x))
        theta_x = np.zeros((n_rec, cfg.n_x, 3))
        lambda_x = np.zeros((n_rec, cfg.n_x))

        mass0 = None
        for k in range(n_rec):
            t = k * cfg.out_interval
            if k > 0:
                for _ in range(self.steps_per_out):
                    data = self.step(data)
            f = self.perturbation_of(data)
            F = self.absolute_of(data)
            rec["t"][k] = t
            rec["linf_w"][k] = weighted_linf(g, f)
            rec["l2"][k] = math.sqrt(float(cfg.dx * np.sum((f * f) @ g.q)))
            mass = float(cfg.dx * np.dot(F.sum(axis=0), g.q))
            rec["mass"][k] = mass
            rec["pert_mass"][k] = float(cfg.dx * (f.sum(axis=0) @ (g.q * g.chi[0])))
            rec["min_F"][k] = float(F.min())
            rec["flux_residual"][k] = self.wall_flux_residual(data)
            coef, th, lam = self.macro_row(f)
            a[k], b[k], c[k] = coef[:, 0], coef[:, 1:4], coef[:, 4]
            theta_x[k], lambda_x[k] = th, lam

            if mass0 is None:
                mass0 = mass
            drift = abs(mass - mass0) / max(abs(mass0), 1.0)
            if drift > MASS_DRIFT_TOL:
                raise SchemeViolationError(
                    f"mass drift {drift:.3e} exceeds {MASS_DRIFT_TOL} at t={t}"
                )
            if rec["min_F"][k] < NEGATIVITY_TOL:
                if cfg.mode == "nonlinear" and cfg.transport_order == 1:
                    raise SchemeViolationError(
                        f"min F = {rec['min_F'][k]:.3e} below {NEGATIVITY_TOL} at t={t}"
                    )
                if not self._neg_warned:
                    warnings.warn(
                        f"min F = {rec['min_F'][k]:.3e} below {NEGATIVITY_TOL} "
                        "(expected: scheme is not positivity certified)",
                        RuntimeWarning,
                    )
                    self._neg_warned = True

        macro = MacroSeries(rec["t"].copy(), a, b, c, theta_x, lambda_x)
        return RunRecord(rec["t"], rec["linf_w"], rec["l2"], rec["mass"],
                         rec["pert_mass"], rec["min_F"], rec["flux_residual"],
                         macro, cfg, data)


def transport_step(grid, walls, F, dx, dt, order=1, representation=ABSOLUTE,
                   limiter="minmod"):
    """One upwind transport step with diffuse-reflection ghost values.

    ``walls`` is the (left, right) pair from build_wall; CFL is checked
    before any work.
    """
    wall_l, wall_r = walls
    F = np.ascontiguousarray(F, dtype=float)
    cmax = float(np.max(np.abs(grid.vx))) * dt / dx
    if cmax > 1.0 + 1e-12:
        raise ConfigError(f"CFL violation: max courant {cmax:.3f} > 1")
    cour = grid.vx * (dt / dx)
    if order == 1 or F.shape[0] < 2:
        face_l, face_r = F[0], F[-1]
    else:
        face_l = F[0] - 0.5 * (1.0 + cour) * (F[1] - F[0])
        face_r = F[-1] + 0.5 * (1.0 - cour) * (F[-1] - F[-2])
    if representation == ABSOLUTE:
        gl = wall_l.emission * float(wall_l.flux_weight_out @ face_l)
        gr = wall_r.emission * float(wall_r.flux_weight_out @ face_r)
    else:
        fl = wall_l.flux_weight_out * grid.sqrt_mu
        fr = wall_r.flux_weight_out * grid.sqrt_mu
        gl = np.zeros(grid.n_nodes)
        gl[wall_l.in_idx] = wall_l.cmu_tilde * grid.sqrt_mu[wall_l.in_idx] * float(fl @ face_l)
        gr = np.zeros(grid.n_nodes)
        gr[wall_r.in_idx] = wall_r.cmu_tilde * grid.sqrt_mu[wall_r.in_idx] * float(fr @ face_r)
    out = np.empty_like(F)
    if order == 1:
        _kernels.upwind1(F, cour, gl, gr, out)
    else:
        _kernels.muscl2(F, cour, gl, gr, limiter == "minmod", out)
    return out


def _trajectory_array(n_steps, n_x, n_nodes):
    need = (n_steps + 1) * n_x * n_nodes * 8
    if need > TRAJECTORY_BYTES_LIMIT:
        raise ConfigError(
            f"iteration trajectory would need {need/2**30:.1f} GiB; "
            "use a smaller grid or horizon"
        )
    return np.zeros((n_steps + 1, n_x, n_nodes))


@dataclass
class PicardResult:
    final_fields: list
    diffs: np.ndarray
    ratios: np.ndarray
    contracting: bool
    diverged: bool
    fixed_point_residual: float


def linear_picard_solve(cfg: SolverConfig, f0, g_source, iterations: int,
                        j_damp: int = 2) -> PicardResult:
    """Damped Picard iteration for the linear problem with source g.

    Each iterate solves d_t f + v d_x f + f = P f_prev + g over [0, t_final]
    with wall inflow (1 - 1/j) P_gamma f_prev; the zeroth iterate is the
    constant-in-time initial state.  Requires P g = 0.
    """
    if j_damp < 2:
        raise ConfigError("boundary damping parameter j must be >= 2")
    solver = SlabBGK(replace(cfg, mode="linear"))
    g = solver.grid
    f0 = np.ascontiguousarray(f0, dtype=float)
    g_source = np.ascontiguousarray(g_source, dtype=float)
    g_coef = np.empty((cfg.n_x, 5))
    _kernels.cell_coefficients(g_source, g.chi_q, g_coef)
    scale = float(np.max(np.abs(g_source))) + 1e-300
    if float(np.max(np.abs(g_coef))) > 1e-10 * scale:
        raise ConfigError("source g must satisfy P g = 0")

    dt = solver.dt
    n_steps = solver.n_out * solver.steps_per_out
    damping = 1.0 - 1.0 / j_damp
    alpha = math.exp(-dt)

    old = _trajectory_array(n_steps, cfg.n_x, g.n_nodes)
    old[:] = f0[None, :, :]
    diffs = []
    finals = []
    w = g.w

    def sweep(prev):
        new = np.empty_like(prev)
        new[0] = f0
        coef = np.empty((cfg.n_x, 5))
        for n in range(n_steps):
            gl, gr = solver.ghosts_perturbation(prev[n], dt, damping=damping)
            moved = solver.transport(new[n], dt, gl, gr)
            _kernels.cell_coefficients(prev[n], g.chi_q, coef)
            source = coef @ g.chi + g_source
            new[n + 1] = alpha * moved + (1.0 - alpha) * source
        return new

    for _ in range(iterations):
        new = sweep(old)
        diffs.append(float(np.max(w[None, None, :] * np.abs(new - old))))
        finals.append(new[-1].copy())
        old = new

    diffs = np.array(diffs)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = diffs[1:] / diffs[:-1]
    ratios = ratios[np.isfinite(ratios)]
    run = 0
    diverged = False
    for r in ratios:
        run = run + 1 if r >= 1.0 else 0
        if run >= 5:
            diverged = True
    tail = ratios[1:] if ratios.size > 1 else ratios
    contracting = bool(tail.size and np.all(tail < 1.0))
    residual = float(np.max(w[None, None, :] * np.abs(sweep(old) - old)))
    return PicardResult(finals, diffs, ratios, contracting, diverged, residual)


@dataclass
class PositivityResult:
    final_fields: list
    diffs: np.ndarray
    ratios: np.ndarray
    min_value: float
    min_nu: float
    contracting: bool


def positivity_iteration(cfg: SolverConfig, F0, t_star: float,
                         iterations: int) -> PositivityResult:
    """The positivity-preserving iteration on [0, t_star].

    F^{l+1} is transported with wall inflow built from F^l and damped toward
    M(F^l) by the exact exponential factor e^{-nu^l dt}; all ingredients are
    nonnegative, so every iterate is nonnegative.  In the smallness regime
    the damping frequency must stay above 1/2; that bound is checked, not
    assumed.
    """
    work = replace(cfg, mode="nonlinear", t_final=t_star,
                   out_interval=t_star, transport_order=1)
    solver = SlabBGK(work)
    g = solver.grid
    F0 = np.ascontiguousarray(F0, dtype=float)
    if float(F0.min()) < 0.0:
        raise ConfigError("positivity iteration needs F0 >= 0")

    dt = solver.dt
    n_steps = solver.n_out * solver.steps_per_out
    f0_pert = (F0 - g.mu) / g.sqrt_mu
    smallness = float(np.max(g.w * np.abs(f0_pert))) <= 0.1

    old = _trajectory_array(n_steps, cfg.n_x, g.n_nodes)
    old[:] = F0[None, :, :]
    diffs = []
    finals = []
    min_value = float(F0.min())
    min_nu = math.inf
    eta, omega = cfg.collision.eta, cfg.collision.omega

    for _ in range(iterations):
        new = np.empty_like(old)
        new[0] = F0
        for n in range(n_steps):
            prev = old[n]
            mom = np.einsum("cn,kn->ck", prev, solver.mom_w)
            rho = mom[:, 0]
            if rho.min() < 1e-12:
                raise SchemeViolationError("degenerate density in iteration source")
            U = mom[:, 1:4] / rho[:, None]
            T = (mom[:, 4] / rho - np.sum(U * U, axis=1)) / 3.0
            if T.min() <= 1e-12:
                raise SchemeViolationError("degenerate temperature in iteration source")
            nu = rho**eta * T**omega
            min_nu = min(min_nu, float(nu.min()))
            if smallness and nu.min() <= 0.5:
                raise SchemeViolationError(
                    f"damping frequency {nu.min():.3f} <= 1/2 inside the smallness regime"
                )
            macro = np.column_stack([rho, U, T])
            M = np.empty_like(prev)
            _kernels.maxwellian_cells(macro, g.axis_nodes, g.h**3, M)
            gl, gr = solver.ghosts_absolute(prev, dt)
            moved = solver.transport(new[n], dt, gl, gr)
            out = np.empty_like(moved)
            _kernels.affine_relax(moved, np.exp(-nu * dt), M, out)
            new[n + 1] = out
            step_min = float(out.min())
            min_value = min(min_value, step_min)
            if step_min < NEGATIVITY_TOL:
                raise SchemeViolationError(
                    f"positivity iteration produced min F = {step_min:.3e}"
                )
        diffs.append(float(np.max(g.w[None, None, :]
                                  * np.abs(new - old) / g.sqrt_mu[None, None, :])))
        finals.append(new[-1].copy())
        old = new

    diffs = np.array(diffs)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = diffs[1:] / diffs[:-1]
    ratios = ratios[np.isfinite(ratios)]
    contracting = bool(ratios.size and np.all(ratios < 1.0))
    return PositivityResult(finals, diffs, ratios, min_value, min_nu, contracting)
