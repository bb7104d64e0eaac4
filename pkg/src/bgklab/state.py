"""Gridded kinetic state in absolute (F) and perturbation (f) form.

The value array is cell-major: shape (n_x, n_nodes) with velocity nodes
contiguous per cell, which is the layout the collision substep wants.
Checkpoints are raw little-endian binary: a fixed header

    int64 n_x, int64 n_v, float64 v_max, uint8 tag (0=absolute, 1=perturbation),
    float64 beta, float64 theta, float64 eta, float64 omega

followed by the row-major float64 values.  The header does not carry the slab
length, so ``load_state`` defaults dx to 1/n_x; restore the true L from the
run manifest when restarting.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .collision import CollisionParams
from .errors import ConfigError, NumericsError
from .velocity import VelocityGrid, WeightParams, build_grid

_HEADER = struct.Struct("<qqdBdddd")

ABSOLUTE = "absolute"
PERTURBATION = "perturbation"


@dataclass
class DistributionField:
    """Kinetic state on (cells x velocity nodes)."""

    grid: VelocityGrid
    data: np.ndarray
    kind: str
    dx: float

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=float)
        if self.data.ndim != 2 or self.data.shape[1] != self.grid.n_nodes:
            raise ConfigError(
                f"field data must have shape (n_x, {self.grid.n_nodes}), got {self.data.shape}"
            )
        if self.kind not in (ABSOLUTE, PERTURBATION):
            raise ConfigError(f"unknown representation {self.kind!r}")
        if not np.all(np.isfinite(self.data)):
            raise NumericsError("field contains non-finite values")

    @property
    def n_x(self) -> int:
        return self.data.shape[0]

    @property
    def is_absolute(self) -> bool:
        return self.kind == ABSOLUTE

    def copy(self) -> "DistributionField":
        return DistributionField(self.grid, self.data.copy(), self.kind, self.dx)

    def min_value(self) -> float:
        return float(self.data.min())


@dataclass
class MacroFields:
    """Per-cell moments and projection coefficients."""

    rho: np.ndarray
    U: np.ndarray          # (n_x, 3)
    T: np.ndarray
    a: np.ndarray
    b: np.ndarray          # (n_x, 3)
    c: np.ndarray


def macro_fields(field: DistributionField) -> MacroFields:
    """Per-cell moments and projection coefficients of a state."""
    from .velocity import moments as _moments

    g = field.grid
    F = field.data if field.is_absolute else g.mu + g.sqrt_mu * field.data
    f = (F - g.mu) / g.sqrt_mu
    n_x = field.n_x
    rho = np.empty(n_x)
    U = np.empty((n_x, 3))
    T = np.empty(n_x)
    for i in range(n_x):
        rho[i], U[i], T[i] = _moments(g, F[i])
    coef = g.coefficients(f)
    return MacroFields(rho, U, T, coef[:, 0], coef[:, 1:4], coef[:, 4])


def to_perturbation(field: DistributionField) -> DistributionField:
    """f = (F - mu)/sqrt(mu)."""
    if not field.is_absolute:
        raise ConfigError("to_perturbation expects an absolute field")
    g = field.grid
    f = (field.data - g.mu) / g.sqrt_mu
    return DistributionField(g, f, PERTURBATION, field.dx)


def to_absolute(field: DistributionField) -> DistributionField:
    """F = mu + sqrt(mu) f."""
    if field.is_absolute:
        raise ConfigError("to_absolute expects a perturbation field")
    g = field.grid
    F = g.mu + g.sqrt_mu * field.data
    return DistributionField(g, F, ABSOLUTE, field.dx)


def total_perturbation_mass(field: DistributionField) -> float:
    """Spatial sum of <f, chi_0> times cell volume."""
    if field.is_absolute:
        raise ConfigError("total_perturbation_mass expects a perturbation field")
    g = field.grid
    per_cell = field.data @ (g.q * g.chi[0])
    return float(field.dx * per_cell.sum())


def save_state(path, field: DistributionField, collision: CollisionParams) -> None:
    g = field.grid
    tag = 0 if field.is_absolute else 1
    header = _HEADER.pack(
        field.n_x, g.n_per_axis, g.v_max, tag,
        g.wp.beta, g.wp.theta, collision.eta, collision.omega,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(field.data, dtype="<f8").tobytes())


def load_state(path, grid: VelocityGrid | None = None, dx: float | None = None):
    """Read a checkpoint; returns (field, collision_params).

    A matching grid is rebuilt from the header unless one is supplied.
    """
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        n_x, n_v, v_max, tag, beta, theta, eta, omega = _HEADER.unpack(raw)
        body = fh.read()
    if grid is None:
        grid = build_grid(n_v, v_max, WeightParams(beta, theta))
    elif grid.n_per_axis != n_v or grid.v_max != v_max:
        raise ConfigError("supplied grid does not match the checkpoint header")
    data = np.frombuffer(body, dtype="<f8").reshape(n_x, grid.n_nodes).copy()
    kind = ABSOLUTE if tag == 0 else PERTURBATION
    field = DistributionField(grid, data, kind, dx if dx is not None else 1.0 / n_x)
    return field, CollisionParams(eta, omega)
