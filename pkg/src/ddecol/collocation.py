"""Discrete unknowns and residual/Jacobian assembly for the periodic BVP.

The unknown vector stacks the renewal-component values at all representation
nodes, then the differential-component values, then the unknown period:

    z = (mu_{1,0}, mu_{1,1}, ..., mu_{L,m}, nu_{1,0}, ..., nu_{L,m}, omega)

with each node value a d_x- (resp. d_y-) vector stored contiguously.  The
residual stacks the renewal collocation rows, the differential collocation
rows, both periodicity rows and one scalar phase condition row, giving a
square system of dimension (d_x + d_y)(1 + L m) + 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DelayExceedsPeriodError, NonFiniteResidualError
from .meshing import (
    CollocationGrid,
    PiecewisePolynomial,
    colloc_derivatives,
    eval_periodic,  # re-exported: periodic evaluation of a DiscreteSolution
    right_end_value,
)
from .problem import CoupledSystem, _PlanCache, accessor_from_solution, phase_residual

__all__ = [
    "DiscreteSolution",
    "ResidualLayout",
    "assemble_jacobian",
    "assemble_residual",
    "eval_periodic",
    "make_layout",
    "pack",
    "solution_from_values",
    "unpack",
]


@dataclass(frozen=True)
class DiscreteSolution:
    """A periodic candidate solution: two interpolants plus the period."""

    grid: CollocationGrid
    mu: PiecewisePolynomial
    nu: PiecewisePolynomial
    omega: float

    @property
    def d_x(self) -> int:
        return self.mu.dim

    @property
    def d_y(self) -> int:
        return self.nu.dim

    @property
    def n_unknowns(self) -> int:
        return (self.d_x + self.d_y) * self.grid.n_rep + 1


def solution_from_values(grid, mu_values, nu_values, omega) -> DiscreteSolution:
    mu_values = np.asarray(mu_values, dtype=float)
    nu_values = np.asarray(nu_values, dtype=float)
    if mu_values.ndim == 1:
        mu_values = mu_values[:, None]
    if nu_values.ndim == 1:
        nu_values = nu_values[:, None]
    return DiscreteSolution(
        grid,
        PiecewisePolynomial(grid, mu_values),
        PiecewisePolynomial(grid, nu_values),
        float(omega),
    )


def pack(sol: DiscreteSolution) -> np.ndarray:
    """Flatten a discrete solution into the unknown vector."""
    return np.concatenate(
        (sol.mu.values.ravel(), sol.nu.values.ravel(), [sol.omega])
    )


def unpack(z: np.ndarray, grid: CollocationGrid, d_x: int, d_y: int) -> DiscreteSolution:
    """Rebuild a discrete solution from the unknown vector."""
    z = np.asarray(z, dtype=float)
    n = grid.n_rep
    expected = (d_x + d_y) * n + 1
    if z.shape != (expected,):
        raise ValueError(f"unknown vector must have shape ({expected},), got {z.shape}")
    mu = z[: n * d_x].reshape(n, d_x)
    nu = z[n * d_x : n * (d_x + d_y)].reshape(n, d_y)
    return DiscreteSolution(
        grid, PiecewisePolynomial(grid, mu), PiecewisePolynomial(grid, nu), float(z[-1])
    )


@dataclass(frozen=True)
class ResidualLayout:
    """Row bookkeeping of the assembled residual.

    Collocation rows are ordered interval-major, node-minor, component-last;
    the anchor-value unknowns mu(0), nu(0) are closed by the periodicity rows.
    """

    n_colloc: int
    d_x: int
    d_y: int
    re_rows: slice = field(init=False)
    rfde_rows: slice = field(init=False)
    periodicity_re: slice = field(init=False)
    periodicity_rfde: slice = field(init=False)
    phase_row: int = field(init=False)
    n_rows: int = field(init=False)

    def __post_init__(self):
        nc, dx, dy = self.n_colloc, self.d_x, self.d_y
        object.__setattr__(self, "re_rows", slice(0, nc * dx))
        object.__setattr__(self, "rfde_rows", slice(nc * dx, nc * (dx + dy)))
        base = nc * (dx + dy)
        object.__setattr__(self, "periodicity_re", slice(base, base + dx))
        object.__setattr__(self, "periodicity_rfde", slice(base + dx, base + dx + dy))
        object.__setattr__(self, "phase_row", base + dx + dy)
        object.__setattr__(self, "n_rows", base + dx + dy + 1)

    def label(self, row: int) -> str:
        if row < self.re_rows.stop:
            return f"renewal collocation row {row}"
        if row < self.rfde_rows.stop:
            return f"differential collocation row {row - self.rfde_rows.start}"
        if row < self.periodicity_re.stop:
            return "renewal periodicity row"
        if row < self.periodicity_rfde.stop:
            return "differential periodicity row"
        return "phase condition row"


def make_layout(grid: CollocationGrid, d_x: int, d_y: int) -> ResidualLayout:
    return ResidualLayout(grid.L * grid.m, d_x, d_y)


def assemble_residual(system: CoupledSystem, phase, grid: CollocationGrid,
                      z: np.ndarray, cache: _PlanCache | None = None) -> np.ndarray:
    """Residual of the collocated periodic boundary value problem at z.

    Rows: mu(t_ij) - F(...), nu'(t_ij) - omega * G(...), mu(0) - mu(1),
    nu(0) - nu(1), phase.  Raises DelayExceedsPeriodError when the candidate
    period does not cover the delay (tau/omega > 1) and NonFiniteResidualError
    if any row comes out NaN/inf.
    """
    sol = unpack(z, grid, system.d_x, system.d_y)
    omega = sol.omega
    if not omega >= system.tau * (1.0 - 1e-12):
        raise DelayExceedsPeriodError(
            f"period omega={omega} does not cover the delay tau={system.tau}"
        )
    times = grid.colloc.ravel()
    acc = accessor_from_solution(sol, times, cache)
    F = np.asarray(system.rhs_F(acc, omega), dtype=float)
    G = np.asarray(system.rhs_G(acc, omega), dtype=float)
    nc = times.size
    if F.shape != (nc, system.d_x):
        raise ValueError(f"rhs_F must return shape ({nc}, {system.d_x}), got {F.shape}")
    if G.shape != (nc, system.d_y):
        raise ValueError(f"rhs_G must return shape ({nc}, {system.d_y}), got {G.shape}")
    re_rows = sol.mu.values[1:] - F
    rfde_rows = colloc_derivatives(sol.nu) - omega * G
    per_re = sol.mu.values[0] - right_end_value(sol.mu)
    per_rfde = sol.nu.values[0] - right_end_value(sol.nu)
    ph = phase_residual(phase, sol, cache)
    r = np.concatenate(
        (re_rows.ravel(), rfde_rows.ravel(), per_re, per_rfde, [ph])
    )
    if not np.all(np.isfinite(r)):
        row = int(np.flatnonzero(~np.isfinite(r))[0])
        layout = make_layout(grid, system.d_x, system.d_y)
        raise NonFiniteResidualError(row, layout.label(row))
    return r


def assemble_jacobian(system: CoupledSystem, phase, grid: CollocationGrid,
                      z: np.ndarray, step_scale: float | None = None,
                      cache: _PlanCache | None = None,
                      base_residual: np.ndarray | None = None) -> np.ndarray:
    """Forward finite-difference Jacobian of the residual, column by column.

    Column k uses the step sqrt(machine eps) * max(|z_k|, 1) (scaled by
    step_scale when given).  Interpolation geometry is shared across columns
    through the plan cache, since only the final column perturbs the period.
    """
    z = np.asarray(z, dtype=float)
    if cache is None:
        cache = _PlanCache()
    if base_residual is None:
        base_residual = assemble_residual(system, phase, grid, z, cache)
    n = z.size
    scale = np.sqrt(np.finfo(float).eps) if step_scale is None else float(step_scale)
    J = np.empty((n, n))
    zk = z.copy()
    for k in range(n):
        delta = scale * max(abs(z[k]), 1.0)
        zk[k] = z[k] + delta
        J[:, k] = (assemble_residual(system, phase, grid, zk, cache) - base_residual) / delta
        zk[k] = z[k]
    return J
