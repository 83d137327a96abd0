"""Error measurement against exact or reference solutions, mesh-refinement
convergence studies, and least-squares order estimation.

A study row solves the collocation system at one mesh size, starting from the
restriction of the reference to that grid, and records sup-norm errors of both
components plus the period error.  All rows share one phase condition so that
compared solutions have the same time origin; errors are sampled on a grid
dense with respect to the finest mesh in the study, so nodal superconvergence
cannot flatter the sup norm.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .collocation import DiscreteSolution, solution_from_values
from .errors import (
    DelayExceedsPeriodError,
    InsufficientDataError,
    NewtonNoConvergenceError,
    NonFiniteResidualError,
    SingularJacobianError,
)
from .meshing import build_grid, eval_values_many, make_abscissae
from .problem import CoupledSystem
from .solver import NewtonOptions, newton_solve

__all__ = [
    "ConvergenceTable",
    "StudyRow",
    "convergence_study",
    "default_m_rule",
    "error_norm",
    "estimate_order",
    "reference_solution",
]

#: solver failures that mark a study row as failed instead of aborting the study
_ROW_FAILURES = (
    NewtonNoConvergenceError,
    SingularJacobianError,
    DelayExceedsPeriodError,
    NonFiniteResidualError,
)


def default_m_rule(L: int) -> int:
    """Secondary quadrature level M tied to the mesh: min(5 L, 200)."""
    return min(5 * L, 200)


@dataclass(frozen=True)
class StudyRow:
    L: int
    m: int
    abscissae_kind: str
    M: int
    err_x_sup: float
    err_y_sup: float
    err_omega: float
    runtime_seconds: float


@dataclass(frozen=True)
class ConvergenceTable:
    """Rows of a mesh-refinement study plus fitted orders.

    fitted_orders holds least-squares slopes of log(err) against log(h) for
    (x, y, omega); the omega order is NaN when period errors reach rounding
    zero and no slope can be fitted.  failures lists (L, message) for rows
    whose solve did not converge; they are excluded from the fit.
    """

    rows: tuple
    fitted_orders: tuple
    failures: tuple = ()

    def __post_init__(self):
        Ls = [row.L for row in self.rows]
        if Ls != sorted(Ls):
            raise ValueError("rows must be sorted by L ascending")
        for row in self.rows:
            for e in (row.err_x_sup, row.err_y_sup, row.err_omega):
                if not (math.isfinite(e) and e >= 0.0):
                    raise ValueError(f"row L={row.L} has invalid error {e!r}")


def _as_reference(reference):
    """Normalize a reference into (eval t -> (x, y), omega).

    Accepts a DiscreteSolution, an exact-solution object exposing
    __call__(t) -> (x, y) and .omega, or a pair (callable, omega).
    """
    if isinstance(reference, DiscreteSolution):
        def ev(ts, _sol=reference):
            return eval_values_many(_sol.mu, ts), eval_values_many(_sol.nu, ts)

        return ev, float(reference.omega)
    if isinstance(reference, tuple) and len(reference) == 2:
        ev, omega = reference
        return ev, float(omega)
    if callable(reference) and hasattr(reference, "omega"):
        return reference, float(reference.omega)
    raise TypeError(
        "reference must be a DiscreteSolution, an (evaluator, omega) pair, "
        "or a callable with an omega attribute"
    )


def error_norm(sol: DiscreteSolution, reference, samples_per_interval: int = 16):
    """Sup-norm errors (err_x_sup, err_y_sup, err_omega) of sol vs reference.

    The sup is taken over a uniform sampling of samples_per_interval * L + 1
    points in [0, 1], component-wise over x and y separately.
    """
    if samples_per_interval < 1:
        raise ValueError("samples_per_interval must be >= 1")
    ev, omega_ref = _as_reference(reference)
    ts = np.linspace(0.0, 1.0, samples_per_interval * sol.grid.L + 1)
    x_ref, y_ref = ev(ts)
    err_x = float(np.abs(eval_values_many(sol.mu, ts) - x_ref).max())
    err_y = float(np.abs(eval_values_many(sol.nu, ts) - y_ref).max())
    return err_x, err_y, abs(float(sol.omega) - omega_ref)


def restrict_reference(reference, grid) -> DiscreteSolution:
    """Initial guess for a study row: reference values at the grid's nodes."""
    ev, omega_ref = _as_reference(reference)
    x_vals, y_vals = ev(grid.rep_nodes)
    return solution_from_values(grid, x_vals, y_vals, omega_ref)


def reference_solution(system, phase, L_ref: int, m_ref: int, init,
                       abscissae_kind: str = "gauss_legendre",
                       newton: NewtonOptions = NewtonOptions(polish_iters=2),
                       ) -> DiscreteSolution:
    """Converged solution on a fine grid, used as the truth of a study.

    init may be anything _as_reference accepts; it is restricted to the fine
    grid before solving.  Newton failures propagate.
    """
    grid = build_grid(L_ref, make_abscissae(abscissae_kind, m_ref))
    sol, _ = newton_solve(system, phase, grid, restrict_reference(init, grid), newton)
    return sol


def estimate_order(errors: Sequence) -> float:
    """Least-squares slope of log(err) against log(h) = -log(L)."""
    pts = [(int(L), float(e)) for L, e in errors]
    if len(pts) < 2:
        raise ValueError("need at least 2 points to estimate an order")
    if any(e <= 0.0 for _, e in pts):
        raise ValueError("errors must be positive to fit a log-log slope")
    log_h = np.log([1.0 / L for L, _ in pts])
    log_e = np.log([e for _, e in pts])
    return float(np.polyfit(log_h, log_e, 1)[0])


def convergence_study(system, phase, reference, m: int, abscissae_kind, Ls,
                      M_rule: Callable[[int], int] = default_m_rule,
                      newton: NewtonOptions = NewtonOptions(polish_iters=2),
                      samples_per_interval: int = 16) -> ConvergenceTable:
    """Solve at each mesh size in Ls and fit convergence orders.

    system is a CoupledSystem used for every row, or a callable M -> system
    so the secondary quadrature can follow M_rule.  Every row starts from the
    restriction of the reference and uses the shared phase condition.  Rows
    whose solve fails are recorded in failures and excluded from the fit;
    fewer than 3 surviving rows raises InsufficientDataError.
    """
    Ls = [int(L) for L in Ls]
    if len(Ls) < 3:
        raise ValueError("a convergence study needs at least 3 mesh sizes")
    if any(b <= a for a, b in zip(Ls, Ls[1:])):
        raise ValueError("Ls must be strictly increasing")
    kind_name = str(getattr(abscissae_kind, "value", abscissae_kind))
    L_max = Ls[-1]
    rows, failures = [], []
    for L in Ls:
        M = int(M_rule(L))
        row_system = system(M) if callable(system) else system
        grid = build_grid(L, make_abscissae(abscissae_kind, m))
        init = restrict_reference(reference, grid)
        start = time.perf_counter()
        try:
            sol, _ = newton_solve(row_system, phase, grid, init, newton)
        except _ROW_FAILURES as exc:
            failures.append((L, f"{type(exc).__name__}: {exc}"))
            continue
        runtime = time.perf_counter() - start
        # sample at the density of the finest grid in the study
        per_row = max(samples_per_interval, -(-samples_per_interval * L_max // L))
        err_x, err_y, err_w = error_norm(sol, reference, per_row)
        rows.append(StudyRow(L, m, kind_name, M, err_x, err_y, err_w, runtime))
    if len(rows) < 3:
        detail = "; ".join(f"L={L}: {msg}" for L, msg in failures)
        raise InsufficientDataError(
            f"only {len(rows)} of {len(Ls)} study rows converged ({detail})"
        )
    order_x = estimate_order([(r.L, r.err_x_sup) for r in rows])
    order_y = estimate_order([(r.L, r.err_y_sup) for r in rows])
    w_pts = [(r.L, r.err_omega) for r in rows if r.err_omega > 0.0]
    order_w = estimate_order(w_pts) if len(w_pts) >= 2 else float("nan")
    return ConvergenceTable(tuple(rows), (order_x, order_y, order_w), tuple(failures))
