"""Damped Newton iteration for the collocation system and natural-parameter
continuation of periodic-solution branches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .collocation import (
    DiscreteSolution,
    assemble_jacobian,
    assemble_residual,
    pack,
    solution_from_values,
    unpack,
)
from .errors import (
    DelayExceedsPeriodError,
    NewtonNoConvergenceError,
    NonFiniteResidualError,
    SingularJacobianError,
)
from .meshing import eval_values_many
from .problem import IntegralPhase, _PlanCache

__all__ = [
    "Branch",
    "BranchPoint",
    "ContinuationOptions",
    "NewtonDiagnostics",
    "NewtonOptions",
    "continue_branch",
    "newton_solve",
]


@dataclass(frozen=True)
class NewtonOptions:
    max_iters: int = 30
    #: convergence when the sup norm of the residual drops below this
    residual_tol: float = 1e-10
    #: convergence when the sup norm of the update, relative to the iterate,
    #: drops below this (rounding floor reached)
    step_tol: float = 1e-12
    #: halvings tried before a step that fails to reduce the residual gives up
    max_halvings: int = 8
    #: finite-difference scale for the Jacobian; None means sqrt(eps)
    fd_step_scale: Optional[float] = None
    #: extra iterations attempted after residual_tol is met, driving the
    #: residual toward the rounding floor; they stop (without error) at the
    #: first step that fails to improve it
    polish_iters: int = 0
    #: when set, linear solves use a truncated-SVD pseudo-inverse dropping
    #: singular values below svd_rcond * s_max.  The collocation Jacobian
    #: carries a quasi-null mode (interior-node shifts that the chained
    #: interval endpoints cannot see) whose tiny singular value otherwise
    #: amplifies rounding-level residual noise into the solution; truncating
    #: it pins that direction at the initial guess while all well-conditioned
    #: directions converge as usual.  Convergence studies set this; plain
    #: solves keep the exact LU solve (None).
    svd_rcond: Optional[float] = None
    #: optional map applied to every accepted iterate, confining the
    #: iteration to a subspace (continuation uses the trigonometric
    #: smoothing projection).  The residual is re-evaluated at the projected
    #: point, so all convergence checks see the projected iterates.
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None


@dataclass
class NewtonDiagnostics:
    iterations: int = 0
    residual_norms: list = field(default_factory=list)
    step_norms: list = field(default_factory=list)
    halvings: list = field(default_factory=list)
    converged_by: str = ""


def _sup(v) -> float:
    return float(np.max(np.abs(v))) if len(v) else 0.0


def newton_solve(system, phase, grid, initial, options: NewtonOptions = NewtonOptions()):
    """Solve the collocation system by damped Newton iteration.

    initial may be a DiscreteSolution or a packed unknown vector.  Returns
    (solution, diagnostics); raises NewtonNoConvergenceError (carrying the
    best iterate) or SingularJacobianError on failure.
    """
    z = pack(initial) if isinstance(initial, DiscreteSolution) else np.array(initial, dtype=float)
    d_x, d_y = system.d_x, system.d_y
    cache = _PlanCache()
    diag = NewtonDiagnostics()

    r = assemble_residual(system, phase, grid, z, cache=cache)
    rnorm = _sup(r)
    diag.residual_norms.append(rnorm)
    polish_left = options.polish_iters

    for _ in range(options.max_iters + options.polish_iters):
        polishing = rnorm <= options.residual_tol
        if polishing:
            if polish_left <= 0:
                diag.converged_by = diag.converged_by or "residual"
                return unpack(z, grid, d_x, d_y), diag
            polish_left -= 1

        cache.clear()
        J = assemble_jacobian(
            system, phase, grid, z,
            step_scale=options.fd_step_scale, cache=cache, base_residual=r,
        )
        if options.svd_rcond is None:
            lu, piv = lu_factor(J, check_finite=False)
            d = np.abs(np.diag(lu))
            singular = not np.all(np.isfinite(lu)) or d.min() <= d.max() * 1e-14
            dz = None if singular else lu_solve((lu, piv), -r, check_finite=False)
        else:
            singular = not np.all(np.isfinite(J))
            if not singular:
                U, s, Vt = np.linalg.svd(J)
                kept = s > options.svd_rcond * s[0]
                singular = not kept.any()
            if not singular:
                k = int(np.count_nonzero(kept))
                dz = -(Vt[:k].T @ ((U[:, :k].T @ r) / s[:k]))
        if singular:
            if polishing:
                diag.converged_by = "residual"
                return unpack(z, grid, d_x, d_y), diag
            raise SingularJacobianError(
                f"singular collocation Jacobian at iteration {diag.iterations}"
            )

        lam, accepted = 1.0, False
        halvings = 0
        for _ in range(options.max_halvings + 1):
            try:
                r_trial = assemble_residual(system, phase, grid, z + lam * dz, cache=cache)
                tnorm = _sup(r_trial)
            except (DelayExceedsPeriodError, NonFiniteResidualError):
                tnorm = math.inf
            if tnorm < rnorm or (not polishing and tnorm <= options.residual_tol):
                accepted = True
                break
            lam *= 0.5
            halvings += 1

        if not accepted:
            if polishing:  # the rounding floor: no step improves any more
                diag.converged_by = "residual"
                return unpack(z, grid, d_x, d_y), diag
            diag.iterations += 1
            diag.halvings.append(halvings)
            diag.converged_by = "stalled"
            raise NewtonNoConvergenceError(
                f"line search failed to reduce the residual below {rnorm:.3e} "
                f"at iteration {diag.iterations}",
                best_z=z, diagnostics=diag,
            )

        diag.iterations += 1
        diag.halvings.append(halvings)
        step = lam * _sup(dz) / max(_sup(z), 1.0)
        z = z + lam * dz
        if options.project is not None:
            z = options.project(z)
            r_trial = assemble_residual(system, phase, grid, z, cache=cache)
            tnorm = _sup(r_trial)
        r, rnorm = r_trial, tnorm
        diag.residual_norms.append(rnorm)
        diag.step_norms.append(step)

        if step <= options.step_tol:
            diag.converged_by = "residual" if rnorm <= options.residual_tol else "step"
            return unpack(z, grid, d_x, d_y), diag

    if rnorm <= options.residual_tol:
        diag.converged_by = "residual"
        return unpack(z, grid, d_x, d_y), diag
    diag.converged_by = "max_iters"
    raise NewtonNoConvergenceError(
        f"no convergence within {options.max_iters} iterations "
        f"(last residual norm {rnorm:.3e})",
        best_z=z, diagnostics=diag,
    )


@dataclass(frozen=True)
class ContinuationOptions:
    initial_step: float
    min_step: float = 1e-5
    max_step: Optional[float] = None
    #: factor applied to the step after an easy correction
    growth: float = 1.3
    #: a correction taking at most this many iterations counts as easy
    grow_iters: int = 3
    #: a correction whose oscillation amplitude drops below this fraction of
    #: the predictor's counts as a collapse onto a constant solution family
    #: and is rejected like a failed correction (0 disables the guard)
    collapse_ratio: float = 0.1
    #: run each correction in two phases: first with every Newton iterate
    #: low-pass filtered to the harmonics the outer mesh can resolve, then
    #: released to converge on the nearby smooth discrete solution.  Large
    #: corrector steps otherwise deposit mesh-scale content that the chained
    #: representation cannot anchor, locking the iteration onto a spurious
    #: neighbouring root whose low harmonics are no longer accurate.
    smooth_corrector: bool = False
    newton: NewtonOptions = NewtonOptions()


@dataclass(frozen=True)
class BranchPoint:
    param: float
    solution: DiscreteSolution
    diagnostics: NewtonDiagnostics


@dataclass(frozen=True)
class Branch:
    points: tuple
    #: "complete" if the target parameter was reached, else "partial"
    status: str
    message: str = ""

    @property
    def params(self):
        return np.array([pt.param for pt in self.points])


_CORRECTOR_FAILURES = (
    NewtonNoConvergenceError,
    SingularJacobianError,
    DelayExceedsPeriodError,
    NonFiniteResidualError,
)


class _BranchCollapse(Exception):
    pass


def _oscillation(sol: DiscreteSolution) -> float:
    """Largest peak-to-peak node-value range over all solution components."""
    ranges = [np.ptp(block.values, axis=0).max() for block in (sol.mu, sol.nu)]
    return float(max(ranges))


def _lowpass_resample(sol: DiscreteSolution) -> DiscreteSolution:
    """Project a solution onto the harmonics its outer mesh can resolve.

    Samples each component on a dense uniform grid, drops every Fourier mode
    above the Nyquist frequency of the outer mesh, and re-reads the filtered
    signal at the representation nodes.  Mesh-scale content — exactly the
    part the chained representation cannot pin down — is removed; smooth
    periodic components pass through essentially intact.  The dense sampling
    matters: interpolating through the outer nodes alone would alias the
    mesh-scale bands straight onto the low harmonics instead of removing
    them.
    """
    grid = sol.grid
    L = len(grid.outer) - 1
    keep = max(L // 2, 1)
    n = max(1024, 8 * (len(grid.rep_nodes) - 1))
    ts = np.arange(n) / n
    freqs = np.fft.rfftfreq(n, d=1.0 / n)
    kept = freqs <= keep
    basis = np.exp(2j * np.pi * np.outer(grid.rep_nodes, freqs[kept]))
    weights = np.where(freqs[kept] == 0, 1.0, 2.0)

    def clean(poly):
        coeffs = np.fft.rfft(eval_values_many(poly, ts), axis=0) / n
        return np.real(basis @ (coeffs[kept] * weights[:, None]))

    return solution_from_values(grid, clean(sol.mu), clean(sol.nu), sol.omega)


def _smoothing_projection(grid, d_x: int, d_y: int):
    """Packed-vector form of _lowpass_resample (omega passes through)."""

    def project(z):
        return pack(_lowpass_resample(unpack(z, grid, d_x, d_y)))

    return project


def continue_branch(family: Callable[[float], object], p0: float, p1: float,
                    initial: DiscreteSolution,
                    options: ContinuationOptions) -> Branch:
    """Trace the branch of periodic solutions from p0 to p1.

    family maps a parameter value to a CoupledSystem.  Each correction pins
    the phase by the translation-orthogonality integral against its own
    predictor, so the solution drifts freely in phase along the branch.  The
    step halves after a failed correction and grows after easy ones; when it
    falls below min_step the branch is returned with status "partial".
    """
    if not abs(options.initial_step) > 0:
        raise ValueError(f"need a positive initial step, got {options.initial_step}")
    grid = initial.grid

    if options.smooth_corrector:
        smoothing = replace(
            options.newton,
            project=_smoothing_projection(grid, initial.d_x, initial.d_y),
            residual_tol=max(options.newton.residual_tol, 1e-5),
            polish_iters=0,
            max_iters=12,
        )
        d_x, d_y = initial.d_x, initial.d_y

        def correct(system, start):
            # Phase one cannot accrete mesh-scale junk (each iterate is
            # resampled), so it lands beside the smooth root.  Its residual
            # bottoms out at the smooth root's own non-smooth content, which
            # may sit above any fixed tolerance, so a non-converged phase one
            # still hands its best iterate to phase two, which converges
            # exactly from there (or fails the correction for real).  The
            # composite diagnostics report the full effort of the correction.
            try:
                rough, diag_a = newton_solve(
                    system, IntegralPhase(reference=start), grid, start,
                    smoothing,
                )
            except NewtonNoConvergenceError as exc:
                rough = unpack(exc.best_z, grid, d_x, d_y)
                diag_a = exc.diagnostics
            sol, diag_b = newton_solve(
                system, IntegralPhase(reference=rough), grid, rough,
                options.newton,
            )
            diag_b.iterations += diag_a.iterations
            diag_b.residual_norms = diag_a.residual_norms + diag_b.residual_norms
            diag_b.step_norms = diag_a.step_norms + diag_b.step_norms
            diag_b.halvings = diag_a.halvings + diag_b.halvings
            return sol, diag_b
    else:
        def correct(system, start):
            return newton_solve(
                system, IntegralPhase(reference=start), grid, start,
                options.newton,
            )

    sol0, diag0 = correct(family(p0), initial)
    points = [BranchPoint(p0, sol0, diag0)]
    if p1 == p0:
        return Branch(tuple(points), "complete")

    span = abs(p1 - p0)
    direction = 1.0 if p1 > p0 else -1.0
    max_step = span if options.max_step is None else options.max_step
    step = min(abs(options.initial_step), max_step)

    z_prev, dp_prev = None, 0.0
    p, z = p0, pack(sol0)
    while direction * (p1 - p) > 0:
        dp = direction * min(step, abs(p1 - p))
        if z_prev is None:
            z_pred = z
        else:
            z_pred = z + (dp / dp_prev) * (z - z_prev)
        predictor = unpack(z_pred, grid, sol0.d_x, sol0.d_y)
        try:
            sol, diag = correct(family(p + dp), predictor)
            if options.collapse_ratio > 0 and \
                    _oscillation(sol) < options.collapse_ratio * _oscillation(predictor):
                raise _BranchCollapse(
                    "correction collapsed onto a constant solution family"
                )
        except _CORRECTOR_FAILURES + (_BranchCollapse,) as exc:
            step *= 0.5
            if step < options.min_step:
                return Branch(
                    tuple(points), "partial",
                    f"step fell below min_step={options.min_step} at parameter "
                    f"{p + dp} ({type(exc).__name__}: {exc})",
                )
            continue
        z_prev, dp_prev = z, dp
        p, z = p + dp, pack(sol)
        points.append(BranchPoint(p, sol, diag))
        if diag.iterations <= options.grow_iters:
            step = min(step * options.growth, max_step)
    return Branch(tuple(points), "complete")
