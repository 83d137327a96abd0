"""Problem definition: coupled systems, delayed-state access, phase conditions.

A coupled system pairs a renewal equation x(t) = F(x_t, y_t) with a delay
differential equation y'(t) = G(x_t, y_t), both with bounded delay tau.  On
the period-rescaled domain the right-hand sides see the state through a
StateAccessor, which evaluates the current solution at delayed arguments with
periodic wrap-around.

Right-hand sides are evaluated in batch: the accessor is bound to the vector
of all collocation times at once, and rhs_F / rhs_G return arrays with a
leading collocation-time axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DelayExceedsPeriodError
from .meshing import eval_derivs_many, eval_values_many, locate, wrap_times, _value_rows, _deriv_rows
from .quadrature import QuadratureKind, make_rule, normalize_kind


@dataclass(frozen=True)
class QuadratureSpec:
    """Rule family and resolution used for kernel integrals."""

    kind: QuadratureKind | str = QuadratureKind.CLENSHAW_CURTIS
    n_nodes: int = 20


@dataclass(frozen=True)
class CoupledSystem:
    """A renewal equation coupled to a delay differential equation.

    rhs_F(acc, omega) -> (n_times, d_x): value prescribed to x at each time.
    rhs_G(acc, omega) -> (n_times, d_y): derivative prescribed to y, in
    original (unrescaled) time units.
    Both must be pure functions querying only the accessor and omega.
    """

    d_x: int
    d_y: int
    tau: float
    rhs_F: Callable
    rhs_G: Callable
    name: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.d_x < 1 or self.d_y < 1:
            raise ValueError("need d_x >= 1 and d_y >= 1")
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise ValueError(f"need finite tau > 0, got {self.tau}")


class StateAccessor:
    """Delayed-state view of a candidate solution at a batch of base times.

    x_at(theta), y_at(theta) and y_deriv_at(theta) evaluate the solution
    components at base_times + theta (rescaled time, theta in [-1, 0]),
    wrapping negative arguments by one period.  For scalar theta the result
    has shape (n_times, d); for an array theta of shape (k,) shared by all
    base times, or of shape (n_times, k) with one offset row per base time,
    it has shape (n_times, k, d).

    `memo` is a scratch dict for right-hand sides that want to share work
    between rhs_F and rhs_G within one evaluation.
    """

    def __init__(self, times, x_eval, y_eval, y_deriv_eval=None):
        self.times = np.atleast_1d(np.asarray(times, dtype=float))
        self._x_eval = x_eval
        self._y_eval = y_eval
        self._y_deriv_eval = y_deriv_eval
        self.memo: dict = {}
        #: primary mesh behind the evaluators, when there is one (set by
        #: accessor_from_solution); mesh-aligned kernel rules use it
        self.grid = None

    def _points(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.size and (theta.min() < -1.0 - 1e-9 or theta.max() > 1e-9):
            raise DelayExceedsPeriodError(
                f"delayed argument theta={theta.ravel()[np.argmax(np.abs(theta))]} "
                "outside [-1, 0]: the delay does not fit in one period"
            )
        if theta.ndim <= 1:
            pts = self.times[:, None] + np.atleast_1d(theta)[None, :]
        else:
            if theta.shape[0] != self.times.size:
                raise ValueError(
                    f"per-time theta must have {self.times.size} rows, "
                    f"got shape {theta.shape}"
                )
            pts = self.times[:, None] + theta.reshape(self.times.size, -1)
        return wrap_times(pts.ravel()), theta.ndim

    def _shaped(self, flat, ndim_theta):
        n, d = self.times.size, flat.shape[-1]
        return flat.reshape(n, d) if ndim_theta == 0 else flat.reshape(n, -1, d)

    def x_at(self, theta):
        pts, nd = self._points(theta)
        return self._shaped(self._x_eval(pts), nd)

    def y_at(self, theta):
        pts, nd = self._points(theta)
        return self._shaped(self._y_eval(pts), nd)

    def y_deriv_at(self, theta):
        if self._y_deriv_eval is None:
            raise ValueError("this accessor provides no y derivative")
        pts, nd = self._points(theta)
        return self._shaped(self._y_deriv_eval(pts), nd)


class _PlanCache:
    """Caches interpolation plans (interval owners + barycentric rows) keyed
    by the evaluated point set, so repeated evaluations at identical points
    (e.g. finite-difference Jacobian columns) skip the geometry work."""

    def __init__(self):
        self._plans: dict = {}

    def plan(self, grid, pts, deriv=False):
        key = (id(grid), deriv, pts.tobytes())
        plan = self._plans.get(key)
        if plan is None:
            k, xi = locate(grid, pts)
            rows = (_deriv_rows if deriv else _value_rows)(grid.abscissae, xi)
            plan = (k, rows)
            self._plans[key] = plan
        return plan

    def clear(self):
        self._plans.clear()


def _plan_eval(poly, pts, cache: _PlanCache | None, deriv=False):
    if cache is None:
        return (eval_derivs_many if deriv else eval_values_many)(poly, pts)
    k, rows = cache.plan(poly.grid, pts, deriv)
    out = np.einsum("nj,njd->nd", rows, poly.interval_values[k])
    return out * poly.grid.L if deriv else out


def accessor_from_solution(sol, times, cache: _PlanCache | None = None) -> StateAccessor:
    """Accessor backed by the interpolants of a discrete solution."""
    acc = StateAccessor(
        times,
        lambda pts: _plan_eval(sol.mu, pts, cache),
        lambda pts: _plan_eval(sol.nu, pts, cache),
        lambda pts: _plan_eval(sol.nu, pts, cache, deriv=True),
    )
    acc.grid = sol.grid
    return acc


def accessor_from_functions(times, x_fn, y_fn, y_deriv_fn=None) -> StateAccessor:
    """Accessor backed by closed-form component functions of rescaled time.

    The functions receive a flat array of times in [0, 1] (wrap already
    applied) and must return (n, d) arrays or (n,) for d = 1.
    """

    def lift(fn):
        if fn is None:
            return None

        def ev(pts):
            out = np.asarray(fn(pts), dtype=float)
            return out[:, None] if out.ndim == 1 else out

        return ev

    return StateAccessor(times, lift(x_fn), lift(y_fn), lift(y_deriv_fn))


def kernel_integral(kernel, a: float, b: float, rule: QuadratureSpec = QuadratureSpec(),
                    needs=("x", "y")):
    """Distributed-delay functional over a fixed window [a, b] in original time.

    Returns f(acc, omega) approximating the integral of
    K(sigma, x(t + sigma/omega), y(t + sigma/omega)) over sigma in [a, b] for
    every accessor base time t.  The window must satisfy a < b <= 0, and the
    period must cover the delay (omega >= -a), else a DelayExceedsPeriodError
    is raised.  Because the rule lives in original time, its weights carry no
    omega factor.

    kernel(sigma, xv, yv) receives the node positions sigma (matching the
    state arrays' leading axes; broadcast against them with sigma[..., None])
    and state values of shape (..., s, d); components listed in `needs` are
    evaluated, others are passed as None.  The kernel must return an array
    broadcastable to (..., s, d_out).

    Rule kinds clenshaw_curtis and gauss_legendre place a single fixed rule
    on [a, b].  Kind mesh_gauss_legendre instead builds, for every evaluation
    time, a composite Gauss-Legendre rule whose pieces follow the primary
    mesh of the accessed solution, so no piece straddles a breakpoint of the
    piecewise-polynomial state; n_nodes is then the total node budget spread
    over the pieces.  The fixed kinds are spectrally accurate on smooth
    states but only O(M^-2) across the interpolant's derivative breaks, which
    can dominate on coarse meshes; the mesh-aligned kind integrates
    polynomial kernels of piecewise-polynomial states exactly.
    """
    if not (np.isfinite(a) and np.isfinite(b) and a < b <= 0.0):
        raise ValueError(f"kernel window must satisfy a < b <= 0, got [{a}, {b}]")
    if normalize_kind(rule.kind) is QuadratureKind.MESH_GAUSS_LEGENDRE:
        return _mesh_aligned_functional(kernel, a, b, int(rule.n_nodes), needs)
    rule_ = make_rule(rule.kind, rule.n_nodes, a, b)
    sigma, wts = rule_.nodes, rule_.weights
    need_x = "x" in needs
    need_y = "y" in needs

    def functional(acc: StateAccessor, omega: float) -> np.ndarray:
        if not omega >= -a * (1.0 - 1e-12):
            raise DelayExceedsPeriodError(
                f"period omega={omega} shorter than the delay window reach {-a}"
            )
        key = (id(functional), float(omega))
        cached = acc.memo.get(key)
        if cached is not None:
            return cached
        theta = sigma / omega
        xv = acc.x_at(theta) if need_x else None
        yv = acc.y_at(theta) if need_y else None
        kv = np.asarray(kernel(sigma, xv, yv), dtype=float)
        if kv.ndim == 0:
            kv = np.full((acc.times.size, sigma.size, 1), float(kv))
        elif kv.ndim == 1:  # depends on sigma only
            kv = np.broadcast_to(kv[None, :, None], (acc.times.size, sigma.size, 1))
        elif kv.ndim != 3:
            raise ValueError(
                f"kernel must return (n_times, n_sigma, d_out), got shape {kv.shape}"
            )
        out = np.einsum("s,tsd->td", wts, kv)
        acc.memo[key] = out
        return out

    return functional


_GL_REF_CACHE: dict = {}


def _gl_reference01(n: int):
    """Gauss-Legendre nodes/weights mapped to [0, 1] (weights sum to 1)."""
    cached = _GL_REF_CACHE.get(n)
    if cached is None:
        x, w = np.polynomial.legendre.leggauss(n)
        cached = ((x + 1.0) / 2.0, w / 2.0)
        _GL_REF_CACHE[n] = cached
    return cached


def _mesh_aligned_functional(kernel, a: float, b: float, budget: int, needs):
    """Kernel functional with a per-time composite Gauss-Legendre rule whose
    pieces are cut at the primary-mesh breakpoints of the accessed solution.

    The rescaled window [a/omega, b/omega] shifted to each base time t is
    split wherever t + theta crosses an outer mesh node; each piece gets the
    same Gauss-Legendre rule, sized so the total node count per time is about
    `budget` (at least 2, at most 24 per piece).  Falls back to a fixed
    Gauss-Legendre rule for accessors without an underlying mesh.
    """
    if budget < 2:
        raise ValueError(f"need a node budget >= 2, got {budget}")
    need_x = "x" in needs
    need_y = "y" in needs
    fallback = kernel_integral(
        kernel, a, b, QuadratureSpec(QuadratureKind.GAUSS_LEGENDRE, budget), needs
    )

    def functional(acc: StateAccessor, omega: float) -> np.ndarray:
        grid = getattr(acc, "grid", None)
        if grid is None:
            return fallback(acc, omega)
        omega = float(omega)
        if not omega >= -a * (1.0 - 1e-12):
            raise DelayExceedsPeriodError(
                f"period omega={omega} shorter than the delay window reach {-a}"
            )
        key = (id(functional), omega)
        cached = acc.memo.get(key)
        if cached is not None:
            return cached

        t = acc.times
        L = grid.L
        th_lo, th_hi = a / omega, b / omega
        # interior breakpoints: integers k with t + th_lo < k/L < t + th_hi
        kfirst = np.floor((t + th_lo) * L).astype(int) + 1
        klast = np.ceil((t + th_hi) * L).astype(int) - 1
        nin = np.maximum(klast - kfirst + 1, 0)
        p_in = int(nin.max())
        brk = kfirst[:, None] + np.arange(p_in)[None, :]
        theta_brk = brk / L - t[:, None]
        # surplus slots collapse onto the window end as zero-width pieces
        theta_brk[np.arange(p_in)[None, :] >= nin[:, None]] = th_hi
        edges = np.concatenate(
            (np.full((t.size, 1), th_lo), theta_brk, np.full((t.size, 1), th_hi)),
            axis=1,
        )
        alpha, beta = edges[:, :-1], edges[:, 1:]
        n_per = int(np.clip(-(-budget // (p_in + 1)), 2, 24))
        gx, gw = _gl_reference01(n_per)
        width = beta - alpha
        theta = (alpha[:, :, None] + width[:, :, None] * gx).reshape(t.size, -1)
        wts = (width[:, :, None] * gw).reshape(t.size, -1)
        np.clip(theta, -1.0, 0.0, out=theta)

        xv = acc.x_at(theta) if need_x else None
        yv = acc.y_at(theta) if need_y else None
        kv = np.asarray(kernel(omega * theta, xv, yv), dtype=float)
        if kv.ndim == 0:
            kv = np.full(theta.shape + (1,), float(kv))
        elif kv.shape == theta.shape:
            kv = kv[..., None]
        elif kv.ndim != 3:
            raise ValueError(
                f"kernel must return (n_times, n_nodes, d_out), got shape {kv.shape}"
            )
        out = omega * np.einsum("tk,tkd->td", wts, kv)
        acc.memo[key] = out
        return out

    return functional


@dataclass(frozen=True)
class AnchorPhase:
    """Pins one component's value at t = 0: residual = v_which[component](0) - target."""

    which: str = "x"
    component: int = 0
    target: float = 0.0

    def __post_init__(self):
        if self.which not in ("x", "y"):
            raise ValueError(f"which must be 'x' or 'y', got {self.which!r}")


@dataclass(frozen=True)
class IntegralPhase:
    """Orbital phase condition: integral over one period of <v, v'_ref> = 0,
    with v the stacked (x, y) components and v_ref a reference solution."""

    reference: "object"  # a DiscreteSolution


def _integral_phase_points(grid):
    """Per-interval Gauss-Legendre nodes (m+1 per interval) and weights."""
    x, w = np.polynomial.legendre.leggauss(grid.m + 1)
    g = (x + 1.0) / 2.0
    pts = (grid.outer[:-1, None] + g[None, :] * grid.h).ravel()
    wts = np.tile(w / 2.0 * grid.h, grid.L)
    return pts, wts


def phase_residual(phase, sol, cache: _PlanCache | None = None) -> float:
    """Scalar phase condition residual for a candidate solution.

    Custom phase conditions may be supplied as any object with a
    residual(sol) method.
    """
    if isinstance(phase, AnchorPhase):
        block = sol.mu if phase.which == "x" else sol.nu
        if not 0 <= phase.component < block.dim:
            raise ValueError(
                f"phase component {phase.component} out of range for d={block.dim}"
            )
        return float(block.values[0, phase.component] - phase.target)
    if isinstance(phase, IntegralPhase):
        ref = phase.reference
        pts, wts = _integral_phase_points(sol.grid)
        key = ("phase_ref", id(ref), id(sol.grid))
        ref_d = None if cache is None else cache._plans.get(key)
        if ref_d is None:
            ref_d = np.concatenate(
                (eval_derivs_many(ref.mu, pts), eval_derivs_many(ref.nu, pts)), axis=1
            )
            if cache is not None:
                cache._plans[key] = ref_d
        v = np.concatenate(
            (_plan_eval(sol.mu, pts, cache), _plan_eval(sol.nu, pts, cache)), axis=1
        )
        return float(wts @ np.einsum("nd,nd->n", v, ref_d))
    if hasattr(phase, "residual"):
        return float(phase.residual(sol))
    raise TypeError(f"unsupported phase condition {phase!r}")
