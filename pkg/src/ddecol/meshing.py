"""Meshes, collocation abscissae and continuous piecewise polynomials.

The period is rescaled to [0, 1] and split into L equal intervals.  Each
interval carries m inner abscissae 0 < c_1 < ... < c_m <= 1; together with the
point t = 0 the inner nodes form the representation nodes of a continuous
piecewise polynomial of degree m.  On every interval the polynomial
interpolates the m inner values plus a left endpoint value chained from the
previous interval, and is evaluated with the barycentric form of the Lagrange
interpolant (values and first derivatives).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import DomainError

#: Evaluation points may overshoot [0, 1] by this much and are clamped.
DOMAIN_TOL = 1e-12

#: Inner abscissae must stay at least this far from 0 and not exceed 1 + this.
_ABSCISSAE_TOL = 1e-14


class AbscissaeKind(str, Enum):
    GAUSS_LEGENDRE = "gauss_legendre"
    CHEBYSHEV_EXTREMA = "chebyshev_extrema"
    CUSTOM = "custom"


_KIND_ALIASES = {
    "gauss_legendre": AbscissaeKind.GAUSS_LEGENDRE,
    "gauss": AbscissaeKind.GAUSS_LEGENDRE,
    "legendre": AbscissaeKind.GAUSS_LEGENDRE,
    "chebyshev_extrema": AbscissaeKind.CHEBYSHEV_EXTREMA,
    "chebyshev": AbscissaeKind.CHEBYSHEV_EXTREMA,
    "custom": AbscissaeKind.CUSTOM,
}


def _barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / diff.prod(axis=1)


def _differentiation_matrix(nodes: np.ndarray, w: np.ndarray) -> np.ndarray:
    n = nodes.size
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                D[i, j] = (w[j] / w[i]) / (nodes[i] - nodes[j])
        D[i, i] = -D[i].sum()
    return D


@dataclass(frozen=True)
class AbscissaeSet:
    """Inner collocation abscissae on the reference interval (0, 1].

    Derived interpolation machinery (barycentric weights, differentiation
    matrix, right-endpoint evaluation row) is precomputed for the m+1 local
    nodes {0, c_1, ..., c_m}.
    """

    kind: AbscissaeKind
    m: int
    c: np.ndarray
    includes_right_end: bool
    nodes01: np.ndarray = field(init=False, repr=False)
    bary_w: np.ndarray = field(init=False, repr=False)
    diff_mat: np.ndarray = field(init=False, repr=False)
    right_row: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if self.m < 1 or c.shape != (self.m,):
            raise ValueError(f"need m >= 1 abscissae, got m={self.m}, c shape {c.shape}")
        if c[0] <= _ABSCISSAE_TOL:
            raise ValueError("abscissae must be strictly positive (c_1 > 0)")
        if c[-1] > 1.0 + _ABSCISSAE_TOL:
            raise ValueError("abscissae must not exceed 1")
        if np.any(np.diff(c) <= 0):
            raise ValueError("abscissae must be strictly increasing")
        c = np.minimum(c, 1.0)
        object.__setattr__(self, "c", c)
        nodes01 = np.concatenate(([0.0], c))
        w = _barycentric_weights(nodes01)
        if self.includes_right_end:
            right = np.zeros(self.m + 1)
            right[-1] = 1.0
        else:
            r = w / (1.0 - nodes01)
            right = r / r.sum()
        object.__setattr__(self, "nodes01", nodes01)
        object.__setattr__(self, "bary_w", w)
        object.__setattr__(self, "diff_mat", _differentiation_matrix(nodes01, w))
        object.__setattr__(self, "right_row", right)


def make_abscissae(kind, m: int | None = None, c=None) -> AbscissaeSet:
    """Build an abscissae set of the given kind.

    gauss_legendre:     the m roots of the Legendre polynomial shifted to
                        (0, 1); the right endpoint is not an abscissa.
    chebyshev_extrema:  c_j = (1 - cos(j*pi/m))/2 for j = 1..m; the right
                        endpoint is the last abscissa.
    custom:             caller-supplied strictly increasing c in (0, 1].
    """
    try:
        kind = _KIND_ALIASES[str(kind).lower()] if not isinstance(kind, AbscissaeKind) else kind
    except KeyError:
        raise ValueError(f"unknown abscissae kind {kind!r}") from None
    if kind is AbscissaeKind.CUSTOM:
        if c is None:
            raise ValueError("custom abscissae require c")
        c = np.asarray(c, dtype=float)
        return AbscissaeSet(kind, c.size, c, includes_right_end=bool(c.size and c[-1] >= 1.0 - _ABSCISSAE_TOL))
    if m is None or m < 1:
        raise ValueError(f"need m >= 1, got {m}")
    if kind is AbscissaeKind.GAUSS_LEGENDRE:
        x, _ = leggauss(m)
        return AbscissaeSet(kind, m, (x + 1.0) / 2.0, includes_right_end=False)
    j = np.arange(1, m + 1)
    c = (1.0 - np.cos(j * np.pi / m)) / 2.0
    c[-1] = 1.0
    return AbscissaeSet(AbscissaeKind.CHEBYSHEV_EXTREMA, m, c, includes_right_end=True)


@dataclass(frozen=True)
class CollocationGrid:
    """Uniform outer mesh with per-interval collocation nodes.

    rep_nodes lists the 1 + L*m representation nodes {0} followed by all
    collocation nodes in interval-major order.
    """

    L: int
    abscissae: AbscissaeSet
    h: float = field(init=False)
    outer: np.ndarray = field(init=False, repr=False)
    colloc: np.ndarray = field(init=False, repr=False)
    rep_nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.L < 1:
            raise ValueError(f"need L >= 1 intervals, got {self.L}")
        L, c = self.L, self.abscissae.c
        object.__setattr__(self, "h", 1.0 / L)
        object.__setattr__(self, "outer", np.arange(L + 1) / L)
        colloc = (np.arange(L)[:, None] + c[None, :]) / L
        object.__setattr__(self, "colloc", colloc)
        object.__setattr__(self, "rep_nodes", np.concatenate(([0.0], colloc.ravel())))

    @property
    def m(self) -> int:
        return self.abscissae.m

    @property
    def n_rep(self) -> int:
        return 1 + self.L * self.abscissae.m


def build_grid(L: int, abscissae: AbscissaeSet) -> CollocationGrid:
    return CollocationGrid(L, abscissae)


def locate(grid: CollocationGrid, ts) -> tuple[np.ndarray, np.ndarray]:
    """Map points in [0, 1] to (owning interval index, local coordinate xi).

    Interval i (0-based) owns (t_i, t_{i+1}]; interior outer nodes belong to
    the interval on their left, so stored derivatives there are left limits.
    Points may overshoot the domain by DOMAIN_TOL and are clamped.
    """
    ts = np.asarray(ts, dtype=float)
    if ts.size and (ts.min() < -DOMAIN_TOL or ts.max() > 1.0 + DOMAIN_TOL):
        bad = ts[(ts < -DOMAIN_TOL) | (ts > 1.0 + DOMAIN_TOL)]
        raise DomainError(f"evaluation point {bad.ravel()[0]!r} outside [0, 1]")
    ts = np.clip(ts, 0.0, 1.0)
    L = grid.L
    k = np.ceil(ts * L - DOMAIN_TOL).astype(np.int64) - 1
    np.clip(k, 0, L - 1, out=k)
    xi = ts * L - k
    np.clip(xi, 0.0, 1.0, out=xi)
    return k, xi


#: Local coordinates within this distance of a basis node snap onto it, so
#: that evaluation at (reconstructed) representation nodes reproduces stored
#: values exactly and the barycentric ratios never overflow.
_NODE_SNAP_TOL = 1e-13


def _value_rows(absc: AbscissaeSet, xi: np.ndarray) -> np.ndarray:
    """Barycentric interpolation rows: value(xi) = rows @ local_values."""
    d = xi[:, None] - absc.nodes01[None, :]
    hit = np.abs(d) < _NODE_SNAP_TOL
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        r = absc.bary_w[None, :] / d
        rows = r / r.sum(axis=1, keepdims=True)
    hit_any = hit.any(axis=1)
    if hit_any.any():
        rows[hit_any] = hit[hit_any].astype(float)
    return rows


def _deriv_rows(absc: AbscissaeSet, xi: np.ndarray) -> np.ndarray:
    """Barycentric differentiation rows: d/dxi value(xi) = rows @ local_values."""
    d = xi[:, None] - absc.nodes01[None, :]
    hit = np.abs(d) < _NODE_SNAP_TOL
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        r = absc.bary_w[None, :] / d
        s = r / d
        S1 = r.sum(axis=1, keepdims=True)
        S2 = s.sum(axis=1, keepdims=True)
        rows = (S2 * r / S1 - s) / S1
    hit_any = hit.any(axis=1)
    if hit_any.any():
        idx = np.argmax(hit[hit_any], axis=1)
        rows[hit_any] = absc.diff_mat[idx]
    return rows


def _chain_left_values(grid: CollocationGrid, v0: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """Left endpoint value of every interval, chained by continuity.

    v0 is the value at t = 0, vals has shape (L, m, dim).  Interval k's left
    value is the previous interval's polynomial evaluated at its right end:
    lv_k = a * lv_{k-1} + rr[1:] @ vals_{k-1} with a = rr[0] the weight of the
    left local node in the right-endpoint evaluation row rr.
    """
    L, dim = grid.L, vals.shape[-1]
    rr = grid.abscissae.right_row
    a = rr[0]
    lv = np.empty((L, dim))
    lv[0] = v0
    if L == 1:
        return lv
    b = np.einsum("kmd,m->kd", vals[:-1], rr[1:])  # (L-1, dim) inner-node terms
    if a == 0.0:
        lv[1:] = b
    elif 0.5 < abs(a) < 2.0:
        # lv_k = a^k v0 + sum_{i<k} a^(k-1-i) b_i, stable since |a| ~ 1
        p = a ** np.arange(L)  # p[k] = a^k
        csum = np.cumsum(b / p[1:, None], axis=0)  # sum_i b_i / a^(i+1)
        lv[1:] = p[1:, None] * (v0[None, :] + csum)
    else:
        acc = np.array(v0, dtype=float)
        for k in range(1, L):
            acc = a * acc + b[k - 1]
            lv[k] = acc
    return lv


@dataclass(frozen=True)
class PiecewisePolynomial:
    """Continuous piecewise polynomial defined by representation-node values.

    values has shape (1 + L*m, dim): the value at t = 0 followed by the values
    at all collocation nodes.  interval_values holds, per interval, the m+1
    local interpolation values (chained left endpoint value plus inner values).
    Immutable after construction.
    """

    grid: CollocationGrid
    values: np.ndarray
    interval_values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != self.grid.n_rep:
            raise ValueError(
                f"values must have shape ({self.grid.n_rep}, dim), got {values.shape}"
            )
        object.__setattr__(self, "values", values)
        L, m = self.grid.L, self.grid.m
        dim = values.shape[1]
        vals = values[1:].reshape(L, m, dim)
        lv = _chain_left_values(self.grid, values[0], vals)
        iv = np.concatenate((lv[:, None, :], vals), axis=1)
        object.__setattr__(self, "interval_values", iv)

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def eval_values_many(p: PiecewisePolynomial, ts) -> np.ndarray:
    """Values of p at an array of points in [0, 1]; shape (len(ts), dim)."""
    ts = np.asarray(ts, dtype=float)
    k, xi = locate(p.grid, ts)
    rows = _value_rows(p.grid.abscissae, xi)
    return np.einsum("nj,njd->nd", rows, p.interval_values[k])


def eval_derivs_many(p: PiecewisePolynomial, ts) -> np.ndarray:
    """First derivatives of p at an array of points; shape (len(ts), dim)."""
    ts = np.asarray(ts, dtype=float)
    k, xi = locate(p.grid, ts)
    rows = _deriv_rows(p.grid.abscissae, xi)
    return np.einsum("nj,njd->nd", rows, p.interval_values[k]) * p.grid.L


def eval_piecewise(p: PiecewisePolynomial, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Value and first derivative of p at a single point t in [0, 1].

    At interior outer mesh nodes the derivative is the left limit.
    """
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    return eval_values_many(p, ts)[0], eval_derivs_many(p, ts)[0]


def colloc_derivatives(p: PiecewisePolynomial) -> np.ndarray:
    """Derivatives of p at all collocation nodes, shape (L*m, dim).

    Uses the differentiation matrix of the local basis on each interval (at a
    right endpoint abscissa this is the left limit, i.e. the own-interval
    derivative).  Each row is applied to values shifted by the value at its
    own node (the derivative annihilates constants), which removes the
    cancellation noise that otherwise grows like eps * L * m^2 and caps how
    far Newton can drive the differential-equation residual rows.
    """
    D = p.grid.abscissae.diff_mat[1:]  # rows for the inner nodes
    v = p.interval_values
    shifted = v[:, None, :, :] - v[:, 1:, None, :]  # (L, m, m+1, dim)
    out = np.einsum("rj,krjd->krd", D, shifted) * p.grid.L
    return out.reshape(p.grid.L * p.grid.m, p.dim)


def right_end_value(p: PiecewisePolynomial) -> np.ndarray:
    """Value of p at t = 1 (right end of the last interval)."""
    return p.grid.abscissae.right_row @ p.interval_values[-1]


def restrict_function(f, grid: CollocationGrid) -> PiecewisePolynomial:
    """Interpolate a function of t in [0, 1] at the representation nodes.

    f may return a scalar or a 1-D component vector.
    """
    cols = [np.atleast_1d(np.asarray(f(t), dtype=float)) for t in grid.rep_nodes]
    return PiecewisePolynomial(grid, np.stack(cols, axis=0))


def eval_periodic(sol, s) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Periodic evaluation of a discrete solution at rescaled time s in [-1, 1].

    Negative arguments wrap by one period (s < 0 evaluates at s + 1), so
    s = -1 is the same as s = 0.  Returns (x, y, y').
    """
    arr = np.atleast_1d(np.asarray(s, dtype=float))
    wrapped = wrap_times(arr)
    x = eval_values_many(sol.mu, wrapped)
    y = eval_values_many(sol.nu, wrapped)
    yd = eval_derivs_many(sol.nu, wrapped)
    if np.ndim(s) == 0:
        return x[0], y[0], yd[0]
    return x, y, yd


def wrap_times(ts: np.ndarray) -> np.ndarray:
    """Wrap rescaled times in [-1, 1] periodically into [0, 1]."""
    ts = np.asarray(ts, dtype=float)
    if ts.size and ts.min() < -1.0 - DOMAIN_TOL:
        raise DomainError(f"time {ts.min()!r} below -1: longer history than one period")
    return np.where(ts < 0.0, ts + 1.0, ts)
