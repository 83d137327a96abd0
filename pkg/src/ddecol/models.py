"""Built-in example systems: a quadratic renewal/DDE pair with a closed-form
periodic solution, a consumer-resource population model with distributed
age-dependent birth delay, and a neutral integrated FitzHugh-Nagumo variant
with delayed feedback.

Conventions: the renewal unknown is always the x block, the differential
unknown the y block; rescaled time runs over [0, 1] and right-hand sides are
stated in original time units.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .collocation import DiscreteSolution, solution_from_values
from .errors import NoPeriodicSolutionError
from .meshing import CollocationGrid
from .problem import CoupledSystem, QuadratureSpec, kernel_integral

__all__ = [
    "DAPHNIA_HOPF_BETA",
    "DAPHNIA_HOPF_PERIOD",
    "DaphniaParams",
    "ExactSolution",
    "HOPF_GAMMA",
    "PlantParams",
    "daphnia_ansatz",
    "daphnia_characteristic",
    "daphnia_equilibrium",
    "daphnia_model",
    "find_v0",
    "plant_equilibrium",
    "plant_initial_guess",
    "plant_model",
    "quadratic_amplitude",
    "quadratic_exact",
    "quadratic_example",
    "simulate_plant",
]


@dataclass(frozen=True)
class ExactSolution:
    """Closed-form periodic solution in rescaled time t in [0, 1].

    x(t) and y(t) are vectorized and return (n, d) arrays; y_deriv is the
    derivative of y with respect to *original* time.  Calling the object
    returns the (x, y) pair.
    """

    x: Callable
    y: Callable
    y_deriv: Callable
    omega: float
    meta: dict

    def __call__(self, ts):
        return self.x(ts), self.y(ts)


def _columns(fn):
    def wrapped(ts):
        out = np.asarray(fn(np.asarray(ts, dtype=float)), dtype=float)
        return out[:, None] if out.ndim == 1 else out

    return wrapped


# ---------------------------------------------------------------------------
# Quadratic example: scalar renewal equation with kernel x(1-x) over the
# delayed window [-3, -1], driving a linear differential equation.  For any
# gamma above the Hopf value the pair has an explicit sinusoidal solution of
# period exactly 4.
# ---------------------------------------------------------------------------

#: Parameter value where the nontrivial periodic branch is born.
HOPF_GAMMA = 2.0 + np.pi / 2.0


def quadratic_sigma(gamma: float) -> float:
    return 0.5 + np.pi / (4.0 * gamma)


def quadratic_amplitude(gamma: float) -> float:
    """Half peak-to-peak amplitude A of the exact x component."""
    sigma = quadratic_sigma(gamma)
    a2 = 2.0 * sigma * (1.0 - 1.0 / gamma - sigma)
    if a2 <= 0.0:
        raise NoPeriodicSolutionError(
            f"gamma={gamma} is at or below the Hopf value {HOPF_GAMMA}; "
            "no nontrivial periodic solution exists"
        )
    return float(np.sqrt(a2))


def quadratic_exact(gamma: float) -> ExactSolution:
    """The closed-form periodic solution (raises below the Hopf point)."""
    sigma = quadratic_sigma(gamma)
    A = quadratic_amplitude(gamma)
    c = 2.0 * A / (4.0 + np.pi**2)
    two_pi = 2.0 * np.pi

    def x(t):
        return sigma + A * np.sin(two_pi * t)

    def y(t):
        return -2.0 * (sigma + c * (2.0 * np.sin(two_pi * t) + np.pi * np.cos(two_pi * t)))

    def y_deriv(t):
        return -np.pi * c * (2.0 * np.cos(two_pi * t) - np.pi * np.sin(two_pi * t))

    return ExactSolution(
        _columns(x), _columns(y), _columns(y_deriv), 4.0,
        {"gamma": gamma, "sigma": sigma, "A": A},
    )


def quadratic_example(gamma: float, secondary: QuadratureSpec = QuadratureSpec()):
    """Build the quadratic example system.

    Returns (system, exact, omega_exact); exact is None at or below the Hopf
    point, where only the constant solution remains.
    """
    if not gamma > 0:
        raise ValueError(f"need gamma > 0, got {gamma}")
    kint = kernel_integral(
        lambda s, xv, yv: xv * (1.0 - xv), -3.0, -1.0, rule=secondary, needs=("x",)
    )

    def rhs_F(acc, omega):
        return 0.5 * gamma * kint(acc, omega)

    def rhs_G(acc, omega):
        return gamma * kint(acc, omega) + acc.y_at(0.0)

    system = CoupledSystem(
        1, 1, 3.0, rhs_F, rhs_G, name="quadratic",
        params={"gamma": gamma, "secondary": secondary},
    )
    try:
        exact = quadratic_exact(gamma)
    except NoPeriodicSolutionError:
        exact = None
    return system, exact, 4.0


# ---------------------------------------------------------------------------
# Consumer-resource model: birth rate b (renewal) and resource S
# (differential), with reproduction over the adult age window [a_bar, a_max]:
#   b(t) = beta * S(t) * J(t),   S'(t) = r S (1 - S/K) - gamma S J(t),
#   J(t) = integral of b(t - a) over a in [a_bar, a_max].
# ---------------------------------------------------------------------------

#: Hopf point of the default-parameter model, from the equilibrium
#: linearization (see daphnia_characteristic); beyond it a periodic orbit
#: exists whose period starts near DAPHNIA_HOPF_PERIOD.
DAPHNIA_HOPF_BETA = 3.0161967773
DAPHNIA_HOPF_PERIOD = 15.7602217954


@dataclass(frozen=True)
class DaphniaParams:
    beta: float
    r: float = 1.0
    K: float = 1.0
    gamma: float = 1.0
    a_bar: float = 3.0
    a_max: float = 4.0


def daphnia_equilibrium(p: DaphniaParams) -> tuple[float, float]:
    """The positive equilibrium (b_bar, S_bar)."""
    w = p.a_max - p.a_bar
    S_bar = 1.0 / (p.beta * w)
    b_bar = p.r * (1.0 - S_bar / p.K) / (p.gamma * w)
    return b_bar, S_bar


def daphnia_characteristic(lam: complex, p: DaphniaParams) -> complex:
    """Characteristic function of the linearization at the equilibrium."""
    w = p.a_max - p.a_bar
    b_bar, S_bar = daphnia_equilibrium(p)
    lam = complex(lam)
    if lam == 0:
        k = w
    else:
        k = (np.exp(-p.a_bar * lam) - np.exp(-p.a_max * lam)) / lam
    return (lam + p.r * S_bar / p.K) * (1.0 - p.beta * S_bar * k) \
        + p.gamma * p.beta * S_bar * b_bar * w * k


def daphnia_model(p: DaphniaParams, secondary: QuadratureSpec = QuadratureSpec()) -> CoupledSystem:
    if not 0 <= p.a_bar < p.a_max:
        raise ValueError(f"need 0 <= a_bar < a_max, got [{p.a_bar}, {p.a_max}]")
    kint = kernel_integral(
        lambda s, xv, yv: xv, -p.a_max, -p.a_bar, rule=secondary, needs=("x",)
    )

    def rhs_F(acc, omega):
        return p.beta * acc.y_at(0.0) * kint(acc, omega)

    def rhs_G(acc, omega):
        S = acc.y_at(0.0)
        return p.r * S * (1.0 - S / p.K) - p.gamma * S * kint(acc, omega)

    return CoupledSystem(
        1, 1, p.a_max, rhs_F, rhs_G, name="daphnia",
        params={"params": p, "secondary": secondary},
    )


def daphnia_ansatz(p: DaphniaParams, grid: CollocationGrid,
                   omega0: float = DAPHNIA_HOPF_PERIOD, eps_rel: float = 0.1) -> DiscreteSolution:
    """Small-amplitude starting guess near the Hopf point: the equilibrium
    perturbed along the oscillatory eigenfunction of the linearization, with
    a relative ripple of size eps_rel on the birth rate.

    Both components must ride the eigenfunction (with its amplitude ratio and
    phase lag); a ripple on the birth rate alone is nearly orthogonal to the
    orbit and collapses back to the equilibrium under Newton.
    """
    w = p.a_max - p.a_bar
    b_bar, S_bar = daphnia_equilibrium(p)
    theta = 2.0 * np.pi / omega0
    k = (np.exp(-1j * p.a_bar * theta) - np.exp(-1j * p.a_max * theta)) / (1j * theta)
    q = (1.0 - p.beta * S_bar * k) / (p.beta * b_bar * w)
    phase = np.exp(2j * np.pi * grid.rep_nodes)
    mu = b_bar + eps_rel * b_bar * np.real(phase)
    nu = S_bar + eps_rel * b_bar * np.real(q * phase)
    return solution_from_values(grid, mu, nu, omega0)


# ---------------------------------------------------------------------------
# Neutral integrated FitzHugh-Nagumo variant with delayed feedback:
#   w(t) = w(t - tau) + integral over [t - tau, t] of r (v + a - b w),
#   v'(t) = v - v^3/3 - w + mu (v(t - tau) - v0),
# where v0 is the equilibrium voltage (root of v - v^3/3 - (v + a)/b) so the
# feedback vanishes at rest.  w is the renewal unknown, v the differential
# one.  The default parameters sit past a Hopf point and carry a stable cycle
# of period about 6.1.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlantParams:
    tau: float = 2.0
    mu: float = -1.0
    a: float = 0.7
    b: float = 0.8
    r: float = 0.5


def find_v0(a: float, b: float) -> float:
    """Equilibrium voltage: the root of g(v) = v - v^3/3 - (v + a)/b.

    Safeguarded root finding on an expanding bracket; the cubic always has at
    least one real root and the leftmost/rightmost bracketed one is returned.
    """
    if b == 0:
        raise ValueError("need b != 0")
    g = lambda v: v - v**3 / 3.0 - (v + a) / b
    R = 2.0
    while g(-R) * g(R) > 0 and R < 1e6:
        R *= 2.0
    if g(-R) * g(R) > 0:
        raise ValueError(f"no sign change found for a={a}, b={b}")
    return float(brentq(g, -R, R, xtol=1e-14, rtol=8.9e-16))


def plant_equilibrium(p: PlantParams) -> tuple[float, float]:
    """The rest state (w0, v0) with vanishing feedback and zero RE integrand."""
    v0 = find_v0(p.a, p.b)
    return (v0 + p.a) / p.b, v0


def plant_model(p: PlantParams, secondary: QuadratureSpec = QuadratureSpec()) -> CoupledSystem:
    if not p.tau > 0:
        raise ValueError(f"need tau > 0, got {p.tau}")
    v0 = find_v0(p.a, p.b)
    kint = kernel_integral(
        lambda s, xv, yv: p.r * (yv + p.a - p.b * xv), -p.tau, 0.0, rule=secondary
    )

    def rhs_F(acc, omega):
        return acc.x_at(-p.tau / omega) + kint(acc, omega)

    def rhs_G(acc, omega):
        v = acc.y_at(0.0)
        w = acc.x_at(0.0)
        vd = acc.y_at(-p.tau / omega)
        return v - v**3 / 3.0 - w + p.mu * (vd - v0)

    return CoupledSystem(
        1, 1, p.tau, rhs_F, rhs_G, name="plant",
        params={"params": p, "secondary": secondary, "v0": v0},
    )


def simulate_plant(p: PlantParams, t_end: float = 200.0, dt: float = 5e-4,
                   history_offset: float = 0.1):
    """Method-of-steps time integration of the differential form of the model
    (w' = r (v + a - b w)), started from a nudged constant history.

    Returns (t, v, w) sample arrays; dt is adjusted to divide tau exactly.
    """
    nd = max(1, round(p.tau / dt))
    dt = p.tau / nd
    n = int(round(t_end / dt))
    w0, v0 = plant_equilibrium(p)
    v = np.empty(n + nd + 1)
    w = np.empty(n + 1)
    v[: nd + 1] = v0 + history_offset
    w[0] = w0
    mu, a, b, r, third = p.mu, p.a, p.b, p.r, 1.0 / 3.0
    vl = v.tolist()
    wl = [0.0] * (n + 1)
    wl[0] = w0
    for k in range(n):
        i = nd + k
        vi = vl[i]
        wi = wl[k]
        vd = vl[i - nd]
        f1v = vi - vi * vi * vi * third - wi + mu * (vd - v0)
        f1w = r * (vi + a - b * wi)
        vm = vi + 0.5 * dt * f1v
        wm = wi + 0.5 * dt * f1w
        vdm = 0.5 * (vd + vl[i - nd + 1])
        vl[i + 1] = vi + dt * (vm - vm * vm * vm * third - wm + mu * (vdm - v0))
        wl[k + 1] = wi + dt * (r * (vm + a - b * wm))
    t = np.arange(n + 1) * dt
    return t, np.asarray(vl[nd:]), np.asarray(wl)


def _detect_cycle(t, u):
    """Locate the last full oscillation period via upward midline crossings."""
    tail = slice(len(u) // 2, None)
    umid = 0.5 * (u[tail].max() + u[tail].min())
    span = u[tail].max() - u[tail].min()
    if span < 1e-6:
        raise NoPeriodicSolutionError("trajectory settled to a constant; no cycle found")
    s = u - umid
    up = np.flatnonzero((s[:-1] < 0) & (s[1:] >= 0))
    up = up[up >= len(u) // 2]
    if up.size < 3:
        raise NoPeriodicSolutionError("fewer than three oscillations in the simulated tail")
    # linear interpolation of the crossing times
    tc = t[up] + (t[up + 1] - t[up]) * (-s[up]) / (s[up + 1] - s[up])
    return tc[-2], tc[-1] - tc[-2]


def plant_initial_guess(p: PlantParams, grid: CollocationGrid,
                        t_end: float = 200.0, dt: float = 5e-4) -> DiscreteSolution:
    """Starting guess for the collocation solver: one simulated cycle sampled
    at the representation nodes, with the crossing-to-crossing period."""
    t, v, w = simulate_plant(p, t_end=t_end, dt=dt)
    t0, period = _detect_cycle(t, v)
    if period < p.tau:
        raise NoPeriodicSolutionError(
            f"detected period {period:.4f} is shorter than the delay {p.tau}"
        )
    ts = t0 + grid.rep_nodes * period
    return solution_from_values(
        grid, np.interp(ts, t, w), np.interp(ts, t, v), period
    )
