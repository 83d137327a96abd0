"""Command-line front end.

Three subcommands, each driven by a YAML config file plus ``--set`` overrides:

* ``solve``     — compute one periodic solution, write ``solution.csv`` (dense
                  profile) and ``summary.csv`` (period, diagnostics, and the
                  effective config echoed as ``config.*`` rows).
* ``continue``  — trace a branch in one model parameter, write ``branch.csv``.
* ``converge``  — run a mesh-refinement study against a reference, write
                  ``convergence.csv`` and ``orders.csv``.

Exit codes: 0 success (including a partial branch), 2 config/validation
error, 3 numerical failure.  Errors print a one-line JSON record to stderr.
All CSVs use shortest round-trip decimals, '.' separators, and LF endings,
and are written only after the computation finishes.
"""

from __future__ import annotations

import argparse
import csv
import importlib.util
import json
import math
import sys
from dataclasses import fields as dataclass_fields
from pathlib import Path

import numpy as np
import yaml

from .analysis import convergence_study, restrict_reference
from .collocation import eval_periodic, solution_from_values
from .errors import (
    ConfigError,
    DdecolError,
    DelayExceedsPeriodError,
    InsufficientDataError,
    NewtonNoConvergenceError,
    NoPeriodicSolutionError,
    NonFiniteResidualError,
    SingularJacobianError,
)
from .meshing import build_grid, eval_values_many, make_abscissae
from .models import (
    DaphniaParams,
    PlantParams,
    daphnia_ansatz,
    daphnia_model,
    plant_initial_guess,
    plant_model,
    quadratic_exact,
    quadratic_example,
    quadratic_sigma,
)
from .problem import AnchorPhase, IntegralPhase, QuadratureSpec
from .quadrature import QuadratureKind, normalize_kind
from .solver import ContinuationOptions, NewtonOptions, continue_branch, newton_solve

_NUMERICAL_ERRORS = (
    DelayExceedsPeriodError,
    InsufficientDataError,
    NewtonNoConvergenceError,
    NoPeriodicSolutionError,
    NonFiniteResidualError,
    SingularJacobianError,
)

_ABSCISSAE = ("gauss_legendre", "chebyshev_extrema")
_SECONDARY = (
    "clenshaw_curtis",
    "gauss_legendre",
    "mesh_gauss_legendre",
    "mesh_aligned",
    "piecewise",
)


# ---------------------------------------------------------------------------
# config schema: {key: (default, checker)} with nested dicts; every key a
# user may write appears here, anything else is rejected
# ---------------------------------------------------------------------------


def _number(path, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path} must be a number, got {v!r}")
    return float(v)


def _opt(checker):
    return lambda path, v: None if v is None else checker(path, v)


def _positive(path, v):
    v = _number(path, v)
    if not v > 0:
        raise ConfigError(f"{path} must be positive, got {v!r}")
    return v


def _nonneg(path, v):
    v = _number(path, v)
    if v < 0:
        raise ConfigError(f"{path} must be nonnegative, got {v!r}")
    return v


def _positive_int(path, v):
    if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
        raise ConfigError(f"{path} must be a positive integer, got {v!r}")
    return v


def _nonneg_int(path, v):
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise ConfigError(f"{path} must be a nonnegative integer, got {v!r}")
    return v


def _string(path, v):
    if not isinstance(v, str):
        raise ConfigError(f"{path} must be a string, got {v!r}")
    return v


def _bool(path, v):
    if not isinstance(v, bool):
        raise ConfigError(f"{path} must be a boolean, got {v!r}")
    return v


def _choice(options):
    def check(path, v):
        if v not in options:
            raise ConfigError(f"{path} must be one of {options}, got {v!r}")
        return v

    return check


def _int_list(path, v):
    if not isinstance(v, (list, tuple)) or not v or \
            any(isinstance(x, bool) or not isinstance(x, int) for x in v):
        raise ConfigError(f"{path} must be a list of integers, got {v!r}")
    return [int(x) for x in v]


def _params_map(path, v):
    if not isinstance(v, dict):
        raise ConfigError(f"{path} must be a mapping, got {v!r}")
    for k, val in v.items():
        if not isinstance(k, str):
            raise ConfigError(f"{path} keys must be strings, got {k!r}")
        _number(f"{path}.{k}", val)
    return dict(v)


_SCHEMA = {
    "model": ("quadratic", _string),
    "params": ({}, _params_map),
    "grid": {
        "L": (20, _positive_int),
        "m": (3, _positive_int),
        "abscissae_kind": ("gauss_legendre", _choice(_ABSCISSAE)),
    },
    "secondary": {
        "kind": ("clenshaw_curtis", _choice(_SECONDARY)),
        "M": (20, _positive_int),
    },
    "phase": {
        "kind": ("auto", _choice(("auto", "anchor", "integral"))),
        "which": ("x", _choice(("x", "y"))),
        "component": (0, _nonneg_int),
        "target": (None, _opt(_number)),
    },
    "initial": {
        "kind": ("auto", _choice(
            ("auto", "exact", "ansatz", "continued", "simulate", "file"))),
        "path": (None, _opt(_string)),
        "omega": (None, _opt(_positive)),
        "eps_rel": (0.25, _positive),
        "from_param": (None, _opt(_number)),
        "step": (0.1, _positive),
        "work_L": (40, _positive_int),
        "work_m": (3, _positive_int),
        "t_end": (200.0, _positive),
        "dt": (5e-4, _positive),
    },
    "newton": {
        "max_iters": (30, _positive_int),
        "residual_tol": (1e-10, _positive),
        "step_tol": (1e-12, _positive),
        "max_halvings": (8, _nonneg_int),
        "polish_iters": (0, _nonneg_int),
        "svd_rcond": (None, _opt(_positive)),
    },
    "continuation": {
        "parameter": (None, _opt(_string)),
        "target": (None, _opt(_number)),
        "initial_step": (0.05, _positive),
        "min_step": (1e-5, _positive),
        "max_step": (None, _opt(_positive)),
        "growth": (1.3, _positive),
        "grow_iters": (3, _positive_int),
        "collapse_ratio": (0.1, _nonneg),
        "smooth_corrector": (False, _bool),
    },
    "study": {
        "Ls": ([10, 20, 40, 80], _int_list),
        "M_per_L": (5, _positive_int),
        "M_cap": (200, _positive_int),
        "reference": {
            "kind": ("auto", _choice(("auto", "exact", "solve", "file"))),
            "L": (500, _positive_int),
            "m": (4, _positive_int),
            "abscissae_kind": ("gauss_legendre", _choice(_ABSCISSAE)),
            "secondary_kind": ("clenshaw_curtis", _choice(_SECONDARY)),
            "secondary_M": (64, _positive_int),
            "path": (None, _opt(_string)),
            "omega": (None, _opt(_positive)),
        },
    },
    "output": ("out", _string),
}


def _validate(user, schema, path=""):
    """Defaults filled, unknown keys rejected, leaf checkers applied."""
    if not isinstance(user, dict):
        raise ConfigError(f"{path or 'config'} must be a mapping, got {user!r}")
    out = {}
    for key, spec in schema.items():
        full = f"{path}.{key}" if path else key
        if isinstance(spec, dict):
            out[key] = _validate(user.get(key, {}), spec, full)
        elif key in user:
            default, checker = spec
            out[key] = checker(full, user[key]) if checker else user[key]
        else:
            out[key] = spec[0]
    for key in user:
        if key not in schema:
            full = f"{path}.{key}" if path else key
            raise ConfigError(f"unknown config key '{full}'")
    return out


def _apply_overrides(raw, pairs):
    for item in pairs:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        dotted, _, text = item.partition("=")
        try:
            value = yaml.safe_load(text) if text != "" else None
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse override value {text!r}: {exc}")
        node = raw
        keys = dotted.split(".")
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot override non-mapping key '{dotted}'")
        node[keys[-1]] = value
    return raw


def load_config(config_path, overrides):
    raw = {}
    if config_path is not None:
        with open(config_path, "r", encoding="utf-8") as fh:
            try:
                raw = yaml.safe_load(fh) or {}
            except yaml.YAMLError as exc:
                raise ConfigError(f"cannot parse config file {config_path}: {exc}")
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {config_path} must hold a mapping")
    _apply_overrides(raw, overrides or [])
    return _validate(raw, _SCHEMA)


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

_MODEL_PARAM_KEYS = {
    "quadratic": ("gamma",),
    "daphnia": tuple(f.name for f in dataclass_fields(DaphniaParams)),
    "plant": tuple(f.name for f in dataclass_fields(PlantParams)),
}
_MODEL_PARAM_DEFAULTS = {
    "quadratic": {"gamma": 4.0},
    "daphnia": {f.name: getattr(DaphniaParams(beta=5.0), f.name)
                for f in dataclass_fields(DaphniaParams)},
    "plant": {f.name: getattr(PlantParams(), f.name)
              for f in dataclass_fields(PlantParams)},
}
_MODEL_CONT_PARAM = {"quadratic": "gamma", "daphnia": "beta", "plant": "mu"}


class ModelContext:
    """Everything the commands need to know about the chosen model."""

    def __init__(self, name, params, make_system, cont_param,
                 exact=None, make_initial=None):
        self.name = name
        self.params = params
        self.make_system = make_system  # (params: dict, QuadratureSpec) -> system
        self.cont_param = cont_param
        self.exact = exact              # (params: dict) -> ExactSolution, or None
        self.make_initial = make_initial  # (grid, params) -> DiscreteSolution


def _load_custom_module(path):
    file = Path(path)
    if not file.exists():
        raise ConfigError(f"custom model file {path} does not exist")
    spec = importlib.util.spec_from_file_location("ddecol_custom_model", file)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    if not callable(getattr(module, "make_system", None)):
        raise ConfigError(
            f"custom model file {path} must define make_system(params, secondary)"
        )
    return module


def resolve_model(cfg) -> ModelContext:
    name = cfg["model"]
    user_params = cfg["params"]
    if name in _MODEL_PARAM_KEYS:
        allowed = _MODEL_PARAM_KEYS[name]
        for key in user_params:
            if key not in allowed:
                raise ConfigError(
                    f"unknown parameter '{key}' for model {name}; "
                    f"allowed: {', '.join(allowed)}"
                )
        params = {**_MODEL_PARAM_DEFAULTS[name], **user_params}
    elif name.endswith(".py"):
        module = _load_custom_module(name)
        params = {**getattr(module, "PARAM_DEFAULTS", {}), **user_params}
        return ModelContext(
            name, params,
            lambda p, sec: module.make_system(p, sec),
            getattr(module, "CONTINUATION_PARAMETER", None),
            exact=getattr(module, "exact_solution", None),
            make_initial=getattr(module, "make_initial", None),
        )
    else:
        raise ConfigError(
            f"unknown model {name!r}: expected quadratic, daphnia, plant, "
            "or a path to a .py file"
        )

    if name == "quadratic":
        return ModelContext(
            name, params,
            lambda p, sec: quadratic_example(p["gamma"], secondary=sec)[0],
            "gamma",
            exact=lambda p: quadratic_exact(p["gamma"]),
        )
    if name == "daphnia":
        return ModelContext(
            name, params,
            lambda p, sec: daphnia_model(DaphniaParams(**p), sec),
            "beta",
        )
    return ModelContext(
        name, params,
        lambda p, sec: plant_model(PlantParams(**p), sec),
        "mu",
    )


# ---------------------------------------------------------------------------
# initial guesses and phase conditions
# ---------------------------------------------------------------------------


def _secondary_spec(cfg_block_kind, n):
    return QuadratureSpec(cfg_block_kind, n)


def _read_summary_omega(summary_path):
    try:
        with open(summary_path, newline="", encoding="utf-8") as fh:
            for row in csv.reader(fh):
                if len(row) == 2 and row[0] == "omega":
                    return float(row[1])
    except OSError:
        return None
    return None


def _initial_from_file(cfg_initial, grid):
    path = cfg_initial["path"]
    if not path:
        raise ConfigError("initial.kind=file requires initial.path")
    data = np.genfromtxt(path, delimiter=",", names=True)
    names = list(data.dtype.names or ())
    if "t" not in names:
        raise ConfigError(f"initial file {path} lacks a 't' column")
    x_cols = [n for n in names if n.startswith("x_")]
    y_cols = [n for n in names if n.startswith("y_") and not n.startswith("y_deriv")]
    if not x_cols or not y_cols:
        raise ConfigError(f"initial file {path} lacks x_*/y_* columns")
    omega = cfg_initial["omega"]
    if omega is None:
        omega = _read_summary_omega(Path(path).parent / "summary.csv")
    if omega is None:
        raise ConfigError(
            "initial.omega not given and no summary.csv found next to the profile"
        )
    t = np.asarray(data["t"], dtype=float)
    ts = grid.rep_nodes
    x = np.column_stack([np.interp(ts, t, np.asarray(data[c], float)) for c in x_cols])
    y = np.column_stack([np.interp(ts, t, np.asarray(data[c], float)) for c in y_cols])
    return solution_from_values(grid, x, y, float(omega))


def _continued_daphnia_initial(ctx, cfg, grid, newton):
    """Ansatz near the oscillation onset, continued in beta on a coarse work
    grid, then lifted onto the requested grid."""
    ci = cfg["initial"]
    beta_target = ctx.params["beta"]
    beta_from = ci["from_param"]
    if beta_from is None:
        beta_from = 3.05
    work = build_grid(ci["work_L"], make_abscissae("gauss_legendre", ci["work_m"]))
    p_start = {**ctx.params, "beta": beta_from}
    start = daphnia_ansatz(DaphniaParams(**p_start), work, eps_rel=ci["eps_rel"])
    secondary = QuadratureSpec("clenshaw_curtis", 64)
    branch = continue_branch(
        lambda b: ctx.make_system({**ctx.params, "beta": b}, secondary),
        beta_from, beta_target, start,
        ContinuationOptions(initial_step=ci["step"], newton=newton),
    )
    end = branch.points[-1].solution
    return restrict_reference(end, grid)


def build_initial(ctx, cfg, grid, newton):
    kind = cfg["initial"]["kind"]
    if kind == "auto":
        kind = {"quadratic": "exact", "daphnia": "continued",
                "plant": "simulate"}.get(ctx.name, "module")
    if kind == "exact":
        if ctx.exact is None:
            raise ConfigError(f"model {ctx.name} has no closed-form solution")
        return restrict_reference(ctx.exact(ctx.params), grid)
    if kind == "ansatz":
        if ctx.name != "daphnia":
            raise ConfigError("initial.kind=ansatz is only defined for daphnia")
        return daphnia_ansatz(
            DaphniaParams(**ctx.params), grid, eps_rel=cfg["initial"]["eps_rel"]
        )
    if kind == "continued":
        if ctx.name != "daphnia":
            raise ConfigError("initial.kind=continued is only defined for daphnia")
        return _continued_daphnia_initial(ctx, cfg, grid, newton)
    if kind == "simulate":
        if ctx.name != "plant":
            raise ConfigError("initial.kind=simulate is only defined for plant")
        return plant_initial_guess(
            PlantParams(**ctx.params), grid,
            t_end=cfg["initial"]["t_end"], dt=cfg["initial"]["dt"],
        )
    if kind == "file":
        return _initial_from_file(cfg["initial"], grid)
    # custom module fallback
    if ctx.make_initial is not None:
        return ctx.make_initial(grid, ctx.params)
    raise ConfigError(
        f"no initial guess available for model {ctx.name}: set initial.kind"
    )


def build_phase(ctx, cfg, initial):
    ph = cfg["phase"]
    kind = ph["kind"]
    if kind == "auto":
        kind = "anchor" if ctx.name == "quadratic" else "integral"
    if kind == "anchor":
        target = ph["target"]
        if target is None:
            if ctx.name == "quadratic" and ph["which"] == "x":
                target = quadratic_sigma(ctx.params["gamma"])
            else:
                raise ConfigError(
                    "phase.kind=anchor needs phase.target for this model"
                )
        return AnchorPhase(which=ph["which"], component=ph["component"],
                           target=float(target))
    return IntegralPhase(reference=initial)


def build_newton(cfg) -> NewtonOptions:
    nw = cfg["newton"]
    return NewtonOptions(
        max_iters=nw["max_iters"],
        residual_tol=nw["residual_tol"],
        step_tol=nw["step_tol"],
        max_halvings=nw["max_halvings"],
        polish_iters=nw["polish_iters"],
        svd_rcond=nw["svd_rcond"],
    )


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def _fmt(v):
    """Shortest-round-trip decimal; '.' separator, locale-independent."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _yaml_scalar(v):
    """Render a config value so yaml.safe_load reads the same value back."""
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        r = repr(v)
        if "e" in r and "." not in r.split("e")[0]:
            r = r.replace("e", ".0e")  # 1e-06 -> 1.0e-06, parseable as float
        return r
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_yaml_scalar(x) for x in v) + "]"
    return str(v)


def _flatten_config(cfg, prefix="config"):
    rows = []
    for key in cfg:
        value = cfg[key]
        dotted = f"{prefix}.{key}"
        if isinstance(value, dict):
            rows.extend(_flatten_config(value, dotted))
        else:
            rows.append((dotted, _yaml_scalar(value)))
    return rows


def _write_summary(path, meta_rows, cfg):
    rows = list(meta_rows) + sorted(_flatten_config(cfg))
    _write_csv(path, ("key", "value"), rows)


def _dense_profile(sol, samples_per_interval=16):
    ts = np.linspace(0.0, 1.0, samples_per_interval * sol.grid.L + 1)
    x, y, nu_prime = eval_periodic(sol, ts)
    return ts, x, y, nu_prime / sol.omega  # derivative in original time


def _amplitudes(sol, samples_per_interval=16):
    ts = np.linspace(0.0, 1.0, samples_per_interval * sol.grid.L + 1)
    x = eval_values_many(sol.mu, ts)
    y = eval_values_many(sol.nu, ts)
    return [float(np.ptp(col)) for col in x.T] + [float(np.ptp(col)) for col in y.T]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_solve(cfg) -> int:
    ctx = resolve_model(cfg)
    grid = build_grid(
        cfg["grid"]["L"], make_abscissae(cfg["grid"]["abscissae_kind"], cfg["grid"]["m"])
    )
    secondary = _secondary_spec(cfg["secondary"]["kind"], cfg["secondary"]["M"])
    newton = build_newton(cfg)
    system = ctx.make_system(ctx.params, secondary)
    initial = build_initial(ctx, cfg, grid, newton)
    phase = build_phase(ctx, cfg, initial)
    sol, diag = newton_solve(system, phase, grid, initial, newton)

    ts, x, y, y_deriv = _dense_profile(sol)
    header = (
        ["t"]
        + [f"x_{i + 1}" for i in range(sol.d_x)]
        + [f"y_{i + 1}" for i in range(sol.d_y)]
        + [f"y_deriv_{i + 1}" for i in range(sol.d_y)]
    )
    rows = [
        [t, *x[k], *y[k], *y_deriv[k]]
        for k, t in enumerate(ts)
    ]

    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "solution.csv", header, rows)
    _write_summary(
        out / "summary.csv",
        [
            ("command", "solve"),
            ("model", ctx.name),
            ("omega", _fmt(sol.omega)),
            ("iterations", diag.iterations),
            ("residual_sup", _fmt(diag.residual_norms[-1] if diag.residual_norms else 0.0)),
            ("converged_by", diag.converged_by),
        ],
        cfg,
    )
    return 0


def cmd_continue(cfg) -> int:
    ctx = resolve_model(cfg)
    parameter = cfg["continuation"]["parameter"] or ctx.cont_param
    if not parameter:
        raise ConfigError("continuation.parameter is required for this model")
    if parameter not in ctx.params:
        raise ConfigError(f"unknown continuation parameter {parameter!r}")
    target = cfg["continuation"]["target"]
    if target is None:
        raise ConfigError("continuation.target is required")
    grid = build_grid(
        cfg["grid"]["L"], make_abscissae(cfg["grid"]["abscissae_kind"], cfg["grid"]["m"])
    )
    secondary = _secondary_spec(cfg["secondary"]["kind"], cfg["secondary"]["M"])
    newton = build_newton(cfg)
    initial = build_initial(ctx, cfg, grid, newton)
    cont = cfg["continuation"]
    options = ContinuationOptions(
        initial_step=cont["initial_step"],
        min_step=cont["min_step"],
        max_step=cont["max_step"],
        growth=cont["growth"],
        grow_iters=cont["grow_iters"],
        collapse_ratio=cont["collapse_ratio"],
        smooth_corrector=cont["smooth_corrector"],
        newton=newton,
    )
    p0 = float(ctx.params[parameter])
    branch = continue_branch(
        lambda p: ctx.make_system({**ctx.params, parameter: p}, secondary),
        p0, float(target), initial, options,
    )

    d_x, d_y = branch.points[0].solution.d_x, branch.points[0].solution.d_y
    header = (
        ["param", "omega"]
        + [f"amp_x_{i + 1}" for i in range(d_x)]
        + [f"amp_y_{i + 1}" for i in range(d_y)]
        + ["iterations", "status"]
    )
    rows = []
    for k, pt in enumerate(branch.points):
        status = "ok"
        if branch.status == "partial" and k == len(branch.points) - 1:
            status = "partial"
        rows.append(
            [pt.param, pt.solution.omega, *_amplitudes(pt.solution),
             pt.diagnostics.iterations, status]
        )

    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "branch.csv", header, rows)
    _write_summary(
        out / "summary.csv",
        [
            ("command", "continue"),
            ("model", ctx.name),
            ("parameter", parameter),
            ("branch_status", branch.status),
            ("branch_message", branch.message),
            ("n_points", len(branch.points)),
        ],
        cfg,
    )
    return 0


def _study_reference(ctx, cfg, newton):
    ref_cfg = cfg["study"]["reference"]
    kind = ref_cfg["kind"]
    if kind == "auto":
        kind = "exact" if ctx.exact is not None else "solve"
    if kind == "exact":
        if ctx.exact is None:
            raise ConfigError(f"model {ctx.name} has no closed-form reference")
        return ctx.exact(ctx.params)
    grid_ref = build_grid(
        ref_cfg["L"], make_abscissae(ref_cfg["abscissae_kind"], ref_cfg["m"])
    )
    if kind == "file":
        fake = dict(cfg["initial"])
        fake.update(path=ref_cfg["path"], omega=ref_cfg["omega"])
        return _initial_from_file(fake, grid_ref)
    # kind == "solve": fine self-reference from the model's auto initial guess
    secondary = _secondary_spec(ref_cfg["secondary_kind"], ref_cfg["secondary_M"])
    system = ctx.make_system(ctx.params, secondary)
    init = build_initial(ctx, cfg, grid_ref, newton)
    phase = build_phase(ctx, cfg, init)
    sol, _ = newton_solve(system, phase, grid_ref, init, newton)
    return sol


def cmd_converge(cfg) -> int:
    ctx = resolve_model(cfg)
    study = cfg["study"]
    if len(study["Ls"]) < 3:
        raise ConfigError("study.Ls needs at least 3 mesh sizes")
    newton = build_newton(cfg)
    reference = _study_reference(ctx, cfg, newton)

    sec_kind = cfg["secondary"]["kind"]
    mesh_aligned = normalize_kind(sec_kind) is QuadratureKind.MESH_GAUSS_LEGENDRE

    def factory(M):
        n = M + 1 if mesh_aligned else M
        return ctx.make_system(ctx.params, _secondary_spec(sec_kind, n))

    def m_rule(L):
        return min(study["M_per_L"] * L, study["M_cap"])

    if cfg["phase"]["kind"] == "anchor" or (
        cfg["phase"]["kind"] == "auto" and ctx.name == "quadratic"
    ):
        phase = build_phase(ctx, {**cfg, "phase": {**cfg["phase"], "kind": "anchor"}},
                            None)
    else:
        phase = IntegralPhase(reference=reference)

    table = convergence_study(
        factory, phase, reference, cfg["grid"]["m"], cfg["grid"]["abscissae_kind"],
        study["Ls"], M_rule=m_rule, newton=newton,
    )

    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out / "convergence.csv",
        ("L", "m", "abscissae_kind", "M", "err_x_sup", "err_y_sup",
         "err_omega", "runtime_seconds", "log10_h", "log10_err_x",
         "log10_err_y"),
        [
            (r.L, r.m, r.abscissae_kind, r.M, r.err_x_sup, r.err_y_sup,
             r.err_omega, r.runtime_seconds, -math.log10(r.L),
             math.log10(r.err_x_sup) if r.err_x_sup > 0 else -math.inf,
             math.log10(r.err_y_sup) if r.err_y_sup > 0 else -math.inf)
            for r in table.rows
        ],
    )
    _write_csv(
        out / "orders.csv",
        ("order_x", "order_y", "order_omega"),
        [tuple(table.fitted_orders)],
    )
    meta = [
        ("command", "converge"),
        ("model", ctx.name),
        ("n_rows", len(table.rows)),
        ("n_failures", len(table.failures)),
    ]
    for L, message in table.failures:
        meta.append((f"failure_L_{L}", message))
    _write_summary(out / "summary.csv", meta, cfg)
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ddecol",
        description="Periodic solutions of coupled renewal/delay systems "
                    "by piecewise orthogonal collocation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("solve", "compute one periodic solution"),
        ("continue", "trace a branch in a model parameter"),
        ("converge", "run a mesh-refinement convergence study"),
    ):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", type=str, default=None,
                       help="YAML config file")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="override a config key (dotted path, YAML value)")
        p.add_argument("--output", type=str, default=None,
                       help="output directory (overrides config)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        if args.output is not None:
            cfg["output"] = args.output
        command = {"solve": cmd_solve, "continue": cmd_continue,
                   "converge": cmd_converge}[args.command]
        return command(cfg)
    except (ConfigError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
