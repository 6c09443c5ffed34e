"""JSON experiment configurations: parsing, initial-data presets and summaries.

A configuration looks like::

    {
      "params": {"a": 0.05, "k": 1.0, "tau": 1.0, "xi": 0.1},
      "grid": {"dim": 1, "nx": 201},
      "init": {"preset": "gaussian", "center": 0.5, "width": 0.05},
      "t_end": 5.0,
      "cfl": 0.5,
      "sampling": {"sample_every": 1, "snapshot_every": 0},
      "weights": "remark",
      "fit": {"t_start": 1.0, "c1_factor": 1.2}
    }

``params.xi`` may be replaced by ``params.xi_over_a``.  Errors carry the
dotted path of the offending field.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any, Optional

import numpy as np

from . import diagnostics, region
from .core import EDGES, Grid1D, Grid2D, LyapunovWeights, PhysicalParams
from .output import read_csv
from .solver import InitialData, RunConfig, RunResult, cfl_dt, run


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


_MISSING = object()


def _get(d: dict, key: str, path: str, kind, default=_MISSING):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    full = f"{path}.{key}" if path else key
    if key not in d:
        if default is _MISSING:
            raise ConfigError(full, "missing")
        return default
    value = d[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(full, f"expected a finite number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(full, f"expected an integer, got {value!r}")
        return value
    if not isinstance(value, kind):
        raise ConfigError(full, f"expected {getattr(kind, '__name__', kind)}, got {value!r}")
    return value


def parse_params(d: dict, path: str = "params") -> PhysicalParams:
    a = _get(d, "a", path, float)
    k = _get(d, "k", path, float)
    tau = _get(d, "tau", path, float)
    if "xi" in d:
        xi = _get(d, "xi", path, float)
    elif "xi_over_a" in d:
        xi = _get(d, "xi_over_a", path, float) * a
    else:
        raise ConfigError(f"{path}.xi", "missing")
    diagnostic = _get(d, "diagnostic", path, bool, False)
    return PhysicalParams(a=a, k=k, tau=tau, xi=xi, diagnostic=diagnostic)


def parse_grid(d: dict, path: str = "grid"):
    dim = _get(d, "dim", path, int, 1)
    try:
        if dim == 1:
            return Grid1D(
                nx=_get(d, "nx", path, int),
                length=_get(d, "length", path, float, 1.0),
                x0=_get(d, "x0", path, float, 0.0),
                right_bc=_get(d, "right_bc", path, str, "feedback"),
            )
        if dim == 2:
            x0 = _get(d, "x0", path, list, [0.0, 0.5])
            g0 = tuple(_get(d, "gamma0_edges", path, list, ["left"]))
            for e in g0:
                if e not in EDGES:
                    raise ConfigError(f"{path}.gamma0_edges", f"unknown edge {e!r}")
            return Grid2D(
                nx=_get(d, "nx", path, int),
                ny=_get(d, "ny", path, int),
                lx=_get(d, "lx", path, float, 1.0),
                ly=_get(d, "ly", path, float, 1.0),
                x0=(float(x0[0]), float(x0[1])),
                gamma0_edges=g0,
                gamma1_edges=tuple(e for e in EDGES if e not in g0),
            )
    except ConfigError:
        raise
    except (ValueError, TypeError, IndexError) as exc:
        raise ConfigError(path, str(exc)) from exc
    raise ConfigError(f"{path}.dim", f"expected 1 or 2, got {dim!r}")


# ---------------------------------------------------------------------------
# initial-data presets


def _axis_profiles(grid):
    """Per axis: (coordinate length, dirichlet at low end, dirichlet at high end)."""
    if isinstance(grid, Grid1D):
        return [(grid.length, True, grid.right_bc == "dirichlet")]
    g0 = set(grid.gamma0_edges)
    return [(grid.lx, "left" in g0, "right" in g0), (grid.ly, "bottom" in g0, "top" in g0)]


def _eigen_factor(s, length, low, high):
    if low and high:
        return np.sin(np.pi * s / length)
    if low:
        return np.sin(0.5 * np.pi * s / length)
    if high:
        return np.cos(0.5 * np.pi * s / length)
    return np.ones_like(s)


def _poly_factor(s, length, low, high):
    r = s / length
    if low and high:
        return 4.0 * r * (1.0 - r)
    if low:
        # vanishes at 0 with zero slope at the far end
        return 2.0 * r * r * (1.5 - r)
    if high:
        q = 1.0 - r
        return 2.0 * q * q * (1.5 - q)
    return np.ones_like(s)


def eigenmode(grid):
    """Lowest mode of the Laplacian with Dirichlet on the Dirichlet part and
    Neumann elsewhere; the exact standing wave of the conservative problem."""
    axes = _axis_profiles(grid)

    def f(*coords):
        out = 1.0
        for c, (length, lo, hi) in zip(coords, axes):
            out = out * _eigen_factor(c, length, lo, hi)
        return out

    return f


def eigen_frequency(grid) -> float:
    total = 0.0
    for length, lo, hi in _axis_profiles(grid):
        if lo and hi:
            total += (np.pi / length) ** 2
        elif lo or hi:
            total += (0.5 * np.pi / length) ** 2
    return math.sqrt(total)


def polynomial(grid):
    axes = _axis_profiles(grid)

    def f(*coords):
        out = 1.0
        for c, (length, lo, hi) in zip(coords, axes):
            out = out * _poly_factor(c, length, lo, hi)
        return out

    return f


def gaussian(grid, center, width: float):
    c = np.atleast_1d(np.asarray(center, dtype=float))

    def f(*coords):
        r2 = sum((x - cx) ** 2 for x, cx in zip(coords, c))
        return np.exp(-r2 / (2.0 * width * width))

    return f


def parse_init(d: dict, grid, path: str = "init") -> InitialData:
    preset = _get(d, "preset", path, str)
    amplitude = _get(d, "amplitude", path, float, 1.0)
    if preset == "eigenmode":
        base = eigenmode(grid)
    elif preset == "polynomial":
        base = polynomial(grid)
    elif preset == "gaussian":
        default_center = [0.5 * grid.length] if isinstance(grid, Grid1D) else [0.5 * grid.lx, 0.5 * grid.ly]
        center = d.get("center", default_center)
        center = [center] if isinstance(center, (int, float)) else center
        if len(center) != (1 if isinstance(grid, Grid1D) else 2):
            raise ConfigError(f"{path}.center", "wrong number of coordinates")
        width = _get(d, "width", path, float, 0.05)
        if not width > 0:
            raise ConfigError(f"{path}.width", "must be positive")
        base = gaussian(grid, center, width)
    elif preset == "raw":
        file = _get(d, "path", path, str)
        try:
            header, data = read_csv(file)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{path}.path", str(exc)) from exc
        if "u0" not in header:
            raise ConfigError(f"{path}.path", "CSV needs a u0 column")
        if data.shape[0] != grid.size:
            raise ConfigError(f"{path}.path", f"{data.shape[0]} rows for {grid.size} nodes")
        u0 = amplitude * data[:, header.index("u0")]
        u1 = amplitude * data[:, header.index("u1")] if "u1" in header else 0.0
        return InitialData(u0=u0, u1=u1)
    else:
        raise ConfigError(f"{path}.preset", f"unknown preset {preset!r}")
    return InitialData(u0=lambda *c: amplitude * base(*c))


# ---------------------------------------------------------------------------


@dataclass
class Experiment:
    config: RunConfig
    init: InitialData
    fit_t_start: float
    c1_factor: float
    raw: dict


def parse_weights(value, params: PhysicalParams, grid, path: str = "weights") -> Optional[LyapunovWeights]:
    if value is None:
        return None
    if value == "remark":
        if not params.k > 0:
            raise ConfigError(path, "remark weights need k > 0")
        try:
            gc = region.geometry_constants(region.geometry_for_grid(grid))
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from exc
        return region.remark_choices(params.k, gc).weights
    if isinstance(value, dict):
        return LyapunovWeights(
            gamma1=_get(value, "gamma1", path, float),
            gamma2=_get(value, "gamma2", path, float),
            epsilon=_get(value, "epsilon", path, float),
        )
    raise ConfigError(path, f"expected \"remark\", an object or null, got {value!r}")


def parse_experiment(d: dict) -> Experiment:
    if not isinstance(d, dict):
        raise ConfigError("", "configuration must be a JSON object")
    params = parse_params(_get(d, "params", "", dict))
    grid = parse_grid(_get(d, "grid", "", dict))
    init = parse_init(_get(d, "init", "", dict), grid)
    t_end = _get(d, "t_end", "", float)
    cfl = _get(d, "cfl", "", float, 0.5)
    sampling = _get(d, "sampling", "", dict, {})
    sample_every = _get(sampling, "sample_every", "sampling", int, 1)
    snapshot_every = _get(sampling, "snapshot_every", "sampling", int, 0) or None
    default_weights = "remark" if params.k > 0 else None
    weights = parse_weights(d.get("weights", default_weights), params, grid)
    fit = _get(d, "fit", "", dict, {})
    t_start = _get(fit, "t_start", "fit", float, params.tau)
    c1_factor = _get(fit, "c1_factor", "fit", float, 1.2)
    config = RunConfig(params=params, grid=grid, t_end=t_end, cfl=cfl, sample_every=sample_every,
                       snapshot_every=snapshot_every, weights=weights)
    problems = config.problems()
    if problems:
        raise ConfigError("config", "; ".join(problems))
    return Experiment(config, init, t_start, c1_factor, d)


def resolved_config(exp: Experiment, result: Optional[RunResult] = None) -> dict:
    cfg = exp.config
    out = {
        "input": exp.raw,
        "params": asdict(cfg.params),
        "grid": {"type": type(cfg.grid).__name__, **asdict(cfg.grid)},
        "t_end": cfg.t_end,
        "cfl": cfg.cfl,
        "sample_every": cfg.sample_every,
        "snapshot_every": cfg.snapshot_every,
        "weights": None if cfg.weights is None else asdict(cfg.weights),
        "fit_t_start": exp.fit_t_start,
        "c1_factor": exp.c1_factor,
    }
    if result is not None:
        out.update(dt=result.dt, n_tau=result.n_tau, n_steps=result.n_steps)
    return out


def summarize(exp: Experiment, result: RunResult) -> dict:
    """Termination status, decay fit, bound check, descent and equivalence."""
    samples = result.samples
    summary: dict[str, Any] = {
        "status": result.status,
        "status_step": result.status_step,
        "config": resolved_config(exp, result),
        "n_samples": len(samples),
        "e0": samples[0].e_total if samples else None,
        "e_final": samples[-1].e_total if samples else None,
        "fit": None,
        "bound_check": None,
        "descent": None,
        "equivalence": None,
    }
    if result.status != "completed" or len(samples) < 3:
        return summary
    t_start = exp.fit_t_start if exp.fit_t_start < samples[-1].t else 0.0
    tail = [s for s in samples if s.t >= t_start]
    try:
        fit = diagnostics.fit_decay(samples, t_start)
    except ValueError as exc:
        summary["fit"] = {"t_start": t_start, "error": str(exc)}
    else:
        summary["fit"] = {"t_start": t_start, "c1": fit.c1, "c2": fit.c2, "r2": fit.r2}
        holds, worst = diagnostics.check_decay_bound(samples, exp.c1_factor * fit.c1, fit.c2, t_start=t_start)
        summary["bound_check"] = {"c1": exp.c1_factor * fit.c1, "c2": fit.c2, "holds": holds, "worst": worst}
    if exp.config.weights is not None and len(tail) >= 2:
        d = diagnostics.lyapunov_descent(samples, t_start)
        summary["descent"] = {"t_after": t_start, "max_increase": d.max_increase,
                              "mean_rate": d.mean_rate, "holds": d.holds}
        summary["equivalence"] = list(diagnostics.equivalence_ratios(samples, 0.0))
    return summary


def simulate(d: dict, backend=None) -> tuple[Experiment, RunResult, dict]:
    exp = parse_experiment(d)
    result = run(exp.config, exp.init, backend=backend)
    return exp, result, summarize(exp, result)


def derived_steps(d: dict) -> tuple[float, int]:
    exp = parse_experiment(d)
    return cfl_dt(exp.config.grid, exp.config.cfl, exp.config.params.tau, a=exp.config.params.a)
