"""Built-in acceptance suite shared by ``delaywave verify`` and the test-suite.

Each check returns a :class:`CriterionResult` whose ``details`` hold the
measured numbers.  Reports contain no timings, so two invocations produce
identical bytes; wall-clock times are returned separately.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import diagnostics as diag
from . import region, spectral1d
from .core import DlpParams, Grid1D, Grid2D, PhysicalParams
from .experiment import eigen_frequency, eigenmode
from .solver import InitialData, RunConfig, run

# pinned tolerances
CONSERVATION_TOL = 1e-4
ORDER_RANGE = (1.8, 2.2)
IDENTITY_FACTOR = 3.0
A0_DIGITS_RTOL = 1e-6
DECAY_R2 = 0.95
C1_FACTOR = 1.2
EQUIV_SHIFT = 0.20
REGION_BAND = 1e-9
SPECTRAL_THRESHOLD_TOL = 1e-14
K0_ABSCISSA_TOL = 1e-6
XVAL_GAP = 0.10
SEED = 20240613


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6e}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def format_report(results) -> str:
    lines = []
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        body = " ".join(f"{k}={_fmt(v)}" for k, v in r.details.items())
        lines.append(f"criterion {r.number} {r.name}: {status} {body}".rstrip())
    n_pass = sum(r.passed for r in results)
    lines.append(f"summary: {n_pass}/{len(results)} passed")
    return "\n".join(lines) + "\n"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _conservation_params() -> PhysicalParams:
    # a = 0, k = 0 and no delay: the delay-window integral vanishes identically
    return PhysicalParams(a=0.0, k=0.0, tau=0.0, xi=1.0, diagnostic=True)


# ---------------------------------------------------------------------------


@_timed
def conservation(nx: int = 1001, t_end: float = 10.0) -> CriterionResult:
    """Eigenmode run of the conservative problem: relative energy drift."""
    grid = Grid1D(nx=nx)
    cfg = RunConfig(params=_conservation_params(), grid=grid, t_end=t_end, cfl=0.5)
    res = run(cfg, InitialData(u0=eigenmode(grid)))
    e = diag.column(res.samples, "e_total")
    drift = float(np.max(np.abs(e - e[0])) / e[0])
    return CriterionResult(1, "conservation", res.status == "completed" and drift < CONSERVATION_TOL,
                           {"nx": nx, "t_end": t_end, "status": res.status, "drift": drift, "tol": CONSERVATION_TOL})


def eigenmode_error(nx: int, t_end: float = 1.0, cfl: float = 0.5) -> float:
    """L2 error at ``t_end`` against ``sin(pi x / 2) cos(pi t / 2)``."""
    grid = Grid1D(nx=nx)
    cfg = RunConfig(params=_conservation_params(), grid=grid, t_end=t_end, cfl=cfl)
    mode = eigenmode(grid)
    res = run(cfg, InitialData(u0=mode), keep_state=True)
    state = res.final_state
    t = state.t_observed
    exact = mode(grid.x) * math.cos(eigen_frequency(grid) * t)
    err = state.u_prev - exact
    return math.sqrt(diag.l2_sq(err, grid))


@_timed
def scheme_order(grids=(51, 101, 201, 401)) -> CriterionResult:
    errors = [eigenmode_error(n) for n in grids]
    orders = [math.log2(errors[i] / errors[i + 1]) for i in range(len(errors) - 1)]
    ok = all(ORDER_RANGE[0] <= p <= ORDER_RANGE[1] for p in orders)
    return CriterionResult(2, "scheme_order", ok, {"grids": list(grids), "errors": errors, "orders": orders})


def identity_residual(nx: int, t_end: float = 3.0) -> float:
    """Max residual of the energy identity on a stable delayed 1D run with a
    compactly supported bump, sampled every step."""
    params = PhysicalParams(a=0.05, k=1.0, tau=1.0, xi=0.1)

    def bump(x):
        return np.where(np.abs(x - 0.5) < 0.25, np.cos(2.0 * np.pi * (x - 0.5)) ** 4, 0.0)

    cfg = RunConfig(params=params, grid=Grid1D(nx=nx), t_end=t_end, cfl=0.5)
    res = run(cfg, InitialData(u0=bump))
    _, r = diag.energy_identity_residual(res.samples, params)
    return float(np.max(np.abs(r)))


@_timed
def energy_identity() -> CriterionResult:
    r1, r2 = identity_residual(201), identity_residual(401)
    factor = r1 / r2
    return CriterionResult(3, "energy_identity", factor >= IDENTITY_FACTOR,
                           {"residual_coarse": r1, "residual_fine": r2, "factor": factor, "min_factor": IDENTITY_FACTOR})


@_timed
def explicit_constants(cells: int = 64) -> CriterionResult:
    """a0(k=1) on the unit interval from eigen-verified constants."""
    geom = region.Interval(1.0, 0.0)
    cp, c0p = region.verified_constants(geom, cells)
    n, m_inf, delta = region.multiplier_constants(geom)
    from .core import GeometryConstants

    gc = GeometryConstants(n=n, m_inf=m_inf, delta=delta, cp=cp, c0p=c0p)
    a0 = region.a0(1.0, gc)
    ref = (1.0 / 3.0) / (3.0 + 4.0 / math.pi ** 2)
    rel = abs(a0 - ref) / ref
    cp_rel = abs(cp - 1.0)
    c0_rel = abs(c0p - 4.0 / math.pi ** 2) / (4.0 / math.pi ** 2)
    ok = rel < A0_DIGITS_RTOL and cp_rel < A0_DIGITS_RTOL and c0_rel < A0_DIGITS_RTOL
    return CriterionResult(4, "explicit_constants", ok,
                           {"cp": cp, "c0p": c0p, "a0": a0, "reference": ref, "rel_error": rel})


# ---------------------------------------------------------------------------
# decay theorem runs on the unit square


DECAY_T_END = 12.0
DECAY_TAU = 1.0


def decay_setup():
    geom = region.Rectangle()
    gc = region.geometry_constants(geom)
    choice = region.remark_choices(1.0, gc)
    return geom, gc, choice, region.a0(1.0, gc)


def decay_run(a: float, n: int, weights, t_end: float = DECAY_T_END):
    grid = Grid2D(nx=n, ny=n)
    params = PhysicalParams(a=a, k=1.0, tau=DECAY_TAU, xi=2.0 * a)
    cfg = RunConfig(params=params, grid=grid, t_end=t_end, cfl=0.5, sample_every=2, weights=weights)
    return run(cfg, InitialData(u0=eigenmode(grid)))


@_timed
def decay_theorem(n: int = 81, runs: Optional[dict] = None) -> CriterionResult:
    """Fit, bound and Lyapunov descent for a in {a0/4, a0/2}, xi = 2a, k = tau = 1."""
    _, gc, choice, a0 = decay_setup()
    details: dict = {"a0": a0}
    ok = True
    for label, a in (("a0/4", a0 / 4.0), ("a0/2", a0 / 2.0)):
        feas = region.feasible(a, 2.0 * a, choice.weights, DECAY_TAU, 1.0, gc)
        res = decay_run(a, n, choice.weights)
        if runs is not None:
            runs[(label, n)] = res
        s = res.samples
        fit = diag.fit_decay(s, DECAY_TAU)
        bound_ok, worst = diag.check_decay_bound(s, C1_FACTOR * fit.c1, fit.c2, t_start=DECAY_TAU)
        desc = diag.lyapunov_descent(s, DECAY_TAU)
        this_ok = (res.status == "completed" and feas.all and fit.c2 > 0 and fit.r2 > DECAY_R2
                   and bound_ok and desc.holds and desc.mean_rate > 0)
        ok = ok and this_ok
        details.update({
            f"[{label}] feasible": feas.all,
            f"[{label}] C2_fit": fit.c2,
            f"[{label}] r2": fit.r2,
            f"[{label}] bound_worst": worst,
            f"[{label}] descent_max_increase": desc.max_increase,
            f"[{label}] descent_rate": desc.mean_rate,
        })
    return CriterionResult(5, "decay_theorem", ok, details)


@_timed
def equivalence(coarse: int = 41, fine: int = 81, runs: Optional[dict] = None) -> CriterionResult:
    _, _, choice, a0 = decay_setup()
    details: dict = {}
    ok = True
    for label, a in (("a0/4", a0 / 4.0), ("a0/2", a0 / 2.0)):
        ratios = []
        for n in (coarse, fine):
            res = runs.get((label, n)) if runs else None
            if res is None:
                res = decay_run(a, n, choice.weights)
            ratios.append(diag.equivalence_ratios(res.samples, 0.0))
        (lo1, hi1), (lo2, hi2) = ratios
        shift = max(abs(lo2 - lo1) / lo2, abs(hi2 - hi1) / hi2)
        this_ok = lo1 > 0 and lo2 > 0 and math.isfinite(hi2) and shift < EQUIV_SHIFT
        ok = ok and this_ok
        details.update({f"[{label}] coarse": [lo1, hi1], f"[{label}] fine": [lo2, hi2], f"[{label}] shift": shift})
    return CriterionResult(6, "equivalence", ok, details)


# ---------------------------------------------------------------------------


@_timed
def region_consistency(n_points: int = 10_000) -> CriterionResult:
    rng = np.random.default_rng(SEED)
    gc = region.geometry_constants(region.Interval())
    k, tau = 1.0, 1.0
    w = region.remark_choices(k, gc).weights
    poly = region.region_polygon(w, tau, k, gc)
    side = 2.0 * (w.gamma1 - w.gamma2)
    pts = rng.uniform(0.0, 1.2 * side, size=(n_points, 2))
    mismatches = 0
    in_band = 0
    for a, xi in pts:
        inside = region.polygon_contains(poly.vertices, (a, xi))
        feas = region.feasible(a, xi, w, tau, k, gc).all and xi > 0
        if inside != feas:
            if region.boundary_distance((a, xi), w, tau, gc) < REGION_BAND:
                in_band += 1
            else:
                mismatches += 1
    # Remark-constructed points for 20 gains, both presets
    ks = np.logspace(-3, 3, 20)
    remark_total = remark_bad = 0
    for geom in (region.Interval(), region.Rectangle()):
        g = region.geometry_constants(geom)
        for kk in ks:
            ch = region.remark_choices(float(kk), g)
            amax = region.a0(float(kk), g)
            for f in (1e-3, 0.25, 0.5, 0.9, 0.999):
                a = f * amax
                remark_total += 1
                if not region.feasible(a, 2.0 * a, ch.weights, tau, float(kk), g).all:
                    remark_bad += 1
    small = [region.a0(kk, gc) for kk in np.logspace(-4, -2, 9)]
    large = [region.a0(kk, gc) for kk in np.logspace(2, 4, 9)]
    mono = bool(np.all(np.diff(small) > 0) and np.all(np.diff(large) < 0))
    extremes = (region.a0(1e-4, gc), region.a0(1e4, gc))
    ok = mismatches == 0 and remark_bad == 0 and mono and max(extremes) < 1e-3
    return CriterionResult(7, "region_consistency", ok, {
        "points": n_points, "mismatches": mismatches, "band_disagreements": in_band,
        "remark_points": remark_total, "remark_infeasible": remark_bad,
        "a0_monotone_to_zero": mono, "a0_k_1e-4": extremes[0], "a0_k_1e4": extremes[1],
    })


@_timed
def spectral_suite(n_random: int = 20) -> CriterionResult:
    a_grid = np.linspace(0.01, 5.0, 100)
    thr_err = max(abs(spectral1d.dlp_threshold(float(a)) - math.tanh(a)) for a in a_grid)
    k0 = {}
    for a in (0.5, 1.0, 2.0):
        res = spectral1d.rightmost_roots(DlpParams(a=a, k=0.0, tau=1.0))
        k0[a] = (res.abscissa, res.complete)
    k0_err = max(abs(v[0] + a) for a, v in k0.items())
    k0_complete = all(v[1] for v in k0.values())
    rng = np.random.default_rng(SEED)
    worst_abscissa = -math.inf
    incomplete = 0
    for _ in range(n_random):
        a = float(rng.uniform(0.1, 2.0))
        tau = float(rng.uniform(0.2, 2.0))
        res = spectral1d.rightmost_roots(DlpParams(a=a, k=0.9 * spectral1d.dlp_threshold(a), tau=tau))
        worst_abscissa = max(worst_abscissa, res.abscissa)
        incomplete += not res.complete
    xv = spectral1d.crossvalidate_decay(DlpParams(a=1.0, k=0.5, tau=1.0), nx=801, t_end=40.0)
    ok = (thr_err < SPECTRAL_THRESHOLD_TOL and k0_err < K0_ABSCISSA_TOL and k0_complete
          and worst_abscissa < 0 and incomplete == 0 and xv.status == "completed" and xv.gap < XVAL_GAP)
    return CriterionResult(8, "spectral_suite", ok, {
        "threshold_max_error": thr_err, "k0_abscissa_max_error": k0_err,
        "random_worst_abscissa": worst_abscissa, "random_incomplete": incomplete,
        "xval_spectral_rate": xv.spectral_rate, "xval_time_rate": xv.time_rate, "xval_gap": xv.gap,
    })


def run_all(log: Optional[Callable[[str], None]] = None) -> list:
    runs: dict = {}
    checks = [
        conservation,
        scheme_order,
        energy_identity,
        explicit_constants,
        lambda: decay_theorem(runs=runs),
        lambda: equivalence(runs=runs),
        region_consistency,
        spectral_suite,
    ]
    results = []
    for check in checks:
        r = check()
        if log is not None:
            log(f"criterion {r.number} {r.name}: {'PASS' if r.passed else 'FAIL'} ({r.seconds:.1f} s)")
        results.append(r)
    return results
