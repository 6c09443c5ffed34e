"""Energy, Lyapunov functional and decay diagnostics on discrete trajectories.

All functionals are evaluated at the time level of the newest velocity slot of
the history buffer (see :class:`~delaywave.core.SimState`).  The potential
part of the energy is summed over grid edges with forward differences, which
is the quadrature that matches the ghost-node boundary closure of the scheme.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .core import EnergySample, Grid1D, Grid2D, LyapunovWeights, PhysicalParams, SimState


def _trapezoid_1d(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


@lru_cache(maxsize=32)
def quadrature_weights(grid) -> np.ndarray:
    """Trapezoidal weights as a flat array matching the field layout."""
    if isinstance(grid, Grid1D):
        w = _trapezoid_1d(grid.nx, grid.dx)
    else:
        w = np.outer(_trapezoid_1d(grid.nx, grid.dx), _trapezoid_1d(grid.ny, grid.dy)).ravel()
    w.setflags(write=False)
    return w


@lru_cache(maxsize=32)
def boundary_weights(grid) -> np.ndarray:
    """Weights of the feedback-boundary trace integral as a flat array.

    In 1D the trace is the point value at ``x = L``; in 2D each feedback edge
    contributes its own trapezoid rule, so a corner shared by two feedback
    edges collects both half-weights.
    """
    if isinstance(grid, Grid1D):
        w = np.zeros(grid.nx)
        if grid.right_bc == "feedback":
            w[-1] = 1.0
    else:
        w2 = np.zeros(grid.shape)
        wx = _trapezoid_1d(grid.nx, grid.dx)
        wy = _trapezoid_1d(grid.ny, grid.dy)
        for e in grid.gamma1_edges:
            if e == "left":
                w2[0, :] += wy
            elif e == "right":
                w2[-1, :] += wy
            elif e == "bottom":
                w2[:, 0] += wx
            else:
                w2[:, -1] += wx
        w2[grid.dirichlet_mask()] = 0.0
        w = w2.ravel()
    w.setflags(write=False)
    return w


def potential_energy(u: np.ndarray, grid) -> float:
    """``(1/2) int |grad u|^2`` with edge differences."""
    if isinstance(grid, Grid1D):
        d = np.diff(u)
        return 0.5 * float(np.dot(d, d)) / grid.dx
    u2 = u.reshape(grid.shape)
    wx = _trapezoid_1d(grid.nx, grid.dx)
    wy = _trapezoid_1d(grid.ny, grid.dy)
    ex = np.diff(u2, axis=0)
    ey = np.diff(u2, axis=1)
    px = float(np.dot((ex * ex).sum(axis=0), wy)) / grid.dx
    py = float(np.dot((ey * ey).sum(axis=1), wx)) / grid.dy
    return 0.5 * (px + py)


def l2_sq(v: np.ndarray, grid) -> float:
    return float(np.dot(quadrature_weights(grid), v * v))


def boundary_trace_sq(v: np.ndarray, grid) -> float:
    """``int_{Gamma_1} v^2 dGamma``."""
    return float(np.dot(boundary_weights(grid), v * v))


def _observed(state: SimState) -> tuple[np.ndarray, np.ndarray]:
    if state.history.newest_step is None:
        raise ValueError("history buffer is empty; advance the state first")
    return state.u_prev, state.history.lagged(0)


def _delay_window_integral(state: SimState) -> float:
    h = state.history
    if h.n_tau == 0:
        return 0.0
    q = h.ordered_sq_norms()
    return state.dt * (float(q.sum()) - 0.5 * (q[0] + q[-1]))


def energy(state: SimState, params: PhysicalParams, grid) -> tuple[float, float, float]:
    """Return ``(e_standard, e_delay, e_total)``."""
    u, v = _observed(state)
    e_std = potential_energy(u, grid) + 0.5 * state.history.sq_norms[state.history.head]
    e_del = 0.5 * params.xi * _delay_window_integral(state)
    return e_std, e_del, e_std + e_del


def s_functional(state: SimState, params: PhysicalParams, grid) -> float:
    """Exponentially discounted delay-window integral ``int int e^{s-t} u_t^2``."""
    h = state.history
    if h.n_tau == 0:
        return 0.0
    q = h.ordered_sq_norms()
    w = np.exp(-state.dt * np.arange(h.n_tau, -1, -1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return state.dt * float(np.dot(w, q))


@lru_cache(maxsize=32)
def _multiplier_field(grid):
    if isinstance(grid, Grid1D):
        return (grid.x - grid.x0,)
    X, Y = grid.mesh()
    return (X - grid.x0[0], Y - grid.x0[1])


def multiplier_term(state: SimState, grid) -> float:
    """``int (2 m . grad u + (n - 1) u) u_t dx``."""
    u, v = _observed(state)
    return multiplier_integral(u, v, grid)


def multiplier_integral(u: np.ndarray, v: np.ndarray, grid) -> float:
    m = _multiplier_field(grid)
    if isinstance(grid, Grid1D):
        ux = np.gradient(u, grid.dx, edge_order=2)
        integrand = 2.0 * m[0] * ux
    else:
        u2 = u.reshape(grid.shape)
        ux, uy = np.gradient(u2, grid.dx, grid.dy, edge_order=2)
        integrand = (2.0 * (m[0] * ux + m[1] * uy) + u2).ravel()
    return float(np.dot(quadrature_weights(grid), integrand * v))


def lyapunov(state: SimState, params: PhysicalParams, grid, weights: LyapunovWeights) -> float:
    e_total = energy(state, params, grid)[2]
    return e_total + weights.gamma1 * multiplier_term(state, grid) + weights.gamma2 * s_functional(state, params, grid)


def sample(state: SimState, params: PhysicalParams, grid, weights: Optional[LyapunovWeights] = None) -> EnergySample:
    """Evaluate every functional at the observed time level."""
    u, v = _observed(state)
    h = state.history
    e_std, e_del, e_tot = energy(state, params, grid)
    s = s_functional(state, params, grid)
    mult = multiplier_integral(u, v, grid)
    g1, g2 = (weights.gamma1, weights.gamma2) if weights is not None else (0.0, 0.0)
    bsq = boundary_trace_sq(v, grid)
    if h.n_tau > 0:
        vd = h.lagged(h.n_tau)
        kin_del = float(h.sq_norms[(h.head - h.n_tau) % (h.n_tau + 1)])
        cross = float(np.dot(quadrature_weights(grid), v * vd))
    else:
        kin_del = float(h.sq_norms[h.head])
        cross = kin_del
    return EnergySample(
        t=state.t_observed,
        e_standard=e_std,
        e_delay=e_del,
        e_total=e_tot,
        s_func=s,
        mult_term=mult,
        lyap=e_tot + g1 * mult + g2 * s,
        boundary_diss=params.k * bsq,
        kin_now=float(h.sq_norms[h.head]),
        kin_delayed=kin_del,
        cross=cross,
        boundary_sq=bsq,
    )


def column(series: Sequence[EnergySample], name: str) -> np.ndarray:
    return np.array([getattr(s, name) for s in series], dtype=float)


def energy_identity_residual(series: Sequence[EnergySample], params: PhysicalParams) -> tuple[np.ndarray, np.ndarray]:
    """Residual of the energy-derivative identity along an every-step series.

    ``dE/dt`` is the centered difference of ``e_total``; the right-hand side
    ``-a int u_t u_t(t-tau) - k int_G1 u_t^2 + xi/2 (int u_t^2 - int u_t^2(t-tau))``
    is evaluated from the same samples.  Returns ``(t, residual)`` for the
    interior samples.
    """
    if len(series) < 3:
        raise ValueError("energy identity needs at least 3 samples")
    t = column(series, "t")
    e = column(series, "e_total")
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=0.0):
        raise ValueError("energy identity needs uniformly spaced samples")
    dedt = (e[2:] - e[:-2]) / (t[2:] - t[:-2])
    inner = slice(1, -1)
    rhs = (
        -params.a * column(series, "cross")[inner]
        - params.k * column(series, "boundary_sq")[inner]
        + 0.5 * params.xi * (column(series, "kin_now")[inner] - column(series, "kin_delayed")[inner])
    )
    return t[inner], dedt - rhs


@dataclass(frozen=True)
class DecayFit:
    c1: float
    c2: float
    r2: float


def fit_decay(series: Sequence[EnergySample], t_start: float = 0.0, field: str = "e_total") -> DecayFit:
    """Least-squares line through ``(t, log E)`` for ``t >= t_start``.

    ``c2`` is minus the slope and ``c1 = exp(intercept) / E(0)`` so that
    ``E(t) ~ c1 exp(-c2 t) E(0)``.
    """
    t = column(series, "t")
    e = column(series, field)
    sel = t >= t_start
    if sel.sum() < 2:
        raise ValueError("fit window holds fewer than two samples")
    tw, ew = t[sel], e[sel]
    if np.any(ew <= 0) or not e[0] > 0:
        raise ValueError("energy reached zero/negative; fit undefined")
    y = np.log(ew)
    slope, intercept = np.polyfit(tw, y, 1)
    resid = y - (slope * tw + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(c1=float(np.exp(intercept) / e[0]), c2=float(-slope), r2=r2)


def check_decay_bound(series: Sequence[EnergySample], c1: float, c2: float, tol: float = 1e-9,
                      t_start: float = 0.0) -> tuple[bool, float]:
    """Check ``E(t) <= c1 exp(-c2 t) E(0) (1 + tol)`` at every sample with ``t >= t_start``.

    ``E(0)`` is always the first sample of the series.  Returns the verdict
    and the worst relative violation ``max(E / envelope - 1)`` (negative when
    the bound holds with room).
    """
    t = column(series, "t")
    e = column(series, "e_total")
    sel = t >= t_start
    envelope = c1 * np.exp(-c2 * t[sel]) * e[0]
    worst = float(np.max(e[sel] / envelope - 1.0))
    return worst <= tol, worst


@dataclass(frozen=True)
class DescentReport:
    max_increase: float  # largest per-step rise of the Lyapunov functional, in units of dt^2 * lyap(0)
    mean_rate: float  # average of -dL/dt / E over the window
    holds: bool


def lyapunov_descent(series: Sequence[EnergySample], t_after: float, c_tol: float = 1.0) -> DescentReport:
    """Check that the Lyapunov functional is non-increasing for ``t >= t_after``.

    A per-sample rise up to ``c_tol * dt^2 * lyap(0)`` is tolerated, ``dt``
    being the sample spacing.
    """
    t = column(series, "t")
    lyap = column(series, "lyap")
    e = column(series, "e_total")
    sel = t >= t_after
    tw, lw, ew = t[sel], lyap[sel], e[sel]
    if len(tw) < 2:
        raise ValueError("descent window holds fewer than two samples")
    h = float(tw[1] - tw[0])
    scale = h * h * lyap[0]
    inc = np.diff(lw)
    max_inc = float(np.max(inc)) / scale
    rate = -inc / (np.diff(tw) * 0.5 * (ew[1:] + ew[:-1]))
    return DescentReport(max_increase=max_inc, mean_rate=float(np.mean(rate)), holds=max_inc <= c_tol)


def equivalence_ratios(series: Sequence[EnergySample], t_after: float = 0.0) -> tuple[float, float]:
    """``(min, max)`` of ``lyap / e_total`` over samples with ``t >= t_after``."""
    t = column(series, "t")
    r = column(series, "lyap")[t >= t_after] / column(series, "e_total")[t >= t_after]
    return float(r.min()), float(r.max())
