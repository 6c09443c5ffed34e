"""Explicit leapfrog integration of the delayed wave system.

Interior nodes use the standard second-order stencil with the delayed damping
taken from the velocity history.  Feedback boundaries use a ghost node,
``u_ghost = u_mirror - 2 h k v`` with ``v`` the centered velocity; the
feedback term is linear in the unknown ``u^{n+1}``, so each node update stays
explicit:

    u^{n+1} (1 + beta) = 2 u^n - (1 - beta) u^{n-1} + dt^2 (L u^n - q u^n - a v^{n - n_tau})

where ``L`` is the Laplacian with mirrored ghosts and ``beta`` collects the
instantaneous damping (``k dt / h`` per feedback direction, plus
``d dt / 2`` for an interior damping ``d u_t``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import diagnostics, kernels
from .core import (
    DlpParams,
    EnergySample,
    Grid1D,
    Grid2D,
    HistoryBuffer,
    LyapunovWeights,
    PhysicalParams,
    SimState,
    validate_params,
)

BLOWUP_THRESHOLD = 1e12
MAX_DELAY_STEPS = 1_000_000

Field = Union[np.ndarray, Callable, float, None]


def cfl_dt(grid, cfl: float, tau: float, max_steps: int = MAX_DELAY_STEPS, a: float = 0.0) -> tuple[float, int]:
    """Largest stable ``dt`` that divides ``tau`` exactly.

    Returns ``(dt, n_tau)`` with ``n_tau * dt == tau``.  ``tau == 0`` is only
    accepted when the delayed coefficient ``a`` is zero; then ``n_tau = 0``
    and ``dt`` is the CFL bound itself.
    """
    if not 0 < cfl < 1:
        raise ValueError("cfl must lie in (0, 1)")
    if isinstance(grid, Grid1D):
        bound = cfl * grid.dx
    else:
        bound = cfl / math.sqrt(1.0 / grid.dx ** 2 + 1.0 / grid.dy ** 2)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if tau == 0:
        if a != 0:
            raise ValueError("zero delay requires a == 0")
        return bound, 0
    # relative slack so that an exact quotient (1 / 0.005) is not rounded up
    n_tau = math.ceil(tau / bound * (1.0 - 1e-12))
    if n_tau > max_steps:
        raise ValueError(f"delay buffer too large: {n_tau} steps > {max_steps}")
    return tau / n_tau, n_tau


@dataclass
class InitialData:
    """Displacement ``u0``, velocity ``u1`` and velocity history ``g``.

    Each entry may be an array on the grid (flat), a scalar, or a callable of
    the node coordinates; ``g`` callables take an extra trailing time argument
    ``s`` in ``[-tau, 0)``.  ``g`` may also be an array of shape
    ``(n_tau, size)`` holding the history at steps ``-n_tau .. -1``.
    ``g=None`` means zero history.  ``g_boundary`` is the scalar history of the
    boundary velocity used by the boundary-delay system.
    """

    u0: Field = 0.0
    u1: Field = 0.0
    g: Field = None
    g_boundary: Optional[Callable[[float], float]] = None
    compat_tol: float = 1e-6


def _coords(grid):
    if isinstance(grid, Grid1D):
        return (grid.x,)
    X, Y = grid.mesh()
    return (X.ravel(), Y.ravel())


def _field(value: Field, grid, *extra) -> np.ndarray:
    if value is None:
        return np.zeros(grid.size)
    if callable(value):
        out = np.asarray(value(*_coords(grid), *extra), dtype=float)
        return np.broadcast_to(out, (grid.size,)).astype(float)
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(grid.size, float(arr))
    if arr.size != grid.size:
        raise ValueError(f"field has {arr.size} values, grid has {grid.size}")
    return arr.ravel().astype(float)


@dataclass(frozen=True)
class Coefficients:
    """Coefficients of ``u_tt - Lap u + d u_t + q u + a u_t(t - tau) = 0`` with
    boundary flux ``du/dnu = -k u_t`` on the feedback part."""

    a: float = 0.0
    d: float = 0.0
    q: float = 0.0
    k: float = 0.0

    @classmethod
    def from_params(cls, params: PhysicalParams) -> "Coefficients":
        return cls(a=params.a, k=params.k)


class Stepper:
    """Advance a :class:`SimState` on a fixed grid with fixed coefficients."""

    def __init__(self, grid, coeffs: Coefficients, dt: float, n_tau: int, backend=None):
        if n_tau == 0 and coeffs.a != 0:
            raise ValueError("zero delay steps with a nonzero delayed coefficient")
        self.grid = grid
        self.coeffs = coeffs
        self.dt = dt
        self.n_tau = n_tau
        self.kernel = backend if backend is not None else kernels
        self.beta = self._beta()
        self.dirichlet = self._dirichlet()
        self._zero = np.zeros(grid.size)

    def _beta(self) -> np.ndarray:
        g, c, dt = self.grid, self.coeffs, self.dt
        if isinstance(g, Grid1D):
            beta = np.full(g.nx, 0.5 * c.d * dt)
            if g.right_bc == "feedback":
                beta[-1] += c.k * dt / g.dx
            return beta
        beta = np.full(g.shape, 0.5 * c.d * dt)
        lam_x = c.k * dt / g.dx
        lam_y = c.k * dt / g.dy
        for e in g.gamma1_edges:
            if e == "left":
                beta[0, :] += lam_x
            elif e == "right":
                beta[-1, :] += lam_x
            elif e == "bottom":
                beta[:, 0] += lam_y
            else:
                beta[:, -1] += lam_y
        return beta

    def _dirichlet(self) -> np.ndarray:
        g = self.grid
        if isinstance(g, Grid1D):
            mask = np.zeros(g.nx, dtype=bool)
            mask[0] = True
            if g.right_bc == "dirichlet":
                mask[-1] = True
            return mask
        return g.dirichlet_mask()

    def _mirror_laplacian(self, u: np.ndarray) -> np.ndarray:
        g = self.grid
        if isinstance(g, Grid1D):
            p = np.pad(u, 1, mode="reflect")
            return (p[2:] - 2.0 * u + p[:-2]) / g.dx ** 2
        u2 = u.reshape(g.shape)
        p = np.pad(u2, 1, mode="reflect")
        lap = (p[2:, 1:-1] - 2.0 * u2 + p[:-2, 1:-1]) / g.dx ** 2 + (p[1:-1, 2:] - 2.0 * u2 + p[1:-1, :-2]) / g.dy ** 2
        return lap.ravel()

    def initial_state(self, init: InitialData) -> SimState:
        """Build the state at step 0 with a virtual ``u^{-1}``.

        ``u^{-1}`` is the backward second-order Taylor value, so the first
        leapfrog step reproduces ``u^1 = u^0 + dt u1 + dt^2/2 u_tt(0)``.
        """
        g, c, dt, n_tau = self.grid, self.coeffs, self.dt, self.n_tau
        u0 = _field(init.u0, g)
        u1 = _field(init.u1, g)
        mask = self.dirichlet.ravel()
        scale = max(1.0, float(np.max(np.abs(u0))))
        if np.any(np.abs(u0[mask]) > 1e-10 * scale):
            raise ValueError("u0 must vanish on the Dirichlet boundary")
        u0 = np.where(mask, 0.0, u0)
        u1 = np.where(mask, 0.0, u1)

        weights = diagnostics.quadrature_weights(g)
        history = HistoryBuffer(n_tau, g.size, weights=weights)
        if n_tau > 0:
            steps = np.arange(-n_tau, 0)
            if init.g is None:
                hist = np.zeros((n_tau, g.size))
            elif callable(init.g):
                hist = np.array([_field(init.g, g, float(s) * dt) for s in steps])
            else:
                hist = np.asarray(init.g, dtype=float)
                if hist.shape != (n_tau, g.size):
                    raise ValueError(f"sampled history must have shape {(n_tau, g.size)}, got {hist.shape}")
            for s, row in zip(steps, hist):
                history.push(np.where(mask, 0.0, row), int(s))
            if init.g is not None and callable(init.g):
                g0 = _field(init.g, g, 0.0)
                gap = float(np.max(np.abs(np.where(mask, 0.0, g0) - u1)))
                scale = max(1.0, float(np.max(np.abs(u1))))
                if gap > init.compat_tol * scale:
                    raise ValueError(f"history g(., 0) differs from u1 by {gap:.3e}")
        else:
            history.newest_step = -1

        v_del = history.lagged(n_tau - 1) if n_tau > 0 else self._zero
        acc = (
            self._mirror_laplacian(u0)
            - c.q * u0
            - c.a * v_del
            - (2.0 / dt) * self.beta.ravel() * u1
        )
        u_prev = u0 - dt * u1 + 0.5 * dt * dt * acc
        u_prev[mask] = 0.0
        return SimState(t=0.0, u_prev=u_prev, u_curr=u0.copy(), history=history, dt=dt, step=0)

    def advance(self, state: SimState, out: Optional[np.ndarray] = None) -> SimState:
        """One leapfrog step, in place.  Pushes the centered velocity of the
        current level into the history and returns ``state``."""
        g, c, dt, n_tau = self.grid, self.coeffs, self.dt, self.n_tau
        u_next = out if out is not None else np.empty_like(state.u_curr)
        v_del = state.history.lagged(n_tau - 1) if n_tau > 0 else self._zero
        if isinstance(g, Grid1D):
            self.kernel.leapfrog_1d(
                state.u_prev, state.u_curr, u_next, v_del, self.beta,
                1.0 / g.dx ** 2, dt * dt, c.a, c.q, 0.0, g.right_bc == "dirichlet",
            )
        else:
            self.kernel.leapfrog_2d(
                state.u_prev.reshape(g.shape), state.u_curr.reshape(g.shape), u_next.reshape(g.shape),
                v_del.reshape(g.shape), self.beta, self.dirichlet.view(np.uint8),
                1.0 / g.dx ** 2, 1.0 / g.dy ** 2, dt * dt, c.a, c.q,
            )
        v = (u_next - state.u_prev) / (2.0 * dt)
        state.history.push(v, state.step)
        recycled = state.u_prev
        state.u_prev = state.u_curr
        state.u_curr = u_next
        state.step += 1
        state.t = state.step * dt
        self.recycled = recycled
        return state


def step_1d(state: SimState, params: PhysicalParams, grid: Grid1D, dt: float) -> SimState:
    """Advance a 1D state by one step (in place)."""
    return Stepper(grid, Coefficients.from_params(params), dt, state.history.n_tau).advance(state)


def step_2d(state: SimState, params: PhysicalParams, grid: Grid2D, dt: float) -> SimState:
    """Advance a 2D state by one step (in place)."""
    return Stepper(grid, Coefficients.from_params(params), dt, state.history.n_tau).advance(state)


@dataclass
class RunConfig:
    params: PhysicalParams
    grid: Union[Grid1D, Grid2D]
    t_end: float
    cfl: float = 0.5
    sample_every: int = 1
    snapshot_every: Optional[int] = None
    weights: Optional[LyapunovWeights] = None
    max_delay_steps: int = MAX_DELAY_STEPS

    def problems(self) -> list[str]:
        problems = validate_params(self.params)
        if not 0 < self.cfl < 1:
            problems.append("cfl must lie in (0, 1)")
        if not self.t_end > 0:
            problems.append("t_end must be positive")
        if self.sample_every < 1:
            problems.append("sample_every must be >= 1")
        if self.snapshot_every is not None and self.snapshot_every < 1:
            problems.append("snapshot_every must be >= 1")
        if self.params.k > 0:
            problems.extend(self.grid.geometry_problems())
        return problems


@dataclass
class Snapshot:
    t: float
    u: np.ndarray
    v: np.ndarray


@dataclass
class RunResult:
    samples: list
    snapshots: list
    status: str  # "completed", "blow_up" or "nan"
    status_step: Optional[int]
    dt: float
    n_tau: int
    n_steps: int
    final_state: Optional[SimState] = None

    @property
    def status_label(self) -> str:
        return self.status if self.status_step is None else f"{self.status}({self.status_step})"


def _field_status(u: np.ndarray) -> Optional[str]:
    peak = float(np.max(np.abs(u)))
    if not math.isfinite(peak):
        return "nan"
    if peak > BLOWUP_THRESHOLD:
        return "blow_up"
    return None


def run(config: RunConfig, init: InitialData, backend=None, keep_state: bool = False) -> RunResult:
    """Integrate to ``t_end`` (or until blow-up).

    Samples are taken every ``sample_every`` steps at times ``n dt`` for
    ``n = 0 .. round(t_end / dt)``.  Blow-up is a reported outcome, not an
    exception.
    """
    problems = config.problems()
    if problems:
        raise ValueError("; ".join(problems))
    p, grid = config.params, config.grid
    dt, n_tau = cfl_dt(grid, config.cfl, p.tau, config.max_delay_steps, a=p.a)
    stepper = Stepper(grid, Coefficients.from_params(p), dt, n_tau, backend=backend)
    state = stepper.initial_state(init)
    n_steps = int(round(config.t_end / dt))
    samples: list[EnergySample] = []
    snapshots: list[Snapshot] = []
    status, status_step = "completed", None
    spare = np.empty(grid.size)
    for n in range(n_steps + 1):
        stepper.advance(state, out=spare)
        spare = stepper.recycled
        bad = _field_status(state.u_curr)
        if bad is not None:
            status, status_step = bad, n
            break
        if n % config.sample_every == 0:
            samples.append(diagnostics.sample(state, p, grid, config.weights))
        if config.snapshot_every and n % config.snapshot_every == 0:
            snapshots.append(Snapshot(state.t_observed, state.u_prev.copy(), state.history.lagged(0).copy()))
    return RunResult(samples, snapshots, status, status_step, dt, n_tau, n_steps,
                     final_state=state if keep_state else None)


@dataclass
class BoundaryDelayRun:
    t: np.ndarray
    energy: np.ndarray
    status: str
    dt: float
    n_tau: int
    boundary_u: np.ndarray = field(default_factory=lambda: np.zeros(0))


def dlp_energy(u: np.ndarray, v: np.ndarray, grid: Grid1D, a: float) -> float:
    """``(1/2) int (u_x^2 + u_t^2 + a^2 u^2)`` for the boundary-delay system."""
    return diagnostics.potential_energy(u, grid) + 0.5 * diagnostics.l2_sq(v, grid) + 0.5 * a * a * diagnostics.l2_sq(u, grid)


def _boundary_delay_steps(grid: Grid1D, tau: float) -> int:
    ratio = tau / grid.dx
    n_tau = int(round(ratio))
    if n_tau < 1 or abs(ratio - n_tau) > 1e-9 * max(1.0, ratio):
        raise ValueError(
            f"tau / dx = {ratio!r} must be a positive integer; pick nx so that (nx - 1) * tau / length is integral"
        )
    return n_tau


def run_boundary_delay(params: DlpParams, grid: Grid1D, t_end: float, init: InitialData,
                       sample_every: int = 1, backend=None, rebase: float = 50.0) -> BoundaryDelayRun:
    """Integrate ``u_tt - u_xx + 2a u_t + a^2 u = 0``, ``u(0) = 0``,
    ``u_x(L, t) = -k u_t(L, t - tau)``.

    The scheme advances ``w = exp(a (t - t_ref)) u``, which solves the plain
    wave equation, with leapfrog at Courant number one (``dt = dx``); that
    step is exact for the interior and gives the discrete boundary the same
    impedance as the continuum at every frequency.  At smaller Courant
    numbers the delayed feedback meets an effective gain that passes through
    one near the grid scale and the run blows up.  The ghost node carries
    ``w_x(L) = -k exp(a (t - t_ref)) u_t(L, t - tau)``, the delayed boundary
    velocity coming from its own scalar ring buffer.  ``t_ref`` is moved
    forward whenever ``a (t - t_ref)`` exceeds ``rebase``.
    """
    if isinstance(grid, Grid2D) or grid.right_bc != "feedback":
        raise ValueError("the boundary-delay system lives on a 1D grid with a feedback end")
    kern = backend if backend is not None else kernels
    a, k = params.a, params.k
    dt = grid.dx
    n_tau = _boundary_delay_steps(grid, params.tau)
    n_steps = int(round(t_end / dt))
    zero = np.zeros(grid.size)
    beta = np.zeros(grid.size)
    inv_dx2 = 1.0 / grid.dx ** 2

    u0 = _field(init.u0, grid)
    u1 = _field(init.u1, grid)
    scale = max(1.0, float(np.max(np.abs(u0))))
    if abs(u0[0]) > 1e-10 * scale:
        raise ValueError("u0 must vanish at x = 0")
    u0[0] = 0.0
    u1[0] = 0.0
    bhist = HistoryBuffer(n_tau, 1)
    gb = init.g_boundary if init.g_boundary is not None else (lambda s: 0.0)
    for s in range(-n_tau, 0):
        bhist.push(np.array([float(gb(s * dt))]), s)

    def forcing(n: int, t_ref: float) -> float:
        # jforce enters the boundary update as -dt^2 * jforce
        return 2.0 * k * math.exp(a * (n * dt - t_ref)) * float(bhist.lagged(n_tau - 1)[0]) / grid.dx

    # w(0) = u0, w_t(0) = u1 + a u0; virtual level -1 from the Taylor start
    t_ref = 0.0
    w_curr = u0.copy()
    wt0 = u1 + a * u0
    lap = np.empty(grid.size)
    lap[1:-1] = (u0[2:] - 2.0 * u0[1:-1] + u0[:-2]) * inv_dx2
    lap[-1] = 2.0 * (u0[-2] - u0[-1]) * inv_dx2 - forcing(0, t_ref)
    lap[0] = 0.0
    w_prev = u0 - dt * wt0 + 0.5 * dt * dt * lap
    w_prev[0] = 0.0
    w_next = np.empty(grid.size)

    ts, es, ub = [], [], []
    status = "completed"
    for n in range(n_steps + 1):
        kern.leapfrog_1d(w_prev, w_curr, w_next, zero, beta, inv_dx2, dt * dt, 0.0, 0.0,
                         forcing(n, t_ref), False)
        # physical displacement and velocity at level n
        damp = math.exp(-a * (n * dt - t_ref))
        u_n = damp * w_curr
        v_n = damp * ((w_next - w_prev) / (2.0 * dt) - a * w_curr)
        bhist.push(v_n[-1:], n)
        bad = _field_status(u_n)
        if bad is not None:
            status = f"{bad}({n})"
            break
        if n % sample_every == 0:
            ts.append(n * dt)
            es.append(dlp_energy(u_n, v_n, grid, a))
            ub.append(float(u_n[-1]))
        w_prev, w_curr, w_next = w_curr, w_next, w_prev
        if a * ((n + 1) * dt - t_ref) > rebase:
            shift = (n + 1) * dt - t_ref
            f = math.exp(-a * shift)
            w_prev *= f
            w_curr *= f
            t_ref += shift
    return BoundaryDelayRun(np.array(ts), np.array(es), status, dt, n_tau, np.array(ub))
