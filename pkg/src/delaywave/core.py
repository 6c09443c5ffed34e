"""Domain types shared across the package.

Every field is a plain value (floats, ints, numpy arrays); nothing here holds
references to solver internals, so instances can be copied or pickled freely
(the sweep runner relies on that).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

EDGES = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class PhysicalParams:
    """Coefficients of the delayed wave system.

    ``a`` multiplies the delayed velocity inside the domain, ``k`` is the
    boundary feedback gain, ``tau`` the delay and ``xi`` the weight of the
    delay-window integral in the energy.  ``diagnostic=True`` marks a run in
    which ``k = 0`` (and ``tau = 0`` with ``a = 0``) is allowed, e.g. energy
    conservation checks.
    """

    a: float
    k: float
    tau: float
    xi: float
    diagnostic: bool = False


@dataclass(frozen=True)
class GeometryConstants:
    """Constants of the domain and of the multiplier ``m(x) = x - x0``.

    Attributes
    ----------
    n : int
        Spatial dimension.
    m_inf : float
        ``sup |x - x0|`` over the closed domain.
    delta : float
        Minimum of ``m . nu`` over the feedback boundary.
    cp : float
        Trace constant: smallest C with ``int_{G1} phi^2 <= C int |grad phi|^2``.
    c0p : float
        Poincare constant: smallest C with ``int phi^2 <= C int |grad phi|^2``.
    """

    n: int
    m_inf: float
    delta: float
    cp: float
    c0p: float


@dataclass(frozen=True)
class LyapunovWeights:
    gamma1: float
    gamma2: float
    epsilon: float


@dataclass(frozen=True)
class DlpParams:
    """Interior damping ``a``, delayed boundary gain ``k`` and delay ``tau`` of
    the 1D boundary-delay system ``u_tt - u_xx + 2a u_t + a^2 u = 0``."""

    a: float
    k: float
    tau: float

    def __post_init__(self):
        for name in ("a", "tau"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive, got {value!r}")
        if not (self.k >= 0 and math.isfinite(self.k)):
            raise ValueError(f"k must be nonnegative, got {self.k!r}")


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on ``(0, length)``.

    Node 0 is the Dirichlet end.  The right end carries the feedback condition
    unless ``right_bc == "dirichlet"`` (used by the reversibility check).
    """

    nx: int
    length: float = 1.0
    x0: float = 0.0
    right_bc: str = "feedback"

    def __post_init__(self):
        if self.nx < 3:
            raise ValueError("Grid1D needs at least 3 nodes")
        if not self.length > 0:
            raise ValueError("length must be positive")
        if self.right_bc not in ("feedback", "dirichlet"):
            raise ValueError(f"unknown right_bc {self.right_bc!r}")

    @property
    def dx(self) -> float:
        return self.length / (self.nx - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.nx)

    @property
    def size(self) -> int:
        return self.nx

    @property
    def ndim(self) -> int:
        return 1

    def multiplier_signs(self) -> dict:
        """``m . nu`` at each end: ``{"gamma0": value at 0, "gamma1": value at L}``."""
        return {"gamma0": -(0.0 - self.x0), "gamma1": self.length - self.x0}

    def geometry_problems(self) -> list[str]:
        signs = self.multiplier_signs()
        problems = []
        if signs["gamma0"] > 0:
            problems.append("m.nu must be <= 0 on the Dirichlet end (need x0 <= 0)")
        if self.right_bc == "feedback" and not signs["gamma1"] > 0:
            problems.append("m.nu must be positive on the feedback end")
        return problems

    @property
    def m_inf(self) -> float:
        return max(abs(self.x0), abs(self.length - self.x0))

    @property
    def delta(self) -> float:
        return self.length - self.x0


@dataclass(frozen=True)
class Grid2D:
    """Tensor grid on ``(0, lx) x (0, ly)`` with edges labelled Dirichlet or feedback.

    Fields on this grid are flat arrays of length ``nx * ny`` in C order, i.e.
    ``field.reshape(nx, ny)[i, j]`` is the value at ``(i dx, j dy)``.
    """

    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0
    x0: tuple = (0.0, 0.5)
    gamma0_edges: tuple = ("left",)
    gamma1_edges: tuple = ("right", "bottom", "top")

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError("Grid2D needs at least 3 nodes per direction")
        g0, g1 = set(self.gamma0_edges), set(self.gamma1_edges)
        unknown = (g0 | g1) - set(EDGES)
        if unknown:
            raise ValueError(f"unknown edge labels {sorted(unknown)}")
        if g0 & g1 or (g0 | g1) != set(EDGES):
            raise ValueError("every edge must belong to exactly one of gamma0/gamma1")

    @property
    def dx(self) -> float:
        return self.lx / (self.nx - 1)

    @property
    def dy(self) -> float:
        return self.ly / (self.ny - 1)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def ndim(self) -> int:
        return 2

    @property
    def shape(self) -> tuple:
        return (self.nx, self.ny)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.linspace(0.0, self.lx, self.nx)
        y = np.linspace(0.0, self.ly, self.ny)
        return np.meshgrid(x, y, indexing="ij")

    def edge_normal_products(self) -> dict:
        """Range ``(min, max)`` of ``m . nu`` along each edge."""
        x0, y0 = self.x0
        return {
            "left": (x0, x0),
            "right": (self.lx - x0, self.lx - x0),
            "bottom": (y0, y0),
            "top": (self.ly - y0, self.ly - y0),
        }

    def geometry_problems(self) -> list[str]:
        mn = self.edge_normal_products()
        problems = []
        for e in self.gamma0_edges:
            if mn[e][1] > 0:
                problems.append(f"m.nu must be <= 0 on gamma0 edge {e!r}")
        for e in self.gamma1_edges:
            if not mn[e][0] > 0:
                problems.append(f"m.nu must be positive on gamma1 edge {e!r}")
        return problems

    @property
    def m_inf(self) -> float:
        x0, y0 = self.x0
        return max(math.hypot(cx - x0, cy - y0) for cx in (0.0, self.lx) for cy in (0.0, self.ly))

    @property
    def delta(self) -> float:
        if not self.gamma1_edges:
            return 0.0
        mn = self.edge_normal_products()
        return min(mn[e][0] for e in self.gamma1_edges)

    def dirichlet_mask(self) -> np.ndarray:
        """Boolean ``(nx, ny)`` array, True on nodes of the closed Dirichlet edges."""
        mask = np.zeros(self.shape, dtype=bool)
        sl = {"left": (0, slice(None)), "right": (-1, slice(None)),
              "bottom": (slice(None), 0), "top": (slice(None), -1)}
        for e in self.gamma0_edges:
            mask[sl[e]] = True
        return mask

    def corner_nodes(self) -> list[tuple[int, int]]:
        """Corners shared by two feedback edges (flagged in output)."""
        g1 = set(self.gamma1_edges)
        corners = []
        for ex, i in (("left", 0), ("right", self.nx - 1)):
            for ey, j in (("bottom", 0), ("top", self.ny - 1)):
                if ex in g1 and ey in g1:
                    corners.append((i, j))
        return corners


class HistoryBuffer:
    """Ring buffer holding the last ``n_tau + 1`` velocity fields.

    Slots are written once per time step.  After the field for step ``n`` is
    pushed, ``lagged(n_tau)`` returns the field of step ``n - n_tau``, i.e. the
    velocity exactly one delay earlier.  The squared L2 norm of each slot is
    cached at write time so the delay-window quadratures cost O(n_tau).
    """

    def __init__(self, n_tau: int, size: int, weights: Optional[np.ndarray] = None):
        if n_tau < 0:
            raise ValueError("n_tau must be nonnegative")
        self.n_tau = int(n_tau)
        self.slots = np.zeros((self.n_tau + 1, size))
        self.sq_norms = np.zeros(self.n_tau + 1)
        self.head = self.n_tau  # first push lands in slot 0
        self.newest_step: Optional[int] = None
        self._weights = weights

    def __len__(self) -> int:
        return self.n_tau + 1

    def push(self, field: np.ndarray, step: int) -> None:
        self.head = (self.head + 1) % (self.n_tau + 1)
        slot = self.slots[self.head]
        slot[:] = field
        if self._weights is None:
            self.sq_norms[self.head] = float(np.dot(slot, slot))
        else:
            self.sq_norms[self.head] = float(np.dot(self._weights, slot * slot))
        self.newest_step = step

    def lagged(self, lag: int) -> np.ndarray:
        if not 0 <= lag <= self.n_tau:
            raise IndexError(f"lag {lag} outside 0..{self.n_tau}")
        return self.slots[(self.head - lag) % (self.n_tau + 1)]

    def ordered_sq_norms(self) -> np.ndarray:
        """Cached norms ordered oldest to newest."""
        return np.roll(self.sq_norms, -(self.head + 1))

    def copy(self) -> "HistoryBuffer":
        other = HistoryBuffer.__new__(HistoryBuffer)
        other.n_tau = self.n_tau
        other.slots = self.slots.copy()
        other.sq_norms = self.sq_norms.copy()
        other.head = self.head
        other.newest_step = self.newest_step
        other._weights = self._weights
        return other


@dataclass
class SimState:
    """Leapfrog state.

    Before step ``n`` the state holds ``u_prev = u^{n-1}`` and
    ``u_curr = u^n`` with the history's newest slot at step ``n - 1``.  The
    centered velocity of step ``n`` is only known once ``u^{n+1}`` exists, so
    diagnostics describe ``u_prev`` together with the newest history slot.
    """

    t: float
    u_prev: np.ndarray
    u_curr: np.ndarray
    history: HistoryBuffer
    dt: float
    step: int = 0

    @property
    def t_observed(self) -> float:
        """Time level of the newest velocity slot (and of ``u_prev``)."""
        return self.history.newest_step * self.dt

    def copy(self) -> "SimState":
        return SimState(
            t=self.t,
            u_prev=self.u_prev.copy(),
            u_curr=self.u_curr.copy(),
            history=self.history.copy(),
            dt=self.dt,
            step=self.step,
        )


@dataclass(frozen=True)
class EnergySample:
    t: float
    e_standard: float
    e_delay: float
    e_total: float
    s_func: float
    mult_term: float
    lyap: float
    boundary_diss: float
    # extra integrals for the energy-identity check; not part of the CSV schema
    kin_now: float = 0.0
    kin_delayed: float = 0.0
    cross: float = 0.0
    boundary_sq: float = 0.0

    CSV_FIELDS = ("t", "e_standard", "e_delay", "e_total", "s_func", "mult_term", "lyap", "boundary_diss")


@dataclass
class SpectralResult:
    roots: list
    abscissa: float
    beta: Optional[float]
    search_box: tuple
    residuals: list
    winding_count: int = 0
    found_count: int = 0
    complete: bool = True


def validate_params(params: PhysicalParams, geom: Optional[GeometryConstants] = None) -> list[str]:
    """Return the violated invariants (empty list when the configuration is valid)."""
    problems = []
    for name in ("a", "k", "tau", "xi"):
        if not math.isfinite(getattr(params, name)):
            problems.append(f"{name} must be finite")
    if params.a < 0:
        problems.append("a must be nonnegative")
    if params.k < 0 or (params.k == 0 and not params.diagnostic):
        problems.append("k must be positive")
    if params.tau < 0 or (params.tau == 0 and not (params.diagnostic and params.a == 0)):
        problems.append("tau must be positive")
    if not params.xi > 0:
        problems.append("xi must be positive")
    if geom is not None:
        problems.extend(geometry_problems(geom))
    return problems


def geometry_problems(geom: GeometryConstants) -> list[str]:
    problems = []
    if not (isinstance(geom.n, (int, np.integer)) and geom.n >= 1):
        problems.append("n must be a positive integer")
    if not geom.delta > 0:
        problems.append("delta must be positive")
    elif geom.delta > geom.m_inf * (1 + 1e-12):
        problems.append("delta must not exceed m_inf")
    if not geom.cp > 0:
        problems.append("cp must be positive")
    if not geom.c0p > 0:
        problems.append("c0p must be positive")
    return problems


def ensure_valid(params: PhysicalParams, geom: Optional[GeometryConstants] = None) -> None:
    problems = validate_params(params, geom)
    if problems:
        raise ValueError("; ".join(problems))


def weights_problems(w: LyapunovWeights, geom: GeometryConstants) -> list[str]:
    problems = []
    if not w.gamma2 > 0:
        problems.append("gamma2 must be positive")
    if not w.gamma1 > w.gamma2:
        problems.append("gamma1 must exceed gamma2")
    if not w.epsilon > 0:
        problems.append("epsilon must be positive")
    elif not 1 - 0.5 * w.epsilon * geom.cp > 0:
        problems.append("epsilon too large: 1 - epsilon*C(P)/2 must be positive")
    return problems
