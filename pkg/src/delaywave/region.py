"""Geometry constants, the explicit threshold a0(k) and the admissible (a, xi) region.

The feasibility constraints are kept exactly as typeset: the first and third
are strict, the other two non-strict.  The fourth constraint (on gamma1 only)
is a gate, not a half-plane of the (a, xi) polygon.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .core import EDGES, GeometryConstants, LyapunovWeights, geometry_problems

RICHARDSON_TOL = 0.01


@dataclass(frozen=True)
class Interval:
    """``(0, length)`` with the Dirichlet part at 0 and feedback at ``length``."""

    length: float = 1.0
    x0: float = 0.0


@dataclass(frozen=True)
class Rectangle:
    lx: float = 1.0
    ly: float = 1.0
    x0: tuple = (0.0, 0.5)
    gamma0_edges: tuple = ("left",)

    @property
    def gamma1_edges(self) -> tuple:
        return tuple(e for e in EDGES if e not in self.gamma0_edges)


PRESETS = {
    "interval-unit": Interval(1.0, 0.0),
    "interval-2": Interval(2.0, 0.0),
    "unit-square": Rectangle(),
}


# ---------------------------------------------------------------------------
# finite-element eigen oracles


def _fem_1d(n_cells: int, h: float) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    n = n_cells + 1
    main_k = np.full(n, 2.0)
    main_k[[0, -1]] = 1.0
    K = sp.diags([-np.ones(n - 1), main_k, -np.ones(n - 1)], [-1, 0, 1]) / h
    main_m = np.full(n, 4.0)
    main_m[[0, -1]] = 2.0
    M = sp.diags([np.ones(n - 1), main_m, np.ones(n - 1)], [-1, 0, 1]) * (h / 6.0)
    return K.tocsr(), M.tocsr()


def _assemble(geom, cells: int):
    """Stiffness, mass and feedback-boundary mass with Dirichlet rows removed."""
    if isinstance(geom, Interval):
        K, M = _fem_1d(cells, geom.length / cells)
        B = sp.lil_matrix(K.shape)
        B[cells, cells] = 1.0
        keep = np.arange(1, cells + 1)
    elif isinstance(geom, Rectangle):
        nxc = cells
        nyc = max(1, int(round(cells * geom.ly / geom.lx)))
        Kx, Mx = _fem_1d(nxc, geom.lx / nxc)
        Ky, My = _fem_1d(nyc, geom.ly / nyc)
        K = sp.kron(Kx, My) + sp.kron(Mx, Ky)
        M = sp.kron(Mx, My)
        nx, ny = nxc + 1, nyc + 1

        def unit(n, i):
            return sp.csr_matrix(([1.0], ([i], [i])), shape=(n, n))

        edge_mass = {
            "left": lambda: sp.kron(unit(nx, 0), My),
            "right": lambda: sp.kron(unit(nx, nx - 1), My),
            "bottom": lambda: sp.kron(Mx, unit(ny, 0)),
            "top": lambda: sp.kron(Mx, unit(ny, ny - 1)),
        }
        B = sp.csr_matrix(K.shape)
        for e in geom.gamma1_edges:
            B = B + edge_mass[e]()
        idx = np.arange(nx * ny).reshape(nx, ny)
        dirichlet = np.zeros((nx, ny), dtype=bool)
        for e in geom.gamma0_edges:
            dirichlet[{"left": (0, slice(None)), "right": (-1, slice(None)),
                       "bottom": (slice(None), 0), "top": (slice(None), -1)}[e]] = True
        keep = idx[~dirichlet]
    else:
        raise ValueError(f"unsupported geometry {geom!r}")
    K = sp.csr_matrix(K)[keep][:, keep]
    M = sp.csr_matrix(M)[keep][:, keep]
    B = sp.csr_matrix(B)[keep][:, keep]
    return K.tocsc(), M.tocsc(), B.tocsc()


def _start(n: int) -> np.ndarray:
    # fixed Lanczos start vector: ARPACK's default is random, which breaks byte-reproducible outputs
    return np.ones(n)


def trace_constant_fem(geom, cells: int) -> float:
    """Largest ``mu`` of ``B phi = mu K phi``: the discrete trace constant."""
    K, _, B = _assemble(geom, cells)
    if K.shape[0] < 3:
        vals = np.linalg.eigvals(np.linalg.solve(K.toarray(), B.toarray()))
        return float(np.max(vals.real))
    vals = eigsh(B, k=1, M=K, which="LA", return_eigenvectors=False, tol=1e-13, v0=_start(K.shape[0]))
    return float(vals[0])


def poincare_constant_fem(geom, cells: int) -> float:
    """Reciprocal of the smallest mixed Dirichlet-Neumann eigenvalue."""
    K, M, _ = _assemble(geom, cells)
    vals = eigsh(K, k=1, M=M, sigma=0.0, which="LM", return_eigenvectors=False, tol=1e-13, v0=_start(K.shape[0]))
    return float(1.0 / vals[0])


def _richardson(fn, geom, cells: int) -> float:
    coarse = fn(geom, cells)
    fine = fn(geom, 2 * cells)
    if abs(fine - coarse) > RICHARDSON_TOL * abs(fine):
        raise ValueError(f"eigen oracle not converged: {coarse!r} vs {fine!r} at {cells}/{2 * cells} cells")
    return (4.0 * fine - coarse) / 3.0


def trace_constant(geom, cells: int = 32) -> float:
    """Smallest C with ``int_{G1} phi^2 <= C int |grad phi|^2`` for phi vanishing on G0."""
    if isinstance(geom, Interval):
        return float(geom.length)
    if isinstance(geom, Rectangle):
        return _richardson(trace_constant_fem, geom, cells)
    raise ValueError(f"unsupported geometry {geom!r}")


def poincare_constant(geom, cells: int = 32) -> float:
    if isinstance(geom, Interval):
        return 4.0 * geom.length ** 2 / math.pi ** 2
    if isinstance(geom, Rectangle):
        return _richardson(poincare_constant_fem, geom, cells)
    raise ValueError(f"unsupported geometry {geom!r}")


def multiplier_constants(geom) -> tuple[int, float, float]:
    """``(n, m_inf, delta)`` for the multiplier ``x - x0``; checks the sign conditions."""
    if isinstance(geom, Interval):
        if geom.x0 > 0:
            raise ValueError("x0 must be <= 0 so that m.nu <= 0 at the Dirichlet end")
        return 1, max(abs(geom.x0), geom.length - geom.x0), geom.length - geom.x0
    if isinstance(geom, Rectangle):
        x0, y0 = geom.x0
        mn = {"left": x0, "right": geom.lx - x0, "bottom": y0, "top": geom.ly - y0}
        for e in geom.gamma0_edges:
            if mn[e] > 0:
                raise ValueError(f"m.nu must be <= 0 on gamma0 edge {e!r}")
        for e in geom.gamma1_edges:
            if not mn[e] > 0:
                raise ValueError(f"m.nu must be positive on gamma1 edge {e!r}")
        m_inf = max(math.hypot(cx - x0, cy - y0) for cx in (0.0, geom.lx) for cy in (0.0, geom.ly))
        return 2, m_inf, min(mn[e] for e in geom.gamma1_edges)
    raise ValueError(f"unsupported geometry {geom!r}")


def geometry_constants(geom, cells: int = 32) -> GeometryConstants:
    n, m_inf, delta = multiplier_constants(geom)
    return GeometryConstants(n=n, m_inf=m_inf, delta=delta,
                             cp=trace_constant(geom, cells), c0p=poincare_constant(geom, cells))


# ---------------------------------------------------------------------------
# explicit choices and threshold


def _check(k: float, gc: GeometryConstants) -> None:
    if not k > 0:
        raise ValueError("k must be positive")
    problems = geometry_problems(gc)
    if problems:
        raise ValueError("; ".join(problems))


def _boundary_factor(k: float, gc: GeometryConstants) -> float:
    # k^2 (|m|^2 2/delta + (n-1)^2 C(P) / 2) + |m|
    return k * k * (gc.m_inf ** 2 * 2.0 / gc.delta + 0.5 * (gc.n - 1) ** 2 * gc.cp) + gc.m_inf


@dataclass(frozen=True)
class RemarkChoices:
    epsilon: float
    gamma1: float
    gamma2: float
    xi_over_a: float = 2.0

    @property
    def weights(self) -> LyapunovWeights:
        return LyapunovWeights(self.gamma1, self.gamma2, self.epsilon)


def remark_choices(k: float, gc: GeometryConstants) -> RemarkChoices:
    """``epsilon = 1/C(P)``, ``xi = 2a``, ``gamma2 = gamma1/2`` and

    ``gamma1 = min{1/3, 1/(2|m| + C0 + 1), k / (k^2 (2|m|^2/delta + (n-1)^2 C(P)/2) + |m|)}``.
    """
    _check(k, gc)
    gamma1 = min(1.0 / 3.0, 1.0 / (2.0 * gc.m_inf + gc.c0p + 1.0), k / _boundary_factor(k, gc))
    return RemarkChoices(epsilon=1.0 / gc.cp, gamma1=gamma1, gamma2=0.5 * gamma1)


def a0(k: float, gc: GeometryConstants) -> float:
    """Explicit smallness threshold on the delayed damping coefficient."""
    _check(k, gc)
    return min(
        1.0 / 9.0,
        (1.0 / 3.0) / (2.0 * gc.m_inf + gc.c0p + 1.0),
        (k / 3.0) / _boundary_factor(k, gc),
        0.5 / (gc.m_inf ** 2 + 0.5 * (gc.n - 1) ** 2 * gc.c0p),
    )


# ---------------------------------------------------------------------------
# feasibility


CONSTRAINTS = ("serge1", "serge3", "serge4", "serge5")
STRICT = {"serge1": True, "serge3": False, "serge4": True, "serge5": False}
EPS = float(np.finfo(float).eps)
ROUNDING_ULPS = 16


@dataclass(frozen=True)
class Feasibility:
    margins: dict  # right-hand side minus left-hand side, per constraint
    satisfied: dict

    @property
    def all(self) -> bool:
        return all(self.satisfied.values())


def feasible(a: float, xi: float, weights: LyapunovWeights, tau: float, k: float,
             gc: GeometryConstants, tol: float = 0.0) -> Feasibility:
    """Evaluate the four constraints on ``(a, xi)`` for fixed weights.

    Strict constraints need ``margin > tol``, the others ``margin >= -tol``.
    """
    g1, g2, eps = weights.gamma1, weights.gamma2, weights.epsilon
    # (rhs, lhs) per constraint; margin = rhs - lhs
    sides = {
        "serge1": (g1 - g2, 0.5 * (a + xi)),
        "serge3": (g2 * math.exp(-tau), a * (0.5 + 1.5 * g1) - 0.5 * xi),
        "serge4": (1.0 - 0.5 * eps * gc.cp, a * (gc.m_inf ** 2 + 0.5 * (gc.n - 1) ** 2 * gc.c0p)),
        "serge5": (k, g1 * (k * k * (gc.m_inf ** 2 * 2.0 / gc.delta + (gc.n - 1) ** 2 / (2.0 * eps)) + gc.m_inf)),
    }
    margins = {name: rhs - lhs for name, (rhs, lhs) in sides.items()}
    satisfied = {}
    for name, m in margins.items():
        if STRICT[name]:
            satisfied[name] = m > tol
        else:
            # equality cases (serge5 under the Remark choice) must survive rounding
            rhs, lhs = sides[name]
            satisfied[name] = m >= -tol - ROUNDING_ULPS * EPS * max(abs(rhs), abs(lhs))
    return Feasibility(margins=margins, satisfied=satisfied)


# ---------------------------------------------------------------------------
# polygon of admissible (a, xi)


def clip_halfplane(poly: list, normal: tuple, offset: float) -> list:
    """Clip a convex polygon to ``normal . p <= offset`` (Sutherland-Hodgman)."""
    out = []
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        fp = normal[0] * p[0] + normal[1] * p[1] - offset
        fq = normal[0] * q[0] + normal[1] * q[1] - offset
        if fp <= 0:
            out.append(p)
        if (fp < 0 < fq) or (fq < 0 < fp):
            s = fp / (fp - fq)
            out.append((p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])))
    # drop consecutive duplicates produced by vertices lying on the line
    dedup = []
    for v in out:
        if not dedup or math.dist(v, dedup[-1]) > 1e-15:
            dedup.append(v)
    if len(dedup) > 1 and math.dist(dedup[0], dedup[-1]) <= 1e-15:
        dedup.pop()
    return dedup


def _halfplanes(weights: LyapunovWeights, tau: float, gc: GeometryConstants) -> list:
    """Constraint lines as ``(normal, offset, name)`` with feasible side ``normal . (a, xi) <= offset``."""
    g1, g2, eps = weights.gamma1, weights.gamma2, weights.epsilon
    return [
        ((-1.0, 0.0), 0.0, "a>=0"),
        ((0.0, -1.0), 0.0, "xi>0"),
        ((1.0, 1.0), 2.0 * (g1 - g2), "serge1"),
        ((1.0 + 3.0 * g1, -1.0), 2.0 * g2 * math.exp(-tau), "serge3"),
        ((gc.m_inf ** 2 + 0.5 * (gc.n - 1) ** 2 * gc.c0p, 0.0), 1.0 - 0.5 * eps * gc.cp, "serge4"),
    ]


@dataclass
class Polygon:
    vertices: list  # counterclockwise (a, xi) pairs
    gate_serge5: bool
    reason: str = ""

    @property
    def empty(self) -> bool:
        return len(self.vertices) < 3


def region_polygon(weights: LyapunovWeights, tau: float, k: float, gc: GeometryConstants) -> Polygon:
    """Admissible ``(a, xi)`` for fixed weights as a counterclockwise polygon."""
    if not weights.gamma1 > weights.gamma2:
        return Polygon([], False, "gamma1 must exceed gamma2")
    gate = feasible(0.0, 0.0, weights, tau, k, gc).satisfied["serge5"]
    side = 2.0 * (weights.gamma1 - weights.gamma2)
    poly = [(0.0, 0.0), (side, 0.0), (0.0, side)]
    for normal, offset, name in _halfplanes(weights, tau, gc)[3:]:
        if normal[0] == 0.0 and normal[1] == 0.0:
            continue
        poly = clip_halfplane(poly, normal, offset)
        if len(poly) < 3:
            return Polygon([], gate, f"empty after {name}")
    # counterclockwise orientation
    area = 0.5 * sum(p[0] * q[1] - q[0] * p[1] for p, q in zip(poly, poly[1:] + poly[:1]))
    if area < 0:
        poly.reverse()
    if area == 0:
        return Polygon([], gate, "degenerate region")
    return Polygon([(float(p[0]), float(p[1])) for p in poly], gate)


def polygon_contains(vertices: Sequence, point: tuple) -> bool:
    """Closed-polygon membership for a convex counterclockwise polygon."""
    if len(vertices) < 3:
        return False
    x, y = point
    n = len(vertices)
    for i in range(n):
        (x1, y1), (x2, y2) = vertices[i], vertices[(i + 1) % n]
        if (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1) < 0:
            return False
    return True


def boundary_distance(point: tuple, weights: LyapunovWeights, tau: float, gc: GeometryConstants) -> float:
    """Smallest distance from ``point`` to any constraint line of the polygon."""
    a, xi = point
    best = math.inf
    for normal, offset, _ in _halfplanes(weights, tau, gc):
        norm = math.hypot(*normal)
        if norm == 0:
            continue
        best = min(best, abs(normal[0] * a + normal[1] * xi - offset) / norm)
    return best


def serge3_intercepts(weights: LyapunovWeights, tau: float) -> dict:
    """Axis intercepts of the boundary line of the second constraint."""
    g1, g2 = weights.gamma1, weights.gamma2
    return {"xi_at_a0": -2.0 * g2 * math.exp(-tau), "a_at_xi0": 2.0 * g2 * math.exp(-tau) / (1.0 + 3.0 * g1)}


def serge1_intercepts(weights: LyapunovWeights) -> dict:
    side = 2.0 * (weights.gamma1 - weights.gamma2)
    return {"xi_at_a0": side, "a_at_xi0": side}


# ---------------------------------------------------------------------------
# report


@dataclass
class RegionReport:
    k: float
    tau: float
    geometry: dict
    epsilon: float
    gamma1: float
    gamma2: float
    a0: float
    polygon: list
    serge5_gate: bool
    polygon_reason: str = ""
    point: Optional[dict] = None

    def to_dict(self) -> dict:
        return asdict(self)


def region_report(k: float, tau: float, gc: GeometryConstants, point: Optional[tuple] = None) -> RegionReport:
    choice = remark_choices(k, gc)
    w = choice.weights
    poly = region_polygon(w, tau, k, gc)
    pt = None
    if point is not None:
        f = feasible(point[0], point[1], w, tau, k, gc)
        pt = {"a": point[0], "xi": point[1], "margins": f.margins, "satisfied": f.satisfied}
    return RegionReport(
        k=k, tau=tau, geometry=asdict(gc), epsilon=choice.epsilon, gamma1=choice.gamma1,
        gamma2=choice.gamma2, a0=a0(k, gc), polygon=[list(v) for v in poly.vertices],
        serge5_gate=poly.gate_serge5, polygon_reason=poly.reason, point=pt,
    )


def geometry_for_grid(grid) -> "Interval | Rectangle":
    """The continuous domain described by a simulation grid."""
    from .core import Grid1D, Grid2D

    if isinstance(grid, Grid1D):
        return Interval(grid.length, grid.x0)
    if isinstance(grid, Grid2D):
        return Rectangle(grid.lx, grid.ly, tuple(grid.x0), tuple(grid.gamma0_edges))
    raise ValueError(f"unsupported grid {grid!r}")


def verified_constants(geom, cells: int = 64) -> tuple[float, float]:
    """``(C(P), C0(P))`` from the finite-element eigen oracles with Richardson
    extrapolation, independent of any closed form."""
    return _richardson(trace_constant_fem, geom, cells), _richardson(poincare_constant_fem, geom, cells)
