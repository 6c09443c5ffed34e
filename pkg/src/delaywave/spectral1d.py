"""Characteristic roots of the 1D boundary-delay problem.

With ``u = exp(w t) sinh(s x)``, ``s = w + a``, the system
``u_tt - u_xx + 2a u_t + a^2 u = 0``, ``u(0) = 0``,
``u_x(L) = -k u_t(L, t - tau)`` has the characteristic function

    F(w) = s cosh(sL) + k w exp(-w tau) sinh(sL).

``F`` vanishes at ``w = -a`` (``s = 0``) for every ``k``, where the mode
``sinh(s x)`` is identically zero.  Roots are therefore searched on

    G(w) = cosh(sL) + k w exp(-w tau) L sinhc(sL),    sinhc(z) = sinh(z) / z,

which is entire, has the same nontrivial roots and no spurious one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import DlpParams, Grid1D, SpectralResult
from .solver import InitialData, run_boundary_delay

ROOT_TOL = 1e-12
_SERIES_CUTOFF = 1e-3


def dlp_threshold(a: float) -> float:
    """Boundary gain ``k`` below which exponential stability is proven, ``(1 - e^{-2a}) / (1 + e^{-2a})``."""
    e = math.exp(-2.0 * a)
    return (1.0 - e) / (1.0 + e)


def char_fn(omega, params: DlpParams, length: float = 1.0):
    """``F(w) = (w + a) cosh((w + a) L) + k w e^{-w tau} sinh((w + a) L)``."""
    w = np.asarray(omega, dtype=complex)
    s = w + params.a
    return s * np.cosh(s * length) + params.k * w * np.exp(-w * params.tau) * np.sinh(s * length)


def _scaled_parts(w: np.ndarray, params: DlpParams, length: float):
    """The two terms of ``G`` and of ``G'``, all multiplied by
    ``exp(-|Re s L| - max(0, -Re w tau))``."""
    a, k, tau = params.a, params.k, params.tau
    z = (w + a) * length
    sig = np.abs(z.real)
    ep = np.exp(z - sig)
    em = np.exp(-z - sig)
    ch = 0.5 * (ep + em)
    sh = 0.5 * (ep - em)
    small = np.abs(z) < _SERIES_CUTOFF
    zs = np.where(small, 1.0, z)
    z2 = z * z
    scale_small = np.exp(-sig)
    sinhc = np.where(small, (1.0 + z2 / 6.0 + z2 * z2 / 120.0) * scale_small, sh / zs)
    dsinhc = np.where(small, (z / 3.0 + z * z2 / 30.0) * scale_small, (z * ch - sh) / (zs * zs))
    # a second real factor keeps exp(-w tau) bounded far to the left
    extra = np.maximum(0.0, -w.real * tau)
    shrink = np.exp(-extra)
    delay = np.exp(-w * tau - extra)
    t1 = ch * shrink
    t2 = k * w * delay * length * sinhc
    # d/dw: d(cosh z)/dw = L sinh z ; d(sinhc z)/dw = L sinhc'(z)
    d1 = length * sh * shrink
    d2 = k * delay * length * ((1.0 - tau * w) * sinhc + w * length * dsinhc)
    return t1, t2, d1, d2, 0.5 * (np.abs(ep) + np.abs(em)) * shrink


def reduced_char_fn(omega, params: DlpParams, length: float = 1.0):
    """``G(w)`` times a positive real scale; same zeros and argument as ``G``."""
    t1, t2 = _scaled_parts(np.asarray(omega, dtype=complex), params, length)[:2]
    return t1 + t2


def scaled_residual(omega, params: DlpParams, length: float = 1.0):
    """``|G|`` relative to the size of its terms, ``(|e^z| + |e^-z|)/2 + |delay term|``."""
    t1, t2, _, _, size = _scaled_parts(np.asarray(omega, dtype=complex), params, length)
    return np.abs(t1 + t2) / (size + np.abs(t2))


def _newton(w: complex, params: DlpParams, length: float, max_iter: int = 60) -> tuple[complex, bool]:
    for _ in range(max_iter):
        t1, t2, d1, d2, _ = _scaled_parts(np.array([w]), params, length)
        g, dg = complex((t1 + t2)[0]), complex((d1 + d2)[0])
        if dg == 0 or not np.isfinite(dg):
            return w, False
        step = g / dg
        w = w - step
        if not np.isfinite(w):
            return w, False
        if abs(step) <= 1e-15 * max(1.0, abs(w)):
            break
    res = float(scaled_residual(np.array([w]), params, length)[0])
    return w, res < ROOT_TOL


def default_box(params: DlpParams) -> tuple[float, float, float]:
    """``(re_min, re_max, im_max)``."""
    return (-3.0 * params.a - 1.0, 0.5, 20.0 / params.tau + 10.0)


def _wrapped(d: np.ndarray) -> np.ndarray:
    return (d + np.pi) % (2.0 * np.pi) - np.pi


def winding_count(params: DlpParams, box: tuple, length: float = 1.0, base: int = 2000, max_depth: int = 30) -> int:
    """Number of zeros of ``G`` in the box ``[re_min, re_max] x [-im_max, im_max]``
    from the argument principle on its boundary, refined until every argument
    increment is below ``pi/4``."""
    re0, re1, im1 = box
    corners = [complex(re0, -im1), complex(re1, -im1), complex(re1, im1), complex(re0, im1)]
    total = 0.0
    for c0, c1 in zip(corners, corners[1:] + corners[:1]):
        s = np.linspace(0.0, 1.0, base + 1)
        for _ in range(max_depth):
            pts = c0 + s * (c1 - c0)
            ang = np.angle(reduced_char_fn(pts, params, length))
            d = _wrapped(np.diff(ang))
            bad = np.abs(d) > np.pi / 4
            if not bad.any():
                break
            mids = 0.5 * (s[:-1] + s[1:])[bad]
            s = np.sort(np.concatenate([s, mids]))
        total += float(d.sum())
    return int(round(total / (2.0 * np.pi)))


def _scan(params: DlpParams, box: tuple, n_re: int, n_im: int, length: float) -> list:
    re0, re1, im1 = box
    re = np.linspace(re0, re1, n_re)
    im = np.linspace(0.0, im1, n_im)
    W = re[:, None] + 1j * im[None, :]
    mag = np.abs(reduced_char_fn(W, params, length))
    # mirror across the real axis so minima on Im = 0 are detected
    padded = np.pad(mag, 1, mode="constant", constant_values=np.inf)
    padded[1:-1, 0] = padded[1:-1, 2]
    centre = padded[1:-1, 1:-1]
    is_min = np.ones_like(centre, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            nb = padded[1 + di:padded.shape[0] - 1 + di, 1 + dj:padded.shape[1] - 1 + dj]
            is_min &= centre <= nb
    idx = np.argwhere(is_min)
    return [complex(W[i, j]) for i, j in idx]


def _inside(w: complex, box: tuple) -> bool:
    re0, re1, im1 = box
    return re0 < w.real < re1 and -im1 < w.imag < im1


def _dedupe(roots: list) -> list:
    out: list = []
    for r in sorted(roots, key=lambda z: (-z.real, z.imag)):
        if all(abs(r - q) > 1e-8 * max(1.0, abs(r)) for q in out):
            out.append(r)
    return out


def rightmost_roots(params: DlpParams, box: Optional[tuple] = None, grid: tuple = (400, 400),
                    length: float = 1.0, refinements: int = 2) -> SpectralResult:
    """All characteristic roots in a box, checked against the argument principle.

    Local minima of ``|G|`` on a grid over the upper half of the box seed
    Newton; converged roots are deduplicated and completed with their
    conjugates.  When the count disagrees with the winding number the grid is
    doubled up to ``refinements`` times; ``complete`` reports the final match.
    """
    box = tuple(default_box(params) if box is None else box)
    expected = winding_count(params, box, length)
    n_re, n_im = grid
    roots: list = []
    for _ in range(refinements + 1):
        found = list(roots)
        for seed in _scan(params, box, n_re, n_im, length):
            w, ok = _newton(seed, params, length)
            if ok and _inside(w, box):
                if abs(w.imag) < 1e-10 * max(1.0, abs(w)):
                    w = complex(w.real, 0.0)
                found.append(w)
                found.append(w.conjugate())
        roots = _dedupe(found)
        if len(roots) == expected:
            break
        n_re, n_im = 2 * n_re, 2 * n_im
    roots.sort(key=lambda z: (-z.real, -z.imag))
    residuals = [float(x) for x in scaled_residual(np.array(roots, dtype=complex), params, length)] if roots else []
    abscissa = max(r.real for r in roots) if roots else -math.inf
    return SpectralResult(
        roots=roots,
        abscissa=float(abscissa),
        beta=float(-abscissa) if abscissa < 0 else None,
        search_box=box,
        residuals=residuals,
        winding_count=expected,
        found_count=len(roots),
        complete=len(roots) == expected,
    )


def modal_initial_data(root: complex, params: DlpParams, length: float = 1.0) -> InitialData:
    """Real part of the mode ``exp(w t) sinh((w + a) x)`` as initial data."""
    s = root + params.a

    def g_boundary(t):
        return float((root * np.exp(root * t) * np.sinh(s * length)).real)

    return InitialData(
        u0=lambda x: (np.sinh(s * x)).real,
        u1=lambda x: (root * np.sinh(s * x)).real,
        g_boundary=g_boundary,
    )


@dataclass(frozen=True)
class CrossValidation:
    spectral_rate: float  # -abscissa
    time_rate: float  # half the fitted energy decay exponent
    gap: float  # relative difference
    r2: float
    status: str


def crossvalidate_decay(params: DlpParams, nx: int = 801, t_end: float = 40.0,
                        t_fit: Optional[float] = None, init: Optional[InitialData] = None,
                        spectrum: Optional[SpectralResult] = None, backend=None) -> CrossValidation:
    """Compare the spectral abscissa with the decay rate of a simulation.

    The default data ``u0 = sin(pi x / 2L)``, ``u1 = 0``, zero history is
    compatible with the boundary condition.  The energy
    ``(1/2) int u_x^2 + u_t^2 + a^2 u^2`` decays like ``exp(2 abscissa t)``;
    the fitted slope over ``t >= t_fit`` (default ``t_end / 4``) is halved.
    """
    grid = Grid1D(nx=nx)
    if init is None:
        init = InitialData(u0=lambda x: np.sin(0.5 * np.pi * x / grid.length))
    spectrum = spectrum if spectrum is not None else rightmost_roots(params, length=grid.length)
    run = run_boundary_delay(params, grid, t_end, init, backend=backend)
    t_fit = 0.25 * t_end if t_fit is None else t_fit
    sel = (run.t >= t_fit) & (run.energy > 0)
    y = np.log(run.energy[sel])
    slope, intercept = np.polyfit(run.t[sel], y, 1)
    resid = y - (slope * run.t[sel] + intercept)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss if ss > 0 else 1.0
    spectral_rate = -spectrum.abscissa
    time_rate = -0.5 * float(slope)
    gap = abs(time_rate - spectral_rate) / abs(spectral_rate)
    return CrossValidation(spectral_rate, time_rate, gap, r2, run.status)
