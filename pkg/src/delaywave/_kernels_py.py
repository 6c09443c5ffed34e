"""Numpy implementation of the leapfrog kernels (fallback for ``_kernels``)."""
import numpy as np


def leapfrog_1d(u_prev, u, u_next, v_del, beta, inv_dx2, dt2, a, q, jforce, right_dirichlet):
    lap = (u[2:] - 2.0 * u[1:-1] + u[:-2]) * inv_dx2
    rhs = lap - q * u[1:-1] - a * v_del[1:-1]
    b = beta[1:-1]
    u_next[1:-1] = (2.0 * u[1:-1] - (1.0 - b) * u_prev[1:-1] + dt2 * rhs) / (1.0 + b)
    u_next[0] = 0.0
    if right_dirichlet:
        u_next[-1] = 0.0
    else:
        lap_j = 2.0 * (u[-2] - u[-1]) * inv_dx2
        rhs_j = lap_j - q * u[-1] - a * v_del[-1] - jforce
        bj = beta[-1]
        u_next[-1] = (2.0 * u[-1] - (1.0 - bj) * u_prev[-1] + dt2 * rhs_j) / (1.0 + bj)


def leapfrog_2d(u_prev, u, u_next, v_del, beta, dirichlet, inv_dx2, inv_dy2, dt2, a, q):
    p = np.pad(u, 1, mode="reflect")
    lx = (p[2:, 1:-1] - 2.0 * u + p[:-2, 1:-1]) * inv_dx2
    ly = (p[1:-1, 2:] - 2.0 * u + p[1:-1, :-2]) * inv_dy2
    rhs = (lx + ly) - q * u - a * v_del
    u_next[...] = (2.0 * u - (1.0 - beta) * u_prev + dt2 * rhs) / (1.0 + beta)
    u_next[dirichlet.astype(bool)] = 0.0
