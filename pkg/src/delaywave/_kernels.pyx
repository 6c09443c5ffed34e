# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled leapfrog kernels.  Mirrors ``_kernels_py`` operation for operation."""


def leapfrog_1d(const double[::1] u_prev, const double[::1] u, double[::1] u_next,
                const double[::1] v_del, const double[::1] beta,
                double inv_dx2, double dt2, double a, double q,
                double jforce, bint right_dirichlet):
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t j, last = n - 1
    cdef double lap, rhs
    u_next[0] = 0.0
    for j in range(1, last):
        lap = (u[j + 1] - 2.0 * u[j] + u[j - 1]) * inv_dx2
        rhs = lap - q * u[j] - a * v_del[j]
        u_next[j] = (2.0 * u[j] - (1.0 - beta[j]) * u_prev[j] + dt2 * rhs) / (1.0 + beta[j])
    if right_dirichlet:
        u_next[last] = 0.0
    else:
        lap = 2.0 * (u[last - 1] - u[last]) * inv_dx2
        rhs = lap - q * u[last] - a * v_del[last] - jforce
        u_next[last] = (2.0 * u[last] - (1.0 - beta[last]) * u_prev[last] + dt2 * rhs) / (1.0 + beta[last])


def leapfrog_2d(const double[:, ::1] u_prev, const double[:, ::1] u, double[:, ::1] u_next,
                const double[:, ::1] v_del, const double[:, ::1] beta,
                const unsigned char[:, ::1] dirichlet,
                double inv_dx2, double inv_dy2, double dt2, double a, double q):
    cdef Py_ssize_t nx = u.shape[0], ny = u.shape[1]
    cdef Py_ssize_t i, j, im, ip, jm, jp
    cdef double lx, ly, rhs
    for i in range(nx):
        # reflected neighbour index at the edges (ghost = mirror node)
        im = i - 1 if i > 0 else 1
        ip = i + 1 if i < nx - 1 else nx - 2
        for j in range(ny):
            if dirichlet[i, j]:
                u_next[i, j] = 0.0
                continue
            jm = j - 1 if j > 0 else 1
            jp = j + 1 if j < ny - 1 else ny - 2
            lx = (u[ip, j] - 2.0 * u[i, j] + u[im, j]) * inv_dx2
            ly = (u[i, jp] - 2.0 * u[i, j] + u[i, jm]) * inv_dy2
            rhs = (lx + ly) - q * u[i, j] - a * v_del[i, j]
            u_next[i, j] = (2.0 * u[i, j] - (1.0 - beta[i, j]) * u_prev[i, j] + dt2 * rhs) / (1.0 + beta[i, j])
