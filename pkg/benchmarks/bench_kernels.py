"""Compare the compiled and numpy leapfrog kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--steps N] [--repeat R]

Prints the time per step of each backend on 1D and 2D grids and checks that
both backends produce the same fields.
"""
import argparse
import time

import numpy as np

from delaywave.core import Grid1D, Grid2D, PhysicalParams
from delaywave.experiment import eigenmode
from delaywave.kernels import get_backend
from delaywave.solver import Coefficients, InitialData, Stepper, cfl_dt

CASES = [
    ("1d nx=1001", Grid1D(nx=1001)),
    ("1d nx=10001", Grid1D(nx=10001)),
    ("2d 81x81", Grid2D(nx=81, ny=81)),
    ("2d 321x321", Grid2D(nx=321, ny=321)),
]


def time_backend(grid, backend, steps: int, repeat: int) -> tuple[float, np.ndarray]:
    params = PhysicalParams(a=0.05, k=1.0, tau=0.1, xi=0.1)
    dt, n_tau = cfl_dt(grid, 0.5, params.tau)
    stepper = Stepper(grid, Coefficients.from_params(params), dt, n_tau, backend=backend)
    best = np.inf
    final = None
    for _ in range(repeat):
        state = stepper.initial_state(InitialData(u0=eigenmode(grid)))
        spare = np.empty(grid.size)
        t0 = time.perf_counter()
        for _ in range(steps):
            stepper.advance(state, out=spare)
            spare = stepper.recycled
        best = min(best, time.perf_counter() - t0)
        final = state.u_curr.copy()
    return best / steps, final


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=200)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    python = get_backend("python")
    try:
        compiled = get_backend("cython")
    except ImportError:
        compiled = None
        print("compiled kernels not built; timing the numpy backend only")
    print(f"{'case':<14}{'numpy us/step':>16}{'cython us/step':>16}{'speedup':>10}{'max diff':>12}")
    for name, grid in CASES:
        t_py, u_py = time_backend(grid, python, args.steps, args.repeat)
        if compiled is None:
            print(f"{name:<14}{t_py * 1e6:>16.1f}")
            continue
        t_cy, u_cy = time_backend(grid, compiled, args.steps, args.repeat)
        diff = float(np.max(np.abs(u_py - u_cy)))
        print(f"{name:<14}{t_py * 1e6:>16.1f}{t_cy * 1e6:>16.1f}{t_py / t_cy:>10.2f}{diff:>12.1e}")


if __name__ == "__main__":
    main()
