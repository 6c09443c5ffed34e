import math

import numpy as np
import pytest

from delaywave import diagnostics as diag
from delaywave import kernels
from delaywave.core import DlpParams, Grid1D, Grid2D, PhysicalParams
from delaywave.experiment import eigen_frequency, eigenmode, polynomial
from delaywave.solver import (
    Coefficients,
    InitialData,
    RunConfig,
    Stepper,
    cfl_dt,
    run,
    run_boundary_delay,
    step_1d,
    step_2d,
)

from conftest import bump

CONSERVE = PhysicalParams(a=0.0, k=0.0, tau=0.0, xi=1.0, diagnostic=True)


def _backends():
    out = [kernels.get_backend("python")]
    try:
        out.append(kernels.get_backend("cython"))
    except ImportError:
        pass
    return out


# ---------------------------------------------------------------------------
# time step selection


def test_cfl_dt_exact_division():
    dt, n_tau = cfl_dt(Grid1D(nx=101), 0.5, 1.0)
    assert n_tau == 200
    assert dt == 0.005


def test_cfl_dt_rounds_down():
    dt, n_tau = cfl_dt(Grid1D(nx=101), 0.9, 1.0)
    assert n_tau == math.ceil(1.0 / 0.009) == 112
    assert dt == pytest.approx(1.0 / 112, rel=1e-15)
    assert dt <= 0.9 * 0.01


def test_cfl_dt_2d_bound():
    g = Grid2D(nx=11, ny=21)
    dt, n_tau = cfl_dt(g, 0.5, 1.0)
    assert dt <= 0.5 / math.sqrt(1 / g.dx ** 2 + 1 / g.dy ** 2)
    assert n_tau * dt == pytest.approx(1.0, rel=1e-14)


def test_cfl_dt_zero_delay():
    dt, n_tau = cfl_dt(Grid1D(nx=101), 0.5, 0.0)
    assert (dt, n_tau) == (0.005, 0)
    with pytest.raises(ValueError, match="zero delay"):
        cfl_dt(Grid1D(nx=101), 0.5, 0.0, a=0.1)


def test_cfl_dt_buffer_limit():
    with pytest.raises(ValueError, match="delay buffer too large"):
        cfl_dt(Grid1D(nx=101), 0.5, 1.0, max_steps=100)


@pytest.mark.parametrize("cfl", [0.0, 1.0, 1.2])
def test_cfl_range(cfl):
    with pytest.raises(ValueError, match="cfl"):
        cfl_dt(Grid1D(nx=11), cfl, 1.0)


# ---------------------------------------------------------------------------
# exact properties


@pytest.mark.parametrize("backend", _backends(), ids=lambda b: b.__name__.rsplit(".", 1)[-1])
@pytest.mark.parametrize("grid", [Grid1D(nx=41), Grid2D(nx=13, ny=9)], ids=["1d", "2d"])
def test_null_solution(grid, backend):
    cfg = RunConfig(PhysicalParams(a=0.1, k=1.0, tau=0.5, xi=0.2), grid, t_end=2.0)
    res = run(cfg, InitialData(), backend=backend, keep_state=True)
    assert res.status == "completed"
    state = res.final_state
    assert not np.any(state.u_prev) and not np.any(state.u_curr) and not np.any(state.history.slots)
    assert all(s.e_total == 0.0 for s in res.samples)


@pytest.mark.parametrize("grid", [Grid1D(nx=81), Grid2D(nx=17, ny=17)], ids=["1d", "2d"])
def test_delay_inactive_before_tau(grid):
    """With zero history the delayed term is exactly zero until t = tau."""
    tau = 0.5
    init = InitialData(u0=eigenmode(grid))
    states = []
    for a in (0.0, 0.3):
        params = PhysicalParams(a=a, k=1.0, tau=tau, xi=1.0)
        dt, n_tau = cfl_dt(grid, 0.5, tau)
        stepper = Stepper(grid, Coefficients.from_params(params), dt, n_tau)
        state = stepper.initial_state(init)
        traj = []
        for _ in range(n_tau):
            stepper.advance(state)
            traj.append(state.u_curr.copy())
        stepper.advance(state)
        traj.append(state.u_curr.copy())
        states.append(traj)
    zero_a, with_a = states
    for n in range(len(zero_a) - 1):
        assert np.array_equal(zero_a[n], with_a[n]), f"differs at step {n + 1}"
    # the step after the first delay window must feel the delayed term
    assert not np.array_equal(zero_a[-1], with_a[-1])


def test_linearity():
    grid = Grid1D(nx=101)
    params = PhysicalParams(a=0.05, k=1.0, tau=0.4, xi=0.1)
    cfg = RunConfig(params, grid, t_end=2.0)
    base = run(cfg, InitialData(u0=polynomial(grid), u1=bump), keep_state=True)
    alpha = -3.7
    scaled = run(cfg, InitialData(u0=lambda x: alpha * polynomial(grid)(x), u1=lambda x: alpha * bump(x)),
                 keep_state=True)
    n = base.n_steps
    u, us = base.final_state.u_curr, scaled.final_state.u_curr
    assert np.max(np.abs(us - alpha * u)) <= 1e-12 * n * np.max(np.abs(alpha * u))
    e, es = diag.column(base.samples, "e_total"), diag.column(scaled.samples, "e_total")
    np.testing.assert_allclose(es, alpha ** 2 * e, rtol=1e-12 * n)


def test_time_reversal():
    """a = k = 0, all Dirichlet: run forward, flip the velocity, run back."""
    for nx in (51, 101):
        grid = Grid1D(nx=nx, right_bc="dirichlet")

        def u0(x):
            return np.sin(np.pi * x) + 0.3 * np.sin(3 * np.pi * x)

        fwd = run(RunConfig(CONSERVE, grid, t_end=0.7), InitialData(u0=u0), keep_state=True).final_state
        back = run(
            RunConfig(CONSERVE, grid, t_end=fwd.t_observed),
            InitialData(u0=fwd.u_prev.copy(), u1=-fwd.history.lagged(0)),
            keep_state=True,
        ).final_state
        err = float(np.max(np.abs(back.u_prev - u0(grid.x))))
        assert err <= grid.dx ** 2


@pytest.mark.parametrize("grid", [Grid1D(nx=101), Grid2D(nx=17, ny=17)], ids=["1d", "2d"])
def test_backends_agree(grid):
    backends = _backends()
    if len(backends) < 2:
        pytest.skip("compiled kernels not built")
    params = PhysicalParams(a=0.05, k=1.0, tau=0.3, xi=0.1)
    finals = [
        run(RunConfig(params, grid, t_end=2.0), InitialData(u0=eigenmode(grid)), backend=b, keep_state=True)
        .final_state.u_curr
        for b in backends
    ]
    scale = np.max(np.abs(finals[0]))
    assert np.max(np.abs(finals[0] - finals[1])) <= 1e-13 * scale


def test_step_functions_match_stepper():
    grid = Grid1D(nx=31)
    params = PhysicalParams(a=0.1, k=1.0, tau=0.2, xi=0.2)
    dt, n_tau = cfl_dt(grid, 0.5, params.tau)
    stepper = Stepper(grid, Coefficients.from_params(params), dt, n_tau)
    a = stepper.initial_state(InitialData(u0=eigenmode(grid)))
    b = a.copy()
    for _ in range(20):
        stepper.advance(a)
        step_1d(b, params, grid, dt)
    assert np.array_equal(a.u_curr, b.u_curr)
    g2 = Grid2D(nx=9, ny=9)
    dt2, n2 = cfl_dt(g2, 0.5, params.tau)
    s2 = Stepper(g2, Coefficients.from_params(params), dt2, n2)
    c = s2.initial_state(InitialData(u0=eigenmode(g2)))
    d = c.copy()
    for _ in range(5):
        s2.advance(c)
        step_2d(d, params, g2, dt2)
    assert np.array_equal(c.u_curr, d.u_curr)


# ---------------------------------------------------------------------------
# accuracy


def _eigen_error(nx):
    grid = Grid1D(nx=nx)
    mode = eigenmode(grid)
    state = run(RunConfig(CONSERVE, grid, t_end=1.0), InitialData(u0=mode), keep_state=True).final_state
    exact = mode(grid.x) * math.cos(eigen_frequency(grid) * state.t_observed)
    return math.sqrt(diag.l2_sq(state.u_prev - exact, grid))


def test_eigenmode_second_order():
    errs = [_eigen_error(n) for n in (41, 81, 161)]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(1.8 <= p <= 2.2 for p in orders), orders


def test_mixed_mode_frequency():
    assert eigen_frequency(Grid1D(nx=5, length=2.0)) == pytest.approx(math.pi / 4)


def test_dirichlet_square_conservation():
    grid = Grid2D(nx=101, ny=101, gamma0_edges=("left", "right", "bottom", "top"), gamma1_edges=())
    res = run(RunConfig(CONSERVE, grid, t_end=5.0, sample_every=10), InitialData(u0=eigenmode(grid)))
    e = diag.column(res.samples, "e_total")
    assert res.status == "completed"
    assert np.max(np.abs(e - e[0])) / e[0] < 1e-4


def test_boundary_dissipation_only():
    """a = 0, k = 1: energy decays, per-step rises stay within 10 dt^3 E(0)."""
    grid = Grid1D(nx=201)
    params = PhysicalParams(a=0.0, k=1.0, tau=1.0, xi=1e-16)
    res = run(RunConfig(params, grid, t_end=20.0), InitialData(u0=eigenmode(grid)))
    e = diag.column(res.samples, "e_standard")
    assert np.max(np.diff(e)) <= 10 * res.dt ** 3 * e[0]
    # strict decrease over every half time unit while above the round-off floor
    stride = int(round(0.5 / res.dt))
    coarse = e[::stride]
    live = coarse[:-1] > 1e-8 * e[0]
    assert np.all(np.diff(coarse)[live] < 0)
    assert e[-1] < 1e-8 * e[0]


def test_stable_delayed_run_decays():
    grid = Grid1D(nx=201)
    params = PhysicalParams(a=0.05, k=1.0, tau=1.0, xi=0.1)
    res = run(RunConfig(params, grid, t_end=6.0), InitialData(u0=polynomial(grid)))
    e = diag.column(res.samples, "e_total")
    assert res.status == "completed"
    assert e[-1] < e[0]
    fit = diag.fit_decay(res.samples, params.tau)
    assert fit.c2 > 0


def test_growth_run_reports_blow_up():
    """Large delayed coefficient without boundary damping: growth is an outcome, not an error."""
    grid = Grid1D(nx=101)
    params = PhysicalParams(a=5.0, k=0.0, tau=1.0, xi=1.0, diagnostic=True)
    res = run(RunConfig(params, grid, t_end=200.0), InitialData(u0=eigenmode(grid)))
    assert res.status == "blow_up"
    assert res.status_step is not None and res.status_label == f"blow_up({res.status_step})"
    assert res.samples[-1].e_total > 1e6 * res.samples[0].e_total


def test_sampling_cadence_and_snapshots():
    grid = Grid1D(nx=21)
    cfg = RunConfig(PhysicalParams(a=0.0, k=1.0, tau=0.5, xi=0.1), grid, t_end=1.0,
                    sample_every=4, snapshot_every=10)
    res = run(cfg, InitialData(u0=eigenmode(grid)))
    t = diag.column(res.samples, "t")
    assert t[0] == 0.0
    np.testing.assert_allclose(np.diff(t), 4 * res.dt, rtol=1e-12)
    assert len(res.snapshots) == res.n_steps // 10 + 1
    assert res.snapshots[0].t == 0.0
    np.testing.assert_array_equal(res.snapshots[0].u, eigenmode(grid)(grid.x))


# ---------------------------------------------------------------------------
# initial data checks


def test_u0_must_vanish_on_dirichlet_part():
    grid = Grid1D(nx=11)
    with pytest.raises(ValueError, match="vanish"):
        run(RunConfig(PhysicalParams(0.0, 1.0, 1.0, 1.0), grid, 1.0), InitialData(u0=1.0))


def test_history_compatibility():
    grid = Grid1D(nx=11)
    cfg = RunConfig(PhysicalParams(0.1, 1.0, 0.5, 1.0), grid, 0.5)
    with pytest.raises(ValueError, match="differs from u1"):
        run(cfg, InitialData(u1=lambda x: x, g=lambda x, s: 0.0 * x))
    # consistent history is accepted
    run(cfg, InitialData(u1=lambda x: x, g=lambda x, s: x))


def test_sampled_history_shape():
    grid = Grid1D(nx=11)
    cfg = RunConfig(PhysicalParams(0.1, 1.0, 0.5, 1.0), grid, 0.5)
    _, n_tau = cfl_dt(grid, 0.5, 0.5)
    run(cfg, InitialData(g=np.zeros((n_tau, grid.size))))
    with pytest.raises(ValueError, match="shape"):
        run(cfg, InitialData(g=np.zeros((n_tau + 1, grid.size))))


def test_field_size_mismatch():
    with pytest.raises(ValueError, match="values"):
        run(RunConfig(PhysicalParams(0.0, 1.0, 1.0, 1.0), Grid1D(nx=11), 1.0), InitialData(u1=np.zeros(5)))


def test_invalid_config_rejected():
    with pytest.raises(ValueError, match="t_end"):
        run(RunConfig(PhysicalParams(0.0, 1.0, 1.0, 1.0), Grid1D(nx=11), 0.0), InitialData())


# ---------------------------------------------------------------------------
# boundary-delay system


def test_boundary_delay_needs_integer_delay_steps():
    with pytest.raises(ValueError, match="integer"):
        run_boundary_delay(DlpParams(a=1.0, k=0.5, tau=1.0), Grid1D(nx=31, length=1.3), 1.0, InitialData())


def test_boundary_delay_null_solution():
    res = run_boundary_delay(DlpParams(a=1.0, k=0.5, tau=0.5), Grid1D(nx=41), 3.0, InitialData())
    assert res.status == "completed"
    assert not np.any(res.energy)


def test_boundary_delay_without_feedback_decays_at_rate_a():
    """k = 0: u = exp(-a t) w with w a free standing wave, so E ~ exp(-2 a t) up to oscillation."""
    a = 0.7
    grid = Grid1D(nx=201)
    res = run_boundary_delay(DlpParams(a=a, k=0.0, tau=0.5), grid, 12.0,
                             InitialData(u0=lambda x: np.sin(0.5 * np.pi * x)))
    slope = np.polyfit(res.t, np.log(res.energy), 1)[0]
    assert -0.5 * slope == pytest.approx(a, rel=0.02)


def test_boundary_delay_long_run_rebases():
    """Runs far past the rebase horizon stay finite."""
    res = run_boundary_delay(DlpParams(a=2.0, k=0.5, tau=0.5), Grid1D(nx=101), 60.0,
                             InitialData(u0=lambda x: np.sin(0.5 * np.pi * x)), sample_every=50)
    assert res.status == "completed"
    assert np.all(np.isfinite(res.energy))


def test_pure_backend_selected_by_environment():
    import os
    import subprocess
    import sys

    env = {**os.environ, "DELAYWAVE_PURE": "1"}
    proc = subprocess.run([sys.executable, "-c", "import delaywave; print(delaywave.BACKEND)"],
                          capture_output=True, text=True, env=env)
    assert proc.stdout.strip() == "python"
