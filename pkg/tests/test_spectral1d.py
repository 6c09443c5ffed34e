import math

import numpy as np
import pytest

from delaywave import spectral1d as sp
from delaywave.core import DlpParams, Grid1D
from delaywave.solver import run_boundary_delay

BASE = DlpParams(a=1.0, k=0.5, tau=1.0)


@pytest.fixture(scope="module")
def base_result():
    return sp.rightmost_roots(BASE)


# ---------------------------------------------------------------------------
# threshold and characteristic function


def test_threshold_examples():
    assert sp.dlp_threshold(1.0) == pytest.approx(0.761594, abs=5e-7)
    assert sp.dlp_threshold(0.1) == pytest.approx(0.099668, abs=5e-7)
    assert sp.dlp_threshold(40.0) == 1.0


def test_threshold_is_tanh():
    a = np.linspace(0.01, 5.0, 100)
    assert max(abs(sp.dlp_threshold(float(x)) - math.tanh(x)) for x in a) < 1e-14


def test_char_fn_conjugate_symmetry():
    rng = np.random.default_rng(2)
    w = rng.uniform(-3, 1, 20) + 1j * rng.uniform(-20, 20, 20)
    np.testing.assert_allclose(sp.char_fn(np.conj(w), BASE), np.conj(sp.char_fn(w, BASE)), rtol=1e-14)


def test_reduced_function_shares_zeros_and_argument():
    rng = np.random.default_rng(4)
    w = rng.uniform(-3, 1, 50) + 1j * rng.uniform(0.5, 20, 50)
    f = sp.char_fn(w, BASE)
    g = sp.reduced_char_fn(w, BASE)
    s = w + BASE.a
    # F = s G exp(|Re s| + max(0, -Re w tau))
    scale = np.exp(np.abs(s.real) + np.maximum(0.0, -w.real * BASE.tau))
    np.testing.assert_allclose(f, s * g * scale, rtol=1e-12)


def test_no_overflow_far_left():
    w = np.array([-800.0 + 3.0j])
    assert np.all(np.isfinite(sp.reduced_char_fn(w, BASE)))
    assert np.all(np.isfinite(sp.scaled_residual(w, BASE)))


# ---------------------------------------------------------------------------
# root capture


def test_roots_polished(base_result):
    assert base_result.complete
    assert base_result.found_count == base_result.winding_count > 0
    assert max(base_result.residuals) < 1e-10
    for w in base_result.roots:
        s = w + BASE.a
        scale = abs(s) * (abs(np.cosh(s)) + BASE.k * abs(w * np.exp(-w * BASE.tau) * np.sinh(s)))
        assert abs(sp.char_fn(w, BASE)) < 1e-10 * scale


def test_roots_sorted_conjugate_closed(base_result):
    roots = base_result.roots
    re = [r.real for r in roots]
    assert re == sorted(re, reverse=True)
    for r in roots:
        assert min(abs(r.conjugate() - q) for q in roots) < 1e-12
    assert base_result.abscissa == roots[0].real


def test_sufficient_condition_example(base_result):
    assert BASE.k < sp.dlp_threshold(BASE.a)
    assert base_result.abscissa < 0
    assert base_result.beta == -base_result.abscissa


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_zero_gain_closed_form(a):
    res = sp.rightmost_roots(DlpParams(a=a, k=0.0, tau=1.7))
    assert res.complete
    assert abs(res.abscissa + a) < 1e-6
    for r in res.roots:
        assert abs(r.real + a) < 1e-9
        m = (abs(r.imag) - math.pi / 2) / math.pi
        assert abs(m - round(m)) < 1e-9


def test_grid_refinement_moves_no_root(base_result):
    fine = sp.rightmost_roots(BASE, grid=(800, 800))
    assert fine.found_count == base_result.found_count
    for r in base_result.roots:
        assert min(abs(r - q) for q in fine.roots) < 1e-10


def test_box_enlargement_keeps_abscissa(base_result):
    re_min, re_max, im_max = base_result.search_box
    big = sp.rightmost_roots(BASE, box=(re_min, re_max, 2 * im_max))
    assert big.complete
    assert big.abscissa <= base_result.abscissa + 1e-10
    assert big.found_count >= base_result.found_count


def test_incomplete_capture_reported():
    res = sp.rightmost_roots(BASE, grid=(3, 3), refinements=0)
    assert not res.complete
    assert res.found_count != res.winding_count


def test_winding_count_matches_closed_form():
    # k = 0, box Im in [-30, 30], Re in [-2, 0.5]: roots at -1 + i(pi/2 + m pi), |Im| < 30
    expected = 2 * sum(1 for m in range(20) if math.pi / 2 + m * math.pi < 30)
    assert sp.winding_count(DlpParams(a=1.0, k=0.0, tau=1.0), (-2.0, 0.5, 30.0)) == expected


@pytest.mark.parametrize("seed", range(5))
def test_below_threshold_is_stable(seed):
    rng = np.random.default_rng(100 + seed)
    a = float(rng.uniform(0.1, 2.0))
    tau = float(rng.uniform(0.2, 2.0))
    res = sp.rightmost_roots(DlpParams(a=a, k=0.9 * sp.dlp_threshold(a), tau=tau))
    assert res.complete and res.abscissa < 0


# ---------------------------------------------------------------------------
# time-domain oracles


def _mode_rate(root, params, nx=801, t_end=8.0):
    grid = Grid1D(nx=nx)
    run = run_boundary_delay(params, grid, t_end, sp.modal_initial_data(root, params))
    assert run.status == "completed"
    sel = run.t >= 1.0
    return -0.5 * np.polyfit(run.t[sel], np.log(run.energy[sel]), 1)[0]


@pytest.mark.parametrize("index", [0, 2], ids=["rightmost", "second"])
def test_mode_decays_at_its_root(base_result, index):
    root = base_result.roots[index]
    assert _mode_rate(root, BASE) == pytest.approx(-root.real, rel=0.05)


def test_mode_of_other_parameters():
    params = DlpParams(a=0.5, k=0.3, tau=0.5)
    res = sp.rightmost_roots(params)
    assert res.complete
    assert _mode_rate(res.roots[0], params) == pytest.approx(-res.abscissa, rel=0.05)


def test_crossvalidation_zero_gain():
    cv = sp.crossvalidate_decay(DlpParams(a=1.0, k=0.0, tau=1.0), nx=401, t_end=20.0)
    assert cv.status == "completed"
    # energy rate 2a, amplitude rate a
    assert cv.time_rate == pytest.approx(1.0, rel=0.05)
    assert cv.gap < 0.05


def test_crossvalidation_base_case():
    cv = sp.crossvalidate_decay(BASE, nx=801, t_end=40.0)
    assert cv.status == "completed"
    assert cv.gap < 0.10
    assert cv.r2 > 0.95
