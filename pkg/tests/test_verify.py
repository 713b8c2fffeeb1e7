import math

import numpy as np
import pytest

from adslab import boundary, geometry, spectrum, verify
from adslab.errors import GridTooCoarse, WindowTooNarrow
from adslab.kernels import TestFunction, smooth_bump
from adslab.verify import CompactField, ModeField, TwistingFunction


@pytest.fixture(scope="module")
def twist(model_half, chart):
    return TwistingFunction.default(model_half, chart)


def test_twisting_admissible(twist):
    assert twist.admissible()


def test_s_f_matches_closed_form(twist, chart):
    # S_F = -nu_minus^2 x^2 for the pure-power twisting; compare where the
    # recomputation stencil is trustworthy
    x = np.cos(chart.rho_grid)
    dev = np.abs(twist.S_F / x ** 2 - (-1.0))
    # stencil noise amplifies near both ends (1/x^3 and 1/rho^2 envelopes)
    idx = chart.rho_grid >= 0.15
    assert np.max(dev[idx & (x >= 0.35)]) < 2e-4
    assert np.max(dev[idx & (x >= 0.70)]) < 1e-5


def test_boundary_pairing_calibration(data_robin1):
    # closing the identity on an eigenmode with nonzero traces fixes the
    # boundary constant; it must come out as 2*nu
    c = verify.boundary_pairing_constant(data_robin1, data_robin1.pairs(0)[0])
    assert c == pytest.approx(2.0 * 0.5, rel=1e-6)


def test_green_identity_eigenmode_dirichlet(data_dirichlet, twist):
    u = ModeField(data_dirichlet, [(1.0, data_dirichlet.pairs(0)[0])])
    res = verify.green_identity_residual(data_dirichlet, twist, u, u)
    assert res < 1e-8


def test_green_identity_robin_and_second_order(model_half, chart, twist,
                                               data_robin1):
    u = ModeField(data_robin1, [(1.0, data_robin1.pairs(0)[0]),
                                (-0.4, data_robin1.pairs(1)[1])])
    res = verify.green_identity_residual(data_robin1, twist, u, u)
    assert res < 1e-7
    sym = boundary.second_order(1.0, 0.1)
    data_so = spectrum.solve_spectral_data(model_half, sym, chart,
                                           l_max=1, k_max=3)
    u2 = ModeField(data_so, [(0.7, data_so.pairs(0)[0]),
                             (0.3, data_so.pairs(1)[0])])
    assert verify.green_identity_residual(data_so, twist, u2, u2) < 1e-7


def test_green_identity_compact_v(data_robin1, chart, twist):
    u = ModeField(data_robin1, [(1.0, data_robin1.pairs(0)[1])])
    v = CompactField(chart, {0: smooth_bump(chart.rho_grid, 0.8, 0.3)})
    res = verify.green_identity_residual(data_robin1, twist, u, v)
    assert res < 1e-7


def test_green_identity_boundary_term_value(data_robin1, twist):
    # with B = theta A the boundary term equals theta * 2nu * |A|^2
    p = data_robin1.pairs(0)[0]
    u = ModeField(data_robin1, [(1.0, p)])
    parts = verify._twisted_form_parts(data_robin1, twist, u, u)
    assert parts["bdry_raw"] == pytest.approx(1.0 * p.A * p.A, rel=1e-7)


def test_green_identity_zero_v(data_robin1, chart, twist):
    u = ModeField(data_robin1, [(1.0, data_robin1.pairs(0)[0])])
    v = CompactField(chart, {0: np.zeros_like(chart.rho_grid)})
    parts = verify._twisted_form_parts(data_robin1, twist, u, v)
    assert parts["d_f"] == 0.0
    assert parts["s_term"] == 0.0
    assert parts["pu_v"] == 0.0


def test_green_identity_convergence_order(data_robin1, twist):
    u = ModeField(data_robin1, [(1.0, data_robin1.pairs(0)[0]),
                                (0.5, data_robin1.pairs(0)[2])])
    res = [verify.green_identity_residual(data_robin1, twist, u, u, stride=s)
           for s in (64, 32, 16)]
    order1 = math.log2(res[0] / res[1])
    order2 = math.log2(res[1] / res[2])
    assert res[2] < 1e-6
    assert order1 >= 2.0 and order2 >= 2.0
    # the full grid drives the residual to its floor
    assert verify.green_identity_residual(data_robin1, twist, u, u) < 1e-8


def test_energy_functional_eigenvalue(data_robin1, twist):
    p = data_robin1.pairs(0)[1]
    u = ModeField(data_robin1, [(1.0, p)])
    e = verify.energy_functional(data_robin1, twist, u, u)
    assert e.real if isinstance(e, complex) else e == pytest.approx(
        p.omega_sq, rel=1e-7)
    assert float(np.real(e)) == pytest.approx(p.omega_sq, rel=1e-7)


def test_energy_functional_hermitian(data_robin1, twist, rng):
    pairs = data_robin1.pairs(0)[:3] + data_robin1.pairs(1)[:2]
    cu = rng.standard_normal(5)
    cv = rng.standard_normal(5)
    u = ModeField(data_robin1, list(zip(cu, pairs)))
    v = ModeField(data_robin1, list(zip(cv, pairs)))
    e_uv = verify.energy_functional(data_robin1, twist, u, v)
    e_vu = verify.energy_functional(data_robin1, twist, v, u)
    scale = max(abs(e_uv), abs(e_vu))
    assert abs(e_uv - np.conjugate(e_vu)) < 1e-9 * scale


def test_energy_dirichlet_boundary_term_zero(data_dirichlet, twist):
    p = data_dirichlet.pairs(0)[0]
    u = ModeField(data_dirichlet, [(1.0, p)])
    e = verify.energy_functional(data_dirichlet, twist, u, u)
    assert float(np.real(e)) == pytest.approx(p.omega_sq, rel=1e-7)


def test_positivity_link(model_half, chart, twist):
    # positive spectrum <-> positive energy form on the computed eigenbasis,
    # checked in both directions using a symbol with a bound state
    data_ok = spectrum.solve_spectral_data(model_half, boundary.robin(-0.5),
                                           chart, l_max=0, k_max=4)
    for p in data_ok.pairs(0):
        u = ModeField(data_ok, [(1.0, p)])
        assert float(np.real(verify.energy_functional(
            data_ok, twist, u, u))) > 0.0
    prob = spectrum.ModeProblem(model_half, boundary.robin(-1.0), 0, chart)
    bs = spectrum.bound_state(prob)
    assert bs is not None and bs.omega_sq < 0.0
    data_neg = spectrum.SpectralData(model=model_half,
                                     symbol=boundary.robin(-1.0),
                                     chart=chart, modes={0: [bs]})
    u = ModeField(data_neg, [(1.0, bs)])
    e = float(np.real(verify.energy_functional(data_neg, twist, u, u)))
    assert e < 0.0
    assert e == pytest.approx(bs.omega_sq, rel=1e-6)


def test_grid_too_coarse(data_robin1, twist):
    u = ModeField(data_robin1, [(1.0, data_robin1.pairs(0)[0])])
    with pytest.raises(GridTooCoarse):
        verify.energy_functional(data_robin1, twist, u, u, stride=64,
                                 self_check_tol=1e-14)


def test_time_slice_residual_orders(data_robin0, chart):
    resids = []
    for n_t in (1201, 2401):
        t = np.linspace(0.0, 6.0, n_t)
        f = TestFunction(
            t_grid=t, t_profile=smooth_bump(t, 4.5, 0.5),
            radial_profile=smooth_bump(chart.rho_grid, 0.8, 0.25),
            harmonics=[1.0, 0.5], t_support=(4.0, 5.0),
            rho_support=(0.55, 1.05))
        resids.append(verify.time_slice_residual(data_robin0, f,
                                                 (1.0, 2.0)))
    assert resids[0] < 1e-3
    assert resids[1] < 0.35 * resids[0]


def test_time_slice_zero_function(data_robin0, chart):
    t = np.linspace(0.0, 6.0, 1201)
    f = TestFunction(
        t_grid=t, t_profile=np.zeros_like(t),
        radial_profile=smooth_bump(chart.rho_grid, 0.8, 0.25),
        harmonics=[1.0], t_support=(4.0, 5.0), rho_support=(0.55, 1.05))
    assert verify.time_slice_residual(data_robin0, f, (1.0, 2.0)) == 0.0


def test_time_slice_window_too_narrow(data_robin0, chart):
    t = np.linspace(0.0, 6.0, 301)
    f = TestFunction(
        t_grid=t, t_profile=smooth_bump(t, 4.5, 0.5),
        radial_profile=smooth_bump(chart.rho_grid, 0.8, 0.25),
        harmonics=[1.0], t_support=(4.0, 5.0), rho_support=(0.55, 1.05))
    with pytest.raises(WindowTooNarrow):
        verify.time_slice_residual(data_robin0, f, (1.0, 1.05))


def test_bounce_dirichlet(data_l0_deep):
    res = verify.bounce_test(data_l0_deep, 0.25 * math.pi, 0.05)
    assert res.predicted == pytest.approx(0.25 * math.pi)
    assert abs(res.measured - res.predicted) <= 0.02 * res.predicted


def test_bounce_robin_same_time(model_half, chart):
    data = spectrum.solve_spectral_data(model_half, boundary.robin(1.0),
                                        chart, l_max=0, k_max=80)
    res = verify.bounce_test(data, 0.25 * math.pi, 0.05)
    assert abs(res.measured - res.predicted) <= 0.02 * res.predicted


def test_bounce_width_trend(data_l0_deep):
    errs = []
    for width in (0.10, 0.05):
        res = verify.bounce_test(data_l0_deep, 0.25 * math.pi, width)
        errs.append(abs(res.measured - res.predicted))
    assert errs[1] <= errs[0] + 1e-3
