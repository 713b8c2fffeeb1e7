import math

import numpy as np
import pytest

from adslab import kernels, spectrum
from adslab.errors import NegativeMode, TruncationWarning
from adslab.kernels import KernelKind, bump_test_function, smooth_bump


@pytest.fixture(scope="module")
def t_grid():
    return np.linspace(0.0, 4.0, 1201)


def smear12(kernel, f, g):
    # fixtures carry only 12 modes; tails sit near 1e-5 relative
    return kernels.smear(kernel, f, g, tail_tol=1e-4)


def make_pair(t_grid, chart, rng=None, l_count=4):
    if rng is None:
        f = bump_test_function(t_grid, chart, 1.0, 0.35, 0.7, 0.25,
                               harmonics=[1.0, 0.4, 0.0, -0.2])
        g = bump_test_function(t_grid, chart, 1.9, 0.4, 0.9, 0.3,
                               harmonics=[0.8, -0.3, 0.5, 0.0])
        return f, g
    def rand_fn():
        tc = rng.uniform(0.8, 3.0)
        tw = rng.uniform(0.25, 0.5)
        rc = rng.uniform(0.5, 1.0)
        rw = rng.uniform(0.15, 0.3)
        h = rng.standard_normal(l_count)
        return bump_test_function(t_grid, chart, tc, tw, rc, rw, harmonics=h)
    return rand_fn(), rand_fn()


def test_build_kernel_requires_positive_spectrum(model_half, chart):
    from adslab import boundary
    data = spectrum.solve_spectral_data(model_half, boundary.robin(-1.0),
                                        chart, l_max=0, k_max=3)
    with pytest.raises(NegativeMode):
        kernels.build_kernel(data, KernelKind.TWO_POINT)
    # causal kernel is still constructible
    kernels.build_kernel(data, KernelKind.CAUSAL)


def test_retarded_minus_advanced_is_causal(data_robin0, t_grid, chart):
    f, g = make_pair(t_grid, chart)
    ret = kernels.build_kernel(data_robin0, KernelKind.RETARDED)
    adv = kernels.build_kernel(data_robin0, KernelKind.ADVANCED)
    cau = kernels.build_kernel(data_robin0, KernelKind.CAUSAL)
    vr = smear12(ret, f, g).value
    va = smear12(adv, f, g).value
    vc = smear12(cau, f, g).value
    assert vr - va == pytest.approx(vc, rel=1e-12)


def test_causal_antisymmetry(data_robin0, t_grid, chart, rng):
    cau = kernels.build_kernel(data_robin0, KernelKind.CAUSAL)
    for _ in range(4):
        f, g = make_pair(t_grid, chart, rng)
        v1 = smear12(cau, f, g).value
        v2 = smear12(cau, g, f).value
        assert v1 == pytest.approx(-v2, rel=1e-11)


def test_causal_equal_time_smears_to_zero(data_robin0, t_grid, chart):
    cau = kernels.build_kernel(data_robin0, KernelKind.CAUSAL)
    # same time window, different shapes: the odd weight kills the pairing
    f = bump_test_function(t_grid, chart, 2.0, 0.3, 0.7, 0.2, harmonics=[1.0])
    g = bump_test_function(t_grid, chart, 2.0, 0.3, 0.9, 0.25, harmonics=[1.0])
    scale = abs(smear12(
        cau,
        bump_test_function(t_grid, chart, 1.2, 0.3, 0.7, 0.2, harmonics=[1.0]),
        g).value)
    v = smear12(cau, f, g).value
    assert abs(v) < 1e-10 * max(scale, 1.0)


def test_ccr_identity(data_robin0, t_grid, chart, rng):
    two = kernels.build_kernel(data_robin0, KernelKind.TWO_POINT)
    cau = kernels.build_kernel(data_robin0, KernelKind.CAUSAL)
    for _ in range(6):
        f, g = make_pair(t_grid, chart, rng)
        lhs = smear12(two, f, g).value - smear12(two, g, f).value
        rhs = 1j * smear12(cau, f, g).value
        scale = max(abs(lhs), abs(rhs), 1e-300)
        assert abs(lhs - rhs) / scale < 1e-10


def test_two_point_positivity(data_robin0, t_grid, chart, rng):
    two = kernels.build_kernel(data_robin0, KernelKind.TWO_POINT)
    for _ in range(8):
        f, _ = make_pair(t_grid, chart, rng)
        v = smear12(two, f, f).value
        assert v.real >= -1e-10 * max(abs(v), 1.0)
        assert abs(v.imag) <= 1e-10 * max(abs(v), 1.0)


def test_retarded_support(data_robin0, t_grid, chart):
    ret = kernels.build_kernel(data_robin0, KernelKind.RETARDED)
    adv = kernels.build_kernel(data_robin0, KernelKind.ADVANCED)
    early = bump_test_function(t_grid, chart, 0.8, 0.3, 0.7, 0.2,
                               harmonics=[1.0, 0.5])
    late = bump_test_function(t_grid, chart, 3.0, 0.3, 0.8, 0.25,
                              harmonics=[1.0, -0.5])
    peak = abs(smear12(ret, late, early).value)
    assert peak > 0.0
    # receiver before the source: retarded response vanishes
    assert abs(smear12(ret, early, late).value) <= 1e-6 * peak
    # advanced mirror
    peak_a = abs(smear12(adv, early, late).value)
    assert abs(smear12(adv, late, early).value) <= 1e-6 * peak_a


def test_delta_response_eigenmode(data_robin0, t_grid, chart):
    cau = kernels.build_kernel(data_robin0, KernelKind.CAUSAL)
    p = data_robin0.pairs(0)[1]
    f = kernels.TestFunction(
        t_grid=t_grid, t_profile=smooth_bump(t_grid, 2.0, 0.5),
        radial_profile=p.psi, harmonics=[1.0],
        t_support=(1.5, 2.5), rho_support=(0.0, 1.6), radial_mode=p)
    out = kernels.delta_response(cau, f)
    err = np.max(np.abs(out[0] - p.psi))
    assert err < 1e-8


def test_delta_response_zero(data_robin0, t_grid, chart):
    cau = kernels.build_kernel(data_robin0, KernelKind.CAUSAL)
    f = kernels.TestFunction(
        t_grid=t_grid, t_profile=smooth_bump(t_grid, 2.0, 0.5),
        radial_profile=np.zeros_like(chart.rho_grid), harmonics=[1.0],
        t_support=(1.5, 2.5), rho_support=(0.6, 0.9))
    out = kernels.delta_response(cau, f)
    assert np.max(np.abs(out)) == 0.0


def test_delta_response_converges(data_l0_deep, t_grid, chart):
    prof = smooth_bump(chart.rho_grid, 0.8, 0.25)
    f = kernels.TestFunction(
        t_grid=t_grid, t_profile=smooth_bump(t_grid, 2.0, 0.5),
        radial_profile=prof, harmonics=[1.0],
        t_support=(1.5, 2.5), rho_support=(0.55, 1.05))
    errs = []
    for k in (10, 20, 40):
        kern = kernels.build_kernel(data_l0_deep, KernelKind.CAUSAL, k_max=k)
        out = kernels.delta_response(kern, f)
        errs.append(np.linalg.norm(out[0].real - prof)
                    / np.linalg.norm(prof))
    assert errs[1] < 0.5 * errs[0]
    assert errs[2] < 0.5 * errs[1]


def test_apply_P_identity_and_bisolution(data_robin0, chart):
    # mode-resolved source: radial profile inside the computed family, with
    # tail-exact overlaps through radial_mode
    combo = list(zip([0.8, -0.5, 0.3], data_robin0.pairs(0)[:3]))
    prof = sum(c * p.psi for c, p in combo)
    resids = []
    for n_t in (801, 1601):
        t = np.linspace(0.0, 4.0, n_t)
        f = kernels.TestFunction(
            t_grid=t, t_profile=smooth_bump(t, 2.0, 0.6),
            radial_profile=prof, harmonics=[1.0],
            t_support=(1.4, 2.6), rho_support=(0.0, 1.6), radial_mode=combo)
        resids.append(kernels.apply_P_then_G(data_robin0, f))
    assert resids[0].identity < 5e-3
    assert resids[0].bisolution < 5e-3
    # second-order stencils: halving dt divides the residual by ~4
    assert resids[1].identity < 0.35 * resids[0].identity
    assert resids[1].bisolution < 0.35 * resids[0].bisolution


def test_truncation_warning(data_robin0, chart):
    t = np.linspace(0.0, 4.0, 1201)
    # very narrow time bump: slow frequency decay, the tail estimate trips
    f = bump_test_function(t, chart, 2.0, 0.04, 0.7, 0.2, harmonics=[1.0])
    kern = kernels.build_kernel(data_robin0, KernelKind.TWO_POINT, k_max=6)
    with pytest.warns(TruncationWarning):
        kernels.smear(kern, f, f)


def test_addition_kernel_matches_legendre():
    from scipy.special import eval_legendre
    for l in range(5):
        for cg in (-0.8, 0.0, 0.3, 1.0):
            got = kernels.addition_kernel(4, l, cg)
            ref = (2 * l + 1) / (4 * math.pi) * eval_legendre(l, cg)
            assert got == pytest.approx(ref, rel=1e-12)


def test_two_point_imaginary_part_is_half_causal(data_robin0):
    # Im exp(+i w dt)/(2w) = + sin(w dt)/(2w): half the causal weight
    kern2 = kernels.build_kernel(data_robin0, KernelKind.TWO_POINT, l_max=0,
                                 eps=0.05)
    kernc = kernels.build_kernel(data_robin0, KernelKind.CAUSAL, l_max=0,
                                 eps=0.05)
    v2 = kernels.point_eval(kern2, 0.7, 0.8, 0.9)
    vc = kernels.point_eval(kernc, 0.7, 0.8, 0.9)
    assert v2.imag == pytest.approx(0.5 * vc.real, rel=1e-10)


def test_richardson_extrapolation():
    exact = 1.37
    eps = np.array([0.2, 0.1, 0.05])
    vals = exact + 3.0 * eps  # first-order error model
    assert kernels.richardson_extrapolate(vals) == pytest.approx(
        exact, abs=1e-12)


def test_smear_reports_tail(data_robin0, t_grid, chart):
    cau = kernels.build_kernel(data_robin0, KernelKind.CAUSAL)
    f, g = make_pair(t_grid, chart)
    res = smear12(cau, f, g)
    assert res.tail >= 0.0
    assert res.tail < 1e-6 * max(abs(res.value), 1e-12)
