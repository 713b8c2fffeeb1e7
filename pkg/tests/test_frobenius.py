import math

import numpy as np
import pytest
from scipy.integrate import quad

from adslab import frobenius as fb
from adslab.errors import ResonantBranch


def test_growing_branch_matches_sine():
    # nu = mu = 1/2: the growing branch with a0 = 1 is sin(w*arcsin x)/w
    w = 2.7
    c = fb.branch_coefficients(1.0, 0.0, 0.0, w * w, 10)
    x = np.array([0.01, 0.05, 0.1, 0.2])
    exact = np.sin(w * np.arcsin(x)) / w
    assert np.allclose(fb.eval_branch(c, 1.0, x), exact, rtol=1e-12)


def test_decaying_branch_matches_cosine():
    w = 1.3
    c = fb.branch_coefficients(0.0, 0.0, 0.0, w * w, 10)
    x = np.array([0.01, 0.05, 0.1, 0.2])
    exact = np.cos(w * np.arcsin(x))
    assert np.allclose(fb.eval_branch(c, 0.0, x), exact, rtol=1e-12)


def test_negative_frequency_branch_matches_sinh():
    kappa = 1.5
    c = fb.branch_coefficients(1.0, 0.0, 0.0, -kappa * kappa, 10)
    x = np.array([0.02, 0.1, 0.2])
    exact = np.sinh(kappa * np.arcsin(x)) / kappa
    assert np.allclose(fb.eval_branch(c, 1.0, x), exact, rtol=1e-12)


def test_branch_derivative():
    w = 2.0
    c = fb.branch_coefficients(1.0, 0.0, 0.0, w * w, 10)
    x = np.array([0.05, 0.15])
    exact = np.cos(w * np.arcsin(x)) / np.sqrt(1 - x * x)
    assert np.allclose(fb.eval_branch_dv(c, 1.0, x), exact, rtol=1e-11)


def test_batch_evaluation_agrees_with_scalar():
    w2 = np.array([1.0, 4.0, -2.25])
    cs = fb.branch_coefficients(0.7, 0.24, 1.1, w2, 8)
    x = np.linspace(0.01, 0.2, 7)
    batch = fb.eval_branch_batch(cs, 0.7, x)
    for i, w in enumerate(w2):
        c = fb.branch_coefficients(0.7, 0.24, 1.1, float(w), 8)
        assert np.allclose(batch[i], fb.eval_branch(c, 0.7, x), rtol=1e-14)


def test_resonant_branch_raises():
    # nu = 1: decaying branch exponent -1/2, indicial factor vanishes at j=1
    with pytest.raises(ResonantBranch):
        fb.branch_coefficients(-0.5, 0.75, 0.0, 1.0, 6)


def test_binom_series():
    u = 0.07
    for alpha in (0.5, -0.5, -1.0):
        c = fb.binom_series(alpha, 12)
        val = sum(ci * u ** i for i, ci in enumerate(c))
        assert val == pytest.approx((1 - u) ** alpha, rel=1e-13)


def test_pair_tail_integral_against_quadrature():
    nu = 0.3
    w2 = 2.0
    s_m, s_p = fb.branch_exponents(nu)
    cm = fb.branch_coefficients(s_m, nu ** 2 - 0.25, 0.75, w2, 8)
    cp = fb.branch_coefficients(s_p, nu ** 2 - 0.25, 0.75, w2, 8)
    terms = fb.boundary_value_terms(0.8, -0.4, cm, cp, nu)
    jac = fb.binom_series(-0.5, 10)
    v0 = 0.05
    got = fb.pair_tail_integral(terms, terms, v0, jac)

    def integrand(x):
        val = (0.8 * fb.eval_branch(cm, s_m, x)
               - 0.4 * fb.eval_branch(cp, s_p, x))
        return val * val / math.sqrt(1 - x * x)

    ref, _ = quad(integrand, 0.0, v0, points=[0.0])
    assert got.real == pytest.approx(ref, rel=1e-9)
