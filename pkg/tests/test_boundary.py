import math

import numpy as np
import pytest

from adslab import boundary
from adslab.errors import HypothesisViolation


def test_theta_of_mode_neumann():
    sym = boundary.robin(0.0)
    for l in range(6):
        assert boundary.theta_of_mode(sym, 4, l) == 0.0


def test_theta_of_mode_second_order():
    sym = boundary.second_order(1.0, 2.0)
    # lambda_3 = 3*4 = 12 on the 2-sphere
    assert boundary.theta_of_mode(sym, 4, 3) == pytest.approx(25.0)


def test_theta_of_mode_dirichlet_infinite():
    assert boundary.theta_of_mode(boundary.dirichlet(), 4, 5) == math.inf


def test_validate_hypothesis_passes():
    rep = boundary.validate_hypothesis(boundary.robin(-1.5))
    assert rep.ok and rep.order == 0 and rep.local_in_time
    rep2 = boundary.validate_hypothesis(boundary.second_order(0.0, 0.3))
    assert rep2.ok and rep2.order == 2


def test_validate_hypothesis_complex_coefficient():
    with pytest.raises(HypothesisViolation):
        boundary.validate_hypothesis(boundary.robin(1.0 + 2.0j))
    with pytest.raises(HypothesisViolation):
        boundary.validate_hypothesis(boundary.second_order(1.0j, 0.0))


def test_symmetry_check_robin(rng):
    u = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    res = boundary.energy_form_symmetry_check(boundary.robin(2.0), 4, u, u)
    assert res < 1e-14


def test_symmetry_check_second_order(rng):
    u = rng.standard_normal(10) + 1j * rng.standard_normal(10)
    v = rng.standard_normal(10) + 1j * rng.standard_normal(10)
    res = boundary.energy_form_symmetry_check(
        boundary.second_order(1.0, 1.0), 4, u, v)
    assert res < 1e-12


def test_symmetry_check_dirichlet_zero(rng):
    u = rng.standard_normal(5)
    assert boundary.energy_form_symmetry_check(
        boundary.dirichlet(), 4, u, u) == 0.0


def test_theta_nondecreasing_for_nonnegative_b():
    sym = boundary.second_order(-2.0, 0.7)
    th = [boundary.theta_of_mode(sym, 4, l) for l in range(12)]
    assert all(b >= a for a, b in zip(th, th[1:]))


def test_second_order_b0_equals_robin():
    a = -0.8
    s1, s2 = boundary.second_order(a, 0.0), boundary.robin(a)
    for l in range(8):
        assert boundary.theta_of_mode(s1, 4, l) == \
            boundary.theta_of_mode(s2, 4, l)
