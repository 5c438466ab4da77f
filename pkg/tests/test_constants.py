import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fraclap.constants import make_alpha_params
from fraclap.errors import DomainError

# arbitrary-precision evaluation of the closed forms (tests/oracles/compute_fixtures.py)
FROZEN_06 = (0.20637455296190926, 0.17674478557428508, 1.3213063996776497)


def test_half_alpha_identities():
    p = make_alpha_params(0.5)
    assert p.c_alpha == pytest.approx(1 / (2 * math.pi), rel=1e-12)
    assert p.C_alpha == pytest.approx(1 / (2 * math.pi), rel=1e-12)
    assert p.chi_alpha == pytest.approx(math.pi / 2, rel=1e-12)


def test_frozen_values_at_0_6():
    p = make_alpha_params(0.6)
    np.testing.assert_allclose((p.c_alpha, p.C_alpha, p.chi_alpha), FROZEN_06, rtol=1e-12)


def test_chi_tends_to_one():
    assert abs(make_alpha_params(0.999, allow_extreme=True).chi_alpha - 1) < 2e-3


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2, 1.5, 0.97, 0.01, float("nan")])
def test_rejects_out_of_range(alpha):
    with pytest.raises(DomainError, match="admissible"):
        make_alpha_params(alpha)


def test_extreme_override():
    assert make_alpha_params(0.01, allow_extreme=True).alpha == 0.01
    with pytest.raises(DomainError):
        make_alpha_params(1.0, allow_extreme=True)


@given(st.floats(0.05, 0.95))
def test_signs_and_bounds(alpha):
    p = make_alpha_params(alpha)
    assert p.c_alpha > 0 and p.C_alpha > 0 and p.chi_alpha >= 1


@given(st.floats(0.06, 0.94))
def test_continuous(alpha):
    h = 1e-7
    lo, hi = make_alpha_params(alpha - h), make_alpha_params(alpha + h)
    for f in ("c_alpha", "C_alpha", "chi_alpha"):
        a, b = getattr(lo, f), getattr(hi, f)
        assert abs(b - a) <= 1e-4 * abs(a)


def test_deterministic():
    assert make_alpha_params(0.37) == make_alpha_params(0.37)


def test_leading_capacity():
    p = make_alpha_params(0.6)
    assert p.leading_capacity(0.03) == pytest.approx(p.c_alpha * p.chi_alpha * 0.03**-0.8)
