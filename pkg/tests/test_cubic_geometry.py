from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rayprod.cubic import cubic_residual, solve_cubic
from rayprod.exceptions import DomainError
from rayprod.geometry import AspectRatios, ChannelGeometry

coef = st.complex_numbers(min_magnitude=0.0, max_magnitude=50.0, allow_nan=False, allow_infinity=False)


@given(coef, coef, coef, st.complex_numbers(min_magnitude=0.1, max_magnitude=10.0))
def test_solve_cubic_matches_companion_roots(b, c, d, a):
    roots = solve_cubic(a, b, c, d)
    ref = np.roots([a, b, c, d])
    scale = 1.0 + np.max(np.abs(ref))
    for r in roots:
        assert np.min(np.abs(ref - r)) <= 1e-6 * scale
        assert abs(cubic_residual((a, b, c, d), r)) <= 1e-8 * abs(a) * scale**3


def test_solve_cubic_known_roots():
    # (t - 1)(t - 2)(t + 3) = t^3 - 7t + 6
    roots = np.sort_complex(solve_cubic(1, 0, -7, 6))
    assert np.allclose(roots, [-3, 1, 2], atol=1e-13)


def test_solve_cubic_broadcasts():
    out = solve_cubic(1.0, 0.0, 0.0, -np.array([1.0, 8.0, 27.0]))
    assert out.shape == (3, 3)
    assert np.allclose(np.max(out.real, axis=-1), [1, 2, 3])


def test_solve_cubic_rejects_zero_leading():
    with pytest.raises(ZeroDivisionError):
        solve_cubic(0, 1, 1, 1)


def test_geometry_ratios_and_nmin():
    g = ChannelGeometry(4, 8, 2)
    assert g.n_min() == 2
    r = g.ratios()
    assert r.rho == 2 and r.zeta == Fraction(1, 4)
    assert not g.is_square()
    assert ChannelGeometry(3, 5, 3).is_square()


@pytest.mark.parametrize("bad", [(0, 1, 1), (1, -2, 1), (1, 1, 2.5)])
def test_geometry_validation(bad):
    with pytest.raises(DomainError):
        ChannelGeometry(*bad)


def test_aspect_ratios_validation_and_square():
    with pytest.raises(DomainError):
        AspectRatios(0, 1)
    with pytest.raises(DomainError):
        AspectRatios(1, float("inf"))
    assert AspectRatios.square(Fraction(1, 3)).rho == 3
    assert AspectRatios(2.0, 0.5).square_case()
    assert not AspectRatios(2.0, 0.75).square_case()
