from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rayprod.exceptions import DomainError
from rayprod.freecombinatorics import (
    Permutation,
    annular_count,
    catalan,
    enumerate_nc_annular,
    enumerate_nc_disc,
    free_cumulants,
    moments_from_cubic_series,
    moments_from_cumulants,
    mp_moments,
    r_transform_series,
    verify_second_order_moments,
    verify_second_order_series,
)
from rayprod.geometry import AspectRatios, ChannelGeometry
from rayprod.montecarlo import RandomStream, channel_batch
from rayprod.spectra import laurent_coefficients, mp_cauchy

fractions = st.fractions(min_value=Fraction(1, 8), max_value=Fraction(8), max_denominator=12)


def narayana_polynomial(n, zeta):
    return sum(Fraction(comb(n, k) * comb(n, k - 1), n) * zeta**k for k in range(1, n + 1))


def test_permutation_basics():
    p = Permutation.from_cycles(5, [(1, 3, 2), (4, 5)])
    assert p.mapping == (3, 1, 2, 5, 4)
    assert p.orbit_count() == 2
    assert p.compose(p.inverse()) == Permutation(range(1, 6))
    with pytest.raises(DomainError):
        Permutation((1, 1, 2))


@pytest.mark.parametrize("n, expected", [(1, 1), (2, 2), (3, 5), (4, 14), (5, 42), (6, 132), (7, 429)])
def test_disc_count_is_catalan(n, expected):
    assert len(enumerate_nc_disc(n)) == expected == catalan(n)


def test_disc_enumeration_sorted_and_noncrossing():
    perms = enumerate_nc_disc(4)
    assert perms == sorted(perms)
    # (1 3)(2 4) crosses
    assert Permutation.from_cycles(4, [(1, 3), (2, 4)]) not in perms
    assert Permutation.from_cycles(4, [(1, 4), (2, 3)]) in perms


@pytest.mark.parametrize("m, n", [(1, 1), (1, 2), (2, 2), (1, 3), (2, 3), (3, 3), (1, 5), (2, 4), (3, 4)])
def test_annular_count_formula(m, n):
    assert len(enumerate_nc_annular(m, n)) == annular_count(m, n)


def test_annular_small_counts():
    assert annular_count(1, 1) == 1
    assert annular_count(1, 2) == 4
    assert annular_count(2, 2) == 18


def test_enumeration_order_cap():
    with pytest.raises(DomainError):
        enumerate_nc_disc(9)
    with pytest.raises(DomainError):
        enumerate_nc_annular(4, 5)


def test_cumulant_hand_counts():
    zeta = Fraction(3, 7)
    cum = free_cumulants(Fraction(2), zeta, 3, 3)
    assert cum.first_order[1] == 2 * zeta
    assert cum.first_order[2] == 2 * (zeta + zeta**2)
    assert cum.second_order[(1, 1)] == zeta
    # (1 3), (2 3) have two orbits; (1 2 3), (1 3 2) one
    assert cum.second_order[(2, 1)] == 2 * zeta + 2 * zeta**2
    assert cum.second_order[(1, 2)] == cum.second_order[(2, 1)]


@given(fractions, fractions)
def test_first_order_cumulants_are_scaled_narayana(rho, zeta):
    cum = free_cumulants(rho, zeta, 6)
    for n in range(1, 7):
        assert cum.first_order[n] == rho * narayana_polynomial(n, zeta)


@given(fractions)
def test_mp_moments_are_narayana(zeta):
    beta = mp_moments(zeta, 7)
    assert beta[0] == 1
    assert all(beta[n] == narayana_polynomial(n, zeta) for n in range(1, 8))


def test_mp_moments_match_laurent_coefficients():
    zeta = 0.7
    coeffs = laurent_coefficients(np.vectorize(lambda z: mp_cauchy(z, zeta)), 6, radius=8.0)
    assert np.allclose(coeffs, [float(b) for b in mp_moments(zeta, 6)], rtol=1e-10, atol=1e-12)


@given(fractions, fractions)
def test_moments_two_routes_exact(rho, zeta):
    nc = moments_from_cumulants(free_cumulants(rho, zeta, 6)).first_order
    series = moments_from_cubic_series(AspectRatios(rho, zeta), 6).first_order
    assert all(nc[n] == series[n] for n in range(7))


def test_square_case_first_moments():
    # rho = zeta = 1: E tr Q = 1, E tr Q^2 = 3 (Fuss-Catalan numbers 1, 3, 12, 55)
    mom = moments_from_cubic_series(AspectRatios(1, 1), 4).first_order
    assert [mom[n] for n in range(1, 5)] == [1, 3, 12, 55]


@given(fractions)
def test_r_series_equals_annular_cumulants(zeta):
    assert r_transform_series(zeta, 7) == free_cumulants(1, zeta, 1, 7).second_order


def test_second_order_cumulants_independent_of_rho():
    a = free_cumulants(Fraction(1, 3), Fraction(5, 2), 1, 6).second_order
    b = free_cumulants(Fraction(7), Fraction(5, 2), 1, 6).second_order
    assert a == b


def test_second_order_moment_closed_form():
    # alpha_{1,1} = rho zeta + rho zeta^2 + zeta, by the two second-order sums at m = n = 1
    for rho, zeta in [(Fraction(1), Fraction(1)), (Fraction(2), Fraction(1, 2)), (Fraction(1, 3), Fraction(5, 2))]:
        mom = moments_from_cumulants(free_cumulants(rho, zeta, 2, 2))
        assert mom.second_order[(1, 1)] == rho * zeta + rho * zeta**2 + zeta


def test_float_mode_tracks_exact_mode():
    exact = moments_from_cumulants(free_cumulants(Fraction(2), Fraction(1, 2), 6, 4))
    approx = moments_from_cumulants(free_cumulants(2.0, 0.5, 6, 4))
    for key, value in exact.second_order.items():
        assert approx.second_order[key] == pytest.approx(float(value), rel=1e-12)
    for key, value in exact.first_order.items():
        assert approx.first_order[key] == pytest.approx(float(value), rel=1e-12)


@pytest.mark.parametrize("rho, zeta", [(1.0, 1.0), (2.0, 0.5), (1 / 3, 2.5), (0.5, 4.0)])
def test_analytic_r_transform_coefficients(rho, zeta):
    report = verify_second_order_series(AspectRatios(rho, zeta), 7)
    assert report.max_rel_deviation <= 1e-9
    assert set(report.numeric) == set(report.reference)


@pytest.mark.parametrize("rho, zeta", [(1.0, 1.0), (2.0, 0.5), (1 / 3, 2.5), (0.5, 4.0)])
def test_second_order_cauchy_coefficients(rho, zeta):
    report = verify_second_order_moments(AspectRatios(rho, zeta), 6)
    assert report.max_rel_deviation <= 1e-9


def test_verify_series_order_cap():
    with pytest.raises(DomainError):
        verify_second_order_series(AspectRatios(1.0, 1.0), 8)


@pytest.mark.parametrize("dims", [(10, 10, 10), (8, 16, 8), (12, 6, 24)])
def test_second_order_moments_match_trace_covariances(dims):
    """Cov(Tr Q^m, Tr Q^n) of finite channels approaches alpha_{m,n}."""
    geo = ChannelGeometry(*dims)
    stream = RandomStream(11)
    t1, t2 = [], []
    for start in range(0, 60_000, 10_000):
        h = channel_batch(geo, stream, start, 10_000)
        q = h @ np.conj(np.swapaxes(h, 1, 2))
        t1.append(np.einsum("kii->k", q).real)
        t2.append(np.einsum("kij,kji->k", q, q).real)
    cov = np.cov(np.vstack([np.concatenate(t1), np.concatenate(t2)]))
    ratios = geo.ratios()
    mom = moments_from_cumulants(free_cumulants(ratios.rho, ratios.zeta, 3, 3)).second_order
    # sampling error about 1% at this size, finite-size bias O(1/R^2)
    assert cov[0, 0] == pytest.approx(float(mom[(1, 1)]), rel=0.04)
    assert cov[0, 1] == pytest.approx(float(mom[(1, 2)]), rel=0.06)
