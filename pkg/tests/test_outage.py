import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rayprod.asymptotics import CapacityStats, capacity_stats
from rayprod.exceptions import ConstraintError, DegenerateError, DomainError
from rayprod.geometry import ChannelGeometry
from rayprod.montecarlo import run_simulation
from rayprod.outage import (
    deficit_ratio,
    erf_inverse,
    finite_snr_dmt,
    multiplexing_rate,
    outage_capacity,
    outage_probability,
)
from rayprod.validation import mc_dmt_slope

# root of erf(x) = 1/2 by 30-digit bisection
ERF_INV_HALF = 0.476936276204469873381418353643

GEO = ChannelGeometry(4, 4, 4)
STATS = capacity_stats(GEO, 10.0)
probs = st.floats(min_value=1e-6, max_value=1 - 1e-6)


def test_median_and_one_percent_point():
    assert outage_probability(STATS.mu_total, STATS) == 0.5
    rate = STATS.mu_total - 2.326 * STATS.sigma
    assert outage_probability(rate, STATS) == pytest.approx(0.01, abs=1e-4)


def test_outage_capacity_median_is_mean():
    assert outage_capacity(0.5, STATS) == STATS.mu_total


@pytest.mark.parametrize("p", [0.001, 0.01, 0.1, 0.5, 0.9])
def test_round_trip(p):
    assert outage_probability(outage_capacity(p, STATS), STATS) == pytest.approx(p, abs=1e-10)


@given(probs)
def test_round_trip_property(p):
    stats = capacity_stats(ChannelGeometry(3, 5, 3), 4.0)
    rate = outage_capacity(p, stats)
    if rate >= 0:
        assert outage_probability(rate, stats) == pytest.approx(p, abs=1e-10)


@given(probs)
def test_quantile_offset_is_odd(p):
    up = outage_capacity(p, STATS) - STATS.mu_total
    down = outage_capacity(1 - p, STATS) - STATS.mu_total
    assert up + down == pytest.approx(0.0, abs=1e-10)


@given(st.floats(min_value=0, max_value=20), st.floats(min_value=0, max_value=20))
def test_outage_probability_monotone(r1, r2):
    lo, hi = sorted((r1, r2))
    assert outage_probability(lo, STATS) <= outage_probability(hi, STATS)


@given(probs, probs)
def test_outage_capacity_monotone(p1, p2):
    lo, hi = sorted((p1, p2))
    assert outage_capacity(lo, STATS) <= outage_capacity(hi, STATS)


def test_outage_errors():
    with pytest.raises(DomainError):
        outage_probability(-1.0, STATS)
    for p in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(DomainError):
            outage_capacity(p, STATS)
    flat = CapacityStats(mu_total=1.0, sigma_sq=0.0, geometry=GEO, gamma=1.0)
    with pytest.raises(DegenerateError):
        outage_probability(0.5, flat)


def test_multiplexing_rate():
    assert multiplexing_rate(0, GEO, STATS) == 0
    assert multiplexing_rate(4, GEO, STATS) == STATS.mu_total
    assert multiplexing_rate(2, GEO, STATS) == pytest.approx(STATS.mu_total / 2, rel=1e-15)
    with pytest.raises(DomainError):
        multiplexing_rate(4.5, GEO, STATS)


def test_erf_inverse_examples():
    assert erf_inverse(0.0) == 0.0
    assert erf_inverse(math.erf(1.0)) == pytest.approx(1.0, abs=1e-12)
    assert erf_inverse(0.5) == pytest.approx(ERF_INV_HALF, abs=1e-12)
    for y in (-1.0, 1.0, 2.0):
        with pytest.raises(DomainError):
            erf_inverse(y)


@given(st.floats(min_value=-0.999999, max_value=0.999999))
def test_erf_inverse_is_inverse(y):
    assert math.erf(erf_inverse(y)) == pytest.approx(y, abs=1e-12)


def test_dmt_vanishes_at_full_multiplexing():
    geo = ChannelGeometry(2, 2, 2)
    for gamma in (0.5, 3.0, 100.0):
        pt = finite_snr_dmt(2, geo, gamma)
        assert pt.d == 0.0 and pt.k_value == 0.0


def test_dmt_nonincreasing_at_zero_db():
    geo = ChannelGeometry(2, 2, 2)
    d = [finite_snr_dmt(m, geo, 1.0).d for m in np.linspace(0, 2, 11)]
    assert all(v >= 0 for v in d)
    assert all(b <= a for a, b in zip(d, d[1:]))


@given(st.floats(min_value=0, max_value=1.99), st.floats(min_value=-1, max_value=3).map(lambda e: 10.0**e))
def test_dmt_properties(m, gamma):
    geo = ChannelGeometry(2, 2, 2)
    pt = finite_snr_dmt(m, geo, gamma)
    assert pt.d >= 0
    assert pt.k_value > 0
    stats = capacity_stats(geo, gamma)
    assert pt.k_value == pytest.approx((2 - m) / (2 * math.sqrt(2)) * stats.mu_total / stats.sigma, rel=1e-12)


def test_dmt_errors():
    with pytest.raises(DomainError):
        finite_snr_dmt(3.0, ChannelGeometry(2, 2, 2), 1.0)
    with pytest.raises(ConstraintError):
        finite_snr_dmt(1.0, ChannelGeometry(2, 3, 4), 1.0)


@pytest.mark.parametrize("m", [0.5, 1.0, 1.5])
def test_dmt_is_slope_of_gaussian_outage(m):
    """d equals -dlog P/dlog gamma of the Gaussian outage at the rate m mu/n."""
    geo = ChannelGeometry(2, 2, 2)
    gamma, h = 10**0.5, 1e-3

    def log_p(g):
        return math.log(0.5 * math.erfc(deficit_ratio(m, geo, g)))

    slope = -(log_p(gamma * math.exp(h)) - log_p(gamma * math.exp(-h))) / (2 * h)
    assert finite_snr_dmt(m, geo, gamma).d == pytest.approx(slope, rel=1e-6)


def test_half_exponent_variant_differs():
    geo = ChannelGeometry(2, 2, 2)
    full = finite_snr_dmt(1.0, geo, 10**0.5)
    half = finite_snr_dmt(1.0, geo, 10**0.5, half_exponent=True)
    assert half.d == pytest.approx(full.d * math.exp(0.5 * full.k_value**2), rel=1e-12)


def test_dmt_matches_monte_carlo_slope():
    """(2,2,2), 5 dB, m = 1: analytic d within 15% of the MC log-log slope."""
    geo = ChannelGeometry(2, 2, 2)
    gamma = 10**0.5
    (mc,) = mc_dmt_slope(geo, gamma, [1.0], 1_000_000, 2028)
    assert finite_snr_dmt(1.0, geo, gamma).d == pytest.approx(mc, rel=0.15)


def test_one_percent_outage_capacity_vs_monte_carlo():
    geo = ChannelGeometry(4, 8, 4)
    gamma = 10**1.5
    mc = run_simulation(geo, gamma, 1_000_000, 99)
    empirical = float(np.quantile(mc.samples, 0.01))
    assert outage_capacity(0.01, capacity_stats(geo, gamma)) == pytest.approx(empirical, rel=0.05)


def test_cdf_matches_monte_carlo():
    x = np.sort(run_simulation(GEO, 10.0, 1_000_000, 5).samples)
    model = np.array([outage_probability(v, STATS) for v in x[::997]])
    emp = (np.arange(len(x))[::997] + 0.5) / len(x)
    assert np.max(np.abs(model - emp)) <= 0.03
