import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rayprod.asymptotics import capacity_variance
from rayprod.exceptions import DegenerateError, DomainError
from rayprod.geometry import AspectRatios, ChannelGeometry
from rayprod.montecarlo import (
    CapacitySampleSet,
    ChannelMatrix,
    RandomStream,
    capacities,
    capacity_sample,
    channel_batch,
    default_workers,
    empirical_esd,
    normality_diagnostics,
    run_rayleigh_simulation,
    run_simulation,
    sample_channel,
    write_samples,
)
from rayprod.spectra import q_cauchy

GEO = ChannelGeometry(4, 4, 4)


def test_channel_energy_and_zero_mean():
    h = channel_batch(GEO, RandomStream(1), 0, 100_000)
    energy = np.einsum("kij,kij->k", h, np.conj(h)).real
    se = energy.std(ddof=1) / math.sqrt(len(energy))
    assert abs(energy.mean() - 4.0) <= 3 * se
    n = len(h)
    for part in (h.real, h.imag):
        se_entry = part.std(axis=0, ddof=1) / math.sqrt(n)
        assert np.all(np.abs(part.mean(axis=0)) <= 3 * se_entry)


def test_entry_components_have_half_variance():
    (z,) = RandomStream(3).gaussians([(50, 50)], 0, 200)
    assert z.real.var() == pytest.approx(0.5, rel=0.02)
    assert z.imag.var() == pytest.approx(0.5, rel=0.02)
    assert abs(np.mean(z.real * z.imag)) < 0.01


def test_stream_is_counter_based():
    stream = RandomStream(9)
    whole = channel_batch(GEO, stream, 0, 10)
    parts = np.concatenate([channel_batch(GEO, stream, s, 1) for s in range(10)])
    assert np.array_equal(whole, parts)
    first = sample_channel(GEO, stream)
    second = sample_channel(GEO, stream)
    assert np.array_equal(first.entries, whole[0])
    assert np.array_equal(second.entries, whole[1])
    assert not np.array_equal(channel_batch(GEO, RandomStream(10), 0, 1)[0], whole[0])


def test_seed_range():
    with pytest.raises(DomainError):
        RandomStream(-1)
    with pytest.raises(DomainError):
        RandomStream(2**64)


def test_channel_matrix_validation():
    with pytest.raises(DomainError):
        ChannelMatrix(np.zeros((3, 4)), GEO)
    with pytest.raises(DomainError):
        ChannelMatrix(np.full((4, 4), np.nan), GEO)


def test_zero_channel_has_zero_capacity():
    assert capacity_sample(ChannelMatrix(np.zeros((4, 4), complex), GEO), 10.0) == 0.0


def test_keyhole_rank_one():
    geo = ChannelGeometry(2, 1, 2)
    h = sample_channel(geo, RandomStream(4)).entries
    lam = np.linalg.eigvalsh(h @ h.conj().T)
    assert lam[0] == pytest.approx(0.0, abs=1e-12)
    expected = math.log1p(10.0 * lam[-1])
    assert capacity_sample(h, 10.0) == pytest.approx(expected, rel=1e-10)
    assert capacity_sample(h, 10.0, method="eigen") == pytest.approx(expected, rel=1e-10)


def test_capacity_monotone_in_snr():
    h = sample_channel(GEO, RandomStream(5))
    vals = [capacity_sample(h, g) for g in (0.1, 1.0, 10.0)]
    assert vals[0] < vals[1] < vals[2]


@settings(max_examples=25)
@given(
    st.integers(1, 6), st.integers(1, 6), st.integers(1, 6),
    st.floats(min_value=-2, max_value=4).map(lambda e: 10.0**e),
)
def test_cholesky_and_eigen_agree(r, s, t, gamma):
    geo = ChannelGeometry(r, s, t)
    h = channel_batch(geo, RandomStream(r * 100 + s * 10 + t), 0, 20)
    a = capacities(h, gamma)
    b = capacities(h, gamma, method="eigen")
    assert np.all(a >= -1e-12)
    assert np.allclose(a, b, rtol=1e-8, atol=1e-12)


def test_capacity_errors():
    h = np.zeros((1, 2, 2))
    with pytest.raises(DomainError):
        capacities(h, 0.0)
    with pytest.raises(DomainError):
        capacities(h, 1.0, method="qr")
    with pytest.raises(DomainError):
        capacities(np.full((1, 2, 2), np.nan), 1.0)


def test_summary_statistics_recompute():
    res = run_simulation(GEO, 10.0, 5000, 21)
    x = res.samples
    assert res.mean == pytest.approx(x.mean(), rel=1e-12)
    assert res.variance == pytest.approx(x.var(ddof=1), rel=1e-12)
    d = x - x.mean()
    m2 = np.mean(d**2)
    assert res.skewness == pytest.approx(np.mean(d**3) / m2**1.5, rel=1e-9, abs=1e-12)
    assert res.excess_kurtosis == pytest.approx(np.mean(d**4) / m2**2 - 3, rel=1e-9, abs=1e-12)
    assert np.all(x >= 0) and res.variance >= 0


def test_simulation_independent_of_workers():
    a = run_simulation(GEO, 3.0, 9000, 17, workers=1)
    b = run_simulation(GEO, 3.0, 9000, 17, workers=7)
    assert np.array_equal(a.samples, b.samples)
    assert a.mean == b.mean and a.variance == b.variance


def test_simulation_prefix_stable():
    a = run_simulation(GEO, 3.0, 5000, 17)
    b = run_simulation(GEO, 3.0, 3000, 17)
    assert np.array_equal(a.samples[:3000], b.samples)


def test_simulation_needs_two_samples():
    with pytest.raises(DomainError):
        run_simulation(GEO, 1.0, 1, 0)
    with pytest.raises(DomainError):
        CapacitySampleSet.from_samples([1.0], GEO, 1.0, 0)


def test_variance_matches_closed_form_4x4():
    res = run_simulation(GEO, 10.0, 1_000_000, 31)
    assert res.variance == pytest.approx(capacity_variance(1.0, 10.0), rel=0.05)


def test_closed_form_fits_better_at_8x8():
    errs = []
    for n in (4, 8):
        res = run_simulation(ChannelGeometry(n, n, n), 10.0, 200_000, 32)
        errs.append(abs(res.variance - capacity_variance(1.0, 10.0)) / capacity_variance(1.0, 10.0))
    assert errs[1] < errs[0]


def test_many_scatterers_approach_rayleigh():
    prod = run_simulation(ChannelGeometry(4, 32, 4), 10.0, 200_000, 33)
    ray = run_rayleigh_simulation(4, 4, 10.0, 200_000, 33)
    assert prod.variance == pytest.approx(ray.variance, rel=0.05)
    assert prod.mean == pytest.approx(ray.mean, rel=0.02)


def test_esd_zero_batch():
    esd = empirical_esd(np.zeros((3, 4, 4)), bins=10)
    k = np.searchsorted(esd.bin_edges, 0.0, side="right") - 1
    assert esd.masses[k] == 1.0
    assert esd.masses.sum() == 1.0


def test_esd_trace_and_cauchy():
    geo = ChannelGeometry(64, 64, 64)
    h = channel_batch(geo, RandomStream(40), 0, 100)
    esd = empirical_esd(h, bins=200)
    assert abs(esd.masses.sum() - 1.0) <= 1e-12
    trace_mean = np.einsum("kij,kij->", h, np.conj(h)).real / (64 * 100)
    assert trace_mean == pytest.approx(1.0, rel=0.02)
    assert esd.mean() == pytest.approx(1.0, rel=0.02)
    ref = q_cauchy(10.0, AspectRatios(1, 1))
    assert esd.cauchy(10.0).real == pytest.approx(ref.real, rel=0.02)


def test_esd_accepts_channel_list():
    stream = RandomStream(2)
    hs = [sample_channel(GEO, stream) for _ in range(3)]
    esd = empirical_esd(hs, bins=5)
    assert len(esd.masses) == 5


def test_normality_calibration():
    rng = np.random.default_rng(123)
    for n in (1000, 10_000, 100_000):
        diag = normality_diagnostics(rng.normal(size=n))
        assert diag["ks_statistic"] <= 1.5 / math.sqrt(n)


def test_normality_errors():
    with pytest.raises(DomainError):
        normality_diagnostics(np.ones(10))
    with pytest.raises(DegenerateError):
        normality_diagnostics(np.ones(2000))


def test_capacity_is_gaussian_at_8x8_but_not_keyhole():
    big = normality_diagnostics(run_simulation(ChannelGeometry(8, 8, 8), 10.0, 100_000, 34))
    assert big["ks_statistic"] <= 0.01 and abs(big["skewness"]) <= 0.1
    key = normality_diagnostics(run_simulation(ChannelGeometry(2, 1, 2), 10.0, 100_000, 34))
    assert key["ks_statistic"] > 2 * big["ks_statistic"]


def test_write_samples(tmp_path):
    res = run_simulation(GEO, 2.0, 10, 3)
    path = tmp_path / "dump.txt"
    write_samples(path, res)
    lines = path.read_text().splitlines()
    header = [l for l in lines if l.startswith("#")]
    assert any("R=4 S=4 T=4" in l for l in header)
    assert any("seed=3" in l for l in header)
    values = np.array([float(l) for l in lines if not l.startswith("#")])
    assert np.array_equal(values, res.samples)


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("RAYPROD_THREADS", "1")
    assert default_workers() == 1
    monkeypatch.setenv("RAYPROD_THREADS", "many")
    with pytest.raises(DomainError):
        default_workers()
