"""Cross-oracle acceptance checks shared by ``rayprod validate`` and the test suite.

Each ``check_*`` function runs one criterion and returns a
:class:`CheckResult`; nothing is relaxed here, a failing comparison is
reported as a failure.
"""

import io
import math
import time
from contextlib import redirect_stdout
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import special

from .asymptotics import (
    capacity_stats,
    capacity_variance,
    variance_cubic_roots,
    variance_numeric_contour,
)
from .freecombinatorics import (
    free_cumulants,
    moments_from_cubic_series,
    moments_from_cumulants,
    r_transform_series,
    verify_second_order_series,
)
from .geometry import AspectRatios, ChannelGeometry
from .montecarlo import normality_diagnostics, run_rayleigh_simulation, run_simulation
from .outage import finite_snr_dmt, outage_capacity, outage_probability

__all__ = ["CheckResult", "CHECKS", "run_checks", "mc_dmt_slope"]


@dataclass(frozen=True)
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self):
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.number:2d} {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _timed(number, name, budget=None):
    def wrap(fn):
        def run():
            t0 = time.perf_counter()
            ok, detail = fn()
            elapsed = time.perf_counter() - t0
            if budget is not None and elapsed > budget:
                ok = False
                detail += f"; runtime {elapsed:.1f}s exceeds {budget}s"
            return CheckResult(number, name, bool(ok), detail, elapsed)

        run.number = number
        run.title = name
        return run

    return wrap


RATIONAL_CASES = [(Fraction(1), Fraction(1)), (Fraction(2), Fraction(1, 2)), (Fraction(1, 3), Fraction(5, 2))]


@_timed(1, "combinatorial exactness", budget=10.0)
def check_combinatorics():
    failures = []
    worst_float = 0.0
    for rho, zeta in RATIONAL_CASES:
        cum = free_cumulants(rho, zeta, 7, 7)
        nc = moments_from_cumulants(cum).first_order
        series = moments_from_cubic_series(AspectRatios(rho, zeta), 6).first_order
        if any(nc[n] != series[n] for n in range(0, 7)):
            failures.append(f"moments rho={rho} zeta={zeta}")
        if r_transform_series(zeta, 7) != cum.second_order:
            failures.append(f"R-series zeta={zeta}")
        ff = moments_from_cubic_series(AspectRatios(float(rho), float(zeta)), 6).first_order
        fn = moments_from_cumulants(free_cumulants(float(rho), float(zeta), 6, 2)).first_order
        worst_float = max(worst_float, max(abs(ff[n] - fn[n]) / max(1.0, abs(fn[n])) for n in range(7)))
        rep = verify_second_order_series(AspectRatios(float(rho), float(zeta)), 7)
        worst_float = max(worst_float, rep.max_abs_deviation)
    if worst_float > 1e-9:
        failures.append(f"float deviation {worst_float:.2e}")
    return not failures, (", ".join(failures) or "exact rational agreement") + f"; float dev {worst_float:.1e}"


@_timed(2, "closed form vs contour variance", budget=30.0)
def check_contour():
    worst = 0.0
    for zeta in (0.5, 1.0, 2.0):
        for gamma in (1.0, 10.0):
            exact = capacity_variance(zeta, gamma)
            numeric = variance_numeric_contour(AspectRatios(1.0 / zeta, zeta), gamma)
            worst = max(worst, abs(numeric - exact) / exact)
    return worst <= 1e-4, f"max rel diff {worst:.2e} (tol 1e-4)"


@_timed(3, "Cardano roots vs generic solver", budget=1.0)
def check_cardano():
    worst = 0.0
    for zeta in np.logspace(-1, 1, 10):
        for gamma in np.logspace(-3, 6, 10):
            roots = variance_cubic_roots(zeta, gamma)  # raises if the multisets differ by > 1e-8
            prod = roots.omega_r * roots.omega_plus * roots.omega_minus
            worst = max(worst, abs(prod + gamma) / gamma)
    return worst <= 1e-8, f"100 grid points, product identity rel err {worst:.1e}"


@_timed(4, "high-SNR root limits", budget=1.0)
def check_high_snr():
    gamma = 1e6
    r2 = variance_cubic_roots(2.0, gamma).omega_r
    e2 = abs(r2 - 1.0 / (1.0 - 2.0)) / abs(1.0 / (1.0 - 2.0))
    r5 = variance_cubic_roots(0.5, gamma).omega_r
    e5 = abs(r5 - (2.0 / 3.0 - math.sqrt(0.5 * gamma))) / abs(r5)
    return e2 <= 1e-2 and e5 <= 1e-2, f"zeta=2 rel err {e2:.1e}, zeta=0.5 rel err {e5:.1e}"


@_timed(5, "Monte Carlo vs asymptotic mean and variance", budget=120.0)
def check_mc_stats(samples=100_000, seed=2024):
    worst_mu = worst_var = 0.0
    for dims in (4, 8):
        geo = ChannelGeometry(dims, dims, dims)
        for db in (0.0, 5.0, 10.0):
            gamma = 10 ** (db / 10)
            stats = capacity_stats(geo, gamma)
            mc = run_simulation(geo, gamma, samples, seed)
            worst_mu = max(worst_mu, abs(mc.mean - stats.mu_total) / stats.mu_total)
            worst_var = max(worst_var, abs(mc.variance - stats.sigma_sq) / stats.sigma_sq)
    return worst_mu <= 0.03 and worst_var <= 0.07, f"mean err {worst_mu:.2%} (tol 3%), variance err {worst_var:.2%} (tol 7%)"


@_timed(6, "large-scatterer Rayleigh limit")
def check_rayleigh_limit(samples=100_000, seed=2025):
    prod = run_simulation(ChannelGeometry(4, 64, 4), 10.0, samples, seed)
    ray = run_rayleigh_simulation(4, 4, 10.0, samples, seed)
    err = abs(prod.variance - ray.variance) / ray.variance
    return err <= 0.05, f"variance rel diff {err:.2%} (tol 5%)"


@_timed(7, "Gaussianity of capacity")
def check_gaussianity(samples=100_000, seed=2026):
    diag = normality_diagnostics(run_simulation(ChannelGeometry(8, 8, 8), 10.0, samples, seed))
    ok = diag["ks_statistic"] <= 0.01 and abs(diag["skewness"]) <= 0.1 and abs(diag["excess_kurtosis"]) <= 0.2
    return ok, "ks {ks_statistic:.4f}, skew {skewness:.3f}, kurt {excess_kurtosis:.3f}".format(**diag)


@_timed(8, "outage round trips and CDF fit")
def check_outage(samples=1_000_000, seed=2027):
    geo = ChannelGeometry(4, 4, 4)
    stats = capacity_stats(geo, 10.0)
    trip = max(abs(outage_probability(outage_capacity(p, stats), stats) - p) for p in (0.001, 0.01, 0.1, 0.5, 0.9))
    x = np.sort(run_simulation(geo, 10.0, samples, seed).samples)
    model = special.ndtr((x - stats.mu_total) / stats.sigma)
    i = np.arange(1, len(x) + 1)
    sup = max(np.max(i / len(x) - model), np.max(model - (i - 1) / len(x)))
    return trip <= 1e-10 and sup <= 0.03, f"round trip err {trip:.1e}, CDF sup distance {sup:.4f} (tol 0.03)"


def mc_dmt_slope(geometry, gamma, m_values, samples, seed, delta_db=1.0):
    """Monte Carlo log-log outage slope at rates ``m mu(gamma')/n`` for ``gamma' = gamma 10^{+-delta/10}``."""
    lo, hi = gamma * 10 ** (-delta_db / 10), gamma * 10 ** (delta_db / 10)
    s_lo = run_simulation(geometry, lo, samples, seed).samples
    s_hi = run_simulation(geometry, hi, samples, seed).samples
    n = geometry.n_min()
    out = []
    for m in m_values:
        p_lo = np.mean(s_lo < m * capacity_stats(geometry, lo).mu_total / n)
        p_hi = np.mean(s_hi < m * capacity_stats(geometry, hi).mu_total / n)
        out.append(-(math.log(p_hi) - math.log(p_lo)) / (math.log(hi) - math.log(lo)))
    return out


@_timed(9, "finite-SNR DMT vs Monte Carlo slope")
def check_dmt(samples=1_000_000, seed=2028):
    geo = ChannelGeometry(2, 2, 2)
    gamma = 10 ** 0.5
    ms = (0.5, 1.0, 1.5)
    mc = mc_dmt_slope(geo, gamma, ms, samples, seed)
    analytic = [finite_snr_dmt(m, geo, gamma).d for m in ms]
    errs = [abs(a - b) / b for a, b in zip(analytic, mc)]
    grid = [finite_snr_dmt(m, geo, gamma).d for m in np.linspace(0, 2, 11)]
    mono = all(b <= a for a, b in zip(grid, grid[1:]))
    end = finite_snr_dmt(2.0, geo, gamma).d == 0.0
    parts = ", ".join(f"m={m}: {a:.3f} vs {b:.3f} ({e:.0%})" for m, a, b, e in zip(ms, analytic, mc, errs))
    return max(errs) <= 0.15 and mono and end, f"{parts}; nonincreasing={mono}, d(2)=0: {end}"


@_timed(10, "simulate determinism across worker counts")
def check_determinism():
    from .cli import main

    outputs = []
    for workers in (1, 4, 16):
        buf = io.StringIO()
        with redirect_stdout(buf):
            code = main(["simulate", "--R", "4", "--S", "4", "--T", "4", "--snr-db", "10",
                         "--samples", "20000", "--seed", "7", "--workers", str(workers)])
        outputs.append((code, buf.getvalue().encode()))
    same = all(o == outputs[0] for o in outputs) and outputs[0][0] == 0
    return same, "byte-identical CSV for workers 1, 4, 16" if same else "outputs differ"


CHECKS = [
    check_combinatorics,
    check_contour,
    check_cardano,
    check_high_snr,
    check_mc_stats,
    check_rayleigh_limit,
    check_gaussianity,
    check_outage,
    check_dmt,
    check_determinism,
]


def run_checks(numbers=None, report=print):
    """Run the selected checks (all by default), reporting one line each."""
    results = []
    for check in CHECKS:
        if numbers and check.number not in numbers:
            continue
        res = check()
        if report:
            report(res.line())
        results.append(res)
    return results
