"""Gaussian outage approximation and the finite-SNR diversity-multiplexing tradeoff."""

import math
from dataclasses import dataclass

from scipy import special

from .asymptotics import CapacityStats, capacity_stats
from .exceptions import DegenerateError, DomainError

__all__ = [
    "DmtPoint",
    "outage_probability",
    "outage_capacity",
    "multiplexing_rate",
    "deficit_ratio",
    "finite_snr_dmt",
    "erf_inverse",
]

LOG_STEP = 1e-4


@dataclass(frozen=True)
class DmtPoint:
    """Diversity gain ``d`` at multiplexing gain ``m`` and SNR ``gamma``.

    ``k_value`` is the normalised rate deficit ``(n - m)/(sqrt(2) n) * mu/sigma``.
    """

    m: float
    gamma: float
    k_value: float
    d: float


def _sigma(stats):
    if not stats.sigma_sq > 0:
        raise DegenerateError("the Gaussian approximation needs a positive variance")
    return math.sqrt(stats.sigma_sq)


def outage_probability(rate, stats):
    """Gaussian approximation of ``P(I < rate)``.

    Parameters
    ----------
    rate : float
        Target rate in nats, ``>= 0``.
    stats : CapacityStats

    Returns
    -------
    float
        ``(1 + erf((rate - mu)/(sigma sqrt 2)))/2``, evaluated through the
        normal CDF so the lower tail keeps its relative accuracy.
    """
    rate = float(rate)
    if not rate >= 0:
        raise DomainError(f"rate must be non-negative, got {rate!r}")
    sigma = _sigma(stats)
    return float(special.ndtr((rate - stats.mu_total) / sigma))


def outage_capacity(p_out, stats):
    """Rate whose outage probability is ``p_out``: ``mu + sigma sqrt(2) erfinv(2 p - 1)``."""
    p_out = float(p_out)
    if not 0.0 < p_out < 1.0:
        raise DomainError(f"outage probability must lie in (0, 1), got {p_out!r}")
    sigma = _sigma(stats)
    # ndtri(p) = sqrt(2) erfinv(2p - 1) without the cancellation in 2p - 1
    return float(stats.mu_total + sigma * special.ndtri(p_out))


def multiplexing_rate(m, geometry, stats):
    """Rate ``m * mu / n`` for multiplexing gain ``m`` with ``n = min(R, S, T)``."""
    n = geometry.n_min()
    if not 0.0 <= m <= n:
        raise DomainError(f"multiplexing gain must lie in [0, {n}], got {m!r}")
    return m * stats.mu_total / n


def deficit_ratio(m, geometry, gamma):
    """``K(m, gamma) = (n - m)/(sqrt(2) n) * mu/sigma`` from the asymptotic statistics."""
    n = geometry.n_min()
    stats = capacity_stats(geometry, gamma)
    return (n - m) / (math.sqrt(2.0) * n) * stats.mu_total / _sigma(stats)


def _dk_dlog_gamma(m, geometry, gamma, step):
    def central(h):
        return (deficit_ratio(m, geometry, gamma * math.exp(h)) - deficit_ratio(m, geometry, gamma * math.exp(-h))) / (2.0 * h)

    return (4.0 * central(step / 2.0) - central(step)) / 3.0


def finite_snr_dmt(m, geometry, gamma, half_exponent=False):
    """Finite-SNR diversity gain ``d = -d log P_out / d log gamma`` at rate ``m mu/n``.

    Under the Gaussian approximation ``P_out = erfc(K)/2``, so
    ``d = (2 gamma/sqrt(pi)) exp(-K^2) K'(gamma) / (1 + erf(-K))``.
    ``dK/dlog(gamma)`` comes from a Richardson-refined central difference with
    relative step 1e-4.

    Parameters
    ----------
    m : float
        Multiplexing gain in ``[0, min(R, S, T)]``.
    geometry : ChannelGeometry
        Must satisfy ``R = T``.
    gamma : float
        Linear SNR.
    half_exponent : bool
        Use ``exp(-K^2/2)`` in place of ``exp(-K^2)``. This variant is kept
        for comparison only; it does not match the slope of the Gaussian CDF.

    Returns
    -------
    DmtPoint
    """
    n = geometry.n_min()
    if not 0.0 <= m <= n:
        raise DomainError(f"multiplexing gain must lie in [0, {n}], got {m!r}")
    k = deficit_ratio(m, geometry, gamma)
    if m == n:
        return DmtPoint(m=float(m), gamma=float(gamma), k_value=0.0, d=0.0)
    slope = _dk_dlog_gamma(m, geometry, gamma, LOG_STEP)
    # exp(-K^2)/erfc(K) = 1/erfcx(K) stays finite for large K
    weight = 1.0 / special.erfcx(k)
    if half_exponent:
        weight *= math.exp(0.5 * k * k)
    d = 2.0 / math.sqrt(math.pi) * slope * weight
    return DmtPoint(m=float(m), gamma=float(gamma), k_value=float(k), d=float(d))


def erf_inverse(y):
    """Inverse error function on ``(-1, 1)``.

    Starts from ``scipy.special.erfinv`` and applies up to two Newton steps
    on ``erf``, each kept only if it lowers the residual.
    """
    y = float(y)
    if not -1.0 < y < 1.0:
        raise DomainError(f"erf_inverse needs |y| < 1, got {y!r}")
    x = float(special.erfinv(y))
    for _ in range(2):
        res = math.erf(x) - y
        if res == 0.0:
            break
        cand = x - res / (2.0 / math.sqrt(math.pi) * math.exp(-x * x))
        if abs(math.erf(cand) - y) < abs(res):
            x = cand
        else:
            break
    return x
