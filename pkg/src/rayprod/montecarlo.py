"""Monte Carlo simulation of Rayleigh product channels.

Random numbers come from a Philox counter-based generator keyed by
``(seed, tag)``. Sample ``i`` always consumes the same block of counter
values, so any split of the index range across workers reproduces the
same channels bit for bit.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .exceptions import DegenerateError, DomainError
from .geometry import ChannelGeometry

__all__ = [
    "RandomStream",
    "ChannelMatrix",
    "CapacitySampleSet",
    "EsdHistogram",
    "sample_channel",
    "channel_batch",
    "capacity_sample",
    "capacities",
    "run_simulation",
    "run_rayleigh_simulation",
    "empirical_esd",
    "normality_diagnostics",
    "write_samples",
    "default_workers",
]

PRODUCT_TAG = 0
RAYLEIGH_TAG = 1
BLOCK = 2048  # samples per work unit; fixed so results ignore the worker count


def default_workers():
    """Worker count: ``os.cpu_count()`` capped by ``RAYPROD_THREADS``."""
    n = os.cpu_count() or 1
    cap = os.environ.get("RAYPROD_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise DomainError(f"RAYPROD_THREADS must be an integer, got {cap!r}") from None
    return n


def _words_per_sample(shapes):
    # two uint64 words per complex entry, padded to whole Philox blocks of four
    words = 2 * sum(a * b for a, b in shapes)
    return -(-words // 4) * 4


def _uniform(words):
    # 53-bit midpoint grid, never 0 or 1
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


class RandomStream:
    """Counter-based stream of standard complex Gaussian matrices.

    Parameters
    ----------
    seed : int
        64-bit unsigned seed.
    tag : int
        Distinguishes independent families of draws under one seed.
    """

    def __init__(self, seed, tag=PRODUCT_TAG):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.tag = int(tag)
        self.position = 0

    def gaussians(self, shapes, start, count):
        """Matrices with CN(0, 1) entries for samples ``start .. start + count - 1``.

        Returns one array of shape ``(count, a, b)`` per entry of ``shapes``.
        """
        per = _words_per_sample(shapes)
        gen = np.random.Philox(key=self.seed + (self.tag << 64))
        gen.advance(start * per // 4)
        raw = gen.random_raw(count * per).reshape(count, per)
        out = []
        offset = 0
        for a, b in shapes:
            k = a * b
            u = _uniform(raw[:, offset : offset + 2 * k])
            offset += 2 * k
            radius = np.sqrt(-np.log(u[:, :k]))
            z = radius * np.exp(2j * np.pi * u[:, k:])
            out.append(z.reshape(count, a, b))
        return out

    def next_gaussians(self, shapes, count=1):
        out = self.gaussians(shapes, self.position, count)
        self.position += count
        return out


@dataclass(frozen=True)
class ChannelMatrix:
    entries: np.ndarray
    geometry: ChannelGeometry

    def __post_init__(self):
        g = self.geometry
        if self.entries.shape != (g.R, g.T):
            raise DomainError(f"channel shape {self.entries.shape} does not match {(g.R, g.T)}")
        if not np.all(np.isfinite(self.entries)):
            raise DomainError("channel entries must be finite")


def channel_batch(geometry, stream, start, count):
    """Channels ``H = Psi^H Theta / sqrt(R S)`` for a contiguous index range, shape ``(count, R, T)``."""
    R, S, T = geometry.R, geometry.S, geometry.T
    theta, psi = stream.gaussians([(S, T), (S, R)], start, count)
    return np.matmul(np.conj(np.swapaxes(psi, 1, 2)), theta) / math.sqrt(R * S)


def sample_channel(geometry, stream):
    """Draw the next channel of ``stream``."""
    h = channel_batch(geometry, stream, stream.position, 1)[0]
    stream.position += 1
    return ChannelMatrix(h, geometry)


def _gram(h):
    # the smaller of H H^H and H^H H; both give the same determinant
    hh = np.conj(np.swapaxes(h, -1, -2))
    return np.matmul(h, hh) if h.shape[-2] <= h.shape[-1] else np.matmul(hh, h)


def capacities(h, gamma, method="cholesky"):
    """``log det(I + gamma H H^H)`` in nats for a stack of channels.

    ``method`` is ``"cholesky"`` (twice the log-diagonal of the factor) or
    ``"eigen"`` (sum of ``log1p(gamma * lambda)`` over Hermitian eigenvalues).
    """
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma!r}")
    h = np.asarray(h)
    if not np.all(np.isfinite(h)):
        raise DomainError("channel has non-finite entries")
    gram = _gram(h)
    if method == "eigen":
        lam = np.clip(np.linalg.eigvalsh(gram), 0.0, None)
        return np.log1p(gamma * lam).sum(axis=-1)
    if method != "cholesky":
        raise DomainError(f"unknown capacity method {method!r}")
    k = gram.shape[-1]
    a = np.eye(k) + gamma * gram
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as err:
        raise DomainError("factorization of I + gamma H H^H failed") from err
    diag = np.diagonal(chol, axis1=-2, axis2=-1).real
    return 2.0 * np.log(diag).sum(axis=-1)


def capacity_sample(H, gamma, method="cholesky"):
    """Capacity of a single :class:`ChannelMatrix` in nats."""
    entries = H.entries if isinstance(H, ChannelMatrix) else np.asarray(H)
    return max(float(capacities(entries[None], gamma, method)[0]), 0.0)


def _moments(samples):
    n = len(samples)
    mean = math.fsum(samples) / n
    dev = samples - mean
    m2 = math.fsum(dev * dev) / n
    m3 = math.fsum(dev**3) / n
    m4 = math.fsum(dev**4) / n
    variance = m2 * n / (n - 1)
    if m2 > 0:
        skew = m3 / m2**1.5
        kurt = m4 / (m2 * m2) - 3.0
    else:
        skew = kurt = 0.0
    return mean, variance, skew, kurt


@dataclass(frozen=True)
class CapacitySampleSet:
    """Capacity draws (nats) with their summary statistics.

    ``variance`` is the unbiased sample variance; ``skewness`` and
    ``excess_kurtosis`` use the biased central moments.
    """

    samples: np.ndarray = field(repr=False)
    geometry: object
    gamma: float
    seed: int
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float

    @classmethod
    def from_samples(cls, samples, geometry, gamma, seed):
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != 1 or len(samples) < 2:
            raise DomainError("need at least two samples")
        mean, var, skew, kurt = _moments(samples)
        return cls(samples, geometry, float(gamma), int(seed), mean, var, skew, kurt)


def _blocks(num_samples):
    return [(s, min(BLOCK, num_samples - s)) for s in range(0, num_samples, BLOCK)]


def _simulate(block_fn, num_samples, workers):
    blocks = _blocks(num_samples)
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(blocks) == 1:
        parts = [block_fn(s, c) for s, c in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: block_fn(*b), blocks))
    return np.concatenate(parts)


def run_simulation(geometry, gamma, num_samples, seed, workers=None, method="cholesky"):
    """Capacities of ``num_samples`` independent product channels.

    Sample ``i`` depends only on ``(seed, i)``, so the output is identical for
    every worker count. The same seed at different ``gamma`` reuses the same
    channels (common random numbers).

    Parameters
    ----------
    geometry : ChannelGeometry
    gamma : float
        Linear SNR.
    num_samples : int
        At least 2.
    seed : int
    workers : int, optional
        Thread count; defaults to :func:`default_workers`.

    Returns
    -------
    CapacitySampleSet
    """
    if num_samples < 2:
        raise DomainError("num_samples must be at least 2")
    stream = RandomStream(seed, PRODUCT_TAG)

    def block(start, count):
        return capacities(channel_batch(geometry, stream, start, count), gamma, method)

    samples = np.maximum(_simulate(block, num_samples, workers), 0.0)
    return CapacitySampleSet.from_samples(samples, geometry, gamma, seed)


def run_rayleigh_simulation(R, T, gamma, num_samples, seed, workers=None):
    """Capacities of an i.i.d. Rayleigh ``R x T`` channel with entries ``CN(0, 1/R)``.

    This is the large-scatterer limit of the product channel with the same
    energy normalisation.
    """
    if num_samples < 2:
        raise DomainError("num_samples must be at least 2")
    stream = RandomStream(seed, RAYLEIGH_TAG)

    def block(start, count):
        (w,) = stream.gaussians([(R, T)], start, count)
        return capacities(w / math.sqrt(R), gamma)

    samples = np.maximum(_simulate(block, num_samples, workers), 0.0)
    return CapacitySampleSet.from_samples(samples, (R, T), gamma, seed)


@dataclass(frozen=True)
class EsdHistogram:
    bin_edges: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.bin_edges) <= 0):
            raise DomainError("bin edges must be increasing")
        if np.any(self.masses < 0) or abs(self.masses.sum() - 1.0) > 1e-12:
            raise DomainError("masses must be non-negative and sum to one")

    def centres(self):
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    def mean(self):
        return float(np.dot(self.masses, self.centres()))

    def cauchy(self, z):
        """Midpoint-rule Cauchy transform ``sum mass / (z - centre)``."""
        return complex(np.sum(self.masses / (z - self.centres())))


def empirical_esd(H_batch, bins=50):
    """Pooled eigenvalue histogram of ``Q = H H^H`` over a batch of channels.

    Parameters
    ----------
    H_batch : array of shape (count, R, T) or sequence of ChannelMatrix
    bins : int or array of edges
    """
    if isinstance(H_batch, (list, tuple)) and H_batch and isinstance(H_batch[0], ChannelMatrix):
        H_batch = np.stack([h.entries for h in H_batch])
    h = np.asarray(H_batch)
    if h.ndim == 2:
        h = h[None]
    if h.shape[0] < 1:
        raise DomainError("need at least one channel draw")
    q = np.matmul(h, np.conj(np.swapaxes(h, 1, 2)))
    lam = np.clip(np.linalg.eigvalsh(q), 0.0, None).ravel()
    counts, edges = np.histogram(lam, bins=bins)
    return EsdHistogram(edges, counts / counts.sum())


def normality_diagnostics(sample_set):
    """Kolmogorov-Smirnov distance to N(0, 1) after standardising, plus skewness and excess kurtosis.

    Mean and standard deviation are estimated from the same samples, so the
    statistic is of Lilliefors type; no p-value is reported.
    """
    x = np.asarray(getattr(sample_set, "samples", sample_set), dtype=float)
    n = len(x)
    if n < 1000:
        raise DomainError("normality diagnostics need at least 1000 samples")
    mean, var, skew, kurt = _moments(x)
    if not var > 0:
        raise DegenerateError("samples have zero spread")
    z = np.sort((x - mean) / math.sqrt(var))
    cdf = special.ndtr(z)
    i = np.arange(1, n + 1)
    ks = max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n))
    return {"ks_statistic": float(ks), "skewness": skew, "excess_kurtosis": kurt}


def write_samples(path, sample_set):
    """Dump one capacity per line; ``#`` header lines record geometry, gamma and seed."""
    g = sample_set.geometry
    geo = f"R={g.R} S={g.S} T={g.T}" if isinstance(g, ChannelGeometry) else f"shape={g}"
    with open(path, "w") as fh:
        fh.write(f"# {geo}\n# gamma={float(sample_set.gamma)!r}\n# seed={sample_set.seed}\n")
        fh.write(f"# samples={len(sample_set.samples)}\n")
        for v in sample_set.samples:
            fh.write(f"{float(v)!r}\n")
