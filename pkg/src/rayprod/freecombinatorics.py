"""Non-crossing permutations and the free cumulants/moments of the product ensemble.

Everything here is exact when ``rho`` and ``zeta`` are given as ``Fraction``
(or ``int``) and falls back to floats otherwise. The numeric helpers at the
bottom expand the analytic transforms from :mod:`rayprod.spectra` into power
series so the combinatorial and analytic sides can be compared.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import permutations
from math import comb

import mpmath
import numpy as np

from .exceptions import DomainError
from .geometry import AspectRatios
from .spectra import second_order_cauchy_array, support_right_edge

__all__ = [
    "Permutation",
    "CumulantTable",
    "MomentTable",
    "SeriesReport",
    "enumerate_nc_disc",
    "enumerate_nc_annular",
    "free_cumulants",
    "moments_from_cumulants",
    "moments_from_cubic_series",
    "mp_moments",
    "r_transform_series",
    "verify_second_order_series",
    "verify_second_order_moments",
    "catalan",
    "annular_count",
]

MAX_ORDER = 8


class Permutation:
    """Bijection of ``{1, ..., n}`` stored as the tuple of images.

    Parameters
    ----------
    mapping : sequence of int
        ``mapping[i - 1]`` is the image of ``i``.
    """

    __slots__ = ("mapping",)

    def __init__(self, mapping):
        mapping = tuple(int(v) for v in mapping)
        if sorted(mapping) != list(range(1, len(mapping) + 1)):
            raise DomainError(f"{mapping} is not a permutation of 1..{len(mapping)}")
        self.mapping = mapping

    @classmethod
    def from_cycles(cls, n, cycles):
        img = list(range(1, n + 1))
        for cyc in cycles:
            for a, b in zip(cyc, cyc[1:] + cyc[:1]):
                img[a - 1] = b
        return cls(img)

    def __len__(self):
        return len(self.mapping)

    def __call__(self, i):
        return self.mapping[i - 1]

    def __eq__(self, other):
        return isinstance(other, Permutation) and self.mapping == other.mapping

    def __hash__(self):
        return hash(self.mapping)

    def __lt__(self, other):
        return self.mapping < other.mapping

    def __repr__(self):
        return f"Permutation({self.orbits()})"

    def inverse(self):
        inv = [0] * len(self.mapping)
        for i, v in enumerate(self.mapping, start=1):
            inv[v - 1] = i
        return Permutation(inv)

    def compose(self, other):
        """``self o other``: apply ``other`` first."""
        return Permutation(self.mapping[v - 1] for v in other.mapping)

    def orbits(self):
        seen = set()
        out = []
        for start in range(1, len(self.mapping) + 1):
            if start in seen:
                continue
            cyc = [start]
            seen.add(start)
            nxt = self.mapping[start - 1]
            while nxt != start:
                cyc.append(nxt)
                seen.add(nxt)
                nxt = self.mapping[nxt - 1]
            out.append(tuple(cyc))
        return out

    def orbit_count(self):
        return _orbit_count(self.mapping)


def _orbit_count(mapping):
    n = len(mapping)
    seen = bytearray(n + 1)
    count = 0
    for start in range(1, n + 1):
        if seen[start]:
            continue
        count += 1
        j = start
        while not seen[j]:
            seen[j] = 1
            j = mapping[j - 1]
    return count


def _check_order(total):
    if total > MAX_ORDER:
        raise DomainError(f"exhaustive enumeration is capped at order {MAX_ORDER}, got {total}")


def _inverse_times(mapping, eta):
    # tau^{-1} o eta as a raw tuple
    inv = [0] * len(mapping)
    for i, v in enumerate(mapping, start=1):
        inv[v - 1] = i
    return tuple(inv[eta[i] - 1] for i in range(len(mapping)))


@lru_cache(maxsize=None)
def _nc_disc(n):
    eta = tuple(list(range(2, n + 1)) + [1])
    out = []
    for mapping in permutations(range(1, n + 1)):
        if _orbit_count(mapping) + _orbit_count(_inverse_times(mapping, eta)) == n + 1:
            out.append(Permutation(mapping))
    return tuple(out)


def enumerate_nc_disc(n):
    """Non-crossing permutations of ``[n]`` by exhaustive search over ``S_n``.

    A permutation is kept iff ``#(tau) + #(tau^{-1} eta) = n + 1`` with
    ``eta = (1, ..., n)``. Output is sorted lexicographically by mapping.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    _check_order(n)
    return list(_nc_disc(n))


def _cyclically_sorted(seq):
    # a rotation of an increasing sequence has at most one descent, counting wrap-around
    k = len(seq)
    if k <= 2:
        return True
    descents = sum(seq[i] > seq[(i + 1) % k] for i in range(k))
    return descents == 1


def _annular_standard(cycles, m):
    for cyc in cycles:
        inner = [v for v in cyc if v <= m]
        outer = [v for v in cyc if v > m]
        if not (_cyclically_sorted(inner) and _cyclically_sorted(outer)):
            return False
    return True


def _connected(cycles, m):
    return any(min(c) <= m < max(c) for c in cycles)


@lru_cache(maxsize=None)
def _nc_annular(m, n):
    total = m + n
    eta0 = tuple(list(range(2, m + 1)) + [1] + list(range(m + 2, total + 1)) + [m + 1])
    out = []
    for mapping in permutations(range(1, total + 1)):
        if _orbit_count(mapping) + _orbit_count(_inverse_times(mapping, eta0)) != total:
            continue
        perm = Permutation(mapping)
        cycles = perm.orbits()
        if _connected(cycles, m) and _annular_standard(cycles, m):
            out.append(perm)
    return tuple(out)


def enumerate_nc_annular(m, n):
    """Non-crossing ``(m, n)``-annular permutations of ``[m + n]``.

    Keeps the ``(m, n)``-connected permutations (some cycle meets both
    circles) with ``#(tau) + #(tau^{-1} eta0) = m + n`` where
    ``eta0 = (1..m)(m+1..m+n)``, and checks that each cycle visits the points
    of either circle in cyclic order.
    """
    if m < 1 or n < 1:
        raise DomainError("m and n must be at least 1")
    _check_order(m + n)
    return list(_nc_annular(m, n))


def catalan(n):
    return comb(2 * n, n) // (n + 1)


def annular_count(m, n):
    """Closed-form count ``2mn/(m+n) C(2m-1, m) C(2n-1, n)`` of annular NC permutations."""
    return 2 * m * n * comb(2 * m - 1, m) * comb(2 * n - 1, n) // (m + n)


# ---------------------------------------------------------------------------
# Cumulants and moments


def _exactify(value):
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    return float(value)


@dataclass(frozen=True)
class CumulantTable:
    """Free cumulants ``kappa_n`` (``first_order``) and ``kappa_{m,n}`` (``second_order``)."""

    first_order: dict
    second_order: dict
    rho: object
    zeta: object


@dataclass(frozen=True)
class MomentTable:
    first_order: dict
    second_order: dict


def free_cumulants(rho, zeta, n_max, m_max=2):
    """Cumulants from the non-crossing enumerations.

    ``kappa_n = rho * sum zeta^#(tau)`` over NC disc permutations of ``[n]``
    and ``kappa_{m,n} = sum zeta^#(tau)`` over NC ``(m, n)``-annular ones.

    Parameters
    ----------
    rho, zeta : Fraction, int or float
        Aspect ratios; rationals keep the table exact.
    n_max : int
        Highest first-order index.
    m_max : int
        Bound on ``m + n`` for the second-order table (``< 2`` disables it).
    """
    rho, zeta = _exactify(rho), _exactify(zeta)
    _check_order(n_max)
    _check_order(m_max)
    first = {n: rho * sum(zeta ** p.orbit_count() for p in _nc_disc(n)) for n in range(1, n_max + 1)}
    second = {}
    for total in range(2, m_max + 1):
        for m in range(1, total):
            second[(m, total - m)] = sum(zeta ** p.orbit_count() for p in _nc_annular(m, total - m))
    return CumulantTable(first, second, rho, zeta)


def _product(values, one):
    out = one
    for v in values:
        out = out * v
    return out


def moments_from_cumulants(table):
    """Moments from cumulants through the non-crossing moment-cumulant relations.

    First order sums ``prod kappa_|B|`` over non-crossing partitions. Second
    order adds two sums: products of first-order cumulants over the cycles of
    each NC annular permutation, and for every pair of NC partitions of
    ``[m]`` and ``[n]`` with one marked block in each, ``kappa_{|B1|,|B2|}``
    times the first-order cumulants of the remaining blocks.
    """
    kappa = table.first_order
    kappa2 = table.second_order
    one = Fraction(1) if isinstance(table.rho, Fraction) else 1.0
    alpha = {0: one}
    for n in kappa:
        alpha[n] = sum(_product((kappa[len(c)] for c in p.orbits()), one) for p in _nc_disc(n))
    second = {}
    for (m, n) in kappa2:
        if m + n > max(kappa, default=0):
            # the annular sum needs first-order cumulants up to m + n
            continue
        total = sum(_product((kappa[len(c)] for c in p.orbits()), one) for p in _nc_annular(m, n))
        for p1 in _nc_disc(m):
            cyc1 = p1.orbits()
            for p2 in _nc_disc(n):
                cyc2 = p2.orbits()
                for i, b1 in enumerate(cyc1):
                    rest1 = _product((kappa[len(c)] for j, c in enumerate(cyc1) if j != i), one)
                    for k, b2 in enumerate(cyc2):
                        rest2 = _product((kappa[len(c)] for j, c in enumerate(cyc2) if j != k), one)
                        total = total + kappa2[(len(b1), len(b2))] * rest1 * rest2
        second[(m, n)] = total
    return MomentTable(alpha, second)


def _series_mul(a, b, order):
    out = [0] * (order + 1)
    for i, ai in enumerate(a[: order + 1]):
        if ai == 0:
            continue
        for j in range(0, order + 1 - i):
            out[i + j] += ai * b[j]
    return out


def moments_from_cubic_series(ratios, n_max):
    """First-order moments by coefficient matching in the cubic for ``G_Q``.

    With ``A(w) = sum alpha_n w^n`` the cubic reads
    ``rho (A - 1) = w (A^3 + (rho zeta + rho - 2) A^2 + (rho zeta - 1)(rho - 1) A)``,
    which determines ``alpha_n`` from ``alpha_0 .. alpha_{n-1}``.
    """
    if n_max > 10:
        raise DomainError("n_max is capped at 10")
    rho, zeta = _exactify(ratios.rho), _exactify(ratios.zeta)
    one = Fraction(1) if isinstance(rho, Fraction) else 1.0
    c2 = rho * zeta + rho - 2
    c1 = (rho * zeta - 1) * (rho - 1)
    a = [one]
    for n in range(1, n_max + 1):
        # coefficients of w^{n-1}; only alpha_0..alpha_{n-1} contribute
        sq = _series_mul(a, a, n - 1)
        cube = _series_mul(sq, a, n - 1)
        rhs = cube[n - 1] + c2 * sq[n - 1] + c1 * a[n - 1]
        a.append(rhs / rho)
    return MomentTable({n: v for n, v in enumerate(a)}, {})


def mp_moments(zeta, n_max):
    """Moments ``beta_0..beta_{n_max}`` of the Marchenko-Pastur law with ratio ``zeta``."""
    zeta = _exactify(zeta)
    one = Fraction(1) if isinstance(zeta, Fraction) else 1.0
    beta = [one]
    for n in range(1, n_max + 1):
        conv = sum(beta[i] * beta[n - 1 - i] for i in range(n))
        beta.append(conv - (1 - zeta) * beta[n - 1])
    return beta


# ---------------------------------------------------------------------------
# Second-order R-transform, exact series


def _bivariate_mul(p, q, deg):
    out = {}
    for (i1, j1), a in p.items():
        if a == 0:
            continue
        for (i2, j2), b in q.items():
            if i1 + i2 + j1 + j2 <= deg:
                key = (i1 + i2, j1 + j2)
                out[key] = out.get(key, 0) + a * b
    return out


def _divide_by_difference(p, deg):
    # p vanishes on x = y; returns q with p = (x - y) q up to total degree deg - 1
    q = {}
    for i in range(deg):
        for j in range(deg - i):
            q[(i, j)] = sum(p.get((i + 1 + k, j - k), 0) for k in range(j + 1))
    return q


def _bivariate_inverse(p, deg, one):
    # 1/p for p(0,0) = 1 by fixed-point iteration on total degree
    inv = {(0, 0): one}
    for total in range(1, deg + 1):
        for i in range(total + 1):
            j = total - i
            acc = 0
            for (a, b), c in p.items():
                if (a, b) == (0, 0) or a > i or b > j:
                    continue
                acc += c * inv.get((i - a, j - b), 0)
            inv[(i, j)] = -acc
    return inv


def r_transform_series(zeta, m_max):
    """Coefficients ``kappa_{m,n}`` of the second-order R-transform as a series.

    Expands ``f'(x) f'(y) / (f(x) - f(y))^2 - 1/(x - y)^2`` with
    ``f(x) = x M(x)`` and ``M`` the Marchenko-Pastur moment series, so that
    ``R(x, y) = sum kappa_{m,n} x^{m-1} y^{n-1}``. Exact for rational ``zeta``.

    Returns
    -------
    dict
        ``(m, n) -> kappa_{m,n}`` for ``m, n >= 1`` and ``m + n <= m_max``.
    """
    zeta = _exactify(zeta)
    one = Fraction(1) if isinstance(zeta, Fraction) else 1.0
    deg = m_max - 2  # highest total degree needed in R
    top = deg + 2  # the numerator loses two degrees to the divisions
    beta = mp_moments(zeta, top + 2)
    c = [0] + [beta[k - 1] for k in range(1, top + 3)]  # f = sum c_k x^k
    fprime = [k * c[k] for k in range(1, top + 3)]  # coefficient of x^{k-1}
    fp_xy = {(i, j): fprime[i] * fprime[j] for i in range(top + 1) for j in range(top + 1 - i)}
    dq = {(i, j): c[i + j + 1] for i in range(top + 1) for j in range(top + 1 - i)}
    dq_sq = _bivariate_mul(dq, dq, top)
    numer = {k: fp_xy.get(k, 0) - dq_sq.get(k, 0) for k in set(fp_xy) | set(dq_sq)}
    numer = _divide_by_difference(_divide_by_difference(numer, top), top - 1)
    r = _bivariate_mul(numer, _bivariate_inverse(dq_sq, deg, one), deg)
    return {(i + 1, j + 1): r.get((i, j), 0) for i in range(deg + 1) for j in range(deg + 1 - i)}


# ---------------------------------------------------------------------------
# Numeric polydisk extraction


@dataclass(frozen=True)
class SeriesReport:
    """Coefficients read off an analytic transform next to the combinatorial values."""

    numeric: dict
    reference: dict
    max_abs_deviation: float
    max_rel_deviation: float
    radii: tuple


def _mp_f_and_derivative(x, zeta, a, b):
    # f(x) = G_P(1/x) and f'(x) = -G_P'(1/x) / x^2 with G_P = 2 / W
    z = 1 / x
    s = mpmath.sqrt(z - a) * mpmath.sqrt(z - b)
    w = z + 1 - zeta + s
    g = 2 / w
    ds = (2 * z - a - b) / (2 * s)
    dg = -g * g * (1 + ds) / 2
    return g, -dg / (x * x)


def _report(numeric, reference, radii):
    dev = [abs(numeric[k] - float(reference[k])) for k in reference]
    rel = [abs(numeric[k] - float(reference[k])) / max(1.0, abs(float(reference[k]))) for k in reference]
    return SeriesReport(numeric, reference, max(dev), max(rel), radii)


def verify_second_order_series(ratios, m_max, nodes=64, dps=40):
    """Read ``kappa_{m,n}`` off the analytic second-order R-transform.

    Samples ``R(x, y)`` on the torus ``|x| = 0.3/b``, ``|y| = 0.6/b`` with
    ``b = (1 + sqrt(zeta))^2`` and inverts a ``nodes x nodes`` discrete
    Fourier transform. The evaluation runs in ``dps``-digit arithmetic since the
    two terms of the kernel cancel to many digits near the origin. The
    coefficients are compared with the annular enumeration.
    """
    if m_max > 7:
        raise DomainError("m_max is capped at 7")
    zeta_f = float(ratios.zeta)
    reference = free_cumulants(ratios.rho, ratios.zeta, 1, m_max).second_order
    with mpmath.workdps(dps):
        zeta = mpmath.mpf(zeta_f)
        a = (1 - mpmath.sqrt(zeta)) ** 2
        b = (1 + mpmath.sqrt(zeta)) ** 2
        rx, ry = mpmath.mpf("0.3") / b, mpmath.mpf("0.6") / b
        roots = [mpmath.expj(2 * mpmath.pi * k / nodes) for k in range(nodes)]
        xs = [rx * u for u in roots]
        ys = [ry * u for u in roots]
        fx = [_mp_f_and_derivative(x, zeta, a, b) for x in xs]
        fy = [_mp_f_and_derivative(y, zeta, a, b) for y in ys]
        grid = [
            [fx[j][1] * fy[k][1] / (fx[j][0] - fy[k][0]) ** 2 - 1 / (xs[j] - ys[k]) ** 2 for k in range(nodes)]
            for j in range(nodes)
        ]
        numeric = {}
        for (m, n) in reference:
            acc = mpmath.mpc(0)
            for j in range(nodes):
                wj = roots[(-(m - 1) * j) % nodes]
                row = grid[j]
                acc += wj * mpmath.fsum(row[k] * roots[(-(n - 1) * k) % nodes] for k in range(nodes))
            numeric[(m, n)] = float((acc / (nodes * nodes * rx ** (m - 1) * ry ** (n - 1))).real)
    return _report(numeric, reference, (float(rx), float(ry)))


def verify_second_order_moments(ratios, m_max, nodes=64):
    """Read ``alpha_{m,n}`` off the second-order Cauchy transform at infinity.

    ``G_Q(x, y) = sum alpha_{m,n} x^{-m-1} y^{-n-1}``; the coefficients are
    extracted on the torus ``|x| = 2 lambda_r + 1``, ``|y| = 3 lambda_r + 2``
    and compared with :func:`moments_from_cumulants`.
    """
    lam = support_right_edge(ratios)
    rx, ry = 2.0 * lam + 1.0, 3.0 * lam + 2.0
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    x = rx * np.exp(1j * theta)
    y = ry * np.exp(1j * theta)
    grid = second_order_cauchy_array(x[:, None], y[None, :], ratios)
    coeffs = np.fft.fft2(grid) / nodes**2  # coefficient of x^{-p} y^{-q} sits at index (-p, -q)
    numeric = {}
    table = moments_from_cumulants(free_cumulants(ratios.rho, ratios.zeta, m_max, m_max))
    for (m, n) in table.second_order:
        numeric[(m, n)] = float((coeffs[-(m + 1) % nodes, -(n + 1) % nodes] * rx ** (m + 1) * ry ** (n + 1)).real)
    return _report(numeric, table.second_order, (rx, ry))
