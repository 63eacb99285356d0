"""Asymptotic mean and variance of the Rayleigh product channel capacity.

Capacities are in nats. ``gamma`` is the linear SNR per receive antenna. The
closed forms hold in the square case ``R = T`` (``rho * zeta = 1``); the
contour-integral routines work for any aspect ratios and double as
independent oracles for the closed forms.
"""

import math
import warnings
from dataclasses import dataclass, field, replace
from itertools import permutations

import numpy as np

from .exceptions import ConstraintError, ContourError, DomainError, RootSelectionError
from .geometry import AspectRatios, ChannelGeometry
from .spectra import (
    q_cauchy_array,
    q_cauchy_derivative_array,
    second_order_cauchy_array,
    support_right_edge,
)

__all__ = [
    "Snr",
    "AsymptoticSolution",
    "CubicRoots",
    "CapacityStats",
    "ContourSpec",
    "mean_capacity_per_antenna",
    "mean_numeric_contour",
    "variance_cubic_roots",
    "capacity_variance",
    "variance_high_snr",
    "variance_numeric_contour",
    "default_contour",
    "capacity_stats",
]

SIDE_SLACK = 1e-12
HIGH_SNR_MIN = 1e3


def _check_gamma(gamma):
    gamma = float(gamma)
    if not (math.isfinite(gamma) and gamma > 0):
        raise DomainError(f"SNR must be positive and finite, got {gamma!r}")
    return gamma


@dataclass(frozen=True)
class Snr:
    """Linear SNR with a dB view."""

    gamma: float

    def __post_init__(self):
        _check_gamma(self.gamma)

    def db(self):
        return 10.0 * math.log10(self.gamma)

    @classmethod
    def from_db(cls, db):
        return cls(10.0 ** (float(db) / 10.0))


@dataclass(frozen=True)
class AsymptoticSolution:
    g: float
    mu_per_antenna: float


@dataclass(frozen=True)
class CubicRoots:
    """Roots of ``t^3 - 2 t^2 + (1 - gamma + gamma zeta) t + gamma = 0``.

    ``t1, t2, t3`` and ``u_value`` follow Cardano's formula; ``generic`` holds
    the roots from a companion-matrix eigensolver. ``omega_r`` is the unique
    non-positive real root and ``omega_plus``/``omega_minus`` the other two.
    """

    t1: complex
    t2: complex
    t3: complex
    u_value: complex
    omega_r: float
    omega_plus: complex
    omega_minus: complex
    generic: tuple = field(default=())

    def cardano(self):
        return (self.t1, self.t2, self.t3)


@dataclass(frozen=True)
class CapacityStats:
    """Asymptotic mean ``mu_total`` (nats) and variance ``sigma_sq`` (nats^2)."""

    mu_total: float
    sigma_sq: float
    geometry: ChannelGeometry
    gamma: float

    def __post_init__(self):
        if self.sigma_sq < 0 or self.mu_total < 0:
            raise DomainError("capacity statistics must be non-negative")

    @property
    def sigma(self):
        return math.sqrt(self.sigma_sq)


# ---------------------------------------------------------------------------
# Mean


def _mean_cubic_defect_roots(rho, gamma):
    # g = 1 - d turns the mean cubic into gamma (1 - d)^2 (rho - d) - rho d = 0
    coeffs = [-gamma, gamma * (2.0 + rho), -(gamma * (1.0 + 2.0 * rho) + rho), gamma * rho]
    roots = np.roots(coeffs)
    out = []
    for r in roots:
        if abs(r.imag) > 1e-9 * (1.0 + abs(r)):
            continue
        d = r.real
        # one Newton step on the defect polynomial
        f = np.polyval(coeffs, d)
        df = np.polyval(np.polyder(coeffs), d)
        if df != 0:
            d_new = d - f / df
            if abs(np.polyval(coeffs, d_new)) <= abs(f):
                d = d_new
        out.append(d)
    return out


def _side_condition(d, rho):
    # (1 - g) / (g (g + rho - 1)) with g = 1 - d
    g = 1.0 - d
    den = g * (rho - d)
    if den == 0:
        return -math.inf
    return d / den


def _mean_defect(rho, gamma):
    defects = _mean_cubic_defect_roots(rho, gamma)
    passing = [d for d in defects if _side_condition(d, rho) >= -SIDE_SLACK]
    if len(passing) == 1:
        return passing[0]
    if not passing:
        raise RootSelectionError(f"no root of the mean cubic satisfies the side condition (rho={rho}, gamma={gamma})")
    # several candidates: follow the branch that starts at g = 1 for gamma -> 0
    d = 0.0
    for lg in np.linspace(-12.0, math.log10(gamma), 200):
        cands = _mean_cubic_defect_roots(rho, 10.0**lg)
        d = min(cands, key=lambda c: abs(c - d))
    return min(passing, key=lambda c: abs(c - d))


def mean_capacity_per_antenna(rho, gamma):
    """Asymptotic capacity per receive antenna ``mu_I / R`` for ``R = T``.

    ``g`` is the root of ``g^3 - (1 - rho) g^2 + (rho / gamma)(g - 1) = 0``
    with ``(1 - g) / (g (g + rho - 1)) >= 0``. The root is located through the
    defect ``d = 1 - g`` so that the low-SNR limit keeps full relative
    precision.

    Parameters
    ----------
    rho : float
        ``S / R``; ``zeta = 1 / rho`` is implied.
    gamma : float
        Linear SNR.

    Returns
    -------
    AsymptoticSolution
    """
    rho = float(rho)
    if not (math.isfinite(rho) and rho > 0):
        raise DomainError(f"rho must be positive, got {rho!r}")
    gamma = _check_gamma(gamma)
    d = _mean_defect(rho, gamma)
    g = 1.0 - d
    mu = (
        math.log1p(d / g + gamma * (rho - d) / rho)
        - rho * math.log1p(-d / rho)
        - 2.0 * d
    )
    return AsymptoticSolution(g=float(g), mu_per_antenna=float(max(mu, 0.0)))


# ---------------------------------------------------------------------------
# Variance, closed form


def _cardano(zeta, gamma):
    p = 3.0 * gamma * zeta - 3.0 * gamma - 1.0
    q = 1.0 + 4.5 * gamma + 9.0 * gamma * zeta
    s = np.sqrt(complex(p**3 + q * q))
    # sqrt(p^3 + q^2) - q written without cancellation
    u3 = p**3 / (s + q) if (s + q) != 0 else -(s + q)
    if abs(u3) <= 1e-300:
        u3 = -(s + q)  # p = 0: the other Cardano branch keeps u away from zero
    u = complex(np.power(complex(u3), 1.0 / 3.0))
    e_p, e_m = np.exp(1j * np.pi / 3), np.exp(-1j * np.pi / 3)
    t1 = 2.0 / 3.0 - p / (3.0 * u) + u / 3.0
    t2 = 2.0 / 3.0 + e_p * p / (3.0 * u) - e_m * u / 3.0
    t3 = 2.0 / 3.0 + e_m * p / (3.0 * u) - e_p * u / 3.0
    return complex(t1), complex(t2), complex(t3), u


def _matching_error(a, b):
    return min(max(abs(x - y) / (1.0 + abs(y)) for x, y in zip(a, perm)) for perm in permutations(b))


def variance_cubic_roots(zeta, gamma):
    """Solve the variance cubic by Cardano's formula and by a generic solver.

    Raises
    ------
    RootSelectionError
        If the Cardano and generic root sets disagree beyond 1e-8 or no
        non-positive real root exists.
    """
    zeta = float(zeta)
    if not (math.isfinite(zeta) and zeta > 0):
        raise DomainError(f"zeta must be positive, got {zeta!r}")
    gamma = _check_gamma(gamma)
    coeffs = [1.0, -2.0, 1.0 - gamma + gamma * zeta, gamma]
    generic = [complex(r) for r in np.roots(coeffs)]
    t1, t2, t3, u = _cardano(zeta, gamma)
    if _matching_error((t1, t2, t3), generic) > 1e-8:
        raise RootSelectionError("Cardano roots disagree with the generic cubic solver")
    real_neg = [r for r in generic if abs(r.imag) <= 1e-9 * (1.0 + abs(r)) and r.real <= 0.0]
    if len(real_neg) != 1:
        raise RootSelectionError(f"expected one real non-positive root, found {len(real_neg)}")
    omega_r = real_neg[0].real
    # Newton polish in real arithmetic
    for _ in range(2):
        f = np.polyval(coeffs, omega_r)
        df = np.polyval(np.polyder(coeffs), omega_r)
        if df == 0:
            break
        cand = omega_r - f / df
        if abs(np.polyval(coeffs, cand)) < abs(f):
            omega_r = cand
    omega_r = min(omega_r, 0.0)
    rest = sorted((r for r in generic if r is not real_neg[0]), key=lambda r: (-r.imag, r.real))
    return CubicRoots(
        t1=t1, t2=t2, t3=t3, u_value=u,
        omega_r=float(omega_r), omega_plus=rest[0], omega_minus=rest[1],
        generic=tuple(generic),
    )


def _variance_from_root(omega, gamma):
    den = gamma - omega * omega * (2.0 * omega - 2.0)
    if den <= 0:
        raise DomainError("variance denominator is non-positive; wrong root upstream")
    # log(gamma (omega - 1)^2 / den) = log1p((num - den) / den)
    excess = omega * (gamma * omega - 2.0 * gamma + 2.0 * omega * omega - 2.0 * omega)
    ratio = excess / den
    if ratio <= -1.0:
        raise DomainError("variance log argument is non-positive")
    return math.log1p(ratio)


def capacity_variance(zeta, gamma):
    """Asymptotic capacity variance ``sigma_I^2`` for ``R = T`` with ``zeta = T/S``."""
    roots = variance_cubic_roots(zeta, gamma)
    return max(_variance_from_root(roots.omega_r, float(gamma)), 0.0)


def variance_high_snr(zeta, gamma):
    """High-SNR approximation of :func:`capacity_variance`.

    Uses ``omega_r ~ 1/(1 - zeta)`` when ``zeta > 1`` and
    ``omega_r ~ 2/3 - sqrt((1 - zeta) gamma)`` when ``zeta < 1``.
    """
    zeta = float(zeta)
    gamma = _check_gamma(gamma)
    if zeta == 1.0:
        raise DomainError("high-SNR expansion is singular at zeta = 1; use capacity_variance")
    if not (math.isfinite(zeta) and zeta > 0):
        raise DomainError(f"zeta must be positive, got {zeta!r}")
    if gamma < HIGH_SNR_MIN:
        warnings.warn(f"gamma = {gamma} is below {HIGH_SNR_MIN}; the expansion may be inaccurate", stacklevel=2)
    omega = high_snr_root(zeta, gamma)
    return max(_variance_from_root(omega, gamma), 0.0)


def high_snr_root(zeta, gamma):
    """Leading-order approximation of ``omega_r`` for large ``gamma``."""
    if zeta > 1.0:
        return 1.0 / (1.0 - zeta)
    return 2.0 / 3.0 - math.sqrt((1.0 - zeta) * gamma)


# ---------------------------------------------------------------------------
# Contour quadrature


@dataclass(frozen=True)
class ContourSpec:
    """Inner integration contour; the outer one is this contour scaled by ``separation``.

    The contour crosses the real axis at ``left_crossing`` (inside
    ``(-1/gamma, 0)``) and ``right_crossing`` (beyond ``lambda_r``) and has
    half-height ``aspect * (right_crossing - left_crossing) / 2``.
    """

    left_crossing: float
    right_crossing: float
    nodes: int = 1024
    shape: str = "ellipse"
    aspect: float = 0.5
    separation: float = 1.5

    def __post_init__(self):
        if self.nodes < 256:
            raise DomainError("contours need at least 256 quadrature nodes")
        if self.shape not in ("ellipse", "rectangle"):
            raise DomainError(f"unknown contour shape {self.shape!r}")
        if not self.left_crossing < 0 < self.right_crossing:
            raise DomainError("crossings must satisfy left < 0 < right")
        if self.separation <= 1.0 or self.aspect <= 0:
            raise DomainError("separation must exceed 1 and aspect must be positive")

    def outer(self):
        return ContourSpec(
            self.left_crossing * self.separation,
            self.right_crossing * self.separation,
            self.nodes,
            self.shape,
            self.aspect,
            self.separation,
        )

    def nodes_and_weights(self, gaps=None):
        """Points ``z_k`` and weights ``w_k`` with ``oint f dz ~ sum f(z_k) w_k``.

        ``gaps`` gives the distances from the left and right crossings to the
        nearest singularity of the integrand. When supplied, nodes are graded
        towards the tighter crossing, which keeps the rule accurate when a
        crossing sits close to a singularity (large ``gamma``).
        """
        left, right = self.left_crossing, self.right_crossing
        centre = 0.5 * (left + right)
        a = 0.5 * (right - left)
        b = self.aspect * a
        if self.shape == "ellipse":
            # theta = 2 atan(c tan(phi/2)) is analytic and periodic, so the
            # trapezoid rule stays spectrally accurate; the node density is
            # 1/c near the right crossing and c near the left one
            c = 1.0
            if gaps is not None:
                c = math.sqrt(gaps[1] / gaps[0])
            phi = 2.0 * np.pi * np.arange(self.nodes) / self.nodes
            half = 0.5 * phi
            theta = 2.0 * np.arctan2(c * np.sin(half), np.cos(half))
            jac = c / (np.cos(half) ** 2 + (c * np.sin(half)) ** 2) * (2.0 * np.pi / self.nodes)
            z = centre + a * np.cos(theta) + 1j * b * np.sin(theta)
            dz = (-a * np.sin(theta) + 1j * b * np.cos(theta)) * jac
            return z, dz
        # rectangle: Gauss-Legendre on each side, counter-clockwise; the
        # vertical sides use a sinh map that clusters nodes near the real axis
        per_side = self.nodes // 4
        s, w = np.polynomial.legendre.leggauss(per_side)
        g_left, g_right = gaps if gaps is not None else (b, b)
        corners = [complex(right, -b), complex(right, b), complex(left, b), complex(left, -b)]
        stretch = {0: np.arcsinh(b / g_right), 2: np.arcsinh(b / g_left)}
        zs, dzs = [], []
        for k in range(4):
            p0, p1 = corners[k], corners[(k + 1) % 4]
            if k in stretch:
                beta = stretch[k]
                t = np.sinh(beta * s) / np.sinh(beta)
                dt = beta * np.cosh(beta * s) / np.sinh(beta) * w
            else:
                t, dt = s, w
            zs.append(0.5 * (p0 + p1) + 0.5 * (p1 - p0) * t)
            dzs.append(0.5 * (p1 - p0) * dt)
        return np.concatenate(zs), np.concatenate(dzs)


def _crossing_gaps(spec, gamma, lam):
    """Distances from each crossing of ``spec`` to the nearest singularity."""
    left, right = spec.left_crossing, spec.right_crossing
    return min(-left, left + 1.0 / gamma), right - lam


MAX_DEFAULT_NODES = 8192


def default_contour(ratios, gamma, nodes=1024, shape="ellipse"):
    """Inner contour used when none is given.

    The left crossings of the inner and outer contours sit at ``-0.4/gamma``
    and ``-0.6/gamma``, keeping both away from the support at ``0`` and the
    branch point of ``log(1 + gamma x)`` at ``-1/gamma``. For the ellipse,
    ``nodes`` is a floor: at high SNR the left crossing squeezes between two
    singularities and the count is raised (in powers of two, up to
    ``MAX_DEFAULT_NODES``) so the graded trapezoid rule keeps converging.
    """
    gamma = _check_gamma(gamma)
    lam = support_right_edge(ratios)
    spec = ContourSpec(-0.4 / gamma, 1.1 * lam + 0.2, nodes=nodes, shape=shape)
    if shape == "ellipse":
        g_left, g_right = _crossing_gaps(spec, gamma, lam)
        half_height = spec.aspect * 0.5 * (spec.right_crossing - spec.left_crossing)
        # the graded rule converges like exp(-N sqrt(g_left g_right)/half_height)
        wanted = 12.0 * half_height / math.sqrt(g_left * g_right)
        while spec.nodes < min(wanted, MAX_DEFAULT_NODES):
            spec = replace(spec, nodes=2 * spec.nodes)
    return spec


def _validate_contour(spec, gamma, lam):
    for c in (spec, spec.outer()):
        if not (-1.0 / gamma < c.left_crossing < 0.0):
            raise ContourError(f"left crossing {c.left_crossing} is not inside (-1/gamma, 0)")
        if not c.right_crossing > lam:
            raise ContourError(f"right crossing {c.right_crossing} does not clear lambda_r = {lam}")


def _pairwise_total(values):
    # numpy's contiguous reductions are pairwise; keep a fixed layout for reproducibility
    return np.add.reduce(np.ascontiguousarray(values).ravel())


def mean_numeric_contour(ratios, gamma, contour=None):
    """Asymptotic capacity per receive antenna from ``(1/2 pi i) oint phi G_Q dz``.

    Works for any aspect ratios; in the square case it reproduces
    :func:`mean_capacity_per_antenna`.
    """
    gamma = _check_gamma(gamma)
    lam = support_right_edge(ratios)
    spec = contour or default_contour(ratios, gamma)
    _validate_contour(spec, gamma, lam)
    z, dz = spec.nodes_and_weights(_crossing_gaps(spec, gamma, lam))
    vals = np.log1p(gamma * z) * q_cauchy_array(z, ratios) * dz
    total = _pairwise_total(vals) / (2j * np.pi)
    return float(total.real)


def variance_numeric_contour(ratios, gamma, contour=None, row_block=256):
    """Asymptotic capacity variance from the double contour integral.

    Evaluates ``-(1/4 pi^2) oint oint phi(x) phi(y) G_Q(x, y) dx dy`` with
    ``phi(x) = log(1 + gamma x)`` by quadrature, ``x`` on the inner and ``y``
    on the outer contour. This is the only variance route when ``R != T``.
    """
    gamma = _check_gamma(gamma)
    lam = support_right_edge(ratios)
    spec = contour or default_contour(ratios, gamma)
    _validate_contour(spec, gamma, lam)
    outer = spec.outer()
    x, dx = spec.nodes_and_weights(_crossing_gaps(spec, gamma, lam))
    y, dy = outer.nodes_and_weights(_crossing_gaps(outer, gamma, lam))
    gx = q_cauchy_array(x, ratios)
    gy = q_cauchy_array(y, ratios)
    dgx = q_cauchy_derivative_array(x, ratios, gx)
    dgy = q_cauchy_derivative_array(y, ratios, gy)
    wx = np.log1p(gamma * x) * dx
    wy = np.log1p(gamma * y) * dy
    partial = np.empty(len(x), dtype=complex)
    for start in range(0, len(x), row_block):
        sl = slice(start, start + row_block)
        kern = second_order_cauchy_array(
            x[sl, None], y[None, :], ratios,
            gx[sl, None], dgx[sl, None], gy[None, :], dgy[None, :],
        )
        partial[sl] = np.add.reduce(kern * wy[None, :], axis=1)
    total = -_pairwise_total(partial * wx) / (4.0 * np.pi**2)
    return float(total.real)


# ---------------------------------------------------------------------------


def capacity_stats(geometry, gamma, contour=False):
    """Asymptotic mean and variance for a finite geometry.

    Uses the closed forms with ``rho = S/R`` and ``zeta = T/S``. For ``R != T``
    this raises :class:`ConstraintError` unless ``contour`` is true, in which
    case both moments come from contour quadrature.
    """
    gamma = _check_gamma(gamma)
    ratios = geometry.ratios()
    if geometry.is_square():
        mu = geometry.R * mean_capacity_per_antenna(ratios.rho, gamma).mu_per_antenna
        var = capacity_variance(ratios.zeta, gamma)
    elif contour:
        mu = geometry.R * mean_numeric_contour(ratios, gamma)
        var = variance_numeric_contour(ratios, gamma)
    else:
        raise ConstraintError(
            f"closed-form statistics need R = T (got R={geometry.R}, T={geometry.T}); use the contour route"
        )
    return CapacityStats(mu_total=mu, sigma_sq=var, geometry=geometry, gamma=gamma)
