"""First- and second-order Cauchy transforms of the Rayleigh product ensemble.

Notation: ``P = Theta Theta^H / S`` is the Marchenko-Pastur building block with
ratio ``zeta`` and ``Q = H H^H`` is the product-channel Gram matrix. All
transforms use the convention ``G(z) = int dF(t) / (z - t)``, so that
``Im G(z) < 0`` in the upper half plane.

Scalar entry points validate their arguments and raise from
:mod:`rayprod.exceptions`; the ``*_array`` helpers are vectorised and skip the
domain checks so contour quadrature can call them on whole node sets.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .cubic import solve_cubic
from .exceptions import BranchError, ConstraintError, DomainError, PoleError
from .geometry import AspectRatios

__all__ = [
    "AspectRatios",
    "SupportInterval",
    "mp_support",
    "mp_cauchy",
    "mp_cauchy_derivative",
    "mp_cauchy_inverse",
    "q_support",
    "support_right_edge",
    "q_cauchy",
    "q_cauchy_array",
    "q_cauchy_derivative",
    "q_cauchy_derivative_array",
    "q_cauchy_inverse",
    "second_order_r_transform",
    "r_transform_array",
    "second_order_cauchy",
    "second_order_cauchy_array",
    "cauchy_series_coefficients",
    "laurent_coefficients",
]

# Roots with Im(G) > HERGLOTZ_TOL * (1 + |G|) are rejected for Im z >= 0.
HERGLOTZ_TOL = 1e-14
# Roots of a real cubic at real z are accepted as real below this relative imaginary part.
REAL_ROOT_TOL = 1e-7
# Maximum relative mismatch between G_P(1/G) and the subordination value for the chosen root.
BRANCH_TOL = 1e-6
# Diagonal values x = y average f(x + h, x - h) over |h| = DIAGONAL_FRACTION * (distance to
# the nearest singularity), sampled at DIAGONAL_NODES points.
DIAGONAL_FRACTION = 0.25
DIAGONAL_NODES = 32


@dataclass(frozen=True)
class SupportInterval:
    """Closed interval ``[left, right]`` containing a limiting spectrum."""

    left: float
    right: float

    def __post_init__(self):
        if not (0.0 <= self.left <= self.right):
            raise DomainError(f"invalid support interval [{self.left}, {self.right}]")

    def contains(self, x):
        return self.left <= x <= self.right


def _as_complex(z):
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise DomainError(f"non-finite argument {z!r}")
    return z


def _check_zeta(zeta):
    zeta = float(zeta)
    if not (math.isfinite(zeta) and zeta > 0):
        raise DomainError(f"zeta must be positive and finite, got {zeta!r}")
    return zeta


# ---------------------------------------------------------------------------
# Marchenko-Pastur block


def mp_support(zeta):
    """Support ``[(1 - sqrt(zeta))^2, (1 + sqrt(zeta))^2]`` of the MP law."""
    zeta = _check_zeta(zeta)
    s = math.sqrt(zeta)
    return SupportInterval((1.0 - s) ** 2, (1.0 + s) ** 2)


def _mp_sqrt(w, zeta):
    # sqrt((w - a)(w - b)) with its cut on [a, b] only, ~ w at infinity
    s = math.sqrt(zeta)
    a, b = (1.0 - s) ** 2, (1.0 + s) ** 2
    return np.sqrt(w - a) * np.sqrt(w - b)


def _mp_cauchy_array(w, zeta):
    # root of w G^2 - (w + 1 - zeta) G + 1 = 0 written as 2 / (sum of roots' reciprocal form)
    w = np.asarray(w, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        return 2.0 / ((w + 1.0 - zeta) + _mp_sqrt(w, zeta))


def _mp_cauchy_prime_array(w, zeta):
    w = np.asarray(w, dtype=complex)
    g = _mp_cauchy_array(w, zeta)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (g * g - g) / _mp_sqrt(w, zeta)


def _check_mp_argument(z, zeta):
    if z == 0:
        raise PoleError("G_P has a pole (or support edge) at z = 0")
    if z.imag == 0.0 and mp_support(zeta).contains(z.real):
        raise DomainError(f"z = {z.real} lies on the Marchenko-Pastur support")


def mp_cauchy(z, zeta):
    """Cauchy transform of the Marchenko-Pastur law with ratio ``zeta``.

    The branch satisfies ``z G(z) -> 1`` at infinity and ``Im G < 0`` for
    ``Im z > 0``. Raises :class:`PoleError` at ``z = 0`` and
    :class:`DomainError` on the real support.
    """
    z = _as_complex(z)
    zeta = _check_zeta(zeta)
    _check_mp_argument(z, zeta)
    return complex(_mp_cauchy_array(z, zeta))


def mp_cauchy_derivative(z, zeta):
    """Derivative ``G_P'(z)``, same domain as :func:`mp_cauchy`."""
    z = _as_complex(z)
    zeta = _check_zeta(zeta)
    _check_mp_argument(z, zeta)
    return complex(_mp_cauchy_prime_array(z, zeta))


def mp_cauchy_inverse(t, zeta):
    """Functional inverse ``1/t + zeta/(1 - t)`` of :func:`mp_cauchy`."""
    t = _as_complex(t)
    zeta = _check_zeta(zeta)
    if t == 0 or t == 1:
        raise PoleError(f"G_P inverse has a pole at t = {t}")
    return 1.0 / t + zeta / (1.0 - t)


# ---------------------------------------------------------------------------
# Product-channel block


def _cubic_coefficients(z, rho, zeta):
    # z^2 G^3 + (rho zeta + rho - 2) z G^2 + ((rho zeta - 1)(rho - 1) - rho z) G + rho = 0
    return (
        z * z,
        (rho * zeta + rho - 2.0) * z,
        (rho * zeta - 1.0) * (rho - 1.0) - rho * z,
        rho + 0.0 * z,
    )


@lru_cache(maxsize=256)
def _right_edge(rho, zeta):
    z = np.polynomial.Polynomial([0.0, 1.0])
    a, b, c, d = _cubic_coefficients(z, rho, zeta)
    disc = 18 * a * b * c * d - 4 * b**3 * d + b**2 * c**2 - 4 * a * c**3 - 27 * a**2 * d**2
    roots = disc.roots()
    real = sorted(r.real for r in roots if abs(r.imag) <= 1e-8 * (1.0 + abs(r)))
    if not real:
        raise BranchError("discriminant of the Q cubic has no real root")
    edge = real[-1]
    # refine on a bracket around the located root; the discriminant changes sign there
    width = 1e-6 * (1.0 + abs(edge))
    lo, hi = edge - width, edge + width
    if disc(lo) * disc(hi) < 0:
        edge = brentq(disc, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return float(edge)


def support_right_edge(ratios):
    """Right end point ``lambda_r`` of the limiting spectrum of ``Q``.

    Computed as the largest real zero of the discriminant (in ``G``) of the
    cubic satisfied by ``G_Q``.
    """
    return _right_edge(float(ratios.rho), float(ratios.zeta))


def q_support(ratios):
    """Hull ``[0, lambda_r]`` of the limiting spectrum of ``Q``."""
    return SupportInterval(0.0, support_right_edge(ratios))


def _implicit_partials(z, g, rho, zeta):
    # partial derivatives of the cubic F(z, G) and a magnitude scale for F_G
    bcoef = rho * zeta + rho - 2.0
    c0 = (rho * zeta - 1.0) * (rho - 1.0)
    f_g = 3.0 * z * z * g * g + 2.0 * bcoef * z * g + c0 - rho * z
    f_z = 2.0 * z * g**3 + bcoef * g * g - rho * g
    scale = np.abs(3.0 * z * z * g * g) + np.abs(2.0 * bcoef * z * g) + abs(c0) + np.abs(rho * z)
    return f_z, f_g, scale


def q_cauchy_array(z, ratios):
    """Vectorised ``G_Q`` with branch selection; no support check.

    Among the three roots of the cubic, the admissible ones are those not in
    the open upper half plane (up to rounding) when ``Im z >= 0``, obey
    ``|G| <= 1/dist(z, [0, lambda_r])`` and, for (numerically) real ``z`` off the support,
    lie between ``1/z`` and ``1/(z - lambda_r)`` with ``-G' >= G^2``. The chosen
    root is the admissible one for which ``h = (z G^2 - (1 - rho) G) / rho``
    agrees with ``G_P(1/G)`` on the principal Marchenko-Pastur branch, i.e. the
    root consistent with the subordination relation. For real ``z`` the
    chosen root must itself be real, otherwise ``z`` is on the support. Lower
    half plane inputs are handled by conjugate symmetry.
    """
    rho, zeta = float(ratios.rho), float(ratios.zeta)
    z = np.asarray(z, dtype=complex)
    flip = z.imag < 0
    zz = np.where(flip, np.conj(z), z)
    if np.any(zz == 0):
        raise PoleError("G_Q is not defined at z = 0")
    roots = solve_cubic(*_cubic_coefficients(zz, rho, zeta))
    zc = zz[..., None]
    h = (zc * roots * roots - (1.0 - rho) * roots) / rho
    gp = _mp_cauchy_array(1.0 / roots, zeta)
    with np.errstate(divide="ignore", invalid="ignore"):
        err = np.abs(h - gp) / np.maximum(np.maximum(np.abs(h), np.abs(gp)), 1e-300)
    size = 1.0 + np.abs(roots)
    admissible = roots.imag <= HERGLOTZ_TOL * size
    # G(z) = int dF(t) / (z - t) over t in [0, lam]: |G| <= 1/dist(z, support), and on the
    # real axis G lies between 1/z and 1/(z - lam)
    lam = _right_edge(rho, zeta)
    x = zc.real
    dist = np.abs(zc - np.clip(x, 0.0, lam))
    with np.errstate(divide="ignore", invalid="ignore"):
        admissible &= np.abs(roots) <= (1.0 + BRANCH_TOL) / dist
        outside = (np.abs(zc.imag) <= 1e-8 * dist) & ((x < 0.0) | (x > lam))
        ends = np.concatenate([1.0 / x, 1.0 / (x - lam)], axis=-1)
        lo = np.min(ends, axis=-1, keepdims=True)
        hi = np.max(ends, axis=-1, keepdims=True)
        slack = BRANCH_TOL * np.maximum(np.abs(lo), np.abs(hi))
        in_range = (roots.real >= lo - slack) & (roots.real <= hi + slack)
        # Cauchy-Schwarz: -G'(x) = int dF/(x - t)^2 >= G(x)^2 off the support
        f_z, f_g, _ = _implicit_partials(zc, roots, rho, zeta)
        slope = -(-f_z / f_g).real
        schwarz = slope >= roots.real**2 * (1.0 - BRANCH_TOL)
    admissible &= ~outside | (in_range & schwarz)
    err = np.where(admissible & np.isfinite(err), err, np.inf)
    best = np.argmin(err, axis=-1)
    best_err = np.take_along_axis(err, best[..., None], axis=-1)[..., 0]
    g = np.take_along_axis(roots, best[..., None], axis=-1)[..., 0]
    real_z = zz.imag == 0.0
    failed = (best_err > BRANCH_TOL) | (real_z & (np.abs(g.imag) > REAL_ROOT_TOL * (1.0 + np.abs(g))))
    if np.any(failed):
        bad = np.asarray(z)[failed].ravel()[0]
        raise BranchError(f"no root of the G_Q cubic passes branch selection at z = {bad}")
    g = np.where(real_z, g.real + 0j, g)
    return np.where(flip, np.conj(g), g)


def _check_q_argument(z, ratios):
    if z.imag == 0.0 and 0.0 <= z.real <= support_right_edge(ratios):
        raise DomainError(f"z = {z.real} lies in [0, lambda_r]; G_Q needs z < 0 or z > lambda_r")


def q_cauchy(z, ratios):
    """Cauchy transform ``G_Q(z)`` of the limiting spectrum of ``Q = H H^H``.

    Real arguments must satisfy ``z < 0`` or ``z > lambda_r``.
    """
    z = _as_complex(z)
    _check_q_argument(z, ratios)
    return complex(q_cauchy_array(z, ratios))


def q_cauchy_derivative_array(z, ratios, g=None):
    """Vectorised ``dG_Q/dz`` by implicit differentiation of the cubic."""
    rho, zeta = float(ratios.rho), float(ratios.zeta)
    z = np.asarray(z, dtype=complex)
    if g is None:
        g = q_cauchy_array(z, ratios)
    f_z, f_g, scale = _implicit_partials(z, g, rho, zeta)
    if np.any(np.abs(f_g) <= 1e-13 * scale):
        raise DomainError("G_Q derivative is singular here (support edge)")
    return -f_z / f_g


def q_cauchy_derivative(z, ratios):
    """Derivative ``G_Q'(z)``; raises near support edges where it blows up."""
    z = _as_complex(z)
    _check_q_argument(z, ratios)
    return complex(q_cauchy_derivative_array(z, ratios))


def q_cauchy_inverse(t, zeta, rho=None):
    """Inverse of ``G_Q`` on the real axis in the square case ``rho zeta = 1``.

    Uses the root of the quadratic (in ``z``) that behaves like ``1/t`` as
    ``t -> 0``, evaluated in rationalised form to avoid cancellation.
    """
    zeta = _check_zeta(zeta)
    if rho is not None and abs(float(rho) * zeta - 1.0) > 1e-12:
        raise ConstraintError("q_cauchy_inverse is only available when rho * zeta = 1 (R = T)")
    t = float(t)
    if t == 0.0:
        raise PoleError("G_Q inverse is unbounded at t = 0")
    rad = 1.0 + (1.0 - zeta) ** 2 * t * t - 2.0 * (1.0 + zeta) * t
    if rad < 0.0:
        raise DomainError(f"t = {t} maps into the support (negative radicand {rad})")
    den = t * (1.0 - (1.0 - zeta) * t + math.sqrt(rad))
    if den == 0.0:
        raise PoleError(f"G_Q inverse has a pole at t = {t}")
    return 2.0 / den


# ---------------------------------------------------------------------------
# Second order


def r_transform_array(u, v, zeta):
    """Vectorised second-order R-transform off the diagonal ``u != v``."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    gu, gv = _mp_cauchy_array(1.0 / u, zeta), _mp_cauchy_array(1.0 / v, zeta)
    du, dv = _mp_cauchy_prime_array(1.0 / u, zeta), _mp_cauchy_prime_array(1.0 / v, zeta)
    return du * dv / (u * u * v * v * (gu - gv) ** 2) - 1.0 / (u - v) ** 2


def _distance_to_segment(x, lo, hi):
    px = min(max(x.real, lo), hi)
    return abs(x - px)


def _diagonal_limit(func, x, distance):
    # F(h) = func(x + h, x - h) is even and analytic for |h| < distance, so its
    # mean over a circle equals F(0); the trapezoid rule is exact up to (r/distance)^N
    r = DIAGONAL_FRACTION * distance
    h = r * np.exp(2j * np.pi * np.arange(DIAGONAL_NODES) / DIAGONAL_NODES)
    return complex(np.mean(func(x + h, x - h)))


def second_order_r_transform(x, y, zeta):
    """Second-order R-transform ``R(x, y)`` of ``Q``.

    Only depends on ``zeta``. On the diagonal ``x = y`` the two singular terms
    cancel; the value there is the mean of ``R(x + h, x - h)`` over a circle
    of ``h`` well inside the region of analyticity.
    """
    x, y = _as_complex(x), _as_complex(y)
    zeta = _check_zeta(zeta)
    for w in (x, y):
        if w == 0:
            raise PoleError("R(x, y) is evaluated through G_P(1/x); x = 0 and y = 0 are excluded")
        _check_mp_argument(1.0 / w, zeta)

    if x == y:
        # singular set of the formula: 0 and the reciprocal of the MP support
        sup = mp_support(zeta)
        hi = 1.0 / sup.left if sup.left > 0 else math.inf
        dist = min(abs(x), _distance_to_segment(x, 1.0 / sup.right, hi))
        return _diagonal_limit(lambda a, b: r_transform_array(a, b, zeta), x, dist)
    return complex(r_transform_array(x, y, zeta))


def second_order_cauchy_array(x, y, ratios, gx=None, dgx=None, gy=None, dgy=None):
    """Vectorised ``G_Q(x, y)`` for ``x != y``; arguments broadcast."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if gx is None:
        gx = q_cauchy_array(x, ratios)
    if dgx is None:
        dgx = q_cauchy_derivative_array(x, ratios, gx)
    if gy is None:
        gy = q_cauchy_array(y, ratios)
    if dgy is None:
        dgy = q_cauchy_derivative_array(y, ratios, gy)
    zeta = float(ratios.zeta)
    cross = dgx * dgy
    fluct = cross * r_transform_array(gx, gy, zeta)
    # mixed partial d^2/dx dy of log((G(x) - G(y)) / (x - y))
    log_term = cross / (gx - gy) ** 2 - 1.0 / (x - y) ** 2
    return fluct + log_term


def second_order_cauchy(x, y, ratios):
    """Second-order Cauchy transform (limiting resolvent covariance) of ``Q``."""
    x, y = _as_complex(x), _as_complex(y)
    for w in (x, y):
        _check_q_argument(w, ratios)

    if x == y:
        dist = _distance_to_segment(x, 0.0, support_right_edge(ratios))
        return _diagonal_limit(lambda a, b: second_order_cauchy_array(a, b, ratios), x, dist)
    return complex(second_order_cauchy_array(x, y, ratios))


# ---------------------------------------------------------------------------
# Laurent coefficients


def laurent_coefficients(func, n_max, radius, nodes=4096):
    """Coefficients ``c_n`` of ``func(z) = sum_n c_n z^(-n-1)``, ``n = 0..n_max``.

    ``func`` must accept an array of points on the circle ``|z| = radius``,
    which has to lie outside every singularity.
    """
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    z = radius * np.exp(1j * theta)
    vals = np.asarray(func(z), dtype=complex)
    n = np.arange(n_max + 1)
    phase = np.exp(1j * np.outer(n + 1, theta))
    return radius ** (n + 1) * (phase @ vals) / nodes


def cauchy_series_coefficients(ratios, n_max, nodes=4096):
    """Free moments ``alpha_0..alpha_n_max`` of ``Q`` read off ``G_Q`` at infinity.

    The transform is sampled on ``|z| = 10 (1 + lambda_r)``.
    """
    radius = 10.0 * (1.0 + support_right_edge(ratios))
    coeffs = laurent_coefficients(lambda z: q_cauchy_array(z, ratios), n_max, radius, nodes)
    return coeffs.real
