"""Vectorised closed-form solver for complex cubic equations."""

import numpy as np

__all__ = ["solve_cubic", "cubic_residual"]

_OMEGA = np.exp(2j * np.pi / 3)


def cubic_residual(coeffs, t):
    """Evaluate ``a t^3 + b t^2 + c t + d`` by Horner's rule."""
    a, b, c, d = coeffs
    return ((a * t + b) * t + c) * t + d


def solve_cubic(a, b, c, d, polish=1):
    """Return the three roots of ``a t^3 + b t^2 + c t + d = 0``.

    Coefficients broadcast against each other; the result has the broadcast
    shape with a trailing axis of length 3. Cardano's formula is applied to
    the depressed cubic, choosing the sign of the square root that avoids
    cancellation, and each root then gets ``polish`` guarded Newton steps on
    the original polynomial.

    Parameters
    ----------
    a, b, c, d : array_like
        Complex coefficients, ``a`` nonzero everywhere.
    polish : int
        Number of Newton refinement steps. A step is only accepted where it
        does not increase the residual.

    Returns
    -------
    numpy.ndarray
        Complex roots, shape ``broadcast(a, b, c, d).shape + (3,)``.
    """
    a, b, c, d = np.broadcast_arrays(*(np.asarray(v, dtype=complex) for v in (a, b, c, d)))
    if np.any(a == 0):
        raise ZeroDivisionError("leading coefficient of the cubic vanishes")
    b1, c1, d1 = b / a, c / a, d / a
    shift = b1 / 3.0
    p = c1 - b1 * b1 / 3.0
    q = 2.0 * b1**3 / 27.0 - b1 * c1 / 3.0 + d1
    disc = np.sqrt(q * q / 4.0 + p**3 / 27.0)
    w_plus = -q / 2.0 + disc
    w_minus = -q / 2.0 - disc
    w = np.where(np.abs(w_plus) >= np.abs(w_minus), w_plus, w_minus)
    A = w ** (1.0 / 3.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        B = np.where(A != 0, -p / (3.0 * A), 0.0)
    roots = np.stack(
        [A + B, _OMEGA * A + _OMEGA**2 * B, _OMEGA**2 * A + _OMEGA * B], axis=-1
    ) - shift[..., None]

    coeffs = tuple(v[..., None] for v in (a, b, c, d))
    for _ in range(polish):
        f = cubic_residual(coeffs, roots)
        df = (3.0 * coeffs[0] * roots + 2.0 * coeffs[1]) * roots + coeffs[2]
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = roots - f / df
        better = np.isfinite(cand) & (np.abs(cubic_residual(coeffs, cand)) < np.abs(f))
        roots = np.where(better, cand, roots)
    return roots
