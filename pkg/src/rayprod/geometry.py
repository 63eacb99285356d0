"""Channel dimensions and the aspect ratios derived from them."""

import math
from dataclasses import dataclass
from numbers import Real

from .exceptions import DomainError

__all__ = ["AspectRatios", "ChannelGeometry", "SQUARE_TOL"]

SQUARE_TOL = 1e-12


def _check_positive(name, value):
    if not isinstance(value, Real) or not (math.isfinite(float(value)) and value > 0):
        raise DomainError(f"{name} must be a positive finite real, got {value!r}")


@dataclass(frozen=True)
class AspectRatios:
    """Limiting ratios ``rho = S/R`` and ``zeta = T/S``.

    ``Fraction`` values are kept as-is so the combinatorial layer can work in
    exact arithmetic; everything numeric converts with ``float``.
    """

    rho: Real
    zeta: Real

    def __post_init__(self):
        _check_positive("rho", self.rho)
        _check_positive("zeta", self.zeta)

    def square_case(self):
        """True when ``R = T``, i.e. ``rho * zeta == 1`` up to 1e-12."""
        return abs(float(self.rho) * float(self.zeta) - 1.0) <= SQUARE_TOL

    @classmethod
    def square(cls, zeta):
        """Ratios of an ``R = T`` channel with ``T/S = zeta``."""
        return cls(rho=1.0 / zeta, zeta=zeta)


@dataclass(frozen=True)
class ChannelGeometry:
    """Finite antenna and scatterer counts of a Rayleigh product channel."""

    R: int
    S: int
    T: int

    def __post_init__(self):
        for name in ("R", "S", "T"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise DomainError(f"{name} must be an integer >= 1, got {v!r}")

    def n_min(self):
        return min(self.R, self.S, self.T)

    def ratios(self):
        return AspectRatios(rho=self.S / self.R, zeta=self.T / self.S)

    def is_square(self):
        return self.R == self.T
