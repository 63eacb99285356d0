"""Outage statistics of Rayleigh product MIMO channels.

Asymptotic capacity mean and variance from free probability, a Gaussian
outage model with its finite-SNR diversity-multiplexing tradeoff, and two
independent checks: a Monte Carlo simulator and exact non-crossing
permutation combinatorics.
"""

from .asymptotics import (
    CapacityStats,
    ContourSpec,
    CubicRoots,
    Snr,
    capacity_stats,
    capacity_variance,
    mean_capacity_per_antenna,
    mean_numeric_contour,
    variance_cubic_roots,
    variance_high_snr,
    variance_numeric_contour,
)
from .exceptions import (
    BranchError,
    ConstraintError,
    ContourError,
    DegenerateError,
    DomainError,
    PoleError,
    RayprodError,
    RootSelectionError,
)
from .geometry import AspectRatios, ChannelGeometry
from .montecarlo import RandomStream, run_rayleigh_simulation, run_simulation
from .outage import (
    DmtPoint,
    erf_inverse,
    finite_snr_dmt,
    multiplexing_rate,
    outage_capacity,
    outage_probability,
)

__version__ = "0.1.0"
