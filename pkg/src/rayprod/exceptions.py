"""Exception hierarchy shared by all rayprod modules."""


class RayprodError(ValueError):
    """Base class for every error raised by the library."""


class DomainError(RayprodError):
    """Argument lies outside the region where an operation is defined."""


class PoleError(DomainError):
    """Argument sits on a pole of the evaluated function."""


class BranchError(RayprodError):
    """No root of an algebraic equation satisfies the branch selection rule."""


class ConstraintError(RayprodError):
    """Operation requires the square case R = T (rho * zeta = 1) or similar."""


class RootSelectionError(RayprodError):
    """Zero or several roots pass a side condition that should single one out."""


class ContourError(DomainError):
    """Integration contour touches a singularity or the spectral support."""


class DegenerateError(RayprodError):
    """A statistic is undefined because the input has zero spread."""
