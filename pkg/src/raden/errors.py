"""Exception types raised across the package."""


class RadenError(Exception):
    """Base class for all package errors."""


class ValidationError(RadenError, ValueError):
    """Malformed input: bad shapes, non-unit directions, invalid configs."""


class DegenerateSpecError(RadenError):
    """Rejection sampling failed to place points inside the domain box."""


class DegenerateInputError(RadenError):
    """Input data cannot support the operation (empty cloud, all-zero b)."""


class DegenerateEstimateError(RadenError):
    """An estimate collapsed to something that cannot be normalized."""


class CapacityError(RadenError):
    """Explicit sparse storage would exceed the configured nonzero budget."""


class InsufficientNeighborhoodError(RadenError):
    """A patch ball contains too few points for local PCA."""


class DegeneratePatchError(RadenError):
    """Patch subsample has zero total variance."""


class InvalidGCVError(RadenError):
    """GCV denominator is not positive (effective dof >= row count)."""


class UnsupportedSpecError(RadenError):
    """The density spec lacks the analytic structure the operation needs."""


class NotConvergedWarning(UserWarning):
    """Iterative solve hit its iteration cap before reaching tolerance."""
