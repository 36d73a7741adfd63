"""Exception types raised across the package."""


class HierLapError(Exception):
    """Base class for all package errors."""


class InvalidDegreeError(HierLapError, ValueError):
    pass


class LevelRangeError(HierLapError, IndexError):
    pass


class DivergenceError(HierLapError, ValueError):
    """Coupling parameters give an infinite eigenvalue sum."""


class PreconditionError(HierLapError, ValueError):
    pass


class NoiseRangeError(HierLapError, ValueError):
    """A perturbation value lies outside (-1, 1)."""


class UnsupportedOrderError(HierLapError, ValueError):
    pass


class DegenerateProfileError(HierLapError, ValueError):
    pass


class InversionUnsupportedError(HierLapError, ValueError):
    """The characteristic function is not absolutely integrable."""


class GridMismatchError(HierLapError, ValueError):
    pass


class RegimeError(HierLapError, ValueError):
    """Requested computation does not apply for this homogeneity exponent."""


class InsufficientDataError(HierLapError, ValueError):
    pass
