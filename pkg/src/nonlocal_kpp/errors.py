"""Exception hierarchy shared by all modules."""


class NonlocalKPPError(Exception):
    """Base class for every error raised by the package."""


class InvalidKernelError(NonlocalKPPError, ValueError):
    pass


class DomainError(NonlocalKPPError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class AssumptionViolation(NonlocalKPPError):
    """A standing hypothesis of the theory (kernel, KPP or speed) fails."""


class NoMinorantError(NonlocalKPPError, ValueError):
    pass


class InsufficientHorizonError(NonlocalKPPError, ValueError):
    pass


class UnsupportedError(NonlocalKPPError):
    pass


class InvalidParametersError(NonlocalKPPError, ValueError):
    pass


class ResolutionError(NonlocalKPPError, ValueError):
    pass


class StabilityError(NonlocalKPPError, ValueError):
    pass


class DomainExhaustedError(NonlocalKPPError, RuntimeError):
    """The solution reached the guard zone of the truncated domain."""

    def __init__(self, t, value):
        self.t = t
        self.value = value
        super().__init__(
            f"front reached the right guard zone at t={t:.6g} "
            f"(max u there = {value:.3e}); widen the grid (larger x_max) or shorten t_end"
        )


class InsufficientDataError(NonlocalKPPError, ValueError):
    pass


class InconclusiveError(NonlocalKPPError):
    """A numerical certificate could not be decided (e.g. truncation too large)."""
