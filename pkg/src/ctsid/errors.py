"""Exception and warning classes raised across the package."""


class CtsidError(Exception):
    """Base class for all errors raised by ctsid."""


class DegreeZero(CtsidError):
    """A constant polynomial was passed where roots are required."""


class IllConditioned(CtsidError):
    """Root finding failed to converge."""


class ZeroConstantTerm(CtsidError):
    """A polynomial cannot be normalised to unit constant term."""


class DimensionMismatch(CtsidError, ValueError):
    pass


class ImproperTransferFunction(CtsidError, ValueError):
    pass


class PoleOnGrid(CtsidError):
    """A filter pole lies on an evaluated frequency."""


class UnstableFilter(CtsidError):
    pass


class EmptySignal(CtsidError, ValueError):
    pass


class InvalidBounds(CtsidError, ValueError):
    pass


class SingularRegression(CtsidError):
    """The initialisation least-squares problem is numerically singular."""


class NearSingularNormalMatrix(CtsidError):
    """The instrumental-variable normal matrix is numerically singular.

    Usually a sign of insufficient excitation: too few sinusoids for the
    requested model order.
    """


class AssumptionA3Violated(CtsidError):
    """The input does not carry enough sinusoids (or lacks an offset)."""


class SpecInvalid(CtsidError, ValueError):
    pass


class ResonantGrid(UserWarning):
    """Sampling grid aliases an excitation frequency onto DC."""
