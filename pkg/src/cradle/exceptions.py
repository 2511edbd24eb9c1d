"""Exception hierarchy for chain construction and verification."""


class CradleError(ValueError):
    """Base class for every error raised by :mod:`cradle`."""


class InvalidParameters(CradleError):
    pass


class DegenerateParameters(InvalidParameters):
    """Parameters sit on a boundary where the chain collapses (c in {0, 1}, alpha in {0, 1})."""


class DegenerateSpectrum(CradleError):
    pass


class SpectrumMismatch(CradleError):
    """Supplied eigenvalues are not eigenvalues of the Jacobi matrix."""


class PersymmetryRequired(CradleError):
    pass


class PositivityViolation(CradleError):
    pass


class UnsupportedSurgery(CradleError):
    pass


class NotRealizable(CradleError):
    """The Jacobi matrix does not come from a chain with positive masses and springs."""


class StepTooLarge(CradleError):
    pass


class NoRevivalPossible(CradleError):
    pass
