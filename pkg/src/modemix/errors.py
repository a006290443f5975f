"""Exception hierarchy.

Everything raised for bad input derives from ``ModemixError`` so callers
(the CLI in particular) can tell invalid input apart from internal bugs.
"""


class ModemixError(ValueError):
    pass


class SignalError(ModemixError):
    """Invalid signal, tone or grid."""


class FormatError(ModemixError):
    """Malformed or inconsistent signal file."""


class DegenerateEnvelopeError(ModemixError):
    """Too few knots to build an envelope."""


class InsufficientExtremaError(ModemixError):
    """Signal has too few extrema to sift; treat it as a residue."""


class EstimatorUnreliableError(ModemixError):
    """Track has too few beat cycles for the two-tone estimator."""
