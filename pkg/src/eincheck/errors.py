"""Exception hierarchy shared by all modules."""


class EincheckError(Exception):
    """Base class for every error this package raises on purpose."""


class ParseError(EincheckError):
    """Expression text could not be parsed.

    ``position`` is the character offset of the failure; ``expected`` is the
    set of token descriptions that would have been accepted there.
    """

    def __init__(self, message, position=None, expected=()):
        self.position = position
        self.expected = frozenset(expected)
        if position is not None:
            message = f"{message} (offset {position})"
        if self.expected:
            message = f"{message}; expected one of: {', '.join(sorted(self.expected))}"
        super().__init__(message)


class UnknownSymbolError(ParseError):
    pass


class UnknownFunctionError(ParseError):
    pass


class ArityError(ParseError):
    pass


class EvalDomainError(EincheckError):
    """Evaluation left the domain of an elementary function.

    Carries the pretty-printed offending subexpression.
    """

    def __init__(self, message, subexpression=None):
        self.subexpression = subexpression
        if subexpression is not None:
            message = f"{message} in subexpression '{subexpression}'"
        super().__init__(message)


class JetError(EincheckError):
    """Invalid jet arithmetic (base-point mismatch, zero divisor, ...)."""


class DegreeBudgetError(JetError):
    """An operation asked for more derivative depth than the jet carries."""


class TensorError(EincheckError):
    """Invalid tensor operation (slot kind mismatch, wrong valence, ...)."""


class DegenerateMetricError(EincheckError):
    """Metric determinant is numerically zero at the evaluation point."""


class DegenerateWeylError(EincheckError):
    """The Weyl scalar C.C vanishes at the point; the Lambda-field and the
    C-connection are undefined there and the conformal-Einstein test is
    inapplicable."""


class MetricFileError(EincheckError):
    """Metric definition file is missing, malformed, or inconsistent."""


class InvariantViolationError(EincheckError):
    """An internal cross-check that should hold to rounding failed; this
    indicates a bug, not bad input."""
