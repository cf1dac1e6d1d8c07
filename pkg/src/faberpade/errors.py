"""Exception hierarchy shared by all faberpade modules."""


class FaberPadeError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FaberPadeError, ValueError):
    """Invalid compact set or a point/function incompatible with it."""


class PointInsideDomain(DomainError):
    """The exterior map was asked for a point of E."""


class InsideUnitDisk(DomainError):
    """The inverse exterior map was asked for |w| <= 1."""


class BadRho(DomainError):
    """A level-curve index rho <= 1 was supplied."""


class QuadratureDivergence(FaberPadeError):
    """Contour quadrature did not resolve the function on the level curve."""


class TooFewCoefficients(FaberPadeError, ValueError):
    pass


class PoleEvaluation(FaberPadeError, ZeroDivisionError):
    """A meromorphic function was evaluated at one of its poles."""


class OnBranchCut(FaberPadeError, ValueError):
    pass


class ParseError(FaberPadeError, ValueError):
    """Malformed function expression.

    ``position`` is the 1-based column where parsing stopped and
    ``expected`` the set of tokens that would have been accepted there.
    """

    def __init__(self, message, position, expected=()):
        self.position = position
        self.expected = frozenset(expected)
        exp = ", ".join(sorted(self.expected))
        detail = f" (expected one of: {exp})" if exp else ""
        super().__init__(f"col {position}: {message}{detail}")


class DenominatorZero(FaberPadeError, ZeroDivisionError):
    pass


class ZeroPolynomial(FaberPadeError, ValueError):
    pass


class NonRationalSystem(FaberPadeError, ValueError):
    pass


class InconsistentDeclaration(FaberPadeError, ValueError):
    pass


class TooFewSamples(FaberPadeError, ValueError):
    pass


class HypothesisViolation(FaberPadeError, ValueError):
    """An experiment was asked to run outside the hypotheses it verifies."""


class ConfigError(FaberPadeError, ValueError):
    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
