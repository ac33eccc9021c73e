"""Exception hierarchy shared by all tradeforms modules."""


class TradeFormsError(Exception):
    """Base class for all library errors."""


class NonPositiveArgument(TradeFormsError):
    pass


class NonIntegrable(TradeFormsError):
    pass


class LogTermRejected(TradeFormsError):
    pass


class NotEvenlySpaced(TradeFormsError):
    pass


class InconsistentReport(TradeFormsError):
    pass


class SingularDesign(TradeFormsError):
    pass


class DegreeUnsupported(TradeFormsError):
    pass


class NoConvergence(TradeFormsError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NoInteriorOptimum(TradeFormsError):
    pass


class ZeroSecondDerivative(TradeFormsError):
    pass


class InvalidGamma(TradeFormsError):
    pass


class NoQualifyingIndustries(TradeFormsError):
    pass


class NoPositiveRoot(TradeFormsError):
    pass


class NonFiniteState(TradeFormsError):
    pass


class RankDeficient(TradeFormsError):
    pass


class DivergentDensity(TradeFormsError):
    pass


class CatalogMiss(TradeFormsError):
    pass


class GridTooCoarse(TradeFormsError):
    pass


class Divergent(TradeFormsError):
    pass


class ParameterDomain(TradeFormsError):
    pass


class SingularIntegrand(TradeFormsError):
    pass


class PreconditionViolated(TradeFormsError):
    pass


class DomainViolation(TradeFormsError):
    pass


class SingularTerm(TradeFormsError):
    pass


class NegativeDenominator(TradeFormsError):
    pass


class EmptyInsourcingRegion(TradeFormsError):
    pass


class DataError(TradeFormsError):
    pass


class UsageError(TradeFormsError):
    pass
