"""Exception types shared across the package."""


class AcklabError(Exception):
    """Base class for all package errors."""


class ValidationError(AcklabError):
    """A structure or game failed validation.

    Carries the full list of violations so callers can report every
    problem at once instead of the first one found.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class NegativeMass(AcklabError):
    pass


class PriorMismatch(AcklabError):
    pass


class ZeroMassType(AcklabError):
    pass


class NotNormalized(AcklabError):
    pass


class DomainMismatch(AcklabError):
    pass


class DepthMismatch(AcklabError):
    pass


class LPNumericalFailure(AcklabError):
    pass


class Infeasible(AcklabError):
    pass


class Unbounded(AcklabError):
    pass


class InternalContradiction(AcklabError):
    """An LP that is feasible by theory reported infeasible; carries a certificate."""

    def __init__(self, message, certificate=None):
        self.certificate = certificate
        super().__init__(message)


class Indeterminate(AcklabError):
    """A truncation-limited test could not be decided at the available depth."""

    def __init__(self, message="increase m_max to decide this query"):
        super().__init__(message)


class IndeterminateDominated(AcklabError):
    """Too many indeterminate memberships to bracket a bisection."""


class InstanceTooLarge(AcklabError):
    pass


class ResolutionTooCoarse(AcklabError):
    """Grid parameters cannot meet the requested tolerance; suggests minimal (m, z)."""

    def __init__(self, message, minimal=None):
        self.minimal = minimal
        super().__init__(message)


class NotSeparated(AcklabError):
    pass


class SingleStateUnsupported(AcklabError):
    pass


class NotRich(AcklabError):
    pass


class NotStronglyRich(AcklabError):
    pass


class UnknownCorpusEntry(AcklabError):
    pass


class ParseError(AcklabError):
    pass


class SchemaError(AcklabError):
    pass
