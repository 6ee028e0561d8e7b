"""Exception hierarchy shared by every module of the package."""


class HybridCutError(Exception):
    """Base class for all package errors."""


class InvalidBudget(HybridCutError, ValueError):
    pass


class DepthExceeded(HybridCutError):
    """A circuit asked for more coherent queries than the ledger allows."""


class DegreeOverflow(HybridCutError):
    pass


class InvalidWindow(HybridCutError, ValueError):
    pass


class OutOfDomain(HybridCutError, ValueError):
    pass


class InvalidSize(HybridCutError, ValueError):
    pass


class InvalidOperator(HybridCutError, ValueError):
    pass


class InvalidInput(HybridCutError, ValueError):
    pass


class NotApplicable(HybridCutError, ValueError):
    pass


class InsufficientData(HybridCutError, ValueError):
    pass


class Singular(HybridCutError, ValueError):
    pass
