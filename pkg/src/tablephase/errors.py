"""Exception types shared across the package.

Each carries the CLI exit code it maps to, so the command-line layer can
translate failures without a lookup table.
"""


class TablePhaseError(Exception):
    exit_code = 1


class InvalidInput(TablePhaseError, ValueError):
    exit_code = 2


class MismatchedTotals(InvalidInput):
    pass


class NegativeEntry(InvalidInput):
    pass


class DomainError(InvalidInput):
    """A tilting parameter left the region theta > 0."""


class ZeroMargin(InvalidInput):
    """A margin entry is zero; the MLE sits on the boundary and does not exist."""


class EmptyFiber(InvalidInput):
    pass


class Infeasible(TablePhaseError):
    """Applying a move would drive a cell negative (a rejected proposal)."""


class NotConverged(TablePhaseError):
    exit_code = 3

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class BudgetExceeded(TablePhaseError):
    exit_code = 4
