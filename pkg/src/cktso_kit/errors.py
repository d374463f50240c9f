"""Exception hierarchy shared by every stage of the solver."""


class SolverError(Exception):
    """Base class for all errors raised by cktso_kit."""


class ParseError(SolverError):
    pass


class UnsupportedFormat(SolverError):
    pass


class DimensionError(SolverError):
    pass


class StructurallySingular(SolverError):
    """No perfect bipartite matching exists between rows and columns."""


class ZeroDiagonal(SolverError):
    pass


class NumericallySingular(SolverError):
    """Every pivot candidate of a row is exactly zero."""

    def __init__(self, row, msg=None):
        self.row = int(row)
        super().__init__(msg or f"row {self.row}: all pivot candidates are zero")


class ZeroRow(NumericallySingular):
    def __init__(self, row):
        super().__init__(row, f"row {int(row)} has an empty pattern")


class ZeroPivot(NumericallySingular):
    def __init__(self, row):
        super().__init__(row, f"row {int(row)}: exact zero pivot during re-factorization")


class StaleSymbolic(SolverError):
    """A dependency view or solve plan was built for another factor structure."""
