"""Exception types raised across the package.

Data/file problems derive from DataError, numerical failures from
NumericalError; the CLI maps these to exit codes 2 and 3.
"""


class MetasegError(Exception):
    pass


class DataError(MetasegError):
    pass


class NumericalError(MetasegError):
    pass


class MalformedHeader(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class NotAProbability(DataError):
    pass


class LabelOutOfRange(DataError):
    pass


class IoFailure(DataError):
    pass


class EmptyDataset(DataError):
    pass


class EmptyInput(DataError):
    pass


class EmptyInterior(DataError):
    pass


class SingleClass(DataError):
    pass


class SpecInfeasible(DataError):
    pass


class NonConvergence(NumericalError):
    pass


class SeparableDivergence(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


class ZeroVariance(NumericalError):
    pass
