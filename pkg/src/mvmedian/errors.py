"""Exception types.

Two families: InputError (bad arguments / unparsable data, CLI exit code 2)
and SolverFailure (well-formed input on which a solver cannot proceed,
CLI exit code 3).
"""


class MvmedianError(Exception):
    pass


class InputError(MvmedianError):
    pass


class SolverFailure(MvmedianError):
    pass


# -- input side ------------------------------------------------------------

class EmptyInput(InputError):
    pass


class IndexOutOfRange(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class DimUnsupported(InputError):
    pass


class ParseError(InputError):
    pass


class InvalidDensity(InputError):
    pass


class IncompatibleAggregator(InputError):
    pass


# -- solver side -----------------------------------------------------------

class DegenerateData(SolverFailure):
    pass


class SingularCovariance(SolverFailure):
    pass


class DenominatorVanishes(SolverFailure):
    pass


class DensityVanishesInside(SolverFailure):
    pass


class VanishingGradient(SolverFailure):
    pass


class SingularJacobian(SolverFailure):
    pass


class RankDeficient(SolverFailure):
    pass


class UnstableStep(SolverFailure):
    pass


class CurveSelfIntersection(SolverFailure):
    pass


class NonPositiveDensity(SolverFailure):
    pass
