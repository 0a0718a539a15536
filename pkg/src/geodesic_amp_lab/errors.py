"""Exception hierarchy shared by the library and the CLI.

Each error carries the process exit code the CLI uses when it escapes a run.
"""


class GeodesicAmpError(Exception):
    exit_code = 1


class ConfigInvalid(GeodesicAmpError):
    exit_code = 2


class BudgetExceeded(GeodesicAmpError):
    exit_code = 3


class IncompleteEnumeration(BudgetExceeded):
    pass


class AccuracyNotReached(GeodesicAmpError):
    exit_code = 4

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class OnSingularSet(GeodesicAmpError):
    pass


class OutOfChart(GeodesicAmpError):
    pass


class ChartExceeded(GeodesicAmpError):
    pass


class FitDegenerate(GeodesicAmpError):
    pass


class UnboundedModel(GeodesicAmpError):
    pass


class InvalidTheta(GeodesicAmpError):
    exit_code = 2
