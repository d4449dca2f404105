class SubgoalSearchError(Exception):
    """Base class for every failure raised by the search services."""


class InvalidInstance(SubgoalSearchError):
    pass


class ParamsOutOfRange(SubgoalSearchError):
    pass


class InvalidEpsilon(SubgoalSearchError):
    pass


class EdgeNotInContext(SubgoalSearchError):
    pass


class NoLegalEdges(SubgoalSearchError):
    pass


class NegativeHeuristic(SubgoalSearchError):
    pass


class ZeroDist(SubgoalSearchError):
    pass


class DanglingParent(SubgoalSearchError):
    """The node tree references a parent that was never stored."""


class MissingInstrumentation(SubgoalSearchError):
    pass


class InvalidWitness(SubgoalSearchError):
    pass


class OracleBudgetExceeded(SubgoalSearchError):
    pass


class InadmissibleHeuristic(SubgoalSearchError):
    pass


class ConfigError(SubgoalSearchError):
    pass
