"""Exception hierarchy shared by every stage of the engine."""


class TradeoffForgeError(Exception):
    """Base class for all engine errors."""


class SpecError(TradeoffForgeError):
    """A run specification failed validation.

    ``path`` is a dotted/indexed field path such as
    ``operationalizations[3].params.k``.
    """

    def __init__(self, message, path=""):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class GenError(TradeoffForgeError):
    pass


class SplitError(TradeoffForgeError):
    pass


class EmptyResult(TradeoffForgeError):
    pass


class UnknownFeature(TradeoffForgeError):
    pass


class InfeasibleK(TradeoffForgeError):
    pass


class NoPositives(TradeoffForgeError):
    pass


class DegenerateData(TradeoffForgeError):
    pass


class SchemaMismatch(TradeoffForgeError):
    pass


class NoFeasibleTheta(TradeoffForgeError):
    pass


class LengthMismatch(TradeoffForgeError):
    pass


class NoProtectedVariation(TradeoffForgeError):
    pass
