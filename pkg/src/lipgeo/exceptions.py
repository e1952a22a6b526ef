"""Exception hierarchy for lipgeo."""


class LipgeoError(Exception):
    """Base class for all lipgeo errors."""


class SpecError(LipgeoError, ValueError):
    """A set description is malformed (bad expression, undeclared variable)."""


class EmptySample(LipgeoError):
    """No point of the set was found in the sampling region."""


class NoConvergence(LipgeoError):
    def __init__(self, message, worst_residual=None):
        super().__init__(message)
        self.worst_residual = worst_residual


class EmptySlice(LipgeoError):
    """The level set selected by a radius function is empty at the sample."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class NotCLipschitz(LipgeoError):
    def __init__(self, message, witness=None, ratio=None):
        super().__init__(message)
        self.witness = witness
        self.ratio = ratio


class OriginNotInvertible(LipgeoError, ZeroDivisionError):
    pass


class PoleNotProjectable(LipgeoError, ZeroDivisionError):
    pass


class NotOnSphere(LipgeoError, ValueError):
    pass


class OriginNotNormalizable(LipgeoError, ZeroDivisionError):
    pass


class RadiusOutOfBand(LipgeoError, ValueError):
    pass


class ClaimedConstantViolated(LipgeoError):
    def __init__(self, message, witness=None, ratio=None):
        super().__init__(message)
        self.witness = witness
        self.ratio = ratio


class DisconnectedInput(LipgeoError):
    pass


class DisconnectedLink(LipgeoError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class ArcOffSet(LipgeoError):
    pass


class RadiusMisaligned(LipgeoError):
    pass


class EmptyBand(LipgeoError):
    pass


class Inapplicable(LipgeoError):
    """Hypothesis of a check does not hold on the supplied data."""


class NotApplicable(LipgeoError):
    """The question is vacuous for this input (e.g. infinity-side checks on a bounded set)."""


class InvalidDecomposition(LipgeoError, ValueError):
    pass


class ClaimViolated(LipgeoError):
    def __init__(self, message, stage=None, witness=None, ratio=None, trace=None):
        super().__init__(message)
        self.stage = stage
        self.witness = witness
        self.ratio = ratio
        self.trace = trace


class ConfigError(LipgeoError, ValueError):
    pass
