"""Exception hierarchy shared by the construction stages."""


class ConstructionError(RuntimeError):
    """A pipeline stage could not produce a valid object."""

    stage = "construct"


class FieldOverflowError(ValueError):
    """Hyperbolic argument beyond the supported cap."""


class WavesetError(ConstructionError):
    stage = "waveset"


class ConditioningError(ConstructionError):
    stage = "solve"


class EpsilonSearchError(ConstructionError):
    stage = "epsilon"


class TraceError(ConstructionError):
    stage = "trace"


class SourceError(ConstructionError):
    stage = "build"


class DomainError(ValueError):
    """Point outside the closure of the constructed domain."""


class ConfigError(ValueError):
    pass


class StageOrderError(RuntimeError):
    """A stage was run before the artifacts it consumes exist."""
