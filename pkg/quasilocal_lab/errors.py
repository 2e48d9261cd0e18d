class LabError(Exception):
    """Base class for every error raised by quasilocal_lab."""


class ChartError(LabError, ValueError):
    pass


class CatalogError(LabError, ValueError):
    pass


class DegenerateGeometryError(LabError, ValueError):
    pass


class GridMismatchError(DegenerateGeometryError):
    pass


class NotAsymptoticallyFlatError(LabError, ValueError):
    pass


class WeylConditionError(LabError, ValueError):
    pass


class EmbeddingNotConvergedError(LabError, RuntimeError):
    pass


class HypothesisError(LabError, ValueError):
    pass


class FlowError(LabError, ValueError):
    pass


class OutOfDomainError(LabError, ValueError):
    pass


class SceneError(LabError, ValueError):
    pass


class SceneParseError(SceneError):
    def __init__(self, message, line=None, column=None):
        location = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{location}")
        self.line = line
        self.column = column


class UnknownTopicError(LabError, KeyError):
    def __init__(self, topic, available):
        super().__init__(topic)
        self.topic = topic
        self.available = tuple(available)

    def __str__(self):
        return f"Unknown topic '{self.topic}'. Available: {', '.join(self.available)}"
