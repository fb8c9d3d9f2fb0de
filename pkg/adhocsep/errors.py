class AdhocSepError(Exception):
    """Base class of every error raised by adhocsep."""


class ConfigurationError(AdhocSepError):
    pass


class FormatError(AdhocSepError, ValueError):
    """Shapes, sample rates or file headers do not match what is expected."""


class CorpusError(AdhocSepError):
    """The corpus holds too few usable recordings."""


class SceneSamplingError(AdhocSepError):
    pass


class InfeasibleAcousticsError(AdhocSepError):
    pass


class MaskValidationError(AdhocSepError):
    pass


class MaskProviderError(AdhocSepError):
    def __init__(self, message: str, node_id: int | None = None, path: str | None = None) -> None:
        super().__init__(message)
        self.node_id = node_id
        self.path = path


class EstimationError(AdhocSepError):
    pass


class ProtocolError(AdhocSepError):
    """Failure of the distributed protocol, tagged with the node and the stage."""

    def __init__(
        self, message: str, node_id: int | None = None, stage: str | None = None
    ) -> None:
        tags = []
        if stage is not None:
            tags.append(f"stage={stage}")
        if node_id is not None:
            tags.append(f"node={node_id}")
        prefix = f"[{', '.join(tags)}] " if tags else ""
        super().__init__(prefix + message)
        self.node_id = node_id
        self.stage = stage


class MetricError(AdhocSepError):
    pass


class EvaluationError(AdhocSepError):
    pass


class AggregationError(AdhocSepError):
    pass
