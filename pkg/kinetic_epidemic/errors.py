"""Exception hierarchy with machine-readable categories."""

from typing import Any, Dict, Optional


class SimulatorError(Exception):
    """Base class of every error raised by the simulator."""

    category = "internal"

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context = {k: v for k, v in context.items() if v is not None}

    def to_dict(self) -> Dict[str, Any]:
        return {"category": self.category, "message": self.message, **self.context}


class ArgumentError(SimulatorError, ValueError):
    category = "argument"


class DomainError(SimulatorError, ValueError):
    category = "domain"


class TopologyError(SimulatorError):
    category = "topology"


class DegenerateCellError(SimulatorError):
    category = "degenerate-cell"


class UnsupportedRefinementError(SimulatorError):
    category = "unsupported-refinement"


class ProjectionError(SimulatorError):
    category = "projection"


class ConfigurationError(SimulatorError):
    category = "configuration"


class IngestionError(SimulatorError):
    """Missing or malformed data file; names the file and, when known, the line."""

    category = "ingestion"

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        where = ""
        if path is not None:
            where = f" ({path}" + (f", line {line})" if line is not None else ")")
        super().__init__(message + where, path=None if path is None else str(path), line=line)


class StepFailure(SimulatorError):
    category = "step-failure"

    def __init__(self, message: str, time: Optional[float] = None, stage: Optional[int] = None):
        super().__init__(message, time=time, stage=stage)
