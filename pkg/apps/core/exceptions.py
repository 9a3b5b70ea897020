from typing import Optional, Sequence, Tuple


class ReconstructionError(Exception):
    """Base error for every failure in the reconstruction pipeline"""

    def __init__(self, message: str, step: str = "reconstruction", exit_code: int = 2):
        self.message = message
        self.step = step
        self.exit_code = exit_code
        super().__init__(self.message)


class ConfigError(ReconstructionError):
    def __init__(self, message: str, step: str = "config"):
        super().__init__(message, step=step, exit_code=1)


class ExpressionSyntaxError(ConfigError):
    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} at offset {offset}", step="parse")


class UnknownIdentifierError(ConfigError):
    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset
        super().__init__(f"Unknown identifier '{name}' at offset {offset}", step="parse")


class NonDifferentiableError(ConfigError):
    def __init__(self, message: str):
        super().__init__(message, step="differentiate")


class ExpressionDomainError(ReconstructionError):
    def __init__(self, message: str):
        super().__init__(message, step="evaluation")


class DomainError(ReconstructionError):
    def __init__(self, message: str):
        super().__init__(message, step="domain")


class SignScanError(ReconstructionError):
    """Raised when the eliminated partial vanishes or changes sign on the domain"""

    def __init__(
        self,
        message: str,
        subregion: Optional[Tuple[float, float, float, float]] = None,
        suggestion: Optional[str] = None,
    ):
        self.subregion = subregion
        self.suggestion = suggestion
        if suggestion:
            message = f"{message}; {suggestion}"
        super().__init__(message, step="sign-scan")


class InversionError(ReconstructionError):
    def __init__(self, message: str):
        super().__init__(message, step="inversion")


class QuadratureError(ReconstructionError):
    def __init__(self, message: str):
        super().__init__(message, step="quadrature")


class CurveError(ReconstructionError):
    def __init__(self, message: str, station: Optional[float] = None):
        self.station = station
        super().__init__(message, step="curve")


class GraphError(ReconstructionError):
    def __init__(self, message: str):
        super().__init__(message, step="graph")


class OutOfRangeError(ReconstructionError):
    def __init__(self, message: str, valid_range: Sequence[float]):
        self.valid_range = tuple(valid_range)
        super().__init__(
            f"{message}; valid band is [{valid_range[0]!r}, {valid_range[1]!r}]",
            step="range",
        )


class CrossingAdiabatsError(ReconstructionError):
    def __init__(self, message: str):
        super().__init__(message, step="recalibration")


class EmptyOverlapError(ReconstructionError):
    def __init__(self, message: str):
        super().__init__(message, step="recalibration")


class AuditError(ReconstructionError):
    def __init__(self, message: str):
        super().__init__(message, step="audit")
