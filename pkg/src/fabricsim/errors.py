"""Exception types shared across the simulator."""


class ValidationError(ValueError):
    """A spec, plan, or config value is malformed or inconsistent."""


class ConfigError(ValidationError):
    """A run config file failed to parse or validate."""


class BatchTooLargeError(ValidationError):
    """Requested batch exceeds device memory; carries the feasible maximum."""

    def __init__(self, requested: int, max_batch: int):
        super().__init__(
            f"batch {requested} exceeds the largest feasible batch {max_batch}"
        )
        self.requested = requested
        self.max_batch = max_batch


class InfeasiblePlanError(RuntimeError):
    """No parallelism plan satisfied the constraints; carries the reasons."""

    def __init__(self, message: str, reasons: dict[str, int] | None = None):
        super().__init__(message)
        self.reasons = dict(reasons or {})


def require(condition: bool, message: str) -> None:
    if not condition:
        raise ValidationError(message)
