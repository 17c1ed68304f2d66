"""Exception hierarchy for the simulator."""


class DDMError(Exception):
    """Base class for every error raised by ddmsim."""


class InvalidCoreError(DDMError, ValueError):
    pass


class InvalidDemandError(DDMError, ValueError):
    pass


class MalformedRegisterError(DDMError, ValueError):
    pass


class PolicyViolationError(DDMError):
    """Raised when an operation would halt a core that is being protected."""


class SimStateError(DDMError):
    pass


class ValidationError(DDMError, ValueError):
    """Carries every violation found, not just the first."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors) if self.errors else "invalid input")


class ScenarioError(ValidationError):
    pass


class DeadlineError(DDMError):
    """Cycle budget ran out. ``partial`` holds the result up to that point."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class InsufficientTraceError(DDMError, ValueError):
    pass


class AnalysisError(DDMError, ValueError):
    pass


class ConfigError(DDMError, ValueError):
    pass
