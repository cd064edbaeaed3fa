from __future__ import annotations


class DecompositionError(ValueError):
    """
    Base class for every error raised by this package.

    The CLI turns these into exit codes (see src/cli.py).
    """


class TSFormatError(DecompositionError):
    """
    Syntax error in a .ts / .sm / DIMACS text.
    """

    def __init__(self, line: int, token: str, reason: str) -> None:
        self.line = line
        self.token = token
        super().__init__(f"line {line}: {reason}: {token!r}")


class TSValidationError(DecompositionError):
    """
    A transition system breaks one of its structural rules
    (self-loop, nondeterminism, unreachable state, unused event, ...).
    """


class UnknownEventError(DecompositionError):
    pass


class SizeCapExceeded(DecompositionError):
    pass


class RegionBudgetExceeded(DecompositionError):
    pass


class SolverBudgetExceeded(DecompositionError):
    pass


class UnsatisfiableError(DecompositionError):
    pass


class StateMachineError(DecompositionError):
    pass


class NotECTSError(DecompositionError):
    """
    The input is not excitation-closed over its minimal regions.
    Label splitting would be needed, which we do not do.
    """

    def __init__(self, failing_events: list[str]) -> None:
        self.failing_events = list(failing_events)
        super().__init__(
            f"not excitation-closed, failing events: {', '.join(self.failing_events)}"
        )


class MergeError(DecompositionError):
    pass


class ConfigError(DecompositionError):
    pass
