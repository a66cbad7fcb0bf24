# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""Errors raised across the workbench and the exit codes they map to."""

from enum import Enum

CONFIG_ERROR_EXIT = 2
NO_MATCH_EXIT = 1


class Termination(str, Enum):
    """Reason a simulation stopped."""

    COMPLETED = "Completed"
    POSITIVITY_FAULT = "PositivityFault"
    DT_UNDERFLOW = "DtUnderflow"
    NON_FINITE = "NonFinite"

    @property
    def exit_code(self) -> int:
        """Process exit code reported by the command line for this termination."""
        return _EXIT_CODES[self]


_EXIT_CODES = {
    Termination.COMPLETED: 0,
    Termination.POSITIVITY_FAULT: 3,
    Termination.DT_UNDERFLOW: 4,
    Termination.NON_FINITE: 5,
}


class WorkbenchError(Exception):
    """Base error carrying the status the command line turns into an exit code."""

    def __init__(self, msg, status=None):
        super().__init__(msg)

        self.msg = msg
        self.status = status

    @property
    def exit_code(self) -> int:
        """Exit code for this error, CONFIG_ERROR_EXIT when no status is attached."""
        if isinstance(self.status, Termination):
            return self.status.exit_code
        return CONFIG_ERROR_EXIT


class DomainError(WorkbenchError, ValueError):
    """Raise this exception when numerical input lies outside an operation's domain."""


class ConfigError(WorkbenchError):
    """Raise this exception when a config file cannot be read or fails validation."""


class SimulationFault(WorkbenchError):
    """A time step produced an inadmissible state; `status` is the termination reason."""


class PositivityFault(SimulationFault):
    def __init__(self, msg):
        super().__init__(msg, Termination.POSITIVITY_FAULT)


class NonFiniteFault(SimulationFault):
    def __init__(self, msg):
        super().__init__(msg, Termination.NON_FINITE)


class DtUnderflowFault(SimulationFault):
    def __init__(self, msg):
        super().__init__(msg, Termination.DT_UNDERFLOW)
