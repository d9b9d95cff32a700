"""Exception hierarchy.

The three base classes map onto the CLI exit codes: configuration problems
(1), bad trace input (2) and broken internal invariants (3).
"""


class VmReassignError(Exception):
    pass


class ConfigError(VmReassignError, ValueError):
    pass


class TraceError(VmReassignError):
    pass


class InvariantViolation(VmReassignError, RuntimeError):
    pass


# core model
class CapacityViolation(InvariantViolation):
    pass


class UnknownVm(VmReassignError, KeyError):
    pass


# metrics
class EmptyFlavorSet(ConfigError):
    pass


class ZeroRegionCapacity(ConfigError):
    pass


# schedulers / intensifier
class NoFeasiblePm(VmReassignError):
    pass


class InfeasibleAssignment(ConfigError):
    pass


class NonEmptyCluster(InvariantViolation):
    pass


# trace io
class ParseError(TraceError):
    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class EmptyTrace(TraceError):
    pass


class NotEnoughRequests(TraceError):
    pass
