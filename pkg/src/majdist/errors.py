"""Exception hierarchy shared across the package."""


class MajdistError(Exception):
    """Base class for all package errors."""


class InputError(MajdistError, ValueError):
    """Malformed or inconsistent caller input."""


class LoadError(InputError):
    """Base class for instance/plan file problems."""


class MissingColumnError(LoadError):
    pass


class IdMismatchError(LoadError):
    pass


class DisconnectedGraphError(LoadError):
    pass


class SchemaError(LoadError):
    pass


class PlanValidationError(LoadError):
    """A plan violates partition, contiguity or balance.

    ``district`` holds the offending district index when one can be named.
    """

    def __init__(self, message, district=None):
        super().__init__(message)
        self.district = district


class PartitionError(PlanValidationError):
    pass


class ContiguityError(PlanValidationError):
    pass


class BalanceError(PlanValidationError):
    pass


class InternalConsistencyError(MajdistError, RuntimeError):
    """A solver result failed post-hoc verification."""


class GenerationError(MajdistError, RuntimeError):
    """Tree generation ran out of backtracking budget."""


class DataError(MajdistError, ValueError):
    """Instance data cannot support a computed quantity."""


class BruteForceTooLarge(MajdistError):
    """Region too large for exhaustive enumeration."""
