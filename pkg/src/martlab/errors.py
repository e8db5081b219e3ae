"""Exception hierarchy shared by every module."""


class MartLabError(Exception):
    """Base class for all errors raised by martlab."""


class IndeterminateTail(MartLabError):
    """The unenumerated tail cannot be controlled under the current policy."""


class ZeroMassBlock(MartLabError):
    """A partition block carries zero probability mass."""


class NotTerminating(MartLabError):
    """A limit was requested from a process whose paths are only known up to a horizon."""


class MissingUniform(MartLabError):
    """A randomized stopping rule was evaluated on a space without an auxiliary uniform."""


class HorizonExceeded(MartLabError):
    """A generative path was queried beyond its horizon."""


class PreconditionFailed(MartLabError):
    """A construction cannot start because its entry condition does not hold."""


class NotApplicable(MartLabError):
    """A construction does not apply to the given process."""


class SpecError(MartLabError, ValueError):
    """Malformed process or stopping specification."""
