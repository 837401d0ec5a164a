"""Exception hierarchy shared by all ridgeforget modules."""


class RidgeForgetError(Exception):
    """Base class for every error raised by this package."""


class ContractViolation(RidgeForgetError):
    """A caller broke an operation precondition (dimension mismatch,
    duplicate ids, gamma <= 0, ...)."""


class InputError(RidgeForgetError):
    """User-supplied data is invalid (bad CSV row, label out of range,
    empty set where a non-empty one is required)."""


class SingularityError(RidgeForgetError):
    """A small linear system that must be invertible is singular or has a
    condition estimate above the safety threshold.  The message names the
    offending sub-matrix."""


class UnlearnabilityError(SingularityError):
    """The removal core (I - F T F^T) is singular or ill-conditioned.
    Usually means the forget rows were never part of the tracked Gram, or
    cancellation has destroyed the update."""


class StateIntegrityError(RidgeForgetError):
    """Internal state failed a check that valid state can never fail
    (e.g. a learn core I + F T F^T that refuses to factorize)."""


class StateFormatError(RidgeForgetError):
    """Base class for persisted-state file problems."""


class IntegrityError(StateFormatError):
    """Persisted state is corrupt: bad magic, truncated payload, or
    checksum mismatch."""


class VersionError(StateFormatError):
    """Persisted state was written by an incompatible format version."""


class RunAbortedError(RidgeForgetError):
    """A request-stream run stopped at a failing request.  State up to the
    last completed request is still valid; the original error is chained."""

    def __init__(self, kind: str, request_index: int, cause: Exception):
        super().__init__(
            f"{kind} request {request_index} failed: {cause}"
        )
        self.kind = kind
        self.request_index = request_index
