"""Exception and warning types shared across the package."""


class IncsynthError(Exception):
    """Base class for all errors raised by incsynth."""


class NoDataForInput(IncsynthError):
    """The dataset holds no sample for the requested input."""


class InconsistentDataWarning(UserWarning):
    """Learned lower bound exceeds the upper bound somewhere.

    Signals that the Lipschitz constant or the noise support was
    under-estimated. Not fatal.
    """


class OutOfDomain(IncsynthError):
    """A reachable box lies entirely outside the gridded domain."""


class MonotonicityViolation(IncsynthError):
    """A refined approximation table is not a monotone refinement."""


class DanglingBranch(IncsynthError):
    """A graph edit would leave a vertex without successors."""


class BrokenLasso(IncsynthError):
    """A lasso uses an edge that is not in the graph."""


class VertexIsTop(IncsynthError):
    """No winning move exists from a vertex whose measure is top."""


class NotWinning(IncsynthError):
    """A state outside the winning region was queried for a control input."""


class TooLarge(IncsynthError):
    """Instance exceeds the brute-force oracle's size guard."""


class RegionMismatch(IncsynthError):
    """Incremental and from-scratch winning regions differ."""


class RangeTooSmall(IncsynthError):
    """A progress-measure value exceeded its range without reaching top."""


class FlavorMismatch(IncsynthError):
    """The game's flavor does not match what the operation requires."""
