"""Exception types shared across the package."""


class BirkhoffLabError(Exception):
    """Base class for all package-specific errors."""


class MaximizerNotFound(BirkhoffLabError):
    """Momentum maximizer search failed to converge within its budget."""


class ConvexityViolation(BirkhoffLabError):
    """Sampled fiberwise second derivative dropped to zero or below."""


class StepSizeUnderflow(BirkhoffLabError):
    """Adaptive step halving fell below the hard floor; flow likely diverges."""


class TooFewSamples(BirkhoffLabError):
    """A curve or grid was given fewer samples than the supported minimum."""


class ResamplingBudgetExceeded(BirkhoffLabError):
    """Curve refinement would exceed the node cap: extreme stretching."""


class EmptyInput(BirkhoffLabError):
    """An operation received an empty sequence."""


class WindingMismatch(BirkhoffLabError):
    """Curve winding number is not the one required by the operation."""


class NotAGraph(BirkhoffLabError):
    """Operation requires fold-free curves."""


class MissingPrimitive(BirkhoffLabError):
    """Operation requires a curve carrying primitive values."""


class TangencyDetected(BirkhoffLabError):
    """Two curves intersect at an angle too shallow for reliable values."""


class NonpositiveDuration(BirkhoffLabError):
    """Action potentials require a strictly positive time span."""


class GridMismatch(BirkhoffLabError):
    """Grid functions or matrices with incompatible resolutions."""


class DivergenceDetected(BirkhoffLabError):
    """Per-step increments of the value iteration fail to settle."""


class BarrierNotConverged(BirkhoffLabError):
    """An operation required a converged barrier but got a truncated one."""


class NoStoredArgmin(BirkhoffLabError):
    """Backtracking requested without stored argmin indices."""


class UnsupportedIndex(BirkhoffLabError):
    """Quadratic-form index outside the supported min/max/percolation range."""


class DomainExceeded(BirkhoffLabError):
    """Requested interval leaves the domain of a sampled object."""


class KinkAtSeed(BirkhoffLabError):
    """The kink detector tripped at the requested seed point."""


class FixedPointNotReached(BirkhoffLabError):
    """Value iteration did not settle within its budget."""


class IoFailure(BirkhoffLabError):
    """Report emission failed."""
