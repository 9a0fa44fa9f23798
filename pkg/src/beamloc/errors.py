"""Exception types raised across beamloc."""


class BeamlocError(Exception):
    """Base class for all library errors."""


class InvalidParameter(BeamlocError, ValueError):
    """A parameter violates the invariant of the type that owns it."""


class SeriesNotConverged(BeamlocError, ArithmeticError):
    """An infinite series did not reach its tolerance within ``max_terms``."""


class DegenerateDistribution(BeamlocError, ValueError):
    """The requested distribution has no mass where it is needed (e.g. rho = 0)."""


class DegenerateReparametrization(BeamlocError, ValueError):
    """Mapping information about q onto eta requires eta1 != eta2."""


class EmptyGrid(BeamlocError, ValueError):
    """A search grid has no points."""


class EstimatorFailure(BeamlocError):
    """An edge estimator could not produce an estimate for a dataset."""


class NoCrossing(EstimatorFailure):
    """The interpolated yield profile never crosses the threshold upward."""


class DegenerateLikelihood(EstimatorFailure):
    """The log-likelihood is -inf over the whole search grid."""

