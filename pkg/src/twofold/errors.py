"""Exception hierarchy.

Every failure the library can report derives from :class:`TwofoldError` so
callers (and the CLI) can map them onto exit codes without string matching.
"""


class TwofoldError(Exception):
    """Base class for all library errors."""


class ConfigError(TwofoldError):
    """Malformed or inconsistent model/config input."""


class AssumptionError(TwofoldError):
    """A structural assumption on the piecewise-smooth system is violated."""


class SwitchingDegeneracy(AssumptionError):
    """``Y+ - Y-`` vanishes at a point of the switching line other than the two-fold."""


class CycleAssumptionError(AssumptionError):
    """The lower-field orbit through the corner does not return (escape, singular point)."""


class SlidingRegionViolation(AssumptionError):
    """A point expected to lie in the sliding set does not (``-Y-/(Y+ - Y-)`` outside ``(0, 1)``)."""


class NumericalError(TwofoldError):
    """A numerical routine could not deliver a result to the requested tolerance."""


class IntegrationTimeout(NumericalError):
    """No section crossing inside the allotted time budget."""


class StiffnessFailure(NumericalError):
    """Step size underflow in the integrator."""

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


class LeftNeighborhood(NumericalError):
    """Orbit left the Hausdorff neighborhood of the sliding cycle."""


class ZeroClusterError(NumericalError):
    """Zeros of the sliding field could not be separated at the grid resolution."""


class GridRefinementRequired(NumericalError):
    """Refining the return-map grid changed the number of sign changes of the displacement."""


class ChartDisagreement(NumericalError):
    """Direct and family-chart integrations disagree on a section landing."""


class IndeterminateCorner(NumericalError):
    """Corner value of the sliding field is too close to the zero threshold to decide."""


class PoleError(NumericalError):
    """The slow divergence integrand has a pole at the requested point."""


class InsufficientData(TwofoldError):
    """The cyclicity engine lacks an input it needs for the matched case."""

    def __init__(self, missing):
        self.missing = tuple(missing)
        super().__init__("insufficient data: need " + ", ".join(self.missing))
