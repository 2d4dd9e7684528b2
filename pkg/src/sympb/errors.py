"""Exception hierarchy shared by all sympb modules."""


class BilliardError(Exception):
    """Base class for all sympb errors."""


class KindMismatch(BilliardError):
    """Operation applied to a table of the wrong boundary representation."""


class GeometryError(BilliardError):
    """Boundary is not usable: nonconvex, degenerate, or a geometric root is not bracketed."""


class SearchError(BilliardError):
    """A geometric search (periodic orbit, area maximization) failed to converge."""


class SolveError(BilliardError):
    """Root bracketing or refinement of the reflection condition failed."""


class ChartError(BilliardError):
    """State outside the chart: inadmissible corner pair, out-of-band s, or twist violation."""


class ConsistencyError(BilliardError):
    """Two independent evaluations of the same quantity disagree beyond tolerance."""


class DomainError(BilliardError):
    """Parameter outside the mathematical domain of the operation."""


class ConfigError(BilliardError):
    """Invalid run configuration (empty seed list, bad iteration counts, ...)."""


class AnalysisRefused(BilliardError):
    """The requested analysis is well-posed but its preconditions do not hold.

    Mapped to exit code 2 by the CLI (as opposed to hard errors, exit code 1).
    """


class NotContracted(AnalysisRefused):
    """Cone-field contraction fails at the requested dissipation rate."""
