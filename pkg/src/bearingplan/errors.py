"""Exception hierarchy shared by the planning, synthesis and simulation code."""


class BearingPlanError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateInput(BearingPlanError, ValueError):
    pass


class DegenerateGeometry(BearingPlanError, ValueError):
    """Construction lines are (near-)parallel or points are collinear."""


class EmptyPolytope(BearingPlanError, ValueError):
    pass


class Unbounded(BearingPlanError, ValueError):
    pass


class NotCovered(BearingPlanError, ValueError):
    """A query point lies in none of the cells."""


class Infeasible(BearingPlanError):
    """The linear program has no point with non-negative margin."""


class SynthesisInfeasible(BearingPlanError):
    """One or more edges admit no gain matrix.

    ``edges`` lists the offending ``(i, j)`` pairs.
    """

    def __init__(self, edges, message=None):
        self.edges = list(edges)
        if message is None:
            message = "synthesis infeasible for edges: " + ", ".join(
                f"({i},{j})" for i, j in self.edges
            )
        super().__init__(message)


class LandmarkInsideCell(BearingPlanError, ValueError):
    pass


class TooFewVisible(BearingPlanError):
    pass


class MissingLandmark(BearingPlanError, KeyError):
    pass


class SimulationError(BearingPlanError):
    """Base for run-time failures; carries the partial trajectory log."""

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = log


class Timeout(SimulationError):
    pass


class SensingStarved(SimulationError):
    pass
