class WalkoptError(Exception):
    """Base class for library errors."""


class UnreachableError(WalkoptError):
    """A target set is not reached almost surely from some supported start."""


class NotErgodicError(WalkoptError):
    """Power iteration did not converge to a unique stationary distribution."""


class InfeasibleError(WalkoptError):
    """An LP or a covering problem has no feasible point."""


class UnboundedError(WalkoptError):
    """An LP objective is unbounded over its feasible region."""


class SolverError(WalkoptError):
    """A numerical backend failed for a reason other than (in)feasibility."""


class SizeGuardError(WalkoptError, ValueError):
    """An exact brute-force routine was asked for an instance above its size cap."""


class BudgetWarning(UserWarning):
    """The selection budget cannot satisfy a structural requirement."""
