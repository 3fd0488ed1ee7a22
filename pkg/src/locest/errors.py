"""Exception types raised by the locest package."""


class LocestError(Exception):
    """Base class for all locest errors."""


class DegeneratePairError(LocestError):
    """An edge connects two coincident points, so its direction is undefined."""

    def __init__(self, i: int, j: int):
        super().__init__(f"edge ({i}, {j}) connects coincident points; direction undefined")
        self.edge = (i, j)


class OracleSizeError(LocestError):
    """Graph too large for the exhaustive combinatorial rigidity oracle."""


class TrivialInputError(LocestError):
    """Input too small for the requested analysis (fewer than 2 vertices)."""


class NoWellPosedSubproblemError(LocestError):
    """No rigid component with at least 2 vertices exists."""


class UnsolvableFormationError(LocestError):
    """The formation cannot be solved (empty edge set or disconnected graph)."""


class InnerSolverError(LocestError):
    """Numerical failure inside the weighted least-squares subproblem."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message if iteration is None else f"{message} (outer iteration {iteration})")
        self.iteration = iteration


class InsufficientSamplesError(LocestError):
    """Fewer than two usable subspace samples for a pair."""


class LineEstimationError(LocestError):
    """Line estimation failed (all samples zero or eigensolver failure)."""


class SignAmbiguousError(LocestError):
    """Cheirality voting cannot decide the direction sign for a pair."""


class DegenerateEstimateError(LocestError):
    """Estimated locations have zero variance; alignment is undefined."""


class DegenerateTruthError(LocestError):
    """Ground-truth locations are all identical; NRMSE denominator is zero."""


class ContractViolationError(LocestError):
    """An input violated a documented precondition (e.g. non-unit vector)."""


class ExperimentSpecError(LocestError):
    """Malformed experiment specification or command-line arguments."""
