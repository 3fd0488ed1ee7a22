"""Robust estimation of locations from noisy pairwise direction measurements.

Submodules: ``formation`` (types, generators, noise model), ``rigidity``
(well-posedness certification), ``solvers`` (LUD/CLS/LS), ``directions``
(robust pairwise direction estimation from subspace samples), ``metrics``
(alignment and NRMSE), ``experiments`` (reproducible synthetic grids), and
``cli`` (the ``locest`` command).
"""

__version__ = "0.1.0"

from .formation import (
    Formation,
    Graph,
    LocationSet,
    NoiseModelParams,
    corrupt_directions,
    exact_directions,
    generate_erdos_renyi,
    random_locations,
)
from .metrics import AlignmentResult, align_scale_translation, angular_error, nrmse
from .rigidity import (
    RigidityReport,
    extract_maximal_components,
    largest_component_restriction,
    spectral_rigidity_test,
    theorem1_oracle,
)
from .solvers import (
    SolverConfig,
    SolverResult,
    solve_cls,
    solve_inner_subproblem,
    solve_lud,
    solve_ls,
)

__all__ = [
    "AlignmentResult",
    "Formation",
    "Graph",
    "LocationSet",
    "NoiseModelParams",
    "RigidityReport",
    "SolverConfig",
    "SolverResult",
    "align_scale_translation",
    "angular_error",
    "corrupt_directions",
    "exact_directions",
    "extract_maximal_components",
    "generate_erdos_renyi",
    "largest_component_restriction",
    "nrmse",
    "random_locations",
    "solve_cls",
    "solve_inner_subproblem",
    "solve_lud",
    "solve_ls",
    "spectral_rigidity_test",
    "theorem1_oracle",
]
