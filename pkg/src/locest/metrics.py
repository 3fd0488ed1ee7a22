"""Alignment of estimated locations to ground truth and error metrics.

Estimates are compared to truth after removing the global scale and
translation: both sets are centered, the least-squares optimal positive scale
is applied to the estimates, and the truth centroid is restored. No rotation
is applied; direction measurements live in a fixed global frame, so solver
outputs already share the truth's orientation. The normalized RMS error is

    NRMSE = sqrt( sum_i ||that_i - t_i||^2 / sum_i ||t_i - t0||^2 )

with t0 the centroid of the true locations.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, DegenerateEstimateError, DegenerateTruthError
from .formation import LocationSet


@dataclass(frozen=True)
class AlignmentResult:
    scale: float
    translation: np.ndarray
    aligned_estimates: LocationSet
    nrmse: float


def align_scale_translation(estimates: LocationSet, truth: LocationSet) -> AlignmentResult:
    """Least-squares scale + translation alignment of estimates onto truth.

    The scale minimizes sum ||s * that_c_i - t_c_i||^2 over centered point
    sets. If the unconstrained optimum is non-positive (estimates are
    anti-correlated with truth), it is clamped to a tiny positive value and a
    sign-mismatch warning is issued; the aligned estimates then collapse to
    the truth centroid and the NRMSE is ~1.
    """
    if estimates.n != truth.n or estimates.dimension != truth.dimension:
        raise ValueError("estimates and truth must have matching shape")
    est_c = estimates.points - estimates.centroid()
    tru_c = truth.points - truth.centroid()
    denom = float(np.sum(est_c * est_c))
    if denom == 0.0:
        raise DegenerateEstimateError("estimates have zero variance")
    if float(np.sum(tru_c * tru_c)) == 0.0:
        raise DegenerateTruthError("truth locations are all identical")
    s = float(np.sum(est_c * tru_c)) / denom
    if s <= 0.0:
        warnings.warn("optimal alignment scale is non-positive; clamping", RuntimeWarning)
        s = np.finfo(np.float64).tiny
    translation = truth.centroid() - s * estimates.centroid()
    aligned = LocationSet(s * estimates.points + translation)
    return AlignmentResult(scale=s, translation=translation, aligned_estimates=aligned,
                           nrmse=nrmse(aligned, truth))


def nrmse(aligned: LocationSet, truth: LocationSet) -> float:
    """Normalized root mean squared location error (expects aligned input)."""
    if aligned.n != truth.n or aligned.dimension != truth.dimension:
        raise ValueError("aligned and truth must have matching shape")
    center = truth.centroid()
    denom = float(np.sum((truth.points - center) ** 2))
    if denom == 0.0:
        raise DegenerateTruthError("truth locations are all identical")
    num = float(np.sum((aligned.points - truth.points) ** 2))
    return float(np.sqrt(num / denom))


def angular_error(estimate: np.ndarray, truth: np.ndarray) -> float:
    """Angle in [0, pi] between two unit vectors."""
    u = np.asarray(estimate, dtype=np.float64)
    v = np.asarray(truth, dtype=np.float64)
    for name, x in (("estimate", u), ("truth", v)):
        if abs(np.linalg.norm(x) - 1.0) > 1e-9:
            raise ContractViolationError(f"{name} is not unit norm")
    return float(np.arccos(np.clip(np.dot(u, v), -1.0, 1.0)))
