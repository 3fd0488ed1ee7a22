"""Robust pairwise direction estimation from 2-D subspace samples.

For a camera pair (i, j) observing common scene points, each correspondence k
yields a unit vector nu_ij^k = normalize(R_i eta_i^k x R_j eta_j^k), where
eta = (q / f, 1) homogenizes the image observation. Every nu_ij^k is, for
noiseless data, orthogonal to the baseline t_i - t_j, so the sample set spans
the 2-D complement of the pair direction. The undirected line through the two
camera locations is recovered by minimizing sum_k |gamma^T nu_k| on the unit
sphere, using IRLS where each reweighted subproblem is a smallest-eigenvector
extraction; a PCA estimator (squared objective, single eigenproblem) serves
as the non-robust baseline. The sign of the line is fixed by cheirality: the
triangulated scene points must lie in front of both cameras.

Scene synthesis places cameras on a randomized ring looking inward at a
standard-normal point cloud; perturbed copies of the true rotations stand in
for the orientation estimates of a real pipeline.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    InsufficientSamplesError,
    LineEstimationError,
    SignAmbiguousError,
)
from .seeds import rng_from

ROTATION_ORTHOGONALITY_TOL = 1e-10
_SCENE_RETRIES = 50


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera: rotation (world axes as columns), location, focal length.

    A world point P is seen in camera coordinates as R^T (P - t) and projects
    to q = (f / depth) * (x, y) for positive depth.
    """

    rotation: np.ndarray  # (3, 3), det +1
    location: np.ndarray  # (3,)
    focal_length: float

    def __post_init__(self):
        R = np.array(self.rotation, dtype=np.float64)
        t = np.array(self.location, dtype=np.float64)
        if R.shape != (3, 3) or t.shape != (3,):
            raise ValueError("rotation must be 3x3 and location a 3-vector")
        if np.linalg.norm(R.T @ R - np.eye(3)) > ROTATION_ORTHOGONALITY_TOL:
            raise ValueError("rotation is not orthogonal within 1e-10")
        if np.linalg.det(R) < 0:
            raise ValueError("rotation must have determinant +1")
        if self.focal_length <= 0:
            raise ValueError("focal length must be positive")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "location", t)


@dataclass(frozen=True)
class SubspaceSampleSet:
    """Unit vectors nominally orthogonal to the baseline of one camera pair.

    Zero rows are kept (the normalize(0) = 0 convention for degenerate cross
    products) and skipped by the estimators.
    """

    pair: tuple[int, int]
    samples: np.ndarray  # (m_ij, 3); rows unit norm within 1e-12 or exactly zero

    def __post_init__(self):
        s = np.array(self.samples, dtype=np.float64).reshape(-1, 3)
        norms = np.linalg.norm(s, axis=1)
        ok = (np.abs(norms - 1.0) <= 1e-12) | (norms == 0.0)
        if not np.all(ok):
            raise ValueError("samples must be unit norm within 1e-12 or exactly zero")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "pair", (int(self.pair[0]), int(self.pair[1])))

    def nonzero_samples(self) -> np.ndarray:
        keep = np.linalg.norm(self.samples, axis=1) > 0.0
        return self.samples[keep]


@dataclass(frozen=True)
class LineFit:
    """Unsigned line estimate with a uniqueness diagnostic.

    ``condition`` is the ratio of the second-smallest to the smallest
    eigenvalue of the (weighted) sample covariance: values near 1 mean the
    minimizing direction is not unique (rank-deficient samples).
    """

    direction: np.ndarray  # unit vector, sign fixed lexicographically
    condition: float
    iterations: int
    objective_trace: np.ndarray


@dataclass(frozen=True)
class LineEstimate:
    """A signed pairwise direction: gamma_hat = sign * line."""

    line: np.ndarray
    sign: int

    @property
    def direction(self) -> np.ndarray:
        return self.sign * self.line


def _lex_sign(v: np.ndarray) -> np.ndarray:
    """Of v and -v, return the lexicographically larger representative."""
    for x in v:
        if x > 0.0:
            return v
        if x < 0.0:
            return -v
    return v


def _look_at_rotation(location: np.ndarray) -> np.ndarray:
    """Rotation whose optical (z) axis points from `location` at the origin."""
    z = -location / np.linalg.norm(location)
    up = np.array([0.0, 0.0, 1.0])
    if abs(z @ up) > 0.99:
        up = np.array([0.0, 1.0, 0.0])
    x = np.cross(up, z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return np.column_stack([x, y, z])


def project_point(camera: CameraModel, point: np.ndarray) -> np.ndarray | None:
    """Image coordinates of a world point, or None if it lies behind."""
    pc = camera.rotation.T @ (np.asarray(point, dtype=np.float64) - camera.location)
    if pc[2] <= 0.0:
        return None
    return (camera.focal_length / pc[2]) * pc[:2]


def synth_scene(num_cameras: int, num_points: int, seed: int,
                ) -> tuple[list[CameraModel], np.ndarray, list[dict[int, np.ndarray]]]:
    """Random ring of inward-looking cameras around a normal point cloud.

    Returns (cameras, points, image_obs) where image_obs[i] maps visible
    point indices to 2-D image coordinates. Cameras seeing fewer than two
    points are redrawn a bounded number of times.
    """
    if num_cameras < 2:
        raise ValueError("need at least 2 cameras")
    if num_points < 2:
        raise ValueError("need at least 2 points")
    rng = rng_from(seed)
    points = rng.normal(size=(num_points, 3))
    cameras: list[CameraModel] = []
    image_obs: list[dict[int, np.ndarray]] = []
    for _ in range(num_cameras):
        for attempt in range(_SCENE_RETRIES + 1):
            theta = rng.uniform(0.0, 2.0 * np.pi)
            radius = 4.0 + rng.uniform(-0.5, 0.5)
            height = rng.uniform(-0.5, 0.5)
            loc = np.array([radius * np.cos(theta), radius * np.sin(theta), height])
            cam = CameraModel(rotation=_look_at_rotation(loc), location=loc,
                              focal_length=rng.uniform(0.9, 1.2))
            obs = {}
            for k, P in enumerate(points):
                q = project_point(cam, P)
                if q is not None:
                    obs[k] = q
            if len(obs) >= 2:
                break
        else:
            raise RuntimeError("could not draw a camera seeing >= 2 points")
        cameras.append(cam)
        image_obs.append(obs)
    return cameras, points, image_obs


def perturb_cameras(cameras: list[CameraModel], angle: float, seed: int) -> list[CameraModel]:
    """Rotate each camera's orientation by `angle` radians about a random axis."""
    if angle == 0.0:
        return list(cameras)
    rng = rng_from(seed)
    out = []
    for cam in cameras:
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        K = np.array([[0.0, -axis[2], axis[1]],
                      [axis[2], 0.0, -axis[0]],
                      [-axis[1], axis[0], 0.0]])
        Q = np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)
        out.append(CameraModel(rotation=Q @ cam.rotation, location=cam.location,
                               focal_length=cam.focal_length))
    return out


def build_nu_samples(cameras: list[CameraModel], image_obs: list[dict[int, np.ndarray]],
                     pair: tuple[int, int]) -> SubspaceSampleSet:
    """Subspace samples for one camera pair from its common observations."""
    i, j = pair
    common = sorted(set(image_obs[i]) & set(image_obs[j]))
    if len(common) < 2:
        raise InsufficientSamplesError(f"pair {pair} has {len(common)} common points")
    cam_i, cam_j = cameras[i], cameras[j]
    rows = []
    for k in common:
        eta_i = np.append(image_obs[i][k] / cam_i.focal_length, 1.0)
        eta_j = np.append(image_obs[j][k] / cam_j.focal_length, 1.0)
        raw = np.cross(cam_i.rotation @ eta_i, cam_j.rotation @ eta_j)
        nrm = np.linalg.norm(raw)
        rows.append(raw / nrm if nrm > 0.0 else np.zeros(3))
    samples = SubspaceSampleSet(pair=(i, j), samples=np.array(rows))
    if samples.nonzero_samples().shape[0] < 2:
        raise InsufficientSamplesError(f"pair {pair} has < 2 nonzero samples")
    return samples


def _covariance_eig(V: np.ndarray, weights: np.ndarray | None = None):
    M = V.T @ V if weights is None else (V * weights[:, None]).T @ V
    try:
        evals, evecs = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise LineEstimationError(f"eigensolver failed: {exc}") from exc
    return evals, evecs


def _condition(evals: np.ndarray) -> float:
    # Eigenvalues below the covariance's float noise floor count as zero;
    # two zero eigenvalues mean the minimizing direction is not unique.
    floor = 1e-12 * max(float(evals[-1]), np.finfo(np.float64).tiny)
    lam0, lam1 = float(evals[0]), float(evals[1])
    if lam1 <= floor:
        return 1.0
    if lam0 <= floor:
        return np.inf
    return lam1 / lam0


def estimate_line_pca(samples: SubspaceSampleSet) -> LineFit:
    """Smallest eigenvector of the raw sample covariance (squared objective)."""
    V = samples.nonzero_samples()
    if V.shape[0] < 2:
        raise LineEstimationError("need at least 2 nonzero samples")
    evals, evecs = _covariance_eig(V)
    gamma = _lex_sign(evecs[:, 0])
    objective = float(np.sum((V @ gamma) ** 2))
    return LineFit(direction=gamma, condition=_condition(evals), iterations=1,
                   objective_trace=np.array([objective]))


def estimate_line_robust(samples: SubspaceSampleSet, delta: float = 1e-12,
                         tol: float = 1e-10, max_iters: int = 100) -> LineFit:
    """IRLS on the sphere for the robust objective sum_k |gamma^T nu_k|.

    Each iteration reweights by ((gamma^T nu_k)^2 + delta)^(-1/2) and takes
    the smallest eigenvector of the weighted covariance; the regularized
    objective sum_k sqrt((gamma^T nu_k)^2 + delta) is non-increasing. Starts
    from the PCA estimate; returns an unsigned direction.
    """
    V = samples.nonzero_samples()
    if V.shape[0] < 2:
        raise LineEstimationError("need at least 2 nonzero samples")
    gamma = estimate_line_pca(samples).direction
    trace = [float(np.sum(np.sqrt((V @ gamma) ** 2 + delta)))]
    evals = None
    iters = 0
    for iters in range(1, max_iters + 1):
        w = 1.0 / np.sqrt((V @ gamma) ** 2 + delta)
        evals, evecs = _covariance_eig(V, w)
        new_gamma = _lex_sign(evecs[:, 0])
        trace.append(float(np.sum(np.sqrt((V @ new_gamma) ** 2 + delta))))
        change = np.arccos(min(1.0, abs(float(np.dot(gamma, new_gamma)))))
        gamma = new_gamma
        if change < tol:
            break
    condition = _condition(evals) if evals is not None else np.inf
    return LineFit(direction=gamma, condition=condition, iterations=iters,
                   objective_trace=np.array(trace))


def _triangulate_midpoint(o1: np.ndarray, u1: np.ndarray,
                          o2: np.ndarray, u2: np.ndarray) -> np.ndarray | None:
    """Midpoint of the shortest segment between two rays; None if parallel."""
    a = u1 @ u1
    b = u1 @ u2
    c = u2 @ u2
    det = a * c - b * b
    if det <= 1e-12 * a * c:
        return None
    w = o2 - o1
    lam1 = (c * (w @ u1) - b * (w @ u2)) / det
    lam2 = (b * (w @ u1) - a * (w @ u2)) / det
    return 0.5 * (o1 + lam1 * u1 + o2 + lam2 * u2)


def disambiguate_sign(line: np.ndarray, cameras: list[CameraModel],
                      image_obs: list[dict[int, np.ndarray]],
                      pair: tuple[int, int]) -> int:
    """Majority cheirality vote for the sign of an estimated line.

    For each candidate sign the pair is placed at t_i - t_j = sign * line
    (unit baseline), every common point is triangulated by the midpoint
    method, and points with positive depth in both cameras vote for that
    sign. Ties break toward +1 with a warning.
    """
    i, j = pair
    common = sorted(set(image_obs[i]) & set(image_obs[j]))
    if not common:
        raise SignAmbiguousError(f"pair {pair} has no common points")
    cam_i, cam_j = cameras[i], cameras[j]
    gamma0 = np.asarray(line, dtype=np.float64)
    votes = {}
    triangulable = 0
    for sign in (1, -1):
        t_i = sign * gamma0
        t_j = np.zeros(3)
        count = 0
        for k in common:
            eta_i = np.append(image_obs[i][k] / cam_i.focal_length, 1.0)
            eta_j = np.append(image_obs[j][k] / cam_j.focal_length, 1.0)
            X = _triangulate_midpoint(t_i, cam_i.rotation @ eta_i,
                                      t_j, cam_j.rotation @ eta_j)
            if X is None:
                continue
            triangulable += 1
            depth_i = (cam_i.rotation.T @ (X - t_i))[2]
            depth_j = (cam_j.rotation.T @ (X - t_j))[2]
            if depth_i > 0.0 and depth_j > 0.0:
                count += 1
        votes[sign] = count
    if triangulable == 0:
        raise SignAmbiguousError(f"pair {pair}: no triangulable points")
    if votes[1] == votes[-1]:
        if votes[1] == 0:
            raise SignAmbiguousError(f"pair {pair}: no point in front under either sign")
        warnings.warn(f"pair {pair}: cheirality vote tied; choosing +1", RuntimeWarning)
        return 1
    return 1 if votes[1] > votes[-1] else -1


def estimate_pair_direction(samples: SubspaceSampleSet, cameras: list[CameraModel],
                            image_obs: list[dict[int, np.ndarray]],
                            method: str = "robust", delta: float = 1e-12,
                            tol: float = 1e-10, max_iters: int = 100,
                            ) -> tuple[LineEstimate, LineFit]:
    """Line estimation plus sign disambiguation for one pair."""
    if method == "robust":
        fit = estimate_line_robust(samples, delta=delta, tol=tol, max_iters=max_iters)
    elif method == "pca":
        fit = estimate_line_pca(samples)
    else:
        raise ValueError(f"unknown method {method!r}")
    sign = disambiguate_sign(fit.direction, cameras, image_obs, samples.pair)
    return LineEstimate(line=fit.direction, sign=sign), fit


def inject_outlier_samples(samples: SubspaceSampleSet, fraction: float,
                           seed: int) -> SubspaceSampleSet:
    """Replace each sample independently with a uniform random unit vector
    with the given probability."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must be in [0, 1]")
    if fraction == 0.0:
        return samples
    rng = rng_from(seed)
    s = np.array(samples.samples)
    hit = rng.random(s.shape[0]) < fraction
    raw = rng.normal(size=(int(hit.sum()), 3))
    nrm = np.linalg.norm(raw, axis=1)
    while np.any(nrm == 0.0):
        raw[nrm == 0.0] = rng.normal(size=(int((nrm == 0.0).sum()), 3))
        nrm = np.linalg.norm(raw, axis=1)
    s[hit] = raw / nrm[:, None]
    return SubspaceSampleSet(pair=samples.pair, samples=s)
