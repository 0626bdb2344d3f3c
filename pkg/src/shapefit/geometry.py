"""Landmark shapes, similarity transforms, and generalized Procrustes alignment.

A shape is an ordered set of L boundary landmarks stored as a float (L, 2)
array of (x, y) pixel coordinates, origin at the top-left corner, x rightward,
y downward. Landmark index carries meaning: landmark j refers to the same
boundary location on every shape of a dataset.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, ConfigError, DataError

logger = logging.getLogger(__name__)

MIN_LANDMARKS = 3

# Degenerate-shape guard: squared centroid size below this is treated as zero.
_DEGENERATE_SQ = 1e-18


def as_shape(points) -> np.ndarray:
    """Validate landmarks and return them as a float (L, 2) array."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DataError(f"expected an (L, 2) array of landmarks, got shape {pts.shape}")
    if pts.shape[0] < MIN_LANDMARKS:
        raise DataError(f"need at least {MIN_LANDMARKS} landmarks, got {pts.shape[0]}")
    if not np.all(np.isfinite(pts)):
        raise DataError("landmark coordinates must be finite")
    return pts


@dataclass(frozen=True)
class Pose:
    """Five-parameter transform: anisotropic scale about the shape centroid,
    then rotation about the centroid, then translation.

    Applied to a shape with centroid c, each point p maps to
    (tx, ty) + R(theta) @ diag(sx, sy) @ (p - c) + c.
    """

    tx: float = 0.0
    ty: float = 0.0
    sx: float = 1.0
    sy: float = 1.0
    theta: float = 0.0

    def __post_init__(self):
        vals = (self.tx, self.ty, self.sx, self.sy, self.theta)
        if not all(math.isfinite(v) for v in vals):
            raise ConfigError(f"pose fields must be finite, got {vals}")
        if self.sx <= 0.0 or self.sy <= 0.0:
            raise ConfigError(f"pose scales must be positive, got sx={self.sx}, sy={self.sy}")

    def inverse(self) -> "Pose":
        """Pose undoing this one; defined for uniform scale only."""
        if self.sx != self.sy:
            raise ConfigError("inverse is only defined for uniform-scale poses")
        return Pose(-self.tx, -self.ty, 1.0 / self.sx, 1.0 / self.sy, -self.theta)


def centroid(shape) -> np.ndarray:
    """Arithmetic mean of the landmarks, as a length-2 array."""
    return as_shape(shape).mean(axis=0)


def centroid_size(shape) -> float:
    """Root sum of squared landmark distances to the centroid."""
    pts = as_shape(shape)
    return float(np.sqrt(((pts - pts.mean(axis=0)) ** 2).sum()))


def apply_pose(shape, pose: Pose) -> np.ndarray:
    """Transform a shape by a pose (scale, then rotate, then translate)."""
    pts = as_shape(shape)
    c = pts.mean(axis=0)
    q = (pts - c) * (pose.sx, pose.sy)
    ct, st = math.cos(pose.theta), math.sin(pose.theta)
    rot = np.column_stack((ct * q[:, 0] - st * q[:, 1], st * q[:, 0] + ct * q[:, 1]))
    return rot + c + (pose.tx, pose.ty)


def align_similarity(source, target) -> Pose:
    """Least-squares uniform-scale pose mapping source onto target.

    Returns the pose minimizing the summed squared landmark distances
    ||apply_pose(source, pose) - target||^2 over translation, uniform scale,
    and rotation (closed form).
    """
    src = as_shape(source)
    tgt = as_shape(target)
    if src.shape != tgt.shape:
        raise ConfigError(f"landmark counts differ: {src.shape[0]} vs {tgt.shape[0]}")
    cs = src.mean(axis=0)
    ct = tgt.mean(axis=0)
    xs = src - cs
    ys = tgt - ct
    denom = float((xs ** 2).sum())
    if denom < _DEGENERATE_SQ:
        raise AlignmentError("source shape is degenerate (all landmarks coincide)")
    a = float((xs * ys).sum()) / denom
    b = float((xs[:, 0] * ys[:, 1] - xs[:, 1] * ys[:, 0]).sum()) / denom
    scale = math.hypot(a, b)
    if scale <= 0.0:
        raise AlignmentError("optimal scale is zero (degenerate target shape)")
    theta = math.atan2(b, a)
    t = ct - cs
    return Pose(float(t[0]), float(t[1]), scale, scale, theta)


@dataclass
class GPAResult:
    """Outcome of generalized Procrustes alignment.

    aligned:          shapes in the normalized frame (centroid at origin,
                      centroid size 1 up to rotation residual)
    mean:             landmark-wise mean of the aligned shapes, renormalized
    iterations:       alignment passes performed
    mean_deltas:      Frobenius change of the mean shape per iteration
    total_distances:  summed squared distances of aligned shapes to the mean,
                      per iteration (non-increasing on convergent data)
    """

    aligned: list
    mean: np.ndarray
    iterations: int
    mean_deltas: list
    total_distances: list


def _normalized(shape) -> np.ndarray:
    pts = as_shape(shape)
    pts = pts - pts.mean(axis=0)
    size = float(np.sqrt((pts ** 2).sum()))
    if size * size < _DEGENERATE_SQ:
        raise AlignmentError("degenerate shape (zero centroid size)")
    return pts / size


def generalized_procrustes(shapes, tol: float = 1e-7, max_iter: int = 100) -> GPAResult:
    """Align a set of shapes to a common centroid, scale, and orientation.

    Each shape is centered and scaled to unit centroid size, then iteratively
    rotated/rescaled onto the current mean; the mean is recomputed and
    renormalized each pass. Stops when the mean shape moves less than `tol`
    (Frobenius norm) or after `max_iter` passes.
    """
    if len(shapes) < 2:
        raise ConfigError(f"need at least 2 shapes to align, got {len(shapes)}")
    norm = [_normalized(s) for s in shapes]
    n_landmarks = norm[0].shape[0]
    for i, s in enumerate(norm):
        if s.shape[0] != n_landmarks:
            raise ConfigError(f"shape {i} has {s.shape[0]} landmarks, expected {n_landmarks}")
    if tol <= 0 or max_iter < 1:
        raise ConfigError(f"invalid GPA settings tol={tol}, max_iter={max_iter}")

    mean = _normalized(np.mean(norm, axis=0))
    aligned = norm
    deltas = []
    distances = []
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        aligned = [apply_pose(s, align_similarity(s, mean)) for s in norm]
        new_mean = _normalized(np.mean(aligned, axis=0))
        delta = float(np.sqrt(((new_mean - mean) ** 2).sum()))
        dist = float(sum(((a - new_mean) ** 2).sum() for a in aligned))
        deltas.append(delta)
        distances.append(dist)
        mean = new_mean
        logger.debug("gpa iteration %d: mean delta %.3e, total distance %.3e",
                     iterations, delta, dist)
        if delta < tol:
            break
    return GPAResult(aligned, mean, iterations, deltas, distances)


def read_landmarks(path) -> np.ndarray:
    """Read a landmark file: one "x,y" pair per line, '#' lines ignored."""
    pts = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 'x,y', got {line!r}")
            try:
                pts.append((float(parts[0]), float(parts[1])))
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric coordinate in {line!r}") from None
    if len(pts) < MIN_LANDMARKS:
        raise DataError(f"{path}: only {len(pts)} landmarks, need at least {MIN_LANDMARKS}")
    arr = np.asarray(pts, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{path}: landmark coordinates must be finite")
    return arr


def write_landmarks(path, shape) -> None:
    """Write a landmark file ("x,y" per line, full float precision)."""
    pts = as_shape(shape)
    with open(path, "w", encoding="ascii") as fh:
        for x, y in pts:
            fh.write(f"{float(x)!r},{float(y)!r}\n")
