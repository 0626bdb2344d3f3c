"""Linear point-distribution shape model: PCA training, synthesis, bounds.

Shapes are stacked into 2L-vectors in landmark order (x0, y0, x1, y1, ...).
A trained model generates image-space shapes from a (k + 5)-dimensional
parameter vector: k deformation coefficients followed by the five pose
parameters (tx, ty, sx, sy, theta).
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, TrainingError
from .geometry import Pose, apply_pose, as_shape

MODEL_FORMAT_VERSION = 1

# Fit-time search box around a trained model, in image units.
TRANSLATION_RADIUS_PX = 100.0
SCALE_RANGE = (0.8, 1.5)
ROTATION_LIMIT_RAD = math.pi / 4.0
DEFORMATION_SIGMAS = 3.0

# Eigenvalues below this fraction of the largest are treated as zero rank.
_RANK_REL_TOL = 1e-12


@dataclass
class ShapeModel:
    """Mean shape plus principal deformation basis in the normalized frame.

    mean:              stacked 2L-vector
    basis:             (k, 2L) orthonormal rows, by decreasing eigenvalue
    eigenvalues:       (k,) positive variances along the basis rows
    variance_retained: fraction of total training variance kept by k rows
    n_landmarks:       L
    reference_scale:   centroid size (px) of a typical training shape in
                       image coordinates; required for parameter_bounds
    """

    mean: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray
    variance_retained: float
    n_landmarks: int
    reference_scale: float | None = None

    @property
    def k(self) -> int:
        return self.basis.shape[0]

    def deformation_sigmas(self) -> np.ndarray:
        """Standard deviation along each basis row (sqrt of eigenvalues)."""
        return np.sqrt(self.eigenvalues)


@dataclass
class ShapeParams:
    """Full generator input: k deformation coefficients plus a pose."""

    b: np.ndarray
    pose: Pose

    def to_vector(self) -> np.ndarray:
        return np.concatenate([
            np.asarray(self.b, dtype=float),
            [self.pose.tx, self.pose.ty, self.pose.sx, self.pose.sy, self.pose.theta],
        ])

    @classmethod
    def from_vector(cls, vec) -> "ShapeParams":
        v = np.asarray(vec, dtype=float)
        if v.ndim != 1 or v.size < 5:
            raise ConfigError(f"parameter vector must be 1-D with at least 5 entries, got shape {v.shape}")
        b = v[:-5].copy()
        tx, ty, sx, sy, theta = (float(x) for x in v[-5:])
        return cls(b=b, pose=Pose(tx, ty, sx, sy, theta))


def _stack(shapes) -> np.ndarray:
    rows = []
    n_landmarks = None
    for i, s in enumerate(shapes):
        pts = as_shape(s)
        if n_landmarks is None:
            n_landmarks = pts.shape[0]
        elif pts.shape[0] != n_landmarks:
            raise ConfigError(f"shape {i} has {pts.shape[0]} landmarks, expected {n_landmarks}")
        rows.append(pts.reshape(-1))
    return np.asarray(rows)


def fit_pca(aligned_shapes, variance_cutoff: float = 0.95, fixed_k: int | None = None,
            reference_scale: float | None = None) -> ShapeModel:
    """Train a shape model from Procrustes-aligned shapes.

    The basis comes from an eigendecomposition of the sample covariance
    (1/(N-1) normalization) of the stacked shape vectors. The number of
    retained components is the smallest k whose cumulative variance reaches
    `variance_cutoff`, or exactly `fixed_k` when given. Eigenvector signs are
    fixed (largest-magnitude entry positive) so trained models serialize
    deterministically.
    """
    X = _stack(aligned_shapes)
    n, dim = X.shape
    if n < 2:
        raise TrainingError(f"need at least 2 shapes to train, got {n}")
    if fixed_k is None and not (0.0 < variance_cutoff <= 1.0):
        raise ConfigError(f"variance cutoff must be in (0, 1], got {variance_cutoff}")
    if fixed_k is not None and not (1 <= fixed_k <= dim):
        raise ConfigError(f"fixed_k must be in [1, {dim}], got {fixed_k}")
    if reference_scale is not None and not (math.isfinite(reference_scale) and reference_scale > 0):
        raise ConfigError(f"reference scale must be positive, got {reference_scale}")

    mean = X.mean(axis=0)
    dev = X - mean
    cov = dev.T @ dev / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]

    total = float(evals.sum())
    if total <= 0.0 or evals[0] <= 0.0:
        raise TrainingError("training shapes have zero variance")

    rank = int(np.count_nonzero(evals > _RANK_REL_TOL * evals[0]))
    if fixed_k is not None:
        if fixed_k > rank:
            raise TrainingError(f"requested {fixed_k} components but data rank is only {rank}")
        k = fixed_k
    else:
        ratios = np.cumsum(evals) / total
        k = int(np.searchsorted(ratios, variance_cutoff - 1e-12) + 1)
        k = min(k, rank)

    basis = evecs[:, :k].T.copy()
    for row in basis:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    retained = float(evals[:k].sum() / total)
    return ShapeModel(mean=mean, basis=basis, eigenvalues=evals[:k].copy(),
                      variance_retained=retained, n_landmarks=dim // 2,
                      reference_scale=reference_scale)


def synthesize(model: ShapeModel, params: ShapeParams) -> np.ndarray:
    """Generate an image-space shape: mean + b . basis, then apply the pose."""
    b = np.asarray(params.b, dtype=float)
    if b.shape != (model.k,):
        raise ConfigError(f"expected {model.k} deformation coefficients, got shape {b.shape}")
    vec = model.mean + b @ model.basis
    return apply_pose(vec.reshape(model.n_landmarks, 2), params.pose)


def project(model: ShapeModel, aligned_shape) -> np.ndarray:
    """Deformation coefficients of a normalized-frame shape: basis . (shape - mean)."""
    pts = as_shape(aligned_shape)
    if pts.shape[0] != model.n_landmarks:
        raise ConfigError(f"shape has {pts.shape[0]} landmarks, model expects {model.n_landmarks}")
    return model.basis @ (pts.reshape(-1) - model.mean)


def parameter_bounds(model: ShapeModel, image_w: int, image_h: int) -> list:
    """Per-dimension (lo, hi) search box for fitting, length k + 5.

    Vector layout matches ShapeParams.to_vector(): k deformation coefficients
    bounded at +/- 3 standard deviations, then tx/ty within 100 px of the
    image center, sx/sy within 0.8-1.5 times the model's reference scale, and
    rotation within +/- 45 degrees.
    """
    if image_w <= 0 or image_h <= 0:
        raise ConfigError(f"image dimensions must be positive, got {image_w}x{image_h}")
    if model.reference_scale is None:
        raise ConfigError("model has no reference scale; train or load one that records it")
    s0 = float(model.reference_scale)
    bounds = []
    for sigma in model.deformation_sigmas():
        half = DEFORMATION_SIGMAS * float(sigma)
        bounds.append((-half, half))
    bounds.append((image_w / 2.0 - TRANSLATION_RADIUS_PX, image_w / 2.0 + TRANSLATION_RADIUS_PX))
    bounds.append((image_h / 2.0 - TRANSLATION_RADIUS_PX, image_h / 2.0 + TRANSLATION_RADIUS_PX))
    bounds.append((SCALE_RANGE[0] * s0, SCALE_RANGE[1] * s0))
    bounds.append((SCALE_RANGE[0] * s0, SCALE_RANGE[1] * s0))
    bounds.append((-ROTATION_LIMIT_RAD, ROTATION_LIMIT_RAD))
    return bounds


def model_to_json(model: ShapeModel) -> str:
    """Serialize a model to its canonical JSON document (round-trip stable)."""
    obj = {
        "version": MODEL_FORMAT_VERSION,
        "L": model.n_landmarks,
        "k": model.k,
        "mean": [float(x) for x in model.mean],
        "basis": [[float(x) for x in row] for row in model.basis],
        "eigenvalues": [float(x) for x in model.eigenvalues],
        "variance_retained": float(model.variance_retained),
        "reference_scale": None if model.reference_scale is None else float(model.reference_scale),
    }
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def model_from_json(text: str) -> ShapeModel:
    obj = json.loads(text)
    if obj.get("version") != MODEL_FORMAT_VERSION:
        raise ConfigError(f"unsupported model format version {obj.get('version')!r}")
    mean = np.asarray(obj["mean"], dtype=float)
    basis = np.asarray(obj["basis"], dtype=float)
    evals = np.asarray(obj["eigenvalues"], dtype=float)
    L = int(obj["L"])
    k = int(obj["k"])
    if mean.shape != (2 * L,) or basis.shape != (k, 2 * L) or evals.shape != (k,):
        raise ConfigError("model arrays are inconsistent with the declared L and k")
    ref = obj["reference_scale"]
    return ShapeModel(mean=mean, basis=basis, eigenvalues=evals,
                      variance_retained=float(obj["variance_retained"]),
                      n_landmarks=L,
                      reference_scale=None if ref is None else float(ref))


def save_model(path, model: ShapeModel) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(model_to_json(model))


def load_model(path) -> ShapeModel:
    with open(path, "r", encoding="ascii") as fh:
        return model_from_json(fh.read())
