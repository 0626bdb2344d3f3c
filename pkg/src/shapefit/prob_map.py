"""Per-pixel boundary-probability maps and the shape-likelihood objective.

A probability map is a float32 (h, w) grid in [0, 1], one value per source
image pixel. Maps are expensive to compute (classifier at every pixel), so
they are cached as PFM files with a sidecar recording the hash of the forest
file that produced them.
"""

import hashlib
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .imgio import read_pfm, write_pfm
from .pixel_features import feature_matrix, padded_integral
from .random_forest import Forest, predict_proba_many
from .shape_model import ShapeModel, ShapeParams, synthesize
from .geometry import as_shape

SIDECAR_SUFFIX = ".src"


def compute_prob_map(forest: Forest, img, row_chunk: int = 32) -> np.ndarray:
    """Evaluate the boundary classifier at every pixel of an image.

    Rows are processed in chunks to bound memory; the result is identical
    for any chunk size because each pixel's value depends only on the image.
    """
    arr = np.asarray(img)
    if arr.ndim != 2 or arr.size == 0:
        raise DataError(f"expected a non-empty 2-D image, got shape {arr.shape}")
    if row_chunk < 1:
        raise ConfigError(f"row_chunk must be positive, got {row_chunk}")
    h, w = arr.shape
    ii = padded_integral(arr)
    out = np.empty((h, w), dtype=np.float32)
    xs = np.arange(w, dtype=np.int64)
    for y0 in range(0, h, row_chunk):
        y1 = min(y0 + row_chunk, h)
        ys = np.repeat(np.arange(y0, y1, dtype=np.int64), w)
        cxs = np.tile(xs, y1 - y0)
        feats = feature_matrix(ii, cxs, ys)
        probs = predict_proba_many(forest, feats)
        out[y0:y1] = probs.reshape(y1 - y0, w).astype(np.float32)
    return out


def sample_bilinear_many(pmap: np.ndarray, xs, ys) -> np.ndarray:
    """Bilinear map samples at continuous positions; 0 outside the grid."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape:
        raise ConfigError("coordinate arrays must have matching shapes")
    h, w = pmap.shape
    out = np.zeros(xs.shape, dtype=float)
    inside = (xs >= 0.0) & (xs <= w - 1.0) & (ys >= 0.0) & (ys <= h - 1.0)
    if not inside.any():
        return out
    x = xs[inside]
    y = ys[inside]
    x0 = np.clip(np.floor(x).astype(np.int64), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(y).astype(np.int64), 0, max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    p00 = pmap[y0, x0].astype(float)
    p10 = pmap[y0, x1].astype(float)
    p01 = pmap[y1, x0].astype(float)
    p11 = pmap[y1, x1].astype(float)
    out[inside] = (1.0 - fy) * ((1.0 - fx) * p00 + fx * p10) + fy * ((1.0 - fx) * p01 + fx * p11)
    return out


def sample_bilinear(pmap: np.ndarray, x: float, y: float) -> float:
    """Bilinear map sample at one continuous position; 0 outside the grid."""
    return float(sample_bilinear_many(pmap, np.array([x]), np.array([y]))[0])


def shape_likelihood(pmap: np.ndarray, shape) -> float:
    """Mean map value sampled at every landmark of a shape."""
    pts = as_shape(shape)
    return float(sample_bilinear_many(pmap, pts[:, 0], pts[:, 1]).mean())


def shape_cost(pmap: np.ndarray, model: ShapeModel, params: ShapeParams) -> float:
    """One minus the likelihood of the synthesized shape; the fit objective."""
    return 1.0 - shape_likelihood(pmap, synthesize(model, params))


def shape_cost_batch(pmap: np.ndarray, model: ShapeModel, vectors) -> np.ndarray:
    """shape_cost for many stacked parameter vectors at once.

    `vectors` is an (n, k + 5) array laid out like ShapeParams.to_vector().
    """
    V = np.asarray(vectors, dtype=float)
    if V.ndim != 2 or V.shape[1] != model.k + 5:
        raise ConfigError(f"expected (n, {model.k + 5}) parameter vectors, got shape {V.shape}")
    n = V.shape[0]
    L = model.n_landmarks
    pts = (V[:, :model.k] @ model.basis + model.mean).reshape(n, L, 2)
    c = pts.mean(axis=1, keepdims=True)
    q = pts - c
    sx = V[:, model.k + 2][:, None]
    sy = V[:, model.k + 3][:, None]
    ct = np.cos(V[:, model.k + 4])[:, None]
    st = np.sin(V[:, model.k + 4])[:, None]
    qx = q[:, :, 0] * sx
    qy = q[:, :, 1] * sy
    out_x = ct * qx - st * qy + c[:, :, 0] + V[:, model.k][:, None]
    out_y = st * qx + ct * qy + c[:, :, 1] + V[:, model.k + 1][:, None]
    samples = sample_bilinear_many(pmap, out_x.reshape(-1), out_y.reshape(-1))
    return 1.0 - samples.reshape(n, L).mean(axis=1)


def file_sha256(path) -> str:
    """Hex content hash of a file (cache keys for probability maps)."""
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def save_prob_map(path, pmap, source_hash: str | None = None) -> None:
    """Write a map as PFM plus a sidecar naming the forest it came from."""
    arr = np.asarray(pmap, dtype=np.float32)
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise DataError("probability map values must lie in [0, 1]")
    write_pfm(path, arr)
    if source_hash is not None:
        Path(str(path) + SIDECAR_SUFFIX).write_text(source_hash + "\n", encoding="ascii")


def load_prob_map(path) -> np.ndarray:
    pmap = read_pfm(path)
    if pmap.size and (pmap.min() < 0.0 or pmap.max() > 1.0):
        raise DataError(f"{path}: probability map values must lie in [0, 1]")
    return pmap


def read_map_source(path) -> str | None:
    """Hash recorded in a map's sidecar, or None when absent."""
    sidecar = Path(str(path) + SIDECAR_SUFFIX)
    if not sidecar.exists():
        return None
    return sidecar.read_text(encoding="ascii").strip()
