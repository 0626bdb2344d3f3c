"""Integral images and the 14-entry Haar-like pixel descriptor.

Every pixel of interest is described by 14 rectangle mean-difference
responses evaluated in odd windows (3x3 up to 9x9) centered on it. Images
are mirror-padded by 4 px (the largest window radius) before the integral
image is built, so windows never leave the padded grid; descriptor callers
keep working in original image coordinates.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

PAD = 4  # radius of the largest catalog window (9x9)

FEATURE_KINDS = (
    "edge_horizontal",
    "edge_vertical",
    "line_horizontal",
    "line_vertical",
    "center_surround",
)


@dataclass(frozen=True)
class HaarFeature:
    """One rectangle-difference descriptor: a kind and an odd window side."""

    kind: str
    window: int

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise ConfigError(f"unknown feature kind {self.kind!r}")
        if self.window % 2 == 0 or not (3 <= self.window <= 9):
            raise ConfigError(f"window must be odd and within [3, 9], got {self.window}")
        if self.kind.startswith("line") and self.window % 3 != 0:
            raise ConfigError(f"line features need a window divisible by 3, got {self.window}")


# Fixed catalog; its order defines the feature-vector indices everywhere.
_CATALOG = tuple(
    [HaarFeature("edge_horizontal", w) for w in (3, 5, 7, 9)]
    + [HaarFeature("edge_vertical", w) for w in (3, 5, 7, 9)]
    + [HaarFeature("center_surround", w) for w in (3, 5, 7, 9)]
    + [HaarFeature("line_horizontal", 9), HaarFeature("line_vertical", 9)]
)

N_FEATURES = len(_CATALOG)


def haar_catalog() -> tuple:
    """The fixed, ordered 14-feature catalog."""
    return _CATALOG


def mirror_pad(img, pad: int = PAD) -> np.ndarray:
    """Mirror-pad a grayscale image (edge pixels included in the reflection)."""
    arr = np.asarray(img)
    if arr.ndim != 2 or arr.size == 0:
        raise DataError(f"expected a non-empty 2-D image, got shape {arr.shape}")
    return np.pad(arr, pad, mode="symmetric")


def integral_image(img) -> np.ndarray:
    """Cumulative-sum grid: entry (j, i) is the exact int64 sum of pixels
    in rows < j and columns < i. One row/column larger than the image."""
    arr = np.asarray(img)
    if arr.ndim != 2 or arr.size == 0:
        raise DataError(f"expected a non-empty 2-D image, got shape {arr.shape}")
    h, w = arr.shape
    ii = np.zeros((h + 1, w + 1), dtype=np.int64)
    ii[1:, 1:] = arr.astype(np.int64).cumsum(axis=0).cumsum(axis=1)
    return ii


def padded_integral(img) -> np.ndarray:
    """Integral image of the mirror-padded image; input to the descriptor."""
    return integral_image(mirror_pad(img))


def rect_sum(ii: np.ndarray, x0: int, y0: int, w: int, h: int) -> int:
    """Exact sum of the w x h pixel block with top-left corner (x0, y0)."""
    H, W = ii.shape[0] - 1, ii.shape[1] - 1
    if w < 1 or h < 1:
        raise ConfigError(f"rectangle sides must be positive, got {w}x{h}")
    if x0 < 0 or y0 < 0 or x0 + w > W or y0 + h > H:
        raise ConfigError(f"rectangle ({x0},{y0},{w},{h}) leaves the {W}x{H} image")
    return int(ii[y0 + h, x0 + w] - ii[y0, x0 + w] - ii[y0 + h, x0] + ii[y0, x0])


def _rect_sums(ii, x0, y0, w, h):
    # Vectorized four-corner lookups; callers guarantee in-bounds rectangles.
    return ii[y0 + h, x0 + w] - ii[y0, x0 + w] - ii[y0 + h, x0] + ii[y0, x0]


def _feature_responses(ii, feat: HaarFeature, px, py):
    """Responses of one catalog feature at padded-coordinate centers."""
    w = feat.window
    r = w // 2
    if feat.kind == "edge_horizontal":
        # Top half (center row included) minus bottom half.
        pos = _rect_sums(ii, px - r, py - r, w, r + 1)
        neg = _rect_sums(ii, px - r, py + 1, w, r)
        pos_area, neg_area = w * (r + 1), w * r
    elif feat.kind == "edge_vertical":
        pos = _rect_sums(ii, px - r, py - r, r + 1, w)
        neg = _rect_sums(ii, px + 1, py - r, r, w)
        pos_area, neg_area = (r + 1) * w, r * w
    elif feat.kind == "line_horizontal":
        # Middle third of the rows minus the two outer thirds.
        t = w // 3
        pos = _rect_sums(ii, px - r, py - t // 2, w, t)
        neg = (_rect_sums(ii, px - r, py - r, w, t)
               + _rect_sums(ii, px - r, py + t - t // 2, w, t))
        pos_area, neg_area = w * t, 2 * w * t
    elif feat.kind == "line_vertical":
        t = w // 3
        pos = _rect_sums(ii, px - t // 2, py - r, t, w)
        neg = (_rect_sums(ii, px - r, py - r, t, w)
               + _rect_sums(ii, px + t - t // 2, py - r, t, w))
        pos_area, neg_area = w * t, 2 * w * t
    else:  # center_surround
        inner = _rect_sums(ii, px - r + 1, py - r + 1, w - 2, w - 2)
        full = _rect_sums(ii, px - r, py - r, w, w)
        pos, neg = inner, full - inner
        pos_area, neg_area = (w - 2) ** 2, w * w - (w - 2) ** 2
    return pos / pos_area - neg / neg_area


def feature_matrix(ii_padded: np.ndarray, cxs, cys) -> np.ndarray:
    """Descriptors for many centers at once.

    `ii_padded` is the integral image of the mirror-padded image (see
    padded_integral); centers are given in original image coordinates and
    must lie inside the original image. Returns an (n, 14) float array.
    """
    cxs = np.asarray(cxs, dtype=np.int64)
    cys = np.asarray(cys, dtype=np.int64)
    if cxs.shape != cys.shape or cxs.ndim != 1:
        raise ConfigError("center coordinate arrays must be 1-D and equally long")
    h = ii_padded.shape[0] - 1 - 2 * PAD
    w = ii_padded.shape[1] - 1 - 2 * PAD
    if h < 1 or w < 1:
        raise ConfigError("integral image is too small to be a padded image")
    if cxs.size and (cxs.min() < 0 or cxs.max() >= w or cys.min() < 0 or cys.max() >= h):
        raise ConfigError(f"descriptor centers must lie inside the {w}x{h} image")
    px = cxs + PAD
    py = cys + PAD
    out = np.empty((cxs.size, N_FEATURES), dtype=float)
    for j, feat in enumerate(_CATALOG):
        out[:, j] = _feature_responses(ii_padded, feat, px, py)
    return out


def feature_vector(ii_padded: np.ndarray, cx: int, cy: int) -> np.ndarray:
    """The 14 descriptor responses centered at one pixel (original coords)."""
    return feature_matrix(ii_padded, np.array([cx]), np.array([cy]))[0]


def sample_training_set(images, masks, neg_ratio: int = 4, rng_seed: int = 0):
    """Extract labeled descriptors from images with boundary masks.

    Every nonzero mask pixel yields one positive (boundary) sample;
    `neg_ratio` times as many background pixels per image are drawn uniformly
    without replacement. Returns (features, labels) with labels 1 = boundary,
    0 = background. Deterministic for a fixed seed.
    """
    if len(images) != len(masks):
        raise DataError(f"got {len(images)} images but {len(masks)} masks")
    if not images:
        raise DataError("no images to sample from")
    if neg_ratio < 1:
        raise ConfigError(f"neg_ratio must be at least 1, got {neg_ratio}")
    rng = np.random.default_rng(rng_seed)
    feats = []
    labels = []
    for i, (img, mask) in enumerate(zip(images, masks)):
        img = np.asarray(img)
        mask = np.asarray(mask)
        if img.shape != mask.shape:
            raise DataError(f"image {i}: mask shape {mask.shape} differs from image shape {img.shape}")
        ii = padded_integral(img)
        border = np.argwhere(mask != 0)
        if border.shape[0] == 0:
            raise DataError(f"image {i}: mask has no border pixels")
        background = np.flatnonzero(mask.reshape(-1) == 0)
        need = neg_ratio * border.shape[0]
        if need > background.size:
            raise DataError(f"image {i}: needs {need} background samples but only "
                            f"{background.size} background pixels exist")
        chosen = background[rng.choice(background.size, size=need, replace=False)]
        ny, nx = np.divmod(chosen, img.shape[1])
        feats.append(feature_matrix(ii, border[:, 1], border[:, 0]))
        feats.append(feature_matrix(ii, nx, ny))
        labels.append(np.ones(border.shape[0], dtype=np.uint8))
        labels.append(np.zeros(need, dtype=np.uint8))
    return np.vstack(feats), np.concatenate(labels)
