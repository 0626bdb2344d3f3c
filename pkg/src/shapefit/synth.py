"""Synthetic radiograph-style dataset generator.

Each image contains one bright, elongated, slightly bent "bone" whose closed
boundary is built analytically: a curved spine swept with a flared width
profile and capped with circular arcs. The 64 landmarks are spaced equally by
arc length along that boundary, starting at the proximal (left, pre-rotation)
apex and traversing the upper side first. Masks mark the rasterized boundary
pixels. A bright distractor stripe runs parallel to the boundary next to
landmarks 41-51 to create false edges there, and the whole frame gets a
low-frequency background texture plus Gaussian pixel noise (sigma = 8).
"""

import logging
import math
from pathlib import Path

import numpy as np
from scipy.ndimage import binary_dilation, gaussian_filter

from .errors import DataError
from .geometry import write_landmarks
from .imgio import write_gray

logger = logging.getLogger(__name__)

N_LANDMARKS = 64

# Landmarks flanked by the false-edge stripe (inclusive index range).
DISTRACTOR_SPAN = (41, 51)

NOISE_SIGMA = 8.0

_RESAMPLE_STEP = 0.25  # px between rasterization samples along the boundary


def _resample_closed(points: np.ndarray, n_out: int) -> np.ndarray:
    """n_out points equally spaced by arc length along a closed polyline,
    starting at the polyline's first vertex."""
    closed = np.vstack([points, points[:1]])
    seg = np.sqrt(((closed[1:] - closed[:-1]) ** 2).sum(axis=1))
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    want = np.arange(n_out) * total / n_out
    idx = np.searchsorted(s, want, side="right") - 1
    idx = np.clip(idx, 0, len(seg) - 1)
    frac = (want - s[idx]) / np.where(seg[idx] > 0, seg[idx], 1.0)
    return closed[idx] + frac[:, None] * (closed[idx + 1] - closed[idx])


def _bone_outline(rng, image_w: int, image_h: int):
    """Dense closed boundary polyline (image coords), starting at the
    proximal apex. Returns None when the draw does not fit the frame."""
    length = rng.uniform(0.40, 0.52) * image_w
    half_mid = rng.uniform(0.050, 0.075) * image_h
    flare = rng.uniform(1.25, 1.6)
    bend = rng.uniform(-0.05, 0.05) * length
    angle = rng.uniform(-0.35, 0.35)
    cx = image_w / 2.0 + rng.uniform(-15.0, 15.0)
    cy = image_h / 2.0 + rng.uniform(-10.0, 10.0)

    m = 700
    t = np.linspace(0.0, 1.0, m)
    spine = np.column_stack([(t - 0.5) * length, bend * np.sin(np.pi * t)])
    dx = np.full(m, length)
    dy = bend * np.pi * np.cos(np.pi * t)
    speed = np.hypot(dx, dy)
    tangent = np.column_stack([dx / speed, dy / speed])
    normal = np.column_stack([-tangent[:, 1], tangent[:, 0]])
    radius = half_mid * (1.0 + (flare - 1.0) * (2.0 * t - 1.0) ** 4)

    top = spine + radius[:, None] * normal
    bottom = spine - radius[:, None] * normal

    def arc(center, r, u, v, phis):
        return center + r * (np.cos(phis)[:, None] * u + np.sin(phis)[:, None] * v)

    # Proximal quarter arc: apex (-tangent) up to the start of the top side.
    cap_a = arc(spine[0], radius[0], -tangent[0], normal[0],
                np.linspace(0.0, np.pi / 2.0, 60, endpoint=False))
    # Distal half arc: end of the top side around to the end of the bottom side.
    cap_b = arc(spine[-1], radius[-1], normal[-1], tangent[-1],
                np.linspace(0.0, np.pi, 120, endpoint=False)[1:])
    # Proximal quarter arc: start of the bottom side back to the apex.
    cap_c = arc(spine[0], radius[0], -normal[0], -tangent[0],
                np.linspace(0.0, np.pi / 2.0, 60, endpoint=False)[1:])

    outline = np.vstack([cap_a, top, cap_b, bottom[::-1], cap_c])

    ca, sa = math.cos(angle), math.sin(angle)
    rot = np.column_stack([ca * outline[:, 0] - sa * outline[:, 1],
                           sa * outline[:, 0] + ca * outline[:, 1]])
    placed = rot + (cx, cy)

    margin = 3.0
    if (placed[:, 0].min() < margin or placed[:, 0].max() > image_w - 1 - margin
            or placed[:, 1].min() < margin or placed[:, 1].max() > image_h - 1 - margin):
        return None
    return placed


def rasterize_closed_polyline(points, height: int, width: int) -> np.ndarray:
    """Boolean mask of the pixels nearest to a densely sampled closed polyline."""
    pts = np.asarray(points, dtype=float)
    closed = np.vstack([pts, pts[:1]])
    marks = []
    for a, b in zip(closed[:-1], closed[1:]):
        steps = max(int(math.ceil(math.hypot(*(b - a)) / _RESAMPLE_STEP)), 1)
        frac = np.arange(steps) / steps
        marks.append(a + frac[:, None] * (b - a))
    dense = np.vstack(marks)
    px = np.rint(dense[:, 0]).astype(int)
    py = np.rint(dense[:, 1]).astype(int)
    keep = (px >= 0) & (px < width) & (py >= 0) & (py < height)
    mask = np.zeros((height, width), dtype=bool)
    mask[py[keep], px[keep]] = True
    return mask


def _polygon_fill(points: np.ndarray, height: int, width: int) -> np.ndarray:
    """Even-odd scanline fill: pixels whose centers fall inside the polygon."""
    x0 = points[:, 0]
    y0 = points[:, 1]
    x1 = np.roll(x0, -1)
    y1 = np.roll(y0, -1)
    mask = np.zeros((height, width), dtype=bool)
    for y in range(height):
        yc = float(y)
        crossing = ((y0 <= yc) & (y1 > yc)) | ((y1 <= yc) & (y0 > yc))
        if not crossing.any():
            continue
        xs = x0[crossing] + (yc - y0[crossing]) * (x1[crossing] - x0[crossing]) / (y1[crossing] - y0[crossing])
        xs.sort()
        for a, b in zip(xs[0::2], xs[1::2]):
            lo = max(0, int(math.ceil(a)))
            hi = min(width - 1, int(math.floor(b)))
            if lo <= hi:
                mask[y, lo:hi + 1] = True
    return mask


def _distractor_stripe(landmarks: np.ndarray, rng, height: int, width: int) -> np.ndarray:
    """Mask of a bright stripe offset outward from the boundary next to the
    distractor landmark span."""
    lo, hi = DISTRACTOR_SPAN
    center = landmarks.mean(axis=0)
    offset = rng.uniform(6.0, 9.0)
    ribbon = []
    for j in range(lo, hi + 1):
        tangent = landmarks[(j + 1) % N_LANDMARKS] - landmarks[j - 1]
        norm = math.hypot(*tangent)
        if norm <= 0:
            continue
        n = np.array([-tangent[1], tangent[0]]) / norm
        if np.dot(n, landmarks[j] - center) < 0:
            n = -n
        ribbon.append(landmarks[j] + offset * n)
    ribbon = np.asarray(ribbon)
    stripe = np.zeros((height, width), dtype=bool)
    for a, b in zip(ribbon[:-1], ribbon[1:]):
        steps = max(int(math.ceil(math.hypot(*(b - a)) / 0.3)), 1)
        frac = np.linspace(0.0, 1.0, steps + 1)
        dense = a + frac[:, None] * (b - a)
        px = np.rint(dense[:, 0]).astype(int)
        py = np.rint(dense[:, 1]).astype(int)
        keep = (px >= 0) & (px < width) & (py >= 0) & (py < height)
        stripe[py[keep], px[keep]] = True
    return binary_dilation(stripe, iterations=2)


def _check_landmarks_on_mask(landmarks: np.ndarray, mask: np.ndarray) -> None:
    ys, xs = np.nonzero(mask)
    coords = np.column_stack([xs, ys]).astype(float)
    for j, lm in enumerate(landmarks):
        near = coords[(np.abs(coords[:, 0] - lm[0]) <= 1.5) & (np.abs(coords[:, 1] - lm[1]) <= 1.5)]
        if near.size == 0 or np.sqrt(((near - lm) ** 2).sum(axis=1)).min() > 0.75:
            raise DataError(f"landmark {j} strayed more than 0.75 px from the rasterized boundary")


def _render_image(rng, outline, landmarks, image_w, image_h):
    border = rasterize_closed_polyline(outline, image_h, image_w)
    fill = _polygon_fill(outline, image_h, image_w)
    stripe = _distractor_stripe(landmarks, rng, image_h, image_w)

    texture = gaussian_filter(rng.normal(0.0, 1.0, (image_h, image_w)), 12.0)
    texture *= 12.0 / max(float(texture.std()), 1e-9)

    canvas = 70.0 + texture
    canvas[fill] = 150.0 + 0.5 * texture[fill]
    rim = binary_dilation(border, iterations=2) & fill
    canvas[rim] += 35.0
    lit_stripe = stripe & ~fill
    canvas[lit_stripe] = 140.0 + 0.5 * texture[lit_stripe]

    canvas = gaussian_filter(canvas, 1.0)
    canvas += rng.normal(0.0, NOISE_SIGMA, (image_h, image_w))
    img = np.clip(canvas, 0.0, 255.0).astype(np.uint8)
    mask = (border.astype(np.uint8)) * 255
    return img, mask


def generate_synthetic_dataset(n_images: int, image_w: int = 300, image_h: int = 150,
                               rng_seed: int = 0, out_dir=".") -> Path:
    """Write a deterministic synthetic dataset and return its manifest path.

    Produces `n_images` triples (image, boundary mask, 64-landmark file) plus
    a manifest splitting them 60/40 into train and test entries. Identical
    seeds produce byte-identical files.
    """
    if n_images < 2:
        raise DataError(f"need at least 2 images, got {n_images}")
    if image_w < 100 or image_h < 50:
        raise DataError(f"frame {image_w}x{image_h} is too small for the bone generator")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(rng_seed)
    n_train = min(max(1, round(0.6 * n_images)), n_images - 1)
    lines = []
    for i in range(n_images):
        outline = None
        for _ in range(50):
            outline = _bone_outline(rng, image_w, image_h)
            if outline is not None:
                break
        if outline is None:
            raise DataError(f"image {i}: could not place a bone inside {image_w}x{image_h}")
        landmarks = _resample_closed(outline, N_LANDMARKS)
        img, mask = _render_image(rng, outline, landmarks, image_w, image_h)
        _check_landmarks_on_mask(landmarks, mask)

        stem = f"img_{i:03d}"
        write_gray(out / f"{stem}.pgm", img)
        write_gray(out / f"{stem}_mask.pgm", mask)
        write_landmarks(out / f"{stem}_lms.txt", landmarks)
        split = "train" if i < n_train else "test"
        lines.append(f"{split}\t{stem}.pgm\t{stem}_lms.txt\t{stem}_mask.pgm\n")
        logger.debug("synth %s: %s, %d boundary px", stem, split, int((mask != 0).sum()))

    manifest = out / "manifest.txt"
    manifest.write_text("".join(lines), encoding="ascii")
    logger.info("wrote %d synthetic images (%d train / %d test) under %s",
                n_images, n_train, n_images - n_train, out)
    return manifest
