"""Image file I/O: 8-bit grayscale PGM/PNG and float32 PFM grids.

PGM and PFM use in-house codecs so outputs are byte-deterministic; PNG goes
through Pillow.
"""

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataError


def _validate_gray(img) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim != 2 or arr.size == 0:
        raise DataError(f"expected a non-empty 2-D grayscale image, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise DataError(f"expected uint8 pixels, got dtype {arr.dtype}")
    return arr


def read_gray(path) -> np.ndarray:
    """Read an 8-bit grayscale image (binary PGM or PNG) as a (h, w) uint8 array."""
    p = Path(path)
    suffix = p.suffix.lower()
    if suffix == ".pgm":
        return _read_pgm(p)
    if suffix == ".png":
        try:
            with Image.open(p) as im:
                return np.asarray(im.convert("L"), dtype=np.uint8)
        except (OSError, ValueError) as e:
            raise DataError(f"{p}: cannot read PNG ({e})") from None
    raise DataError(f"{p}: unsupported image format {suffix!r} (expected .pgm or .png)")


def write_gray(path, img) -> None:
    """Write a uint8 grayscale image; format chosen by extension (.pgm or .png)."""
    arr = _validate_gray(img)
    p = Path(path)
    suffix = p.suffix.lower()
    if suffix == ".pgm":
        _write_pgm(p, arr)
    elif suffix == ".png":
        Image.fromarray(arr, mode="L").save(p, format="PNG")
    else:
        raise DataError(f"{p}: unsupported image format {suffix!r} (expected .pgm or .png)")


def _read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens = []
    i = 0
    # Header: magic, width, height, maxval; '#' starts a comment to end of line.
    while len(tokens) < 4:
        if i >= len(data):
            raise DataError(f"{path}: truncated PGM header")
        c = data[i:i + 1]
        if c in b" \t\r\n":
            i += 1
        elif c == b"#":
            j = data.find(b"\n", i)
            i = len(data) if j < 0 else j + 1
        else:
            j = i
            while j < len(data) and data[j:j + 1] not in b" \t\r\n#":
                j += 1
            tokens.append(data[i:j])
            i = j
    if tokens[0] != b"P5":
        raise DataError(f"{path}: not a binary (P5) PGM file")
    try:
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError:
        raise DataError(f"{path}: malformed PGM header") from None
    if w < 1 or h < 1 or not (0 < maxval < 256):
        raise DataError(f"{path}: unsupported PGM geometry {w}x{h} maxval {maxval}")
    i += 1  # single whitespace byte after maxval
    raster = data[i:i + w * h]
    if len(raster) != w * h:
        raise DataError(f"{path}: PGM raster has {len(raster)} bytes, expected {w * h}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w).copy()


def _write_pgm(path, arr: np.ndarray) -> None:
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(arr.tobytes())


def read_pfm(path) -> np.ndarray:
    """Read a grayscale PFM ("Pf") file as a float32 (h, w) array."""
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=3)
    if len(parts) != 4 or parts[0] != b"Pf":
        raise DataError(f"{path}: not a grayscale (Pf) PFM file")
    try:
        w, h = int(parts[1]), int(parts[2])
    except ValueError:
        raise DataError(f"{path}: malformed PFM dimensions") from None
    scale_token, _, raster = parts[3].partition(b"\n")
    try:
        scale = float(scale_token)
    except ValueError:
        raise DataError(f"{path}: malformed PFM scale {scale_token!r}") from None
    if w < 1 or h < 1 or scale == 0.0:
        raise DataError(f"{path}: unsupported PFM geometry {w}x{h} scale {scale}")
    expected = w * h * 4
    if len(raster) != expected:
        raise DataError(f"{path}: PFM raster has {len(raster)} bytes, expected {expected}")
    dtype = "<f4" if scale < 0 else ">f4"
    grid = np.frombuffer(raster, dtype=dtype).reshape(h, w)
    # PFM rows are stored bottom-to-top.
    return np.flipud(grid).astype(np.float32)


def write_pfm(path, grid) -> None:
    """Write a float32 (h, w) array as a little-endian grayscale PFM file."""
    arr = np.asarray(grid, dtype=np.float32)
    if arr.ndim != 2 or arr.size == 0:
        raise DataError(f"expected a non-empty 2-D grid, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError("PFM values must be finite")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(b"Pf\n%d %d\n-1.0\n" % (w, h))
        fh.write(np.flipud(arr).astype("<f4").tobytes())


def write_rgb_png(path, rgb) -> None:
    """Write an (h, w, 3) uint8 array as a PNG (overlay figures)."""
    arr = np.asarray(rgb)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise DataError(f"expected an (h, w, 3) uint8 array, got {arr.shape} {arr.dtype}")
    Image.fromarray(arr, mode="RGB").save(Path(path), format="PNG")
