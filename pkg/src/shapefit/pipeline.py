"""Dataset manifests, train/fit orchestration, and the landmark-error report.

A manifest is a plain text file with one entry per line:

    <split> TAB <image path> TAB <landmark path> TAB <mask path or "-">

where split is "train" or "test" and paths are relative to the manifest's
directory. Blank lines and lines starting with '#' are ignored.
"""

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .de_optimizer import DEConfig, fit_shape
from .errors import ConfigError, DataError
from .geometry import centroid_size, generalized_procrustes, read_landmarks, write_landmarks
from .imgio import read_gray
from .pixel_features import haar_catalog, sample_training_set
from .prob_map import compute_prob_map, file_sha256, load_prob_map, read_map_source, save_prob_map
from .random_forest import Forest, ForestParams, train_forest
from .shape_model import ShapeModel, fit_pca, synthesize

logger = logging.getLogger(__name__)

SPLITS = ("train", "test")


@dataclass
class DatasetEntry:
    image_path: Path
    landmarks_path: Path
    mask_path: Path | None
    split: str

    @property
    def stem(self) -> str:
        return self.image_path.stem


@dataclass
class Dataset:
    entries: list

    @property
    def train(self) -> list:
        return [e for e in self.entries if e.split == "train"]

    @property
    def test(self) -> list:
        return [e for e in self.entries if e.split == "test"]

    def split(self, which: str) -> list:
        if which == "all":
            return list(self.entries)
        if which not in SPLITS:
            raise ConfigError(f"unknown split {which!r}")
        return [e for e in self.entries if e.split == which]


def load_dataset(manifest_path, validate: bool = True) -> Dataset:
    """Parse and (by default) fully validate a dataset manifest.

    Validation checks that every referenced file exists, image and mask
    dimensions agree, and all landmark files share one landmark count;
    problems are reported with the offending file names.
    """
    manifest = Path(manifest_path)
    if not manifest.is_file():
        raise DataError(f"manifest {manifest} does not exist")
    base = manifest.parent
    entries = []
    for lineno, raw in enumerate(manifest.read_text(encoding="ascii").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise DataError(f"{manifest}:{lineno}: expected 4 tab-separated fields, got {len(parts)}")
        split, image, lms, mask = parts
        if split not in SPLITS:
            raise DataError(f"{manifest}:{lineno}: unknown split tag {split!r}")
        entries.append(DatasetEntry(
            image_path=base / image,
            landmarks_path=base / lms,
            mask_path=None if mask == "-" else base / mask,
            split=split,
        ))
    if not entries:
        raise DataError(f"manifest {manifest} lists no entries")
    dataset = Dataset(entries)
    if validate:
        _validate_dataset(dataset)
    return dataset


def _validate_dataset(dataset: Dataset) -> None:
    n_landmarks = None
    for e in dataset.entries:
        for p in (e.image_path, e.landmarks_path, e.mask_path):
            if p is not None and not Path(p).is_file():
                raise DataError(f"missing file {p}")
        img = read_gray(e.image_path)
        if e.mask_path is not None:
            mask = read_gray(e.mask_path)
            if mask.shape != img.shape:
                raise DataError(f"mask {e.mask_path} is {mask.shape[1]}x{mask.shape[0]} but "
                                f"image {e.image_path} is {img.shape[1]}x{img.shape[0]}")
        lms = read_landmarks(e.landmarks_path)
        if n_landmarks is None:
            n_landmarks = lms.shape[0]
        elif lms.shape[0] != n_landmarks:
            raise DataError(f"{e.landmarks_path} has {lms.shape[0]} landmarks, "
                            f"expected {n_landmarks}")


def stage_seed(master: int, stage: str) -> int:
    """Deterministic sub-seed for a named pipeline stage."""
    digest = hashlib.sha256(f"{master}:{stage}".encode("ascii")).digest()
    return int.from_bytes(digest[:8], "little")


def train_shape_model(dataset: Dataset, components: int | None = None,
                      variance_cutoff: float = 0.95) -> ShapeModel:
    """Align the training shapes and fit the deformation model.

    The model's reference scale is the mean centroid size of the raw
    (image-frame) training shapes, so fit-time scale bounds are in pixels.
    """
    train = dataset.train
    if len(train) < 2:
        raise DataError(f"need at least 2 training entries, got {len(train)}")
    shapes = [read_landmarks(e.landmarks_path) for e in train]
    ref_scale = float(np.mean([centroid_size(s) for s in shapes]))
    gpa = generalized_procrustes(shapes)
    logger.info("gpa converged after %d iterations", gpa.iterations)
    model = fit_pca(gpa.aligned, variance_cutoff=variance_cutoff, fixed_k=components,
                    reference_scale=ref_scale)
    logger.info("shape model: %d components retain %.4f of the variance",
                model.k, model.variance_retained)
    return model


def gather_training_samples(dataset: Dataset, neg_ratio: int = 4, rng_seed: int = 0):
    """Labeled boundary/background descriptors from the training split."""
    train = dataset.train
    if not train:
        raise DataError("manifest has no training entries")
    images, masks = [], []
    for e in train:
        if e.mask_path is None:
            raise DataError(f"training entry {e.image_path} has no mask")
        images.append(read_gray(e.image_path))
        masks.append(read_gray(e.mask_path))
    return sample_training_set(images, masks, neg_ratio=neg_ratio, rng_seed=rng_seed)


def train_boundary_classifier(dataset: Dataset, n_trees: int = 32, neg_ratio: int = 4,
                              min_node_size: int = 5, max_depth: int | None = 25,
                              master_seed: int = 0, n_jobs: int = 1) -> Forest:
    """Sample training pixels and train the boundary forest.

    Sampling and tree growing use separate sub-seeds of `master_seed`. The
    descriptor catalog is recorded in the forest metadata so the file pins
    which features its trees consume.
    """
    X, y = gather_training_samples(dataset, neg_ratio=neg_ratio,
                                   rng_seed=stage_seed(master_seed, "negative-sampling"))
    logger.info("training classifier on %d samples (%d boundary)", len(y), int(y.sum()))
    params = ForestParams(min_node_size=min_node_size, max_depth=max_depth)
    forest = train_forest(X, y, n_trees=n_trees, params=params,
                          rng_seed=stage_seed(master_seed, "forest"), n_jobs=n_jobs)
    forest.extra = {
        "neg_ratio": neg_ratio,
        "features": [{"kind": f.kind, "window": f.window} for f in haar_catalog()],
    }
    return forest


def compute_split_maps(dataset: Dataset, forest: Forest, forest_hash: str,
                       out_dir, split: str = "test", row_chunk: int = 32) -> list:
    """Probability maps for one split, cached by forest-file hash.

    Returns the list of map paths (out_dir/<stem>.pfm); maps whose sidecar
    already names `forest_hash` are not recomputed.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for e in dataset.split(split):
        path = out / f"{e.stem}.pfm"
        if path.exists() and read_map_source(path) == forest_hash:
            logger.info("probmap %s: cached", e.stem)
        else:
            pmap = compute_prob_map(forest, read_gray(e.image_path), row_chunk=row_chunk)
            save_prob_map(path, pmap, source_hash=forest_hash)
            logger.info("probmap %s: %dx%d written", e.stem, pmap.shape[1], pmap.shape[0])
        paths.append(path)
    return paths


def fit_split(dataset: Dataset, model: ShapeModel, out_dir, map_dir=None,
              forest: Forest | None = None, forest_hash: str | None = None,
              config: DEConfig | None = None, master_seed: int = 0,
              split: str = "test") -> list:
    """Fit the model to every image of a split and write the results.

    Maps are loaded from `map_dir` when given, otherwise computed with
    `forest` (and cached in out_dir). Each image gets its own DE sub-seed.
    Writes <stem>_fit.txt landmark files and <stem>_trace.csv traces; returns
    the fitted shapes in split order.
    """
    if map_dir is None and forest is None:
        raise ConfigError("fitting needs either a map directory or a forest")
    base = config or DEConfig()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fitted = []
    for e in dataset.split(split):
        if map_dir is not None:
            map_path = Path(map_dir) / f"{e.stem}.pfm"
            if not map_path.is_file():
                raise DataError(f"no probability map for {e.stem} under {map_dir}")
            pmap = load_prob_map(map_path)
        else:
            map_path = out / f"{e.stem}.pfm"
            if map_path.exists() and forest_hash is not None \
                    and read_map_source(map_path) == forest_hash:
                pmap = load_prob_map(map_path)
            else:
                pmap = compute_prob_map(forest, read_gray(e.image_path))
                save_prob_map(map_path, pmap, source_hash=forest_hash)
        cfg = DEConfig(strategy=base.strategy, F=base.F, CR=base.CR,
                       pop_size=base.pop_size, max_generations=base.max_generations,
                       target_cost=base.target_cost,
                       seed=stage_seed(master_seed, f"fit:{e.stem}"),
                       bound_handling=base.bound_handling)
        params, likelihood, trace = fit_shape(pmap, model, cfg)
        shape = synthesize(model, params)
        write_landmarks(out / f"{e.stem}_fit.txt", shape)
        trace.save_csv(out / f"{e.stem}_trace.csv")
        logger.info("fit %s: likelihood %.4f after %d generations",
                    e.stem, likelihood, int(trace.generation[-1]))
        fitted.append(shape)
    return fitted


@dataclass
class ErrorReport:
    """Landmark-distance errors of fitted shapes against annotations.

    per_landmark_mse: mean squared landmark distance across images (px^2), length L
    per_image_mean:   mean landmark distance per image (px)
    image_names:      row labels for per_image_mean
    """

    per_landmark_mse: np.ndarray
    per_image_mean: np.ndarray
    image_names: list

    def summary(self) -> dict:
        return {
            "n_images": int(self.per_image_mean.size),
            "n_landmarks": int(self.per_landmark_mse.size),
            "mean_per_image_error": float(self.per_image_mean.mean()),
            "median_per_image_error": float(np.median(self.per_image_mean)),
            "max_per_image_error": float(self.per_image_mean.max()),
            "mean_landmark_mse": float(self.per_landmark_mse.mean()),
        }

    def save(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report_per_landmark.csv", "w", encoding="ascii") as fh:
            fh.write("landmark,mse\n")
            for j, v in enumerate(self.per_landmark_mse):
                fh.write(f"{j},{float(v)!r}\n")
        with open(out / "report_per_image.csv", "w", encoding="ascii") as fh:
            fh.write("image,mean_landmark_distance\n")
            for name, v in zip(self.image_names, self.per_image_mean):
                fh.write(f"{name},{float(v)!r}\n")
        with open(out / "report_summary.csv", "w", encoding="ascii") as fh:
            fh.write("metric,value\n")
            for key, v in self.summary().items():
                fh.write(f"{key},{v!r}\n")


def evaluate_shapes(fitted, truth, image_names=None) -> ErrorReport:
    """Compare fitted landmark shapes with index-aligned annotations."""
    if len(fitted) != len(truth) or not fitted:
        raise ConfigError(f"got {len(fitted)} fitted shapes for {len(truth)} annotations")
    F = np.asarray(fitted, dtype=float)
    T = np.asarray(truth, dtype=float)
    if F.shape != T.shape or F.ndim != 3 or F.shape[2] != 2:
        raise ConfigError(f"shape stacks disagree: {F.shape} vs {T.shape}")
    sq = ((F - T) ** 2).sum(axis=2)
    names = list(image_names) if image_names is not None else [str(i) for i in range(len(fitted))]
    if len(names) != len(fitted):
        raise ConfigError("image_names length does not match the shape count")
    return ErrorReport(per_landmark_mse=sq.mean(axis=0),
                       per_image_mean=np.sqrt(sq).mean(axis=1),
                       image_names=names)


def render_overlay(image, fitted, truth, out_path) -> None:
    """Draw annotation (blue) and fitted boundary (orange) over an image."""
    img = np.asarray(image)
    rgb = Image.fromarray(img, mode="L").convert("RGB")
    draw = ImageDraw.Draw(rgb)

    def polyline(shape, color):
        pts = [(float(x), float(y)) for x, y in shape]
        draw.line(pts + pts[:1], fill=color, width=1)

    if truth is not None:
        polyline(truth, (70, 130, 255))
    polyline(fitted, (255, 96, 0))
    rgb.save(Path(out_path), format="PNG")


def evaluate_fit_dir(dataset: Dataset, fitted_dir, out_dir, split: str = "test",
                     overlays: bool = True) -> ErrorReport:
    """Load <stem>_fit.txt shapes for a split, score them, write the report
    CSVs (and overlay PNGs) under out_dir."""
    entries = dataset.split(split)
    if not entries:
        raise DataError(f"manifest has no {split!r} entries")
    fitted, truth = [], []
    for e in entries:
        path = Path(fitted_dir) / f"{e.stem}_fit.txt"
        if not path.is_file():
            raise DataError(f"missing fitted landmarks {path}")
        f = read_landmarks(path)
        t = read_landmarks(e.landmarks_path)
        if f.shape != t.shape:
            raise DataError(f"{path} has {f.shape[0]} landmarks but "
                            f"{e.landmarks_path} has {t.shape[0]}")
        fitted.append(f)
        truth.append(t)
    report = evaluate_shapes(fitted, truth, image_names=[e.stem for e in entries])
    report.save(out_dir)
    if overlays:
        for e, f, t in zip(entries, fitted, truth):
            render_overlay(read_gray(e.image_path), f, t,
                           Path(out_dir) / f"{e.stem}_overlay.png")
    return report


__all__ = [
    "Dataset", "DatasetEntry", "ErrorReport", "SPLITS",
    "load_dataset", "stage_seed", "train_shape_model", "gather_training_samples",
    "train_boundary_classifier", "compute_split_maps", "fit_split",
    "evaluate_shapes", "evaluate_fit_dir", "render_overlay", "file_sha256",
]
