"""Binary random-forest classifier built from scratch.

Trees are grown on bootstrap resamples with Gini-impurity splits over a
random feature subset per node. Training is deterministic for a fixed seed
regardless of worker count: every tree gets its own RNG stream derived from
(seed, tree index), and results are merged by tree index.
"""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, TrainingError

FOREST_FORMAT_VERSION = 1


@dataclass
class TreeNode:
    """Internal node (feature_index/threshold/left/right) or leaf
    (positive_fraction/sample_count)."""

    feature_index: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    positive_fraction: float | None = None
    sample_count: int | None = None

    @property
    def is_leaf(self) -> bool:
        return self.feature_index is None


@dataclass
class ForestParams:
    """Tree-growing controls.

    n_candidates: features tried per split (default ceil(sqrt(n_features)));
                  if none of the sampled candidates admits a valid split, the
                  remaining features are searched before declaring a leaf
    min_node_size: nodes with fewer samples become leaves
    max_depth:     nodes at this depth become leaves (None = unlimited)
    bootstrap:     resample the training set (with replacement) per tree
    """

    n_candidates: int | None = None
    min_node_size: int = 5
    max_depth: int | None = 25
    bootstrap: bool = True

    def validate(self, n_features: int) -> None:
        if self.n_candidates is not None and not (1 <= self.n_candidates <= n_features):
            raise ConfigError(f"n_candidates must be in [1, {n_features}], got {self.n_candidates}")
        if self.min_node_size < 1:
            raise ConfigError(f"min_node_size must be positive, got {self.min_node_size}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigError(f"max_depth must be positive or None, got {self.max_depth}")

    def resolved_candidates(self, n_features: int) -> int:
        if self.n_candidates is not None:
            return self.n_candidates
        return min(n_features, math.ceil(math.sqrt(n_features)))


class _FlatTree:
    """Array form of one tree for vectorized prediction."""

    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, root: TreeNode):
        feature, threshold, left, right, value = [], [], [], [], []

        def add(node: TreeNode) -> int:
            idx = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            if node.is_leaf:
                value[idx] = node.positive_fraction
            else:
                feature[idx] = node.feature_index
                threshold[idx] = node.threshold
                left[idx] = add(node.left)
                right[idx] = add(node.right)
            return idx

        add(root)
        self.feature = np.asarray(feature, dtype=np.int32)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.value = np.asarray(value, dtype=float)

    def leaf_values(self, X: np.ndarray) -> np.ndarray:
        idx = np.zeros(X.shape[0], dtype=np.int32)
        while True:
            rows = np.flatnonzero(self.feature[idx] >= 0)
            if rows.size == 0:
                break
            cur = idx[rows]
            go_left = X[rows, self.feature[cur]] <= self.threshold[cur]
            idx[rows] = np.where(go_left, self.left[cur], self.right[cur])
        return self.value[idx]


@dataclass
class Forest:
    """Trained ensemble: tree roots plus the training metadata."""

    trees: list
    n_features: int
    params: ForestParams
    seed: int
    extra: dict = field(default_factory=dict)
    _flat: list = field(default=None, repr=False, compare=False)

    def flat_trees(self) -> list:
        if self._flat is None:
            self._flat = [_FlatTree(root) for root in self.trees]
        return self._flat


def _gini(pos: float, n: float) -> float:
    p = pos / n
    return 2.0 * p * (1.0 - p)


def _best_split(X, y, idx, candidates, pos_total, parent_gini):
    """Best (feature, threshold) by Gini gain, or None if no positive gain.

    Candidates are scanned in ascending feature order and thresholds in
    ascending value order with strict improvement, so ties resolve to the
    lowest feature index, then the lowest threshold.
    """
    n = idx.size
    yb = y[idx]
    best_gain = 0.0
    best = None
    for f in candidates:
        v = X[idx, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        cut = np.flatnonzero(vs[:-1] < vs[1:])
        if cut.size == 0:
            continue
        cum_pos = np.cumsum(yb[order])
        n_left = (cut + 1).astype(float)
        pos_left = cum_pos[cut].astype(float)
        n_right = n - n_left
        pos_right = pos_total - pos_left
        pl = pos_left / n_left
        pr = pos_right / n_right
        weighted = (n_left * 2.0 * pl * (1.0 - pl) + n_right * 2.0 * pr * (1.0 - pr)) / n
        gains = parent_gini - weighted
        j = int(np.argmax(gains))
        if gains[j] > best_gain:
            best_gain = float(gains[j])
            i = int(cut[j])
            best = (int(f), float((vs[i] + vs[i + 1]) / 2.0))
    return best


def _build_node(X, y, idx, depth, rng, params: ForestParams, n_cand: int) -> TreeNode:
    n = idx.size
    pos = int(y[idx].sum())
    at_depth_cap = params.max_depth is not None and depth >= params.max_depth
    if pos == 0 or pos == n or n < params.min_node_size or at_depth_cap:
        return TreeNode(positive_fraction=pos / n, sample_count=n)

    n_features = X.shape[1]
    parent_gini = _gini(pos, n)
    if n_cand < n_features:
        cand = np.sort(rng.choice(n_features, size=n_cand, replace=False))
        split = _best_split(X, y, idx, cand, pos, parent_gini)
        if split is None:
            rest = np.setdiff1d(np.arange(n_features), cand)
            split = _best_split(X, y, idx, rest, pos, parent_gini)
    else:
        split = _best_split(X, y, idx, np.arange(n_features), pos, parent_gini)
    if split is None:
        return TreeNode(positive_fraction=pos / n, sample_count=n)

    f, thr = split
    mask = X[idx, f] <= thr
    left = _build_node(X, y, idx[mask], depth + 1, rng, params, n_cand)
    right = _build_node(X, y, idx[~mask], depth + 1, rng, params, n_cand)
    return TreeNode(feature_index=f, threshold=thr, left=left, right=right)


def _train_tree(X, y, seed_seq, params: ForestParams, n_cand: int) -> TreeNode:
    rng = np.random.default_rng(seed_seq)
    n = X.shape[0]
    if params.bootstrap:
        idx = rng.integers(0, n, size=n)
    else:
        idx = np.arange(n)
    return _build_node(X, y, idx, 0, rng, params, n_cand)


def train_forest(X, y, n_trees: int = 32, params: ForestParams | None = None,
                 rng_seed: int = 0, n_jobs: int = 1) -> Forest:
    """Train an ensemble of Gini decision trees.

    X is an (n, n_features) float array, y a 0/1 label array with both
    classes present. Per-tree RNG streams are spawned from `rng_seed`, so the
    serialized forest is identical for any `n_jobs`.
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ConfigError(f"feature matrix {X.shape} and labels {y.shape} do not line up")
    if not np.all(np.isfinite(X)):
        raise TrainingError("training features must be finite")
    if not np.isin(y, (0, 1)).all():
        raise ConfigError("labels must be 0 (background) or 1 (border)")
    y = y.astype(np.uint8)
    if X.shape[0] < 2 or y.min() == y.max():
        raise TrainingError("training data must contain both classes")
    if n_trees < 1:
        raise ConfigError(f"n_trees must be positive, got {n_trees}")
    params = params or ForestParams()
    params.validate(X.shape[1])
    n_cand = params.resolved_candidates(X.shape[1])

    streams = np.random.SeedSequence(rng_seed).spawn(n_trees)
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(lambda s: _train_tree(X, y, s, params, n_cand), streams))
    else:
        trees = [_train_tree(X, y, s, params, n_cand) for s in streams]
    return Forest(trees=trees, n_features=X.shape[1], params=params, seed=int(rng_seed))


def predict_proba_many(forest: Forest, X, hard_vote: bool = False) -> np.ndarray:
    """Boundary probability for each row of X.

    Default is the mean of the reached leaves' positive fractions; with
    `hard_vote` each tree casts a 0/1 vote (fraction >= 0.5) instead.
    """
    X = np.ascontiguousarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != forest.n_features:
        raise ConfigError(f"expected (n, {forest.n_features}) features, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ConfigError("features must be finite")
    acc = np.zeros(X.shape[0], dtype=float)
    for flat in forest.flat_trees():
        values = flat.leaf_values(X)
        acc += (values >= 0.5).astype(float) if hard_vote else values
    return acc / len(forest.trees)


def predict_proba(forest: Forest, features, hard_vote: bool = False) -> float:
    """Boundary probability of a single feature vector."""
    f = np.asarray(features, dtype=float)
    if f.ndim != 1:
        raise ConfigError(f"expected a 1-D feature vector, got shape {f.shape}")
    return float(predict_proba_many(forest, f[None, :], hard_vote=hard_vote)[0])


def _node_to_obj(node: TreeNode):
    if node.is_leaf:
        return {
            "positive_fraction": float(node.positive_fraction),
            "sample_count": int(node.sample_count),
        }
    return {
        "feature_index": int(node.feature_index),
        "threshold": float(node.threshold),
        "left": _node_to_obj(node.left),
        "right": _node_to_obj(node.right),
    }


def _node_from_obj(obj, n_features: int) -> TreeNode:
    if "positive_fraction" in obj:
        frac = float(obj["positive_fraction"])
        if not (0.0 <= frac <= 1.0):
            raise ConfigError(f"leaf fraction {frac} outside [0, 1]")
        return TreeNode(positive_fraction=frac, sample_count=int(obj["sample_count"]))
    f = int(obj["feature_index"])
    if not (0 <= f < n_features):
        raise ConfigError(f"node references feature {f} of {n_features}")
    return TreeNode(feature_index=f, threshold=float(obj["threshold"]),
                    left=_node_from_obj(obj["left"], n_features),
                    right=_node_from_obj(obj["right"], n_features))


def forest_to_json(forest: Forest) -> str:
    """Serialize a forest to its canonical JSON document (round-trip stable)."""
    params = {
        "n_candidates": forest.params.n_candidates,
        "min_node_size": forest.params.min_node_size,
        "max_depth": forest.params.max_depth,
        "bootstrap": forest.params.bootstrap,
    }
    params.update(forest.extra)
    obj = {
        "version": FOREST_FORMAT_VERSION,
        "n_trees": len(forest.trees),
        "n_features": forest.n_features,
        "params": params,
        "seed": forest.seed,
        "trees": [_node_to_obj(t) for t in forest.trees],
    }
    return json.dumps(obj, separators=(",", ":"), allow_nan=False) + "\n"


def forest_from_json(text: str) -> Forest:
    obj = json.loads(text)
    if obj.get("version") != FOREST_FORMAT_VERSION:
        raise ConfigError(f"unsupported forest format version {obj.get('version')!r}")
    try:
        n_features = int(obj["n_features"])
        raw = dict(obj["params"])
        params = ForestParams(
            n_candidates=raw.pop("n_candidates"),
            min_node_size=raw.pop("min_node_size"),
            max_depth=raw.pop("max_depth"),
            bootstrap=raw.pop("bootstrap"),
        )
        trees = [_node_from_obj(t, n_features) for t in obj["trees"]]
        seed = int(obj["seed"])
        n_trees = int(obj["n_trees"])
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"malformed forest document: {e}") from None
    if len(trees) != n_trees or not trees:
        raise ConfigError("forest tree count does not match its header")
    return Forest(trees=trees, n_features=n_features, params=params,
                  seed=seed, extra=raw)


def save_forest(path, forest: Forest) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(forest_to_json(forest))


def load_forest(path) -> Forest:
    with open(path, "r", encoding="ascii") as fh:
        return forest_from_json(fh.read())
