"""Gradient-boosted regression trees with Newton leaf weights.

Trees are grown by exact greedy search: every midpoint between consecutive
distinct sorted feature values is scored with the regularized gain, and rows
with a missing value follow a per-node default direction learned during the
search.  Leaf weights are the closed-form Newton step -G / (H + lambda).
Boosting applies shrinkage and optional row/column subsampling; identical
seeds produce bit-identical ensembles.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, SchemaError

__all__ = [
    "FeatureMatrix",
    "TreeNode",
    "Ensemble",
    "GbrtConfig",
    "gradients_squared_error",
    "leaf_weight",
    "split_gain",
    "build_tree",
    "train",
    "predict",
    "variable_importance",
    "ensemble_to_dict",
    "ensemble_from_dict",
    "save_ensemble",
    "load_ensemble",
]

MODEL_FORMAT = "bloodbank.ensemble"
MODEL_VERSION = 1


@dataclass
class FeatureMatrix:
    """Dense feature matrix; NaN cells mark missing values."""

    values: np.ndarray
    feature_names: list[str]

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ParameterError(f"feature matrix must be 2-d, got shape {values.shape}")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise ParameterError(f"feature matrix must be non-empty, got shape {values.shape}")
        if values.shape[1] != len(self.feature_names):
            raise ParameterError(
                f"{values.shape[1]} columns but {len(self.feature_names)} feature names"
            )
        if len(set(self.feature_names)) != len(self.feature_names):
            raise ParameterError("feature names must be unique")
        if np.isinf(values).any():
            raise ParameterError("feature matrix contains infinities; use NaN for missing")
        self.values = values
        self.feature_names = list(self.feature_names)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]


@dataclass
class TreeNode:
    """Internal split or leaf.  Internal nodes keep their training gain and
    row cover so importance can be computed after the fact."""

    weight: float = 0.0
    feature: int | None = None
    threshold: float = 0.0
    default_left: bool = True
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    gain: float = 0.0
    cover: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def n_leaves(self) -> int:
        if self.is_leaf:
            return 1
        return self.left.n_leaves() + self.right.n_leaves()


@dataclass(frozen=True)
class GbrtConfig:
    n_rounds: int = 100
    learning_rate: float = 0.1
    max_depth: int | None = 3
    min_child_weight: float = 1.0
    subsample_rows: float = 1.0
    subsample_cols: float = 1.0
    reg_lambda: float = 1.0
    gamma: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_rounds < 0:
            raise ParameterError("n_rounds must be non-negative")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ParameterError(f"learning_rate must lie in (0, 1], got {self.learning_rate}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ParameterError(f"max_depth must be >= 1 or None, got {self.max_depth}")
        if self.min_child_weight < 0.0:
            raise ParameterError("min_child_weight must be non-negative")
        for name in ("subsample_rows", "subsample_cols"):
            frac = getattr(self, name)
            if not 0.0 < frac <= 1.0:
                raise ParameterError(f"{name} must lie in (0, 1], got {frac}")
        if self.reg_lambda < 0.0 or self.gamma < 0.0:
            raise ParameterError("reg_lambda and gamma must be non-negative")


@dataclass
class Ensemble:
    trees: list[TreeNode] = field(default_factory=list)
    learning_rate: float = 1.0
    base_score: float = 0.0
    feature_names: list[str] = field(default_factory=list)
    config: GbrtConfig | None = None


def gradients_squared_error(targets, predictions) -> tuple[np.ndarray, np.ndarray]:
    """First and second derivatives of 0.5 * (target - prediction)^2."""
    targets = np.asarray(targets, dtype=float)
    predictions = np.asarray(predictions, dtype=float)
    if targets.shape != predictions.shape:
        raise ParameterError(
            f"length mismatch: {targets.size} targets vs {predictions.size} predictions"
        )
    return predictions - targets, np.ones_like(targets)


def leaf_weight(g_sum: float, h_sum: float, reg_lambda: float) -> float:
    denom = h_sum + reg_lambda
    if denom <= 0.0:
        raise ParameterError(f"h_sum + reg_lambda must be positive, got {denom}")
    return -g_sum / denom


def split_gain(
    gl: float, hl: float, gr: float, hr: float, reg_lambda: float, gamma: float
) -> float:
    dl, dr, dp = hl + reg_lambda, hr + reg_lambda, hl + hr + reg_lambda
    if dl <= 0.0 or dr <= 0.0 or dp <= 0.0:
        raise ParameterError("degenerate denominator in split gain")
    return 0.5 * (gl * gl / dl + gr * gr / dr - (gl + gr) ** 2 / dp) - gamma


@dataclass
class _Split:
    feature: int
    threshold: float
    default_left: bool
    gain: float


def _best_split_for_feature(
    values: np.ndarray,
    sorted_rows: np.ndarray,
    n_present: int,
    g: np.ndarray,
    h: np.ndarray,
    g_total: float,
    h_total: float,
    reg_lambda: float,
    gamma: float,
    min_child_weight: float,
) -> tuple[float, float, bool]:
    """Best (gain, threshold, default_left) over one feature, or gain=-inf."""
    present = sorted_rows[:n_present]
    if n_present < 2:
        return -np.inf, 0.0, True
    vals = values[present]
    boundaries = np.nonzero(vals[:-1] < vals[1:])[0]
    if boundaries.size == 0:
        return -np.inf, 0.0, True
    cg = np.cumsum(g[present])
    ch = np.cumsum(h[present])
    gl = cg[boundaries]
    hl = ch[boundaries]
    g_present, h_present = cg[-1], ch[-1]
    g_miss = g_total - g_present
    h_miss = h_total - h_present

    def gains(gl_side: np.ndarray, hl_side: np.ndarray) -> np.ndarray:
        gr_side = g_total - gl_side
        hr_side = h_total - hl_side
        valid = (
            (hl_side >= min_child_weight)
            & (hr_side >= min_child_weight)
            & (hl_side + reg_lambda > 0.0)
            & (hr_side + reg_lambda > 0.0)
        )
        with np.errstate(divide="ignore", invalid="ignore"):
            raw = 0.5 * (
                gl_side**2 / (hl_side + reg_lambda)
                + gr_side**2 / (hr_side + reg_lambda)
                - (g_total**2) / (h_total + reg_lambda)
            ) - gamma
        return np.where(valid & np.isfinite(raw), raw, -np.inf)

    gains_left = gains(gl + g_miss, hl + h_miss)  # missing rows routed left
    gains_right = gains(gl, hl)
    best = np.maximum(gains_left, gains_right)
    pos = int(np.argmax(best))  # first max -> smallest threshold on ties
    if not np.isfinite(best[pos]):
        return -np.inf, 0.0, True
    cut = boundaries[pos]
    threshold = 0.5 * (vals[cut] + vals[cut + 1])
    default_left = bool(gains_left[pos] >= gains_right[pos])
    return float(best[pos]), float(threshold), default_left


def _grow(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    sorted_rows: dict[int, np.ndarray],
    n_present: dict[int, int],
    missing_mask: np.ndarray,
    depth: int,
    config: GbrtConfig,
) -> TreeNode:
    any_feature = next(iter(sorted_rows))
    rows = sorted_rows[any_feature]
    cover = rows.size
    g_total = float(g[rows].sum())
    h_total = float(h[rows].sum())
    node = TreeNode(weight=leaf_weight(g_total, h_total, config.reg_lambda), cover=cover)

    if config.max_depth is not None and depth >= config.max_depth:
        return node

    best: _Split | None = None
    for feature in sorted(sorted_rows):
        gain, threshold, default_left = _best_split_for_feature(
            X[:, feature],
            sorted_rows[feature],
            n_present[feature],
            g,
            h,
            g_total,
            h_total,
            config.reg_lambda,
            config.gamma,
            config.min_child_weight,
        )
        if best is None or gain > best.gain:
            best = _Split(feature, threshold, default_left, gain)
    if best is None or best.gain <= 0.0:
        return node

    col = X[:, best.feature]
    goes_left = np.zeros(X.shape[0], dtype=bool)
    goes_left[rows] = np.where(
        np.isnan(col[rows]), best.default_left, col[rows] < best.threshold
    )

    left_sorted: dict[int, np.ndarray] = {}
    right_sorted: dict[int, np.ndarray] = {}
    left_present: dict[int, int] = {}
    right_present: dict[int, int] = {}
    for feature, order in sorted_rows.items():
        mask = goes_left[order]
        lo, ro = order[mask], order[~mask]
        left_sorted[feature] = lo
        right_sorted[feature] = ro
        left_present[feature] = int(lo.size - missing_mask[lo, feature].sum())
        right_present[feature] = int(ro.size - missing_mask[ro, feature].sum())

    node.feature = best.feature
    node.threshold = best.threshold
    node.default_left = best.default_left
    node.gain = best.gain
    node.left = _grow(X, g, h, left_sorted, left_present, missing_mask, depth + 1, config)
    node.right = _grow(X, g, h, right_sorted, right_present, missing_mask, depth + 1, config)
    return node


def build_tree(
    X: FeatureMatrix,
    g,
    h,
    config: GbrtConfig,
    feature_indices=None,
) -> TreeNode:
    """Grow a single regression tree on gradient/hessian totals."""
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    if g.shape != h.shape or g.size != X.n_rows:
        raise ParameterError(
            f"row mismatch: X has {X.n_rows} rows, g has {g.size}, h has {h.size}"
        )
    if g.size == 0:
        raise ParameterError("cannot build a tree on an empty row set")
    if feature_indices is None:
        feature_indices = range(X.n_cols)

    values = X.values
    missing = np.isnan(values)
    sorted_rows: dict[int, np.ndarray] = {}
    n_present: dict[int, int] = {}
    for feature in feature_indices:
        feature = int(feature)
        order = np.argsort(values[:, feature], kind="stable")  # NaN sorts last
        sorted_rows[feature] = order
        n_present[feature] = int(X.n_rows - missing[:, feature].sum())
    return _grow(values, g, h, sorted_rows, n_present, missing, 0, config)


def _tree_apply(node: TreeNode, values: np.ndarray, out: np.ndarray, rows: np.ndarray) -> None:
    if node.is_leaf:
        out[rows] = node.weight
        return
    col = values[rows, node.feature]
    left = np.where(np.isnan(col), node.default_left, col < node.threshold)
    _tree_apply(node.left, values, out, rows[left])
    _tree_apply(node.right, values, out, rows[~left])


def tree_predict(node: TreeNode, values: np.ndarray) -> np.ndarray:
    out = np.empty(values.shape[0])
    _tree_apply(node, values, out, np.arange(values.shape[0]))
    return out


def train(X: FeatureMatrix, y, config: GbrtConfig) -> Ensemble:
    """Boost ``config.n_rounds`` trees against the squared-error objective."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size != X.n_rows:
        raise ParameterError(f"target length {y.size} does not match {X.n_rows} rows")
    if X.n_rows < 2:
        raise ParameterError("training needs at least two rows")
    if not np.all(np.isfinite(y)):
        raise ParameterError("targets contain NaN or infinities")

    rng = np.random.Generator(np.random.PCG64(config.seed))
    n, d = X.n_rows, X.n_cols
    base_score = float(y.mean())
    predictions = np.full(n, base_score)
    model = Ensemble(
        trees=[],
        learning_rate=config.learning_rate,
        base_score=base_score,
        feature_names=list(X.feature_names),
        config=config,
    )

    for _ in range(config.n_rounds):
        if config.subsample_rows < 1.0:
            n_sub = max(1, int(round(config.subsample_rows * n)))
            rows = np.sort(rng.choice(n, size=n_sub, replace=False))
        else:
            rows = np.arange(n)
        if config.subsample_cols < 1.0:
            n_cols = max(1, int(round(config.subsample_cols * d)))
            cols = np.sort(rng.choice(d, size=n_cols, replace=False))
        else:
            cols = np.arange(d)

        g, h = gradients_squared_error(y[rows], predictions[rows])
        sub = FeatureMatrix(X.values[rows], X.feature_names)
        tree = build_tree(sub, g, h, config, feature_indices=cols)
        predictions += config.learning_rate * tree_predict(tree, X.values)
        model.trees.append(tree)
    return model


def predict(model: Ensemble, X: FeatureMatrix) -> np.ndarray:
    if X.feature_names != model.feature_names:
        raise ParameterError(
            f"feature columns {X.feature_names} do not match the model's "
            f"{model.feature_names}"
        )
    out = np.full(X.n_rows, model.base_score)
    for tree in model.trees:
        out += model.learning_rate * tree_predict(tree, X.values)
    return out


def variable_importance(model: Ensemble) -> dict[str, float]:
    """Gain x cover per split, summed per feature and normalized to 1."""
    if not model.trees:
        return {}
    totals = dict.fromkeys(model.feature_names, 0.0)

    def walk(node: TreeNode) -> None:
        if node.is_leaf:
            return
        totals[model.feature_names[node.feature]] += node.gain * node.cover
        walk(node.left)
        walk(node.right)

    for tree in model.trees:
        walk(tree)
    grand_total = sum(totals.values())
    if grand_total <= 0.0:
        return totals
    return {name: value / grand_total for name, value in totals.items()}


def training_objective(model: Ensemble, X: FeatureMatrix, y, n_trees: int | None = None) -> float:
    """Squared-error loss plus the complexity penalty of the first n trees.

    The L2 penalty applies to leaf values as they enter the prediction, i.e.
    after shrinkage; measured this way the objective never increases across
    boosting rounds when gamma is zero and no subsampling is active.
    """
    y = np.asarray(y, dtype=float)
    trees = model.trees if n_trees is None else model.trees[:n_trees]
    preds = np.full(X.n_rows, model.base_score)
    penalty = 0.0
    reg_lambda = model.config.reg_lambda if model.config else 0.0
    gamma = model.config.gamma if model.config else 0.0
    shrinkage = model.learning_rate

    def leaf_penalty(node: TreeNode) -> float:
        if node.is_leaf:
            return gamma + 0.5 * reg_lambda * (shrinkage * node.weight) ** 2
        return leaf_penalty(node.left) + leaf_penalty(node.right)

    for tree in trees:
        preds += shrinkage * tree_predict(tree, X.values)
        penalty += leaf_penalty(tree)
    return float(0.5 * ((y - preds) ** 2).sum() + penalty)


def _node_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"weight": node.weight}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "default_left": node.default_left,
        "gain": node.gain,
        "cover": node.cover,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(data: dict) -> TreeNode:
    if "weight" in data:
        return TreeNode(weight=float(data["weight"]))
    return TreeNode(
        feature=int(data["feature"]),
        threshold=float(data["threshold"]),
        default_left=bool(data["default_left"]),
        gain=float(data.get("gain", 0.0)),
        cover=int(data.get("cover", 0)),
        left=_node_from_dict(data["left"]),
        right=_node_from_dict(data["right"]),
    )


def ensemble_to_dict(model: Ensemble) -> dict:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "base_score": model.base_score,
        "learning_rate": model.learning_rate,
        "feature_names": list(model.feature_names),
        "trees": [_node_to_dict(tree) for tree in model.trees],
    }
    if model.config is not None:
        doc["config"] = {
            "n_rounds": model.config.n_rounds,
            "learning_rate": model.config.learning_rate,
            "max_depth": model.config.max_depth,
            "min_child_weight": model.config.min_child_weight,
            "subsample_rows": model.config.subsample_rows,
            "subsample_cols": model.config.subsample_cols,
            "reg_lambda": model.config.reg_lambda,
            "gamma": model.config.gamma,
            "seed": model.config.seed,
        }
    return doc


def ensemble_from_dict(doc: dict) -> Ensemble:
    if doc.get("format") != MODEL_FORMAT:
        raise SchemaError(f"not an ensemble document: format={doc.get('format')!r}")
    if doc.get("version") != MODEL_VERSION:
        raise SchemaError(f"unsupported ensemble version {doc.get('version')!r}")
    config = GbrtConfig(**doc["config"]) if "config" in doc else None
    return Ensemble(
        trees=[_node_from_dict(tree) for tree in doc["trees"]],
        learning_rate=float(doc["learning_rate"]),
        base_score=float(doc["base_score"]),
        feature_names=list(doc["feature_names"]),
        config=config,
    )


def save_ensemble(path, model: Ensemble) -> None:
    with open(path, "w") as handle:
        json.dump(ensemble_to_dict(model), handle, indent=2)
        handle.write("\n")


def load_ensemble(path) -> Ensemble:
    with open(path) as handle:
        return ensemble_from_dict(json.load(handle))
