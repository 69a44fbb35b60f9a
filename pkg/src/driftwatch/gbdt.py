"""Small gradient-boosted tree classifier used as the alarm discriminator.

Binary logistic boosting with exact greedy least-squares splits on
presorted features. The scale is fixed and small (50 trees, depth 5), so
exact splits are affordable and keep the fit fully deterministic: no
subsampling, stable sorts, and first-lowest tie-breaking everywhere.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

PROBABILITY_CLIP = 1e-15
HESSIAN_FLOOR = 1e-12
GAIN_EPSILON = 1e-12


class TrainingError(Exception):
    """Training matrix unusable for fitting."""


@dataclass
class TrainingMatrix:
    """Dense feature matrix with binary labels and per-row weights."""

    x: np.ndarray
    y: np.ndarray
    column_names: list[str]
    weights: np.ndarray = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.weights is None:
            self.weights = np.ones(len(self.y), dtype=np.float64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.x.ndim != 2:
            raise TrainingError("x must be 2-dimensional")
        if self.x.shape[0] != len(self.y) or len(self.weights) != len(self.y):
            raise TrainingError("row counts disagree")
        if self.x.shape[1] != len(self.column_names):
            raise TrainingError("column names disagree with x arity")
        if np.any(self.weights < 0):
            raise TrainingError("weights must be non-negative")

    @property
    def n_rows(self) -> int:
        return self.x.shape[0]

    @property
    def n_columns(self) -> int:
        return self.x.shape[1]


@dataclass
class GBDTParams:
    n_trees: int = 50
    max_depth: int = 5
    learning_rate: float = 0.1
    min_samples_split: int = 2
    min_samples_leaf: int = 1


@dataclass
class TreeNode:
    """Axis-aligned split, or a leaf when ``feature`` is None."""

    feature: int | None = None
    threshold: float = 0.0
    gain: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


@dataclass
class TreeEnsemble:
    initial_score: float
    trees: list[TreeNode]
    learning_rate: float
    column_names: list[str]
    importance: np.ndarray
    train_losses: list[float]
    split_gains: list[float] = field(default_factory=list)
    degenerate: bool = False


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def _log_loss(y: np.ndarray, prob: np.ndarray, weights: np.ndarray) -> float:
    p = np.clip(prob, PROBABILITY_CLIP, 1.0 - PROBABILITY_CLIP)
    terms = y * np.log(p) + (1 - y) * np.log1p(-p)
    return float(-(weights * terms).sum() / weights.sum())


def _find_split(values, grad, weight, min_leaf):
    """Best split of one presorted column; returns (gain, position) or None.

    ``position`` is the last index of the left part. Gain is the weighted
    least-squares impurity reduction S_l^2/W_l + S_r^2/W_r - S^2/W.
    """
    n = len(values)
    if n < 2 * min_leaf:
        return None
    grad_left = np.cumsum(grad)[:-1]
    weight_left = np.cumsum(weight)[:-1]
    grad_total = float(grad.sum())
    weight_total = float(weight.sum())
    grad_right = grad_total - grad_left
    weight_right = weight_total - weight_left

    valid = values[:-1] < values[1:]
    counts_left = np.arange(1, n)
    valid &= counts_left >= min_leaf
    valid &= (n - counts_left) >= min_leaf
    valid &= (weight_left > 0) & (weight_right > 0)
    if not valid.any():
        return None

    with np.errstate(divide="ignore", invalid="ignore"):
        gains = (
            grad_left * grad_left / weight_left
            + grad_right * grad_right / weight_right
            - grad_total * grad_total / weight_total
        )
    gains = np.where(valid, gains, -np.inf)
    at = int(np.argmax(gains))
    return float(gains[at]), at


def _leaf_value(grad_sum: float, hess_sum: float) -> float:
    if hess_sum < HESSIAN_FLOOR:
        return 0.0
    return grad_sum / hess_sum


def _build_tree(x, residual, hessian, weights, sorted_columns, params, importance, split_gains):
    """Grow one regression tree on the residuals, depth-first."""
    grad = residual * weights
    hess = hessian * weights

    def grow(column_order, depth):
        rows = column_order[0]
        node_size = len(rows)
        grad_sum = float(grad[rows].sum())
        hess_sum = float(hess[rows].sum())
        leaf = TreeNode(value=_leaf_value(grad_sum, hess_sum))
        if depth >= params.max_depth or node_size < params.min_samples_split:
            return leaf

        best_gain = GAIN_EPSILON
        best = None
        for feature in range(x.shape[1]):
            ordered = column_order[feature]
            found = _find_split(
                x[ordered, feature], grad[ordered], weights[ordered],
                params.min_samples_leaf,
            )
            if found is not None and found[0] > best_gain:
                best_gain, position = found
                best = (feature, position)
        if best is None:
            return leaf

        feature, position = best
        ordered = column_order[feature]
        low = x[ordered[position], feature]
        high = x[ordered[position + 1], feature]
        threshold = 0.5 * (low + high)
        if not low < threshold < high:
            threshold = low

        goes_left = np.zeros(x.shape[0], dtype=bool)
        goes_left[ordered[: position + 1]] = True
        left_order = [order[goes_left[order]] for order in column_order]
        right_order = [order[~goes_left[order]] for order in column_order]

        importance[feature] += best_gain
        split_gains.append(best_gain)
        return TreeNode(
            feature=feature,
            threshold=threshold,
            gain=best_gain,
            left=grow(left_order, depth + 1),
            right=grow(right_order, depth + 1),
        )

    return grow(sorted_columns, 0)


def _tree_predict(node: TreeNode, x: np.ndarray) -> np.ndarray:
    out = np.empty(x.shape[0], dtype=np.float64)

    def walk(node, rows):
        if node.is_leaf:
            out[rows] = node.value
            return
        mask = x[rows, node.feature] <= node.threshold
        walk(node.left, rows[mask])
        walk(node.right, rows[~mask])

    walk(node, np.arange(x.shape[0]))
    return out


def fit(data: TrainingMatrix, params: GBDTParams | None = None) -> TreeEnsemble:
    """Boost least-squares trees on the logistic residual y - p.

    Per-leaf values take a Newton step (gradient sum over hessian sum)
    and each tree is shrunk by the learning rate. Single-class data
    yields a degenerate constant model, flagged as such.
    """
    params = params or GBDTParams()
    if data.n_rows == 0:
        raise TrainingError("empty training matrix")
    y = data.y
    weights = data.weights
    positive_rate = float((weights * y).sum() / weights.sum())
    clamped = min(max(positive_rate, PROBABILITY_CLIP), 1.0 - PROBABILITY_CLIP)
    initial_score = math.log(clamped / (1.0 - clamped))
    importance = np.zeros(data.n_columns, dtype=np.float64)

    raw = np.full(data.n_rows, initial_score, dtype=np.float64)
    losses = [_log_loss(y, _sigmoid(raw), weights)]
    if positive_rate in (0.0, 1.0):
        return TreeEnsemble(
            initial_score, [], params.learning_rate, list(data.column_names),
            importance, losses, [], degenerate=True,
        )

    sorted_columns = [
        np.argsort(data.x[:, j], kind="mergesort") for j in range(data.n_columns)
    ]
    split_gains: list[float] = []
    trees = []
    for _ in range(params.n_trees):
        prob = _sigmoid(raw)
        residual = y - prob
        hessian = prob * (1.0 - prob)
        tree = _build_tree(
            data.x, residual, hessian, weights, sorted_columns, params,
            importance, split_gains,
        )
        trees.append(tree)
        raw = raw + params.learning_rate * _tree_predict(tree, data.x)
        losses.append(_log_loss(y, _sigmoid(raw), weights))

    return TreeEnsemble(
        initial_score, trees, params.learning_rate, list(data.column_names),
        importance, losses, split_gains,
    )


def predict_raw(model: TreeEnsemble, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != len(model.column_names):
        raise TrainingError(
            f"arity mismatch: model has {len(model.column_names)} columns, got {x.shape[1]}"
        )
    raw = np.full(x.shape[0], model.initial_score, dtype=np.float64)
    for tree in model.trees:
        raw += model.learning_rate * _tree_predict(tree, x)
    return raw


def predict_proba(model: TreeEnsemble, x: np.ndarray) -> np.ndarray:
    """Probability of label 1 per row."""
    return _sigmoid(predict_raw(model, x))


def feature_importance(model: TreeEnsemble) -> list[tuple[str, float]]:
    """Features by total split gain, descending; ties keep column order."""
    order = sorted(
        range(len(model.column_names)), key=lambda j: (-model.importance[j], j)
    )
    return [(model.column_names[j], float(model.importance[j])) for j in order]


def roc_points(scores: np.ndarray, labels: np.ndarray) -> list[tuple[float, float]]:
    """ROC curve points (fpr, tpr), tie-grouped by distinct score."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    positives = int((labels == 1).sum())
    negatives = int((labels == 0).sum())
    if positives == 0 or negatives == 0:
        raise TrainingError("ROC needs both classes")
    order = np.argsort(-scores, kind="mergesort")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    boundary = np.nonzero(sorted_scores[:-1] != sorted_scores[1:])[0]
    cut = np.concatenate([boundary, [len(scores) - 1]])
    tp = np.cumsum(sorted_labels == 1)[cut]
    fp = np.cumsum(sorted_labels == 0)[cut]
    points = [(0.0, 0.0)]
    points += [(float(f) / negatives, float(t) / positives) for f, t in zip(fp, tp)]
    return points


def auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Area under the tie-grouped ROC curve by the trapezoid rule."""
    points = roc_points(scores, labels)
    area = 0.0
    for (fpr_a, tpr_a), (fpr_b, tpr_b) in zip(points, points[1:]):
        area += 0.5 * (tpr_a + tpr_b) * (fpr_b - fpr_a)
    return area


@dataclass
class KFoldResult:
    mean_auc: float
    fold_aucs: list[float]
    fold_rocs: list[list[tuple[float, float]]]
    k: int


def kfold_auc(
    data: TrainingMatrix,
    k: int = 5,
    params: GBDTParams | None = None,
    seed: int = 0,
) -> KFoldResult:
    """Stratified k-fold cross validation of the discriminator.

    Folds are deterministic given the seed: each class is shuffled once
    and dealt round-robin. If the minority class has fewer than k rows,
    k is reduced to that count with a warning.
    """
    class_counts = [int((data.y == label).sum()) for label in (0, 1)]
    if min(class_counts) < 2:
        raise TrainingError("cross validation needs at least 2 rows of each class")
    if min(class_counts) < k:
        warnings.warn(
            f"reducing k from {k} to {min(class_counts)}: minority class too small",
            stacklevel=2,
        )
        k = min(class_counts)

    rng = np.random.default_rng(seed)
    fold_of = np.empty(data.n_rows, dtype=np.int64)
    for label in (0, 1):
        members = np.nonzero(data.y == label)[0]
        members = members[rng.permutation(len(members))]
        fold_of[members] = np.arange(len(members)) % k

    fold_aucs = []
    fold_rocs = []
    for fold in range(k):
        held = fold_of == fold
        train = TrainingMatrix(
            data.x[~held], data.y[~held], list(data.column_names), data.weights[~held]
        )
        model = fit(train, params)
        held_scores = predict_proba(model, data.x[held])
        fold_aucs.append(auc(held_scores, data.y[held]))
        fold_rocs.append(roc_points(held_scores, data.y[held]))
    return KFoldResult(float(np.mean(fold_aucs)), fold_aucs, fold_rocs, k)


def _node_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"value": node.value}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "gain": node.gain,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(doc: dict) -> TreeNode:
    if "feature" not in doc:
        return TreeNode(value=float(doc["value"]))
    return TreeNode(
        feature=int(doc["feature"]),
        threshold=float(doc["threshold"]),
        gain=float(doc["gain"]),
        left=_node_from_dict(doc["left"]),
        right=_node_from_dict(doc["right"]),
    )


def ensemble_to_json(model: TreeEnsemble) -> str:
    return json.dumps(
        {
            "initial_score": model.initial_score,
            "learning_rate": model.learning_rate,
            "column_names": model.column_names,
            "importance": list(model.importance),
            "train_losses": model.train_losses,
            "degenerate": model.degenerate,
            "trees": [_node_to_dict(tree) for tree in model.trees],
        }
    )


def ensemble_from_json(text: str) -> TreeEnsemble:
    doc = json.loads(text)
    return TreeEnsemble(
        float(doc["initial_score"]),
        [_node_from_dict(t) for t in doc["trees"]],
        float(doc["learning_rate"]),
        list(doc["column_names"]),
        np.asarray(doc["importance"], dtype=np.float64),
        [float(v) for v in doc["train_losses"]],
        [],
        bool(doc["degenerate"]),
    )
