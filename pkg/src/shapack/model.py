"""Tree-ensemble and logistic GLM models, their file format, and prediction.

Missing feature values are carried as NaN. A split sends ``x < threshold``
left, ``x >= threshold`` right and a missing value along its default branch.
All margins are on the log-odds scale.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

COVER_RTOL = 1e-9


class ModelError(ValueError):
    """Raised for malformed or inconsistent model documents."""


@dataclass(frozen=True)
class TreeNode:
    node_id: int
    kind: str  # "split" | "leaf"
    feature: int | None = None
    threshold: float | None = None
    left: int | None = None
    right: int | None = None
    default_left: bool = True
    cover: float = 0.0
    value: float | None = None
    gain: float | None = None

    @property
    def is_leaf(self) -> bool:
        return self.kind == "leaf"


class Tree:
    """A single binary tree stored as flat arrays indexed by position.

    ``nodes`` keeps the records in document order so a tree serializes back
    exactly as it was read; the array view is what the algorithms walk.
    """

    def __init__(self, nodes: Sequence[TreeNode]):
        self.nodes = tuple(nodes)
        pos = {n.node_id: i for i, n in enumerate(self.nodes)}
        self._pos = pos
        n = len(self.nodes)
        self.left = [-1] * n
        self.right = [-1] * n
        self.feature = [-1] * n
        self.threshold = [0.0] * n
        self.default_left = [True] * n
        self.cover = [0.0] * n
        self.value = [0.0] * n
        for i, node in enumerate(self.nodes):
            self.cover[i] = float(node.cover)
            if node.is_leaf:
                self.value[i] = float(node.value)
            else:
                self.left[i] = pos[node.left]
                self.right[i] = pos[node.right]
                self.feature[i] = node.feature
                self.threshold[i] = float(node.threshold)
                self.default_left[i] = node.default_left
        children = {c for c in self.left + self.right if c >= 0}
        roots = [i for i in range(n) if i not in children]
        self.root = roots[0] if roots else 0

    def __eq__(self, other):
        return isinstance(other, Tree) and self.nodes == other.nodes

    def __hash__(self):
        return hash(self.nodes)

    def __repr__(self):
        return f"Tree({len(self.nodes)} nodes)"

    def is_leaf(self, i: int) -> bool:
        return self.left[i] < 0

    def node_id(self, i: int) -> int:
        return self.nodes[i].node_id

    def go_left(self, i: int, x: float) -> bool:
        if math.isnan(x):
            return self.default_left[i]
        return x < self.threshold[i]

    def leaf_index(self, row) -> int:
        i = self.root
        while self.left[i] >= 0:
            i = self.left[i] if self.go_left(i, row[self.feature[i]]) else self.right[i]
        return i

    def predict(self, row) -> float:
        return self.value[self.leaf_index(row)]

    def expected_value(self) -> float:
        """Cover-weighted mean of the leaf values."""
        total = 0.0
        for i in range(len(self.nodes)):
            if self.is_leaf(i):
                total += self.cover[i] * self.value[i]
        return total / self.cover[self.root]

    def max_depth(self) -> int:
        depth = {self.root: 0}
        stack = [self.root]
        best = 0
        while stack:
            i = stack.pop()
            best = max(best, depth[i])
            if not self.is_leaf(i):
                for c in (self.left[i], self.right[i]):
                    depth[c] = depth[i] + 1
                    stack.append(c)
        return best


@dataclass(frozen=True, eq=True)
class TreeEnsemble:
    trees: tuple[Tree, ...]
    base_score: float
    n_features: int
    feature_names: tuple[str, ...]

    def __post_init__(self):
        if len(self.feature_names) != self.n_features:
            raise ModelError(
                f"feature_names has {len(self.feature_names)} entries, expected {self.n_features}"
            )
        for t, tree in enumerate(self.trees):
            for node in tree.nodes:
                if not node.is_leaf and not 0 <= node.feature < self.n_features:
                    raise ModelError(
                        f"trees[{t}] node {node.node_id}: feature index {node.feature} out of range"
                    )


@dataclass(frozen=True)
class GlmModel:
    coefficients: tuple[float, ...]
    intercept: float
    feature_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not self.feature_names:
            object.__setattr__(
                self, "feature_names", tuple(f"x{i}" for i in range(len(self.coefficients)))
            )
        if len(self.coefficients) != len(self.feature_names):
            raise ModelError(
                f"{len(self.coefficients)} coefficients for {len(self.feature_names)} features"
            )

    @property
    def n_features(self) -> int:
        return len(self.coefficients)


Model = Union[TreeEnsemble, GlmModel]


# -- parsing ---------------------------------------------------------------

def _require(record: dict, key: str, where: str):
    if key not in record or record[key] is None:
        raise ModelError(f"{where}: missing field '{key}'")
    return record[key]


def _number(value, where: str, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelError(f"{where}: field '{key}' must be a number")
    value = float(value)
    if not math.isfinite(value):
        raise ModelError(f"{where}: field '{key}' must be finite")
    return value


def _parse_node(rec, where: str) -> TreeNode:
    if not isinstance(rec, dict):
        raise ModelError(f"{where}: node record must be an object")
    node_id = _require(rec, "id", where)
    if isinstance(node_id, bool) or not isinstance(node_id, int):
        raise ModelError(f"{where}: field 'id' must be an integer")
    where = f"{where} (node {node_id})"
    kind = _require(rec, "kind", where)
    cover = _number(_require(rec, "cover", where), where, "cover")
    if cover < 0:
        raise ModelError(f"{where}: negative cover")
    if kind == "leaf":
        value = _number(_require(rec, "value", where), where, "value")
        return TreeNode(node_id=node_id, kind="leaf", cover=cover, value=value)
    if kind != "split":
        raise ModelError(f"{where}: unknown node kind {kind!r}")
    feature = _require(rec, "feature", where)
    if isinstance(feature, bool) or not isinstance(feature, int):
        raise ModelError(f"{where}: field 'feature' must be an integer")
    left = _require(rec, "left", where)
    right = _require(rec, "right", where)
    default_left = rec.get("default_left", True)
    if not isinstance(default_left, bool):
        raise ModelError(f"{where}: field 'default_left' must be a boolean")
    gain = rec.get("gain")
    if gain is not None:
        gain = _number(gain, where, "gain")
    return TreeNode(
        node_id=node_id,
        kind="split",
        feature=feature,
        threshold=_number(_require(rec, "threshold", where), where, "threshold"),
        left=left,
        right=right,
        default_left=default_left,
        cover=cover,
        gain=gain,
    )


def _check_tree(nodes: list[TreeNode], where: str, n_features: int):
    by_id = {}
    for node in nodes:
        if node.node_id in by_id:
            raise ModelError(f"{where}: duplicate node id {node.node_id}")
        by_id[node.node_id] = node
    if not nodes:
        raise ModelError(f"{where}: tree has no nodes")
    parent_of = {}
    for node in nodes:
        if node.is_leaf:
            continue
        if not 0 <= node.feature < n_features:
            raise ModelError(
                f"{where}: feature index {node.feature} out of range at node {node.node_id}"
            )
        if node.left == node.right:
            raise ModelError(f"{where}: node {node.node_id} has identical children")
        for child in (node.left, node.right):
            if child not in by_id:
                raise ModelError(f"{where}: node {node.node_id} references unknown node {child}")
            if child in parent_of:
                raise ModelError(f"{where}: node {child} has more than one parent")
            parent_of[child] = node.node_id
    roots = [n.node_id for n in nodes if n.node_id not in parent_of]
    if len(roots) != 1:
        raise ModelError(f"{where}: expected a single root, found {len(roots)}")
    seen = set()
    stack = [roots[0]]
    while stack:
        nid = stack.pop()
        seen.add(nid)
        node = by_id[nid]
        if not node.is_leaf:
            stack.extend((node.left, node.right))
    if len(seen) != len(nodes):
        unreachable = sorted(set(by_id) - seen)
        raise ModelError(f"{where}: unreachable nodes {unreachable}")
    for node in nodes:
        if node.is_leaf:
            continue
        if node.cover <= 0:
            raise ModelError(f"{where}: split node {node.node_id} has zero cover")
        children = by_id[node.left].cover + by_id[node.right].cover
        if abs(node.cover - children) > COVER_RTOL * max(abs(node.cover), 1.0):
            raise ModelError(
                f"{where}: cover mismatch at node {node.node_id} "
                f"({node.cover:g} != {by_id[node.left].cover:g} + {by_id[node.right].cover:g})"
            )


def _feature_names(doc, where: str) -> tuple[str, ...]:
    names = _require(doc, "feature_names", where)
    if not isinstance(names, list) or not all(isinstance(s, str) for s in names):
        raise ModelError(f"{where}: 'feature_names' must be a list of strings")
    if len(set(names)) != len(names):
        raise ModelError(f"{where}: duplicate feature names")
    return tuple(names)


def model_from_dict(doc: dict) -> Model:
    if not isinstance(doc, dict):
        raise ModelError("model document must be an object")
    kind = doc.get("kind")
    if kind == "glm":
        names = _feature_names(doc, "model")
        coefs = _require(doc, "coefficients", "model")
        if not isinstance(coefs, list):
            raise ModelError("model: 'coefficients' must be a list")
        coefs = tuple(_number(c, f"model.coefficients[{i}]", "value") for i, c in enumerate(coefs))
        intercept = _number(_require(doc, "intercept", "model"), "model", "intercept")
        return GlmModel(coefficients=coefs, intercept=intercept, feature_names=names)
    if kind != "ensemble":
        raise ModelError(f"model: unknown model kind {kind!r}")
    names = _feature_names(doc, "model")
    base = _number(doc.get("base_score", 0.0), "model", "base_score")
    raw_trees = _require(doc, "trees", "model")
    if not isinstance(raw_trees, list):
        raise ModelError("model: 'trees' must be a list")
    trees = []
    for t, raw in enumerate(raw_trees):
        where = f"trees[{t}]"
        if not isinstance(raw, list):
            raise ModelError(f"{where}: tree must be a list of node records")
        nodes = [_parse_node(rec, f"{where}[{k}]") for k, rec in enumerate(raw)]
        _check_tree(nodes, where, len(names))
        trees.append(Tree(nodes))
    return TreeEnsemble(
        trees=tuple(trees), base_score=base, n_features=len(names), feature_names=names
    )


def parse_model(text: str) -> Model:
    """Parse a model document (JSON text) into a validated model."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"malformed model document: {exc}") from None
    return model_from_dict(doc)


def load_model(path) -> Model:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())


def _node_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"id": node.node_id, "kind": "leaf", "cover": node.cover, "value": node.value}
    rec = {
        "id": node.node_id,
        "kind": "split",
        "feature": node.feature,
        "threshold": node.threshold,
        "left": node.left,
        "right": node.right,
        "default_left": node.default_left,
        "cover": node.cover,
    }
    if node.gain is not None:
        rec["gain"] = node.gain
    return rec


def model_to_dict(model: Model) -> dict:
    if isinstance(model, GlmModel):
        return {
            "kind": "glm",
            "coefficients": list(model.coefficients),
            "intercept": model.intercept,
            "feature_names": list(model.feature_names),
        }
    return {
        "kind": "ensemble",
        "base_score": model.base_score,
        "feature_names": list(model.feature_names),
        "trees": [[_node_to_dict(n) for n in tree.nodes] for tree in model.trees],
    }


def serialize_model(model: Model) -> str:
    return json.dumps(model_to_dict(model), indent=1)


# -- prediction ------------------------------------------------------------

def route(tree: Tree, row) -> int:
    """Return the id of the leaf that ``row`` reaches in ``tree``."""
    return tree.node_id(tree.leaf_index(row))


def _check_row(model: Model, row) -> np.ndarray:
    row = np.asarray(row, dtype=float)
    if row.shape != (model.n_features,):
        raise ValueError(f"row has {row.size} values, model expects {model.n_features}")
    return row


def predict_margin(model: Model, row) -> float:
    row = _check_row(model, row)
    if isinstance(model, GlmModel):
        if np.isnan(row).any():
            raise ValueError("GLM requires complete rows")
        return float(model.intercept + np.dot(model.coefficients, row))
    return model.base_score + sum(tree.predict(row) for tree in model.trees)


def predict_margins(model: Model, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.array([predict_margin(model, row) for row in X])


def sigmoid(margin):
    return 1.0 / (1.0 + np.exp(-np.asarray(margin, dtype=float)))


def predict_proba(model: Model, row) -> float:
    return float(sigmoid(predict_margin(model, row)))
