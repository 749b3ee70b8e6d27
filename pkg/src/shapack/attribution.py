"""Shapley attributions for tree ensembles and GLMs.

Two independent routes are provided for trees: an exhaustive subset
enumeration over :func:`conditional_expectation` (the oracle) and the
polynomial-time path algorithm in :func:`tree_shap`. Both use the
path-dependent value function, where a split on an unobserved feature is
replaced by the cover-weighted average of its two branches.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dataset import Dataset
from .model import GlmModel, Model, Tree, TreeEnsemble, predict_margin

BRUTEFORCE_MAX_FEATURES = 20


@dataclass(frozen=True, eq=False)
class ShapMatrix:
    """Centered attributions: ``phi0 + phi[j].sum()`` is row j's margin."""

    phi0: float
    phi: np.ndarray
    feature_names: tuple[str, ...]
    row_ids: tuple = ()

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        if phi.ndim != 2 or phi.shape[1] != len(self.feature_names):
            raise ValueError(
                f"phi shape {phi.shape} does not match {len(self.feature_names)} features"
            )
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "phi0", float(self.phi0))
        if not self.row_ids:
            object.__setattr__(self, "row_ids", tuple(range(phi.shape[0])))
        elif len(self.row_ids) != phi.shape[0]:
            raise ValueError(f"{len(self.row_ids)} row ids for {phi.shape[0]} rows")

    @property
    def n_rows(self) -> int:
        return self.phi.shape[0]

    @property
    def n_features(self) -> int:
        return self.phi.shape[1]

    def index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise KeyError(f"unknown feature {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.phi[:, self.index(name)]

    def totals(self) -> np.ndarray:
        """Per-row reconstruction ``phi0 + sum_i phi[j, i]``."""
        return self.phi0 + self.phi.sum(axis=1)


# -- value function and oracle ---------------------------------------------

def conditional_expectation(tree: Tree, row, subset: Iterable[int]) -> float:
    """Expected tree output given that only the features in ``subset`` are known."""
    known = frozenset(subset)

    def walk(i: int) -> float:
        if tree.is_leaf(i):
            return tree.value[i]
        left, right = tree.left[i], tree.right[i]
        if tree.feature[i] in known:
            return walk(left if tree.go_left(i, row[tree.feature[i]]) else right)
        total = 0.0
        for child in (left, right):
            if tree.cover[child] > 0:
                total += tree.cover[child] * walk(child)
        return total / tree.cover[i]

    return walk(tree.root)


def _value_function(model: Model, row, background_mean=None):
    if isinstance(model, GlmModel):
        if background_mean is None:
            raise ValueError("GLM attribution needs a background dataset")
        a = np.asarray(model.coefficients, dtype=float)
        mean = np.asarray(background_mean, dtype=float)

        def f(subset):
            idx = list(subset)
            mask = np.zeros(len(a), dtype=bool)
            mask[idx] = True
            return float(model.intercept + np.dot(a[mask], row[mask]) + np.dot(a[~mask], mean[~mask]))

        return f

    def f(subset):
        return model.base_score + sum(conditional_expectation(t, row, subset) for t in model.trees)

    return f


def shapley_bruteforce(model: Model, row, background: Dataset | np.ndarray | None = None) -> np.ndarray:
    """Exact Shapley values by enumerating every feature subset.

    For a GLM the value of a coalition fills the absent features with their
    mean over ``background``. Exponential in the number of features, so
    this is only meant as a reference for testing.
    """
    row = np.asarray(row, dtype=float)
    k = model.n_features
    if k > BRUTEFORCE_MAX_FEATURES:
        raise ValueError(f"{k} features exceeds the brute-force limit of {BRUTEFORCE_MAX_FEATURES}")
    mean = None
    if isinstance(model, GlmModel):
        if np.isnan(row).any():
            raise ValueError("GLM requires complete rows")
        if background is not None:
            values = background.values if isinstance(background, Dataset) else np.asarray(background)
            mean = values.mean(axis=0)
    f = _value_function(model, row, mean)

    value = np.empty(1 << k)
    for mask in range(1 << k):
        value[mask] = f([i for i in range(k) if mask >> i & 1])
    weight = [math.factorial(s) * math.factorial(k - s - 1) / math.factorial(k) for s in range(k)]

    phi = np.zeros(k)
    for i in range(k):
        bit = 1 << i
        for mask in range(1 << k):
            if mask & bit:
                continue
            phi[i] += weight[bin(mask).count("1")] * (value[mask | bit] - value[mask])
    return phi


# -- path algorithm --------------------------------------------------------
# A path entry is [feature, zero_fraction, one_fraction, weight]. The weights
# track, for each subset size, the proportion of subsets of features on the
# path that flow through to the current node.

def _extend(path, zero_fraction, one_fraction, feature):
    depth = len(path)
    path = [e[:] for e in path]
    path.append([feature, zero_fraction, one_fraction, 1.0 if depth == 0 else 0.0])
    for i in range(depth - 1, -1, -1):
        path[i + 1][3] += one_fraction * path[i][3] * (i + 1) / (depth + 1)
        path[i][3] = zero_fraction * path[i][3] * (depth - i) / (depth + 1)
    return path


def _unwind(path, k):
    depth = len(path) - 1
    zero, one = path[k][1], path[k][2]
    carry = path[depth][3]
    weights = [e[3] for e in path[:depth]]
    for j in range(depth - 1, -1, -1):
        if one != 0:
            tmp = weights[j]
            weights[j] = carry * (depth + 1) / ((j + 1) * one)
            carry = tmp - weights[j] * zero * (depth - j) / (depth + 1)
        else:
            weights[j] = weights[j] * (depth + 1) / (zero * (depth - j))
    rest = path[:k] + path[k + 1:]
    return [[e[0], e[1], e[2], w] for e, w in zip(rest, weights)]


def _unwound_sum(path, k) -> float:
    depth = len(path) - 1
    zero, one = path[k][1], path[k][2]
    carry = path[depth][3]
    total = 0.0
    if one != 0:
        for j in range(depth - 1, -1, -1):
            w = carry * (depth + 1) / ((j + 1) * one)
            total += w
            carry = path[j][3] - w * zero * (depth - j) / (depth + 1)
    else:
        for j in range(depth - 1, -1, -1):
            total += path[j][3] * (depth + 1) / (zero * (depth - j))
    return total


def _tree_shap_single(tree: Tree, row, phi: np.ndarray) -> None:
    def recurse(i, path, zero_fraction, one_fraction, feature):
        path = _extend(path, zero_fraction, one_fraction, feature)
        if tree.is_leaf(i):
            v = tree.value[i]
            for k in range(1, len(path)):
                w = _unwound_sum(path, k)
                phi[path[k][0]] += w * (path[k][2] - path[k][1]) * v
            return
        d = tree.feature[i]
        if tree.go_left(i, row[d]):
            hot, cold = tree.left[i], tree.right[i]
        else:
            hot, cold = tree.right[i], tree.left[i]
        incoming_zero = incoming_one = 1.0
        for k in range(1, len(path)):
            if path[k][0] == d:
                incoming_zero, incoming_one = path[k][1], path[k][2]
                path = _unwind(path, k)
                break
        cover = tree.cover[i]
        for child, one in ((hot, incoming_one), (cold, 0.0)):
            zero = incoming_zero * tree.cover[child] / cover
            if zero == 0 and one == 0:
                continue
            recurse(child, path, zero, one, d)

    recurse(tree.root, [], 1.0, 1.0, -1)


def tree_shap(model: TreeEnsemble, row) -> np.ndarray:
    """Path-dependent Shapley values of one row, polynomial in tree size."""
    row = np.asarray(row, dtype=float)
    if row.shape != (model.n_features,):
        raise ValueError(f"row has {row.size} values, model expects {model.n_features}")
    # each tree fills its own vector so the ensemble result is the plain
    # sum of per-tree results, matching tree by tree decomposition bit for bit
    phi = np.zeros(model.n_features)
    for tree in model.trees:
        part = np.zeros(model.n_features)
        _tree_shap_single(tree, row, part)
        phi = phi + part
    return phi


def expected_margin(model: TreeEnsemble) -> float:
    """Value of the empty coalition: base score plus each tree's cover-weighted mean."""
    return model.base_score + sum(t.expected_value() for t in model.trees)


# -- centered matrices -----------------------------------------------------

def _align(model: Model, dataset: Dataset) -> Dataset:
    if dataset.n_rows == 0:
        raise ValueError("empty dataset")
    if dataset.nominal:
        raise ValueError("dataset has unencoded nominal columns")
    if dataset.feature_names == tuple(model.feature_names):
        return dataset
    return dataset.reorder(model.feature_names)


def glm_shap(glm: GlmModel, dataset: Dataset) -> ShapMatrix:
    data = _align(glm, dataset)
    X = data.values
    if np.isnan(X).any():
        raise ValueError("GLM requires complete rows")
    a = np.asarray(glm.coefficients, dtype=float)
    mean = X.mean(axis=0)
    phi = a * X - a * mean
    return ShapMatrix(
        phi0=glm.intercept + float(np.dot(a, mean)),
        phi=phi,
        feature_names=glm.feature_names,
        row_ids=data.row_ids,
    )


def center(raw: np.ndarray, margins: np.ndarray, feature_names: Sequence[str], row_ids=()) -> ShapMatrix:
    """Subtract each feature's mean raw attribution and set phi0 to the mean margin."""
    raw = np.asarray(raw, dtype=float)
    return ShapMatrix(
        phi0=float(np.mean(margins)),
        phi=raw - raw.mean(axis=0),
        feature_names=tuple(feature_names),
        row_ids=tuple(row_ids),
    )


def raw_attributions(model: TreeEnsemble, X: np.ndarray) -> np.ndarray:
    return np.array([tree_shap(model, row) for row in X]).reshape(len(X), model.n_features)


def explain(model: Model, dataset: Dataset) -> ShapMatrix:
    """Centered attribution matrix of ``model`` over the rows of ``dataset``.

    Column order follows the model's feature names; the dataset is reordered
    to match and must carry exactly those names.
    """
    if isinstance(model, GlmModel):
        return glm_shap(model, dataset)
    data = _align(model, dataset)
    X = data.values
    raw = raw_attributions(model, X)
    margins = np.array([predict_margin(model, row) for row in X])
    return center(raw, margins, model.feature_names, data.row_ids)


# -- export ----------------------------------------------------------------

def shap_to_csv(shap: ShapMatrix) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["row_id", *shap.feature_names])
    for rid, row in zip(shap.row_ids, shap.phi):
        writer.writerow([rid, *(repr(float(v)) for v in row)])
    return buf.getvalue()


def shap_sidecar(shap: ShapMatrix) -> dict:
    return {"phi0": shap.phi0, "feature_names": list(shap.feature_names)}


def shap_from_csv(text: str, sidecar: dict) -> ShapMatrix:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header[0] != "row_id":
        raise ValueError("attribution CSV must start with a row_id column")
    names = header[1:]
    if names != list(sidecar["feature_names"]):
        raise ValueError("attribution CSV columns disagree with the sidecar feature order")
    row_ids, rows = [], []
    for cells in reader:
        if not cells:
            continue
        row_ids.append(cells[0])
        rows.append([float(c) for c in cells[1:]])
    phi = np.array(rows, dtype=float).reshape(len(rows), len(names))
    return ShapMatrix(phi0=sidecar["phi0"], phi=phi, feature_names=tuple(names), row_ids=tuple(row_ids))


def write_shap(shap: ShapMatrix, csv_path) -> Path:
    """Write ``shap.csv`` plus a ``.json`` sidecar next to it; returns the sidecar path."""
    csv_path = Path(csv_path)
    csv_path.write_text(shap_to_csv(shap), encoding="utf-8")
    sidecar = csv_path.with_suffix(".json")
    sidecar.write_text(json.dumps(shap_sidecar(shap), indent=1) + "\n", encoding="utf-8")
    return sidecar


def read_shap(csv_path, sidecar_path=None) -> ShapMatrix:
    csv_path = Path(csv_path)
    sidecar_path = Path(sidecar_path) if sidecar_path else csv_path.with_suffix(".json")
    sidecar = json.loads(sidecar_path.read_text(encoding="utf-8"))
    return shap_from_csv(csv_path.read_text(encoding="utf-8"), sidecar)
