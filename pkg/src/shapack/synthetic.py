"""Seeded synthetic admission-style data with a planted tree-ensemble rule.

The generator draws mixed numeric, ordinal, nominal and partly missing
columns, builds a tree ensemble by hand from a fixed rule (covers and gains
are counted on the generated rows), and samples binary labels from that
ensemble's probabilities. The ensemble is written out as the model to
explain, so the rule's features are known to be the important ones.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, Schema, load_csv, one_hot_encode
from .fixtures import split_gains
from .model import Tree, TreeEnsemble, TreeNode, predict_margins, sigmoid

COMPLAINTS = ("dizziness", "speech", "weakness")
ADL = ("adl.eat", "adl.walk", "adl.bath")
PLANTED = ("nihss", "dDimer", "agRatio", *ADL)
BASE_SCORE = -1.4

# each rule: (feature, threshold, default_left, left value, right value), or a
# nested pair (root rule, rule under the right child)
_RULES = [
    (("nihss", 3.5, True, -0.35, 0.25), ("nihss", 8.5, True, 0.25, 0.7)),
    ("dDimer", 1.0, True, -0.2, 0.35),
    ("agRatio", 1.5, True, 0.12, -0.22),
    ("adl.eat", 7.5, True, 0.2, -0.12),
    ("adl.walk", 7.5, True, 0.22, -0.14),
    ("adl.bath", 7.5, True, 0.18, -0.1),
    (("dDimer", 1.0, True, 0.0, 0.0), ("agRatio", 1.5, True, 0.08, -0.08)),
    ("glucose", 140.0, True, -0.03, 0.08),
    ("chiefComplaint=speech", 0.5, True, -0.02, 0.06),
    ("age", 80.0, True, -0.01, 0.03),
    ("noise1", 0.5, True, -0.005, 0.005),
    ("noise2", 0.5, False, 0.004, -0.004),
]


@dataclass(frozen=True)
class DemoBundle:
    csv_text: str
    schema: Schema
    model: TreeEnsemble
    groups: dict
    planted: tuple[str, ...] = PLANTED


def _raw_columns(rng: np.random.Generator, n: int) -> dict:
    ability = rng.normal(size=n)
    cols = {
        "age": np.round(rng.normal(72, 11, n)),
        "nihss": np.minimum(rng.poisson(np.exp(1.0 - 0.5 * ability)), 30).astype(float),
        "dDimer": np.round(rng.lognormal(-0.3, 0.8, n), 2),
        "agRatio": np.round(rng.normal(1.4, 0.3, n), 2),
        "glucose": np.round(rng.lognormal(4.8, 0.25, n)),
        "noise1": np.round(rng.random(n), 3),
        "noise2": np.round(rng.random(n), 3),
    }
    for name in ADL:
        latent = ability + rng.normal(scale=0.6, size=n)
        cols[name] = np.select([latent < -0.5, latent < 0.4], [0.0, 5.0], 10.0)
    # missing at random
    for name, rate in (("dDimer", 0.1), ("agRatio", 0.06)):
        cols[name][rng.random(n) < rate] = math.nan
    # missing not at random: glucose is mostly measured when high
    low = cols["glucose"] < 130
    cols["glucose"][low & (rng.random(n) < 0.6)] = math.nan
    complaint = rng.choice(COMPLAINTS, size=n, p=[0.3, 0.3, 0.4]).astype(object)
    complaint[rng.random(n) < 0.05] = None
    cols["chiefComplaint"] = complaint
    return cols


def _build_tree(rule, data: Dataset) -> Tree:
    X = data.values
    nodes: list[TreeNode] = []

    def reach(mask, feature, threshold, default_left):
        x = X[:, data.index(feature)]
        go_left = np.where(np.isnan(x), default_left, x < threshold)
        return mask & go_left, mask & ~go_left

    def add_split(mask, spec, right_spec=None):
        feature, threshold, default_left, lv, rv = spec
        nid = len(nodes)
        nodes.append(None)
        lmask, rmask = reach(mask, feature, threshold, default_left)
        left = len(nodes)
        nodes.append(TreeNode(left, "leaf", cover=float(lmask.sum()), value=lv))
        if right_spec is None:
            right = len(nodes)
            nodes.append(TreeNode(right, "leaf", cover=float(rmask.sum()), value=rv))
        else:
            right = add_split(rmask, right_spec)
        nodes[nid] = TreeNode(
            nid, "split", feature=data.index(feature), threshold=threshold, left=left,
            right=right, default_left=default_left, cover=float(mask.sum()),
        )
        return nid

    everyone = np.ones(data.n_rows, dtype=bool)
    if isinstance(rule[0], tuple):
        add_split(everyone, *rule)
    else:
        add_split(everyone, rule)
    return Tree(split_gains(nodes))


def _to_csv(cols: dict, labels: np.ndarray, order: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["patient", *order, "worsened"])
    n = len(labels)
    for j in range(n):
        cells = [f"p{j:05d}"]
        for name in order:
            v = cols[name][j]
            if v is None or (isinstance(v, float) and math.isnan(v)):
                cells.append("")
            elif isinstance(v, str):
                cells.append(v)
            else:
                cells.append(repr(float(v)))
        cells.append("1" if labels[j] else "0")
        w.writerow(cells)
    return buf.getvalue()


def generate(seed: int = 0, n_rows: int = 1000) -> DemoBundle:
    rng = np.random.default_rng(seed)
    cols = _raw_columns(rng, n_rows)
    order = ["age", "nihss", "chiefComplaint", *ADL, "dDimer", "agRatio", "glucose", "noise1", "noise2"]
    schema = Schema(label="worsened", nominal=("chiefComplaint",), row_id="patient")

    # labels are drawn after the model exists; build with placeholder labels first
    draft = _to_csv(cols, np.zeros(n_rows, dtype=bool), order)
    encoded = one_hot_encode(load_csv(draft, schema))
    trees = tuple(_build_tree(rule, encoded) for rule in _RULES)
    model = TreeEnsemble(trees, BASE_SCORE, encoded.n_features, encoded.feature_names)
    labels = rng.random(n_rows) < sigmoid(predict_margins(model, encoded.values))

    return DemoBundle(
        csv_text=_to_csv(cols, labels, order),
        schema=schema,
        model=model,
        groups={"adl.all": list(ADL)},
    )
