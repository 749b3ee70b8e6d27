import itertools
import math

import numpy as np
import pytest

from shapack.dataset import Dataset
from shapack.model import GlmModel, Tree, TreeEnsemble, TreeNode

ACCEPTANCE_LINES = []


def stump(threshold=0.5, values=(0.0, 1.0), covers=(50.0, 50.0), default_left=True, feature=0):
    return Tree([
        TreeNode(0, "split", feature=feature, threshold=threshold, left=1, right=2,
                 default_left=default_left, cover=sum(covers)),
        TreeNode(1, "leaf", cover=covers[0], value=values[0]),
        TreeNode(2, "leaf", cover=covers[1], value=values[1]),
    ])


def random_tree(rng, n_features=4, max_depth=3, leaf_prob=0.3):
    """Random binary tree with positive covers, mixed thresholds and default directions."""
    nodes = []

    def build(cover, depth):
        nid = len(nodes)
        nodes.append(None)
        if depth == max_depth or (depth > 0 and rng.random() < leaf_prob):
            nodes[nid] = TreeNode(nid, "leaf", cover=cover, value=float(rng.normal()))
            return nid
        frac = rng.uniform(0.05, 0.95)
        left = build(cover * frac, depth + 1)
        right = build(cover - cover * frac, depth + 1)
        threshold = float(rng.choice([0.5, 1.0, rng.random()]))
        nodes[nid] = TreeNode(
            nid, "split", feature=int(rng.integers(n_features)), threshold=threshold,
            left=left, right=right, default_left=bool(rng.random() < 0.5), cover=cover,
            gain=float(rng.random()),
        )
        return nid

    build(float(rng.uniform(10, 100)), 0)
    return Tree(nodes)


def random_ensemble(rng, n_features=4, max_depth=3, max_trees=3):
    names = tuple(f"f{i}" for i in range(n_features))
    trees = tuple(random_tree(rng, n_features, max_depth) for _ in range(int(rng.integers(1, max_trees + 1))))
    return TreeEnsemble(trees, float(rng.normal()), n_features, names)


def binary_rows(n_features=4, with_missing=True):
    """All complete binary rows, then every row with exactly one missing feature."""
    rows = [list(map(float, r)) for r in itertools.product((0, 1), repeat=n_features)]
    if with_missing:
        for i in range(n_features):
            for r in itertools.product((0, 1), repeat=n_features - 1):
                r = list(map(float, r))
                r.insert(i, math.nan)
                rows.append(r)
    return np.array(rows)


@pytest.fixture
def stump_model():
    return TreeEnsemble((stump(),), 0.0, 1, ("x0",))


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


@pytest.fixture
def glm_and_data():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(200, 3)) * [1.0, 2.0, 0.5] + [0.0, 3.0, -1.0]
    glm = GlmModel(tuple(rng.normal(size=3)), 0.3, ("a", "b", "c"))
    return glm, Dataset(values=X, feature_names=("a", "b", "c"))


@pytest.fixture
def acceptance():
    def record(number, name, ok, detail=""):
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  criterion {number}: {name}  {detail}".rstrip())
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
