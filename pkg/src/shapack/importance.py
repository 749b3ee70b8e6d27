"""Feature importance scores and rankings."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .attribution import ShapMatrix
from .dataset import StandardizationStats
from .model import GlmModel, TreeEnsemble

METHODS = ("variance", "l1", "gain", "beta")


class MissingGainError(ValueError):
    """A split node in the model carries no gain value."""


def rank(scores: Sequence[float], feature_names: Sequence[str]) -> tuple[int, ...]:
    """Indices sorted by score descending, ties broken by name ascending."""
    return tuple(sorted(range(len(scores)), key=lambda i: (-scores[i], feature_names[i])))


@dataclass(frozen=True, eq=False)
class ImportanceReport:
    method: str
    scores: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=float)
        if scores.shape != (len(self.feature_names),):
            raise ValueError("one score per feature required")
        if (scores < 0).any():
            raise ValueError("importance scores must be nonnegative")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def ranking(self) -> tuple[int, ...]:
        return rank(self.scores.tolist(), self.feature_names)

    def ranked_names(self) -> list[str]:
        return [self.feature_names[i] for i in self.ranking]

    def position(self, name: str) -> int:
        """1-based rank of ``name``."""
        return self.ranked_names().index(name) + 1

    def score(self, name: str) -> float:
        return float(self.scores[self.feature_names.index(name)])

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "scores": {n: float(s) for n, s in zip(self.feature_names, self.scores)},
            "ranking": self.ranked_names(),
        }


def variance_importance(shap: ShapMatrix) -> ImportanceReport:
    # columns are centered, so the mean square is the variance
    scores = np.mean(shap.phi**2, axis=0) if shap.n_rows else np.zeros(shap.n_features)
    return ImportanceReport("variance", scores, shap.feature_names)


def l1_importance(shap: ShapMatrix) -> ImportanceReport:
    return ImportanceReport("l1", np.abs(shap.phi).sum(axis=0), shap.feature_names)


def gain_importance(model: TreeEnsemble) -> ImportanceReport:
    """Total stored split gain per feature, summed over every tree."""
    if not isinstance(model, TreeEnsemble):
        raise TypeError("gain importance requires a tree ensemble")
    scores = np.zeros(model.n_features)
    for t, tree in enumerate(model.trees):
        for node in tree.nodes:
            if node.is_leaf:
                continue
            if node.gain is None:
                raise MissingGainError(f"trees[{t}] node {node.node_id} has no gain")
            scores[node.feature] += node.gain
    return ImportanceReport("gain", scores, model.feature_names)


def beta_importance(glm: GlmModel, stats: StandardizationStats) -> ImportanceReport:
    """Squared beta coefficients ``(a_i * std_i) ** 2``."""
    if not isinstance(glm, GlmModel):
        raise TypeError("beta importance requires a GLM")
    if tuple(stats.feature_names) != tuple(glm.feature_names):
        std = np.array([stats.std[list(stats.feature_names).index(n)] for n in glm.feature_names])
    else:
        std = np.asarray(stats.std, dtype=float)
    beta = np.asarray(glm.coefficients, dtype=float) * std
    return ImportanceReport("beta", beta**2, glm.feature_names)
