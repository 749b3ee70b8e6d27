"""Feature packing: merging attribution columns into grouped features.

Packing only rewrites the attribution matrix. The model and its
predictions are never touched, and every row still sums to its margin.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .attribution import ShapMatrix
from .importance import ImportanceReport, variance_importance


class GroupError(ValueError):
    """Invalid or overlapping feature groups."""


@dataclass(frozen=True)
class FeatureGroup:
    name: str
    members: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(int(m) for m in self.members))
        if len(self.members) < 2:
            raise GroupError(f"group {self.name!r} needs at least two members")

    def sorted_members(self) -> list[int]:
        return sorted(self.members)


def shap_covariance(shap: ShapMatrix) -> np.ndarray:
    """Population covariance of the (already centered) attribution columns."""
    n = max(shap.n_rows, 1)
    cov = shap.phi.T @ shap.phi / n
    return (cov + cov.T) / 2


def _validate(shap: ShapMatrix, groups: Sequence[FeatureGroup]) -> None:
    seen: dict[int, str] = {}
    names = set()
    for group in groups:
        if group.name in names:
            raise GroupError(f"duplicate group name {group.name!r}")
        names.add(group.name)
        for m in group.members:
            if not 0 <= m < shap.n_features:
                raise GroupError(f"group {group.name!r}: unknown feature index {m}")
            if m in seen:
                raise GroupError(
                    f"feature {shap.feature_names[m]!r} is in both {seen[m]!r} and {group.name!r}"
                )
            seen[m] = group.name
    for group in groups:
        for i, name in enumerate(shap.feature_names):
            if name == group.name and i not in group.members:
                raise GroupError(f"group name {group.name!r} collides with a feature name")


def pack(shap: ShapMatrix, groups: Sequence[FeatureGroup]) -> ShapMatrix:
    """Replace each group's columns by their row-wise sum.

    The packed column takes the position of the group's lowest member index;
    ungrouped columns keep their relative order.
    """
    _validate(shap, groups)
    owner = {m: g for g in groups for m in g.members}
    columns, names = [], []
    for i, name in enumerate(shap.feature_names):
        group = owner.get(i)
        if group is None:
            columns.append(shap.phi[:, i])
            names.append(name)
        elif i == min(group.members):
            columns.append(shap.phi[:, group.sorted_members()].sum(axis=1))
            names.append(group.name)
    phi = np.column_stack(columns) if columns else np.empty((shap.n_rows, 0))
    return ShapMatrix(
        phi0=shap.phi0,
        phi=phi.reshape(shap.n_rows, len(names)),
        feature_names=tuple(names),
        row_ids=shap.row_ids,
    )


def grouped_importance(shap: ShapMatrix, group: FeatureGroup, cov: np.ndarray | None = None) -> float:
    """Importance of a group from member importances and pairwise covariances.

    For a pair this is ``IMP_i + IMP_k + 2 Cov_ik``; larger groups add every
    pairwise covariance term, which is the variance of the summed column.
    """
    if cov is None:
        cov = shap_covariance(shap)
    members = group.sorted_members()
    total = sum(cov[i, i] for i in members)
    for a, i in enumerate(members):
        for k in members[a + 1:]:
            total += 2 * cov[i, k]
    return float(total)


def packed_report(shap: ShapMatrix, groups: Sequence[FeatureGroup]) -> tuple[ShapMatrix, ImportanceReport, dict]:
    """Pack, score the packed matrix, and check each group against the covariance form.

    Returns the packed matrix, its variance report and a per-group dict with
    both the covariance-form and packed-column scores and their difference.
    """
    packed = pack(shap, groups)
    report = variance_importance(packed)
    cov = shap_covariance(shap)
    member_scores = np.diag(cov)
    checks = {}
    for group in groups:
        via_cov = grouped_importance(shap, group, cov)
        via_pack = report.score(group.name)
        checks[group.name] = {
            "members": [shap.feature_names[i] for i in group.sorted_members()],
            "grouped_importance": via_cov,
            "packed_variance": via_pack,
            "sum_of_member_importance": float(member_scores[group.sorted_members()].sum()),
            "abs_difference": abs(via_cov - via_pack),
        }
    return packed, report, checks


def _prefix(name: str) -> str | None:
    cut = max(name.rfind("."), name.rfind("="))
    return name[:cut] if cut > 0 else None


def suggest_groups(shap: ShapMatrix, mode: str = "prefix", threshold: float = 0.9) -> list[FeatureGroup]:
    """Propose groups by shared name prefix or by correlated attributions.

    ``prefix`` groups names sharing the text before their last ``.`` or
    ``=``. ``covariance`` joins features whose attribution correlation has
    magnitude at least ``threshold`` and returns the connected components.
    Singletons are dropped.
    """
    if mode == "prefix":
        buckets: dict[str, list[int]] = {}
        for i, name in enumerate(shap.feature_names):
            p = _prefix(name)
            if p is not None:
                buckets.setdefault(p, []).append(i)
        taken = set(shap.feature_names)
        return [
            FeatureGroup(p, frozenset(idx))
            for p, idx in sorted(buckets.items())
            if len(idx) >= 2 and p not in taken
        ]
    if mode != "covariance":
        raise ValueError(f"unknown suggestion mode {mode!r}")
    if threshold <= 0:
        raise ValueError("threshold must be positive")

    cov = shap_covariance(shap)
    var = np.diag(cov)
    k = shap.n_features
    parent = list(range(k))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(k):
        for j in range(i + 1, k):
            denom = np.sqrt(var[i] * var[j])
            corr = abs(cov[i, j]) / denom if denom > 0 else 0.0
            if corr >= threshold:
                parent[find(j)] = find(i)
    components: dict[int, list[int]] = {}
    for i in range(k):
        components.setdefault(find(i), []).append(i)
    groups = []
    for members in sorted(components.values()):
        if len(members) >= 2:
            name = "+".join(shap.feature_names[i] for i in members)
            groups.append(FeatureGroup(name, frozenset(members)))
    return groups


def groups_from_mapping(shap: ShapMatrix, mapping: Mapping[str, Sequence[str]]) -> list[FeatureGroup]:
    """Resolve a ``{group name: [feature names]}`` document against ``shap``."""
    groups = []
    seen: dict[str, str] = {}
    for name, members in mapping.items():
        idx = []
        for feat in members:
            if feat in seen:
                raise GroupError(f"feature {feat!r} is in both {seen[feat]!r} and {name!r}")
            seen[feat] = name
            try:
                idx.append(shap.index(feat))
            except KeyError:
                raise GroupError(f"group {name!r}: unknown feature {feat!r}") from None
        groups.append(FeatureGroup(name, frozenset(idx)))
    _validate(shap, groups)
    return groups


def load_groups(path, shap: ShapMatrix) -> list[FeatureGroup]:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GroupError(f"malformed groups document: {exc}") from None
    if not isinstance(doc, dict):
        raise GroupError("groups document must map group names to feature lists")
    return groups_from_mapping(shap, doc)


def groups_to_mapping(shap: ShapMatrix, groups: Sequence[FeatureGroup]) -> dict[str, list[str]]:
    return {g.name: [shap.feature_names[i] for i in g.sorted_members()] for g in groups}
