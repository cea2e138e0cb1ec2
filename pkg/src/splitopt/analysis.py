"""Statistics over sets of trees: how greedy near-optimal trees are by
level, optimality-gap profiles, prediction variance across a set, and
precision of an approximate set against a reference optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataset import BinaryDataset, EmptySupport, SupportSet
from .greedy import greedy_fit, weighted_child_entropy
from .trees import Leaf, PairScale, Tree, misclassified_on, num_leaves, depth as tree_depth


class NoNodesAtLevel(Exception):
    pass


class NoMatchingSparsity(Exception):
    """No lambda makes the greedy tree exactly as sparse as the subtree."""


@dataclass
class LevelStat:
    level: int
    numerator: int
    denominator: int

    @property
    def proportion(self) -> float:
        if self.denominator == 0:
            raise NoNodesAtLevel(f"no internal nodes at level {self.level}")
        return self.numerator / self.denominator


def _entropy_argmin_features(ds: BinaryDataset, mask: int) -> set[int]:
    """Every feature attaining the minimum weighted child entropy."""
    s = SupportSet.from_mask(ds, mask)
    best = math.inf
    arg: set[int] = set()
    for f in range(ds.k):
        lmask = mask & ds.feature_bits[f]
        if lmask == 0 or lmask == mask:
            continue
        e = weighted_child_entropy(ds, s, f)
        if e < best - 1e-15:
            best = e
            arg = {f}
        elif e <= best + 1e-15:
            arg.add(f)
    return arg


def greedy_split_proportion(ds: BinaryDataset, trees: list[Tree], level: int) -> LevelStat:
    """Fraction of internal nodes at the level (root = 0), across all trees,
    whose split feature attains the entropy minimum on its own support.
    Ties count as greedy."""
    if not trees:
        raise ValueError("need at least one tree")
    num = 0
    den = 0

    def walk(t: Tree, mask: int, lvl: int):
        nonlocal num, den
        if isinstance(t, Leaf):
            return
        if lvl == level:
            den += 1
            if t.feature in _entropy_argmin_features(ds, mask):
                num += 1
            return  # deeper nodes are below the level of interest
        walk(t.left, mask & ds.feature_bits[t.feature], lvl + 1)
        walk(t.right, mask & ds.feature_not[t.feature], lvl + 1)

    for t in trees:
        walk(t, ds.full_mask, 0)
    if den == 0:
        raise NoNodesAtLevel(f"no internal nodes at level {level}")
    return LevelStat(level, num, den)


def _greedy_leaf_count(ds: BinaryDataset, s: SupportSet, d: int, lam: float, n_global: int) -> int:
    t, _ = greedy_fit(ds, s, d, lam, n_global)
    return num_leaves(t)


def matching_sparsity_lambda(
    ds: BinaryDataset, s: SupportSet, d: int, target_leaves: int, n_global: int, lam: float
) -> float:
    """lambda' giving a greedy tree with exactly target_leaves leaves.

    Greedy leaf counts are non-increasing in lambda', so bisection over
    [0, 1] localizes the step; if the count jumps past the target the
    sparsity is unreachable and NoMatchingSparsity is raised."""
    if _greedy_leaf_count(ds, s, d, lam, n_global) == target_leaves:
        return lam
    lo, hi = 0.0, 1.0
    c_lo = _greedy_leaf_count(ds, s, d, lo, n_global)
    c_hi = _greedy_leaf_count(ds, s, d, hi, n_global)
    if c_lo == target_leaves:
        return lo
    if c_hi == target_leaves:
        return hi
    if not (c_hi < target_leaves < c_lo):
        raise NoMatchingSparsity(
            f"greedy reaches {c_hi}..{c_lo} leaves, not {target_leaves}"
        )
    for _ in range(80):
        mid = (lo + hi) / 2.0
        c = _greedy_leaf_count(ds, s, d, mid, n_global)
        if c == target_leaves:
            return mid
        if c > target_leaves:
            lo = mid
        else:
            hi = mid
    raise NoMatchingSparsity(f"no lambda reaches exactly {target_leaves} leaves")


def optimality_gap(
    ds: BinaryDataset, t: Tree, s: SupportSet, lam: float, n_global: int
) -> float:
    """Loss gap between t and an equally sparse greedy tree on the same
    subproblem. Both sides are evaluated at the sparsity-matching lambda,
    so the leaf penalties cancel and the gap is the misclassification
    difference (a greedy-grown subtree scores exactly 0)."""
    if s.count < 1:
        raise EmptySupport("gap needs a nonempty support")
    target = num_leaves(t)
    d = tree_depth(t)
    lam_t = matching_sparsity_lambda(ds, s, d, target, n_global, lam)
    gt, _ = greedy_fit(ds, s, d, lam_t, n_global)
    err_t = misclassified_on(t, ds, s.mask)
    err_g = misclassified_on(gt, ds, s.mask)
    return (err_t - err_g) / n_global + lam_t * (target - num_leaves(gt))


@dataclass
class GapProfile:
    """Per-level average optimality gaps of one tree's internal subtrees."""

    levels: list[int]
    beta: list[float]
    monotone: bool
    failed_subtrees: int  # subtrees with no sparsity-matching lambda


def gap_profile(ds: BinaryDataset, t: Tree, lam: float, n_global: int) -> GapProfile:
    per_level: dict[int, list[float]] = {}
    failed = 0

    def walk(node: Tree, mask: int, lvl: int):
        nonlocal failed
        if isinstance(node, Leaf):
            return
        s = SupportSet.from_mask(ds, mask)
        try:
            gap = optimality_gap(ds, node, s, lam, n_global)
        except NoMatchingSparsity:
            failed += 1
        else:
            per_level.setdefault(lvl, []).append(gap)
        walk(node.left, mask & ds.feature_bits[node.feature], lvl + 1)
        walk(node.right, mask & ds.feature_not[node.feature], lvl + 1)

    walk(t, ds.full_mask, 0)
    levels = sorted(per_level)
    beta = [sum(per_level[l]) / len(per_level[l]) for l in levels]
    monotone = all(beta[i + 1] <= beta[i] + 1e-12 for i in range(len(beta) - 1))
    return GapProfile(levels, beta, monotone, failed)


@dataclass
class MonotoneGapResult:
    fraction: float
    monotone: int
    evaluated: int
    excluded: int  # trees with a subtree of unreachable sparsity


def monotone_gap_fraction(ds: BinaryDataset, trees: list[Tree], lam: float) -> MonotoneGapResult:
    """Fraction of trees whose level-averaged gap profile is non-increasing
    toward the leaves. Trees containing a subtree with no sparsity-matching
    lambda are excluded from the fraction and reported separately."""
    if not trees:
        raise ValueError("need at least one tree")
    monotone = 0
    evaluated = 0
    excluded = 0
    for t in trees:
        prof = gap_profile(ds, t, lam, ds.n)
        if prof.failed_subtrees:
            excluded += 1
            continue
        evaluated += 1
        if prof.monotone:
            monotone += 1
    fraction = monotone / evaluated if evaluated else 1.0
    return MonotoneGapResult(fraction, monotone, evaluated, excluded)


@dataclass
class MultiplicityResult:
    per_row_variance: np.ndarray
    mean: float
    std: float


def predictive_multiplicity(ds: BinaryDataset, trees: list[Tree]) -> MultiplicityResult:
    """Population variance of the {0,1} predictions across trees, per row."""
    if len(trees) < 2:
        raise ValueError("need at least two trees")
    n = ds.n
    ones = np.zeros(n, dtype=np.int64)
    for t in trees:
        pred_mask = _prediction_mask(t, ds, ds.full_mask)
        for i in range(n):
            ones[i] += (pred_mask >> i) & 1
    p = ones / len(trees)
    var = p * (1.0 - p)
    return MultiplicityResult(var, float(var.mean()), float(var.std()))


def _prediction_mask(t: Tree, ds: BinaryDataset, mask: int) -> int:
    """Bitmask of rows (within mask) predicted 1 by the tree."""
    if isinstance(t, Leaf):
        return mask if t.prediction == 1 else 0
    return _prediction_mask(t.left, ds, mask & ds.feature_bits[t.feature]) | _prediction_mask(
        t.right, ds, mask & ds.feature_not[t.feature]
    )


def precision_vs_reference(
    candidate_objective_values: list[float],
    reference_optimum: float,
    lam: float,
    epsilon: float,
    slack: float,
    n_global: Optional[int] = None,
) -> tuple[float, float]:
    """(precision, slackened precision): fraction of candidate objectives at
    most reference + epsilon, and at most reference + epsilon + slack.

    Comparison is done on exact admission keys when n_global is given,
    mirroring how the sets themselves are admitted."""
    if not candidate_objective_values:
        raise ValueError("empty candidate set")
    if n_global is not None:
        scale = PairScale(lam, n_global)
        ref = scale.bound_key(reference_optimum)
        eps_k = scale.slack_key(epsilon)
        slack_k = scale.slack_key(slack)
        keys = [scale.bound_key(v) for v in candidate_objective_values]
        hit = sum(1 for k in keys if k <= ref + eps_k)
        hit_slack = sum(1 for k in keys if k <= ref + eps_k + slack_k)
    else:
        hit = sum(1 for v in candidate_objective_values if v <= reference_optimum + epsilon)
        hit_slack = sum(
            1 for v in candidate_objective_values if v <= reference_optimum + epsilon + slack
        )
    total = len(candidate_objective_values)
    return hit / total, hit_slack / total
