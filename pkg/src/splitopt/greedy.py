"""Information-gain splitting and the sparsity-aware greedy tree.

Used standalone as a baseline and inside the lookahead solver, where it
seeds the bounds of every subproblem at the lookahead boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .dataset import BinaryDataset, EmptySupport, FeatureOutOfRange, SupportSet
from .trees import Internal, Leaf, Objective, Pair, PairScale, Tree


@dataclass(frozen=True)
class SplitScore:
    feature: int
    weighted_entropy: float  # nats, in [0, ln 2]


def entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -(p * math.log(p) + (1.0 - p) * math.log(1.0 - p))


def weighted_child_entropy(ds: BinaryDataset, s: SupportSet, f: int) -> float:
    """Size-weighted entropy of the two children of splitting s on f.
    Empty children contribute 0."""
    if s.count < 1:
        raise EmptySupport("cannot score a split on an empty support")
    if f < 0 or f >= ds.k:
        raise FeatureOutOfRange(f"feature {f} out of range [0, {ds.k})")
    return _weighted_child_entropy_mask(ds, s.mask, s.count, f)


def _weighted_child_entropy_mask(ds: BinaryDataset, mask: int, count: int, f: int) -> float:
    left = mask & ds.feature_bits[f]
    nl = left.bit_count()
    total = 0.0
    if nl:
        total += (nl / count) * entropy((left & ds.label_bits).bit_count() / nl)
    nr = count - nl
    if nr:
        right = mask & ds.feature_not[f]
        total += (nr / count) * entropy((right & ds.label_bits).bit_count() / nr)
    return total


def best_split(ds: BinaryDataset, s: SupportSet) -> Optional[SplitScore]:
    """Feature minimizing the weighted child entropy; ties go to the smallest
    index. None on a pure support or when every feature has an empty child."""
    if s.count < 1:
        raise EmptySupport("cannot split an empty support")
    f = _best_split_mask(ds, s.mask, s.count, s.pos_count)
    if f is None:
        return None
    return SplitScore(f, _weighted_child_entropy_mask(ds, s.mask, s.count, f))


def _best_split_mask(ds: BinaryDataset, mask: int, count: int, pos: int) -> Optional[int]:
    if pos == 0 or pos == count:
        return None
    best_f = None
    best_e = math.inf
    for f in range(ds.k):
        left = mask & ds.feature_bits[f]
        nl = left.bit_count()
        if nl == 0 or nl == count:
            continue  # empty child: degenerate split
        e = 0.0
        pl = (left & ds.label_bits).bit_count()
        if 0 < pl < nl:
            e += (nl / count) * entropy(pl / nl)
        nr = count - nl
        pr = pos - pl
        if 0 < pr < nr:
            e += (nr / count) * entropy(pr / nr)
        if e < best_e:
            best_e = e
            best_f = f
    return best_f


def greedy_fit(
    ds: BinaryDataset, s: SupportSet, depth_budget: int, lam: float, n_global: int
) -> tuple[Tree, Objective]:
    """CART-style tree: split on the entropy-best feature, recurse, and keep
    the split only when the children's objectives beat the leaf strictly.

    depth_budget counts edge-levels below this node; a leaf costs 0 and a
    split is allowed while the remaining budget is >= 1. Objectives are
    normalized by n_global throughout.
    """
    tree, pair = _greedy_mask(ds, s.mask, depth_budget, PairScale(lam, n_global))
    return tree, Objective.from_counts(pair[0], pair[1], lam, n_global)


def _greedy_mask(ds: BinaryDataset, mask: int, budget: int, scale: PairScale) -> tuple[Tree, Pair]:
    count = mask.bit_count()
    pos = (mask & ds.label_bits).bit_count()
    neg = count - pos
    leaf = Leaf(1) if pos > neg else Leaf(0)
    pair: Pair = (min(pos, neg), 1)
    if budget >= 1:
        f = _best_split_mask(ds, mask, count, pos)
        if f is not None:
            lt, lp = _greedy_mask(ds, mask & ds.feature_bits[f], budget - 1, scale)
            rt, rp = _greedy_mask(ds, mask & ds.feature_not[f], budget - 1, scale)
            cand: Pair = (lp[0] + rp[0], lp[1] + rp[1])
            # adopt only on strict improvement: sparser tree wins ties
            if scale.key(cand) < scale.key(pair):
                return Internal(f, lt, rt), cand
    return leaf, pair
