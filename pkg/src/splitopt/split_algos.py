"""Lookahead tree fitting: the two-phase SPLIT driver and the recursive
polynomial-time LicketySPLIT variant.

Phase 1 optimizes the tree down to the lookahead depth, pricing everything
below a boundary node by its greedy completion. Phase 2 (optional) re-solves
each frontier subproblem of that prefix to full optimality with the leftover
depth, replacing the greedy completion whenever that strictly helps.

lambda is kept in global units throughout (objectives normalized by the root
dataset size), which composes exactly; renormalize_lambda expresses the same
rescaling for callers that treat a subproblem as its own root.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

from .dataset import BinaryDataset, EmptySupport, SupportSet
from .greedy import _greedy_mask
from .solver import (
    BoundsPolicy,
    PrefixBoundary,
    PrefixSplit,
    SolverConfig,
    graft,
    prefix_leaves,
    solve,
)
from .trees import Internal, Leaf, Objective, Pair, PairScale, Tree, misclassified_on, num_leaves


@dataclass
class FitRequest:
    lam: float
    depth_budget: int
    lookahead_depth: int
    postprocess: bool = True
    time_limit: Optional[float] = None  # per solver invocation

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        # lookahead_depth == depth_budget degenerates to a full optimal solve
        if not (1 <= self.lookahead_depth <= self.depth_budget):
            raise ValueError("need 1 <= lookahead depth <= depth budget")


def renormalize_lambda(lam: float, parent_count: int, child_count: int) -> float:
    """Per-leaf penalty for a subproblem treated as its own root: the
    misclassification unit shrinks by child/parent, so lambda grows by
    parent/child to stay proportional."""
    if child_count < 1:
        raise EmptySupport("cannot renormalize onto an empty child")
    return lam * parent_count / child_count


@dataclass
class FitReport:
    """split_fit internals: the phase-1 prefix objective and, per frontier
    leaf, whether postprocessing replaced its completion."""

    phase1_value: float
    phase1_pair: Pair
    replaced: list[bool]
    converged: bool


def split_fit(
    ds: BinaryDataset,
    req: FitRequest,
    support: Optional[SupportSet] = None,
    threads: int = 1,
    report: Optional[list] = None,
) -> tuple[Tree, Objective]:
    """Two-phase lookahead fit; returns the tree and its recomputed objective."""
    s = support or ds.full_support()
    cfg = SolverConfig(
        depth_budget=req.depth_budget,
        lam=req.lam,
        n_global=ds.n,
        lookahead_depth=req.lookahead_depth,
        time_limit=req.time_limit,
        bounds_policy=BoundsPolicy.LOOKAHEAD_GREEDY,
    )
    phase1 = solve(ds, cfg, support=s)
    scale = PairScale(req.lam, ds.n)
    leaves = prefix_leaves(phase1.prefix)
    replaced = [False] * len(leaves)
    converged = phase1.converged
    replacements: dict[int, Tree] = {}

    if req.postprocess:
        def optimize_leaf(idx_leaf):
            idx, leaf = idx_leaf
            budget = req.depth_budget - leaf.depth
            if budget < 1:
                return idx, None, True
            sub_cfg = SolverConfig(
                depth_budget=budget,
                lam=req.lam,
                n_global=ds.n,
                time_limit=req.time_limit,
                bounds_policy=BoundsPolicy.STANDARD,
            )
            sub = solve(ds, sub_cfg, support=SupportSet.from_mask(ds, leaf.mask))
            completion = leaf.completion if isinstance(leaf, PrefixBoundary) else Leaf(leaf.prediction)
            comp_pair: Pair = (misclassified_on(completion, ds, leaf.mask), num_leaves(completion))
            # replace only on strict improvement; ties keep the completion
            if scale.key(sub.objective.pair) < scale.key(comp_pair):
                return idx, sub.tree, sub.converged
            return idx, None, sub.converged

        tasks = list(enumerate(leaves))
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(optimize_leaf, tasks))
        else:
            results = [optimize_leaf(t) for t in tasks]
        for idx, tree, ok in results:  # merged in leaf order: deterministic
            converged = converged and ok
            if tree is not None:
                replacements[idx] = tree
                replaced[idx] = True

    counter = [0]

    def rebuild(p) -> Tree:
        if isinstance(p, PrefixSplit):
            left = rebuild(p.left)
            right = rebuild(p.right)
            return Internal(p.feature, left, right)
        idx = counter[0]
        counter[0] += 1
        if idx in replacements:
            return replacements[idx]
        return graft(p)

    tree = rebuild(phase1.prefix)
    errs = misclassified_on(tree, ds, s.mask)
    obj = Objective.from_counts(errs, num_leaves(tree), req.lam, ds.n)
    if report is not None:
        report.append(FitReport(phase1.root_ub, phase1.objective.pair, replaced, converged))
    return tree, obj


def licketysplit_fit(
    ds: BinaryDataset,
    s: Optional[SupportSet] = None,
    lam: float = 0.01,
    depth_budget: int = 5,
) -> tuple[Tree, Objective]:
    """Recursive depth-1 lookahead: pick the root split whose two greedy
    completions score best (or a leaf if nothing strictly beats it), then
    recurse on both children with one less level. Equivalent to repeatedly
    running the lookahead solve at depth 1 without postprocessing."""
    s = s or ds.full_support()
    scale = PairScale(lam, ds.n)
    tree = _lickety_mask(ds, s.mask, depth_budget, scale)
    errs = misclassified_on(tree, ds, s.mask)
    return tree, Objective.from_counts(errs, num_leaves(tree), lam, ds.n)


def _lickety_mask(ds: BinaryDataset, mask: int, budget: int, scale: PairScale) -> Tree:
    count = mask.bit_count()
    pos = (mask & ds.label_bits).bit_count()
    neg = count - pos
    leaf_pair: Pair = (min(pos, neg), 1)
    leaf: Tree = Leaf(1 if pos > neg else 0)
    if budget < 1 or leaf_pair[0] == 0:
        return leaf
    best_pair = leaf_pair
    best_f = None
    for f in range(ds.k):
        lmask = mask & ds.feature_bits[f]
        if lmask == 0 or lmask == mask:
            continue
        _, lp = _greedy_mask(ds, lmask, budget - 1, scale)
        _, rp = _greedy_mask(ds, mask ^ lmask, budget - 1, scale)
        cand: Pair = (lp[0] + rp[0], lp[1] + rp[1])
        if scale.less(cand, best_pair):  # leaf survives ties, then smallest f
            best_pair = cand
            best_f = f
    if best_f is None:
        return leaf
    return Internal(
        best_f,
        _lickety_mask(ds, mask & ds.feature_bits[best_f], budget - 1, scale),
        _lickety_mask(ds, mask & ds.feature_not[best_f], budget - 1, scale),
    )
