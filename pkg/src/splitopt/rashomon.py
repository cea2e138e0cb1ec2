"""Near-optimal tree sets: complete bounded enumeration, the two-phase
prefix-forest approximation built on the lookahead solver, subtree counting,
and exact integer indexing into the forest.

The forest's index arithmetic is a bijection onto structurally distinct
canonical trees. Two rules keep it that way:

  * a tree whose node at the lookahead depth is a leaf is owned by a prefix
    with a genuine leaf there; boundary attachments therefore contain only
    splitting subtrees, so grafting never creates a leaf/leaf collapse at
    the seam;
  * prefixes whose resolved children at some node are identical-prediction
    leaves are skipped: their canonical form is a strictly cheaper prefix
    that is enumerated anyway.
"""

from __future__ import annotations

import json
import os
from bisect import bisect_right
from dataclasses import dataclass
from typing import Optional

from .dataset import BinaryDataset, SupportSet
from .solver import BoundsPolicy, Engine, SolverConfig
from .trees import Internal, Leaf, Objective, Pair, Tree


class BudgetExceeded(Exception):
    def __init__(self, limit: int, where: str = ""):
        self.limit = limit
        self.where = where
        suffix = f" while enumerating {where}" if where else ""
        super().__init__(
            f"tree budget of {limit} exceeded{suffix}; raise lambda or lower epsilon"
        )


class IndexOutOfRange(Exception):
    pass


@dataclass
class RashomonConfig:
    lam: float
    epsilon: float
    depth_budget: int
    lookahead_depth: int = 1
    max_trees: int = 10_000_000

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if not (1 <= self.lookahead_depth <= self.depth_budget):
            raise ValueError("need 1 <= lookahead depth <= depth budget")


@dataclass
class TreeSet:
    """Canonical trees admitted under one objective cap."""

    trees: list[Tree]
    objectives: list[Objective]
    threshold: float  # admission cap as a value, for reporting
    bound_key: int  # the exact admission key actually used

    def __len__(self) -> int:
        return len(self.trees)


# -- complete enumeration ----------------------------------------------------


class _CellEnumerator:
    """Memoized enumeration of every canonical tree per (support, depth)
    cell with objective key <= a cap; caps only ever grow per cell and
    results are kept sorted by key for cheap re-filtering."""

    def __init__(self, engine: Engine, max_trees: int, where: str = ""):
        self.engine = engine
        self.scale = engine.scale
        self.max_trees = max_trees
        self.where = where
        self.memo: dict = {}
        self.total = 0

    def _charge(self, count: int) -> None:
        self.total += count
        if self.total > self.max_trees:
            raise BudgetExceeded(self.max_trees, self.where)

    def enumerate(self, mask: int, depth: int, cap: int) -> tuple[list, list]:
        """(items, keys): items are (tree, pair) sorted by admission key."""
        memo_key = (mask, depth)
        got = self.memo.get(memo_key)
        if got is not None and cap <= got[0]:
            items, keys = got[1], got[2]
            cut = bisect_right(keys, cap)
            return items[:cut], keys[:cut]
        items = self._build(mask, depth, cap)
        items.sort(key=lambda tp: self.scale.key(tp[1]))
        keys = [self.scale.key(tp[1]) for tp in items]
        self.memo[memo_key] = (cap, items, keys)
        return items, keys

    def _build(self, mask: int, depth: int, cap: int) -> list:
        ds = self.engine.ds
        _, node = self.engine.get_or_create(mask, depth)
        if self.scale.key(node.lb) > cap:
            return []
        cnt = mask.bit_count()
        pos = (mask & ds.label_bits).bit_count()
        out = []
        for pred, errs in ((0, pos), (1, cnt - pos)):
            pair: Pair = (errs, 1)
            if self.scale.key(pair) <= cap:
                out.append((Leaf(pred), pair))
        if depth < self.engine.boundary:
            for f in range(ds.k):
                lmask = mask & ds.feature_bits[f]
                if lmask == 0 or lmask == mask:
                    continue
                rmask = mask ^ lmask
                _, ln = self.engine.get_or_create(lmask, depth + 1)
                _, rn = self.engine.get_or_create(rmask, depth + 1)
                lmin = self.scale.key(ln.lb)
                rmin = self.scale.key(rn.lb)
                if lmin + rmin > cap:
                    continue
                lefts, lkeys = self.enumerate(lmask, depth + 1, cap - rmin)
                if not lefts:
                    continue
                rights, rkeys = self.enumerate(rmask, depth + 1, cap - lkeys[0])
                for (lt, lp), lkey in zip(lefts, lkeys):
                    limit = bisect_right(rkeys, cap - lkey)
                    for (rt, rp) in rights[:limit]:
                        if (
                            isinstance(lt, Leaf)
                            and isinstance(rt, Leaf)
                            and lt.prediction == rt.prediction
                        ):
                            continue
                        out.append((Internal(f, lt, rt), (lp[0] + rp[0], lp[1] + rp[1])))
        self._charge(len(out))
        return out


def enumerate_rashomon(
    ds: BinaryDataset,
    s: SupportSet,
    depth_budget: int,
    lam: float,
    n_global: int,
    bound: float,
    max_trees: int = 10_000_000,
    bound_key: Optional[int] = None,
    root_splits_only: bool = False,
) -> TreeSet:
    """Every canonical tree on s of depth <= depth_budget whose objective is
    at most the cap. Admission is exact: ties are in. The solver runs first
    so its lower bounds prune the enumeration."""
    cfg = SolverConfig(
        depth_budget=depth_budget,
        lam=lam,
        n_global=n_global,
        bounds_policy=BoundsPolicy.STANDARD,
    )
    engine = Engine(ds, cfg, s.mask)
    engine.run()
    scale = engine.scale
    cap = scale.bound_key(bound) if bound_key is None else bound_key
    enum = _CellEnumerator(engine, max_trees)
    items, _ = enum.enumerate(s.mask, 0, cap)
    if root_splits_only:
        items = [tp for tp in items if not isinstance(tp[0], Leaf)]
    trees = [t for t, _ in items]
    objectives = [Objective.from_counts(p[0], p[1], lam, n_global) for _, p in items]
    return TreeSet(trees, objectives, float(bound), cap)


# -- prefix forest -----------------------------------------------------------


@dataclass
class ForestLeaf:
    prediction: int
    mask: int
    depth: int
    count: int = 1


@dataclass
class ForestBoundary:
    mask: int
    depth: int
    attachment: TreeSet
    benchmark: float  # greedy completion objective used as the admission cap
    count: int = 0


@dataclass
class ForestSplit:
    feature: int
    left: object
    right: object
    count: int = 0


@dataclass
class PrefixForest:
    prefixes: list  # annotated ForestLeaf/ForestBoundary/ForestSplit roots
    prefix_values: list[float]  # completed objective per prefix
    p_counts: list[int]  # cumulative tree counts by prefix
    t_count: int
    config: RashomonConfig
    optimum_value: float  # best completed lookahead objective
    admission_value: float  # optimum + epsilon
    n: int
    k: int
    feature_names: list[str]

    def tree_at_index(self, i: int) -> Tree:
        return tree_at_index(self, i)


def enumerate_subtree_counts(prefix) -> int:
    """Annotate every node with the number of full trees below it: leaves
    count 1, boundary nodes their attachment size, splits the product."""
    if isinstance(prefix, ForestLeaf):
        prefix.count = 1
    elif isinstance(prefix, ForestBoundary):
        prefix.count = len(prefix.attachment)
    else:
        prefix.count = enumerate_subtree_counts(prefix.left) * enumerate_subtree_counts(
            prefix.right
        )
    return prefix.count


def rset_count(forest: PrefixForest) -> tuple[list[int], int]:
    """Cumulative per-prefix counts and the total."""
    p_counts: list[int] = []
    total = 0
    for p in forest.prefixes:
        total += p.count
        p_counts.append(total)
    return p_counts, total


def tree_at_index(forest: PrefixForest, i: int) -> Tree:
    """Materialize the i-th tree (0-based over the whole forest)."""
    if not (0 <= i < forest.t_count):
        raise IndexOutOfRange(f"index {i} not in [0, {forest.t_count})")
    prefix_idx = bisect_right(forest.p_counts, i)
    start = 0 if prefix_idx == 0 else forest.p_counts[prefix_idx - 1]
    return _subtree_at(forest.prefixes[prefix_idx], i - start)


def _subtree_at(node, idx: int) -> Tree:
    if isinstance(node, ForestLeaf):
        return Leaf(node.prediction)
    if isinstance(node, ForestBoundary):
        return node.attachment.trees[idx]
    right_count = node.right.count
    left_idx, right_idx = divmod(idx, right_count)
    return Internal(
        node.feature, _subtree_at(node.left, left_idx), _subtree_at(node.right, right_idx)
    )


class _PrefixEnumerator:
    """Enumeration over the lookahead search space: nodes at the boundary
    depth are priced by their greedy completion, everything above may be a
    leaf (either prediction) or a split. Items carry the prediction of
    their resolved form when it is a bare leaf, so combinations that would
    canonicalize away are dropped."""

    def __init__(self, engine: Engine, max_items: int):
        self.engine = engine
        self.scale = engine.scale
        self.max_items = max_items
        self.memo: dict = {}
        self.total = 0

    def enumerate(self, mask: int, depth: int, cap: int) -> tuple[list, list]:
        memo_key = (mask, depth)
        got = self.memo.get(memo_key)
        if got is not None and cap <= got[0]:
            items, keys = got[1], got[2]
            cut = bisect_right(keys, cap)
            return items[:cut], keys[:cut]
        items = self._build(mask, depth, cap)
        items.sort(key=lambda it: self.scale.key(it[1]))
        keys = [self.scale.key(it[1]) for it in items]
        self.memo[memo_key] = (cap, items, keys)
        return items, keys

    def _build(self, mask: int, depth: int, cap: int) -> list:
        ds = self.engine.ds
        _, node = self.engine.get_or_create(mask, depth)
        boundary = self.engine.boundary
        out = []
        cnt = mask.bit_count()
        pos = (mask & ds.label_bits).bit_count()
        # genuine leaves are allowed at every depth including the boundary
        for pred, errs in ((0, pos), (1, cnt - pos)):
            pair: Pair = (errs, 1)
            if self.scale.key(pair) <= cap:
                out.append((ForestLeaf(pred, mask, depth), pair, pred))
        if depth == boundary:
            if node.completion is not None and self.scale.key(node.ub) <= cap:
                if not isinstance(node.completion, Leaf):
                    # stands for the attachment set, bounded by the greedy pair;
                    # bare-leaf completions are covered by the leaf items above
                    out.append((("boundary", mask, depth, node.ub), node.ub, None))
        else:
            if self.scale.key(node.lb) <= cap:
                for f in range(ds.k):
                    lmask = mask & ds.feature_bits[f]
                    if lmask == 0 or lmask == mask:
                        continue
                    rmask = mask ^ lmask
                    _, ln = self.engine.get_or_create(lmask, depth + 1)
                    _, rn = self.engine.get_or_create(rmask, depth + 1)
                    lmin = self.scale.key(ln.lb)
                    rmin = self.scale.key(rn.lb)
                    if lmin + rmin > cap:
                        continue
                    lefts, lkeys = self.enumerate(lmask, depth + 1, cap - rmin)
                    if not lefts:
                        continue
                    rights, rkeys = self.enumerate(rmask, depth + 1, cap - lkeys[0])
                    for (lnode, lp, lpred), lkey in zip(lefts, lkeys):
                        limit = bisect_right(rkeys, cap - lkey)
                        for rnode, rp, rpred in rights[:limit]:
                            if lpred is not None and lpred == rpred:
                                continue  # completed form collapses to a leaf
                            out.append(
                                (
                                    ForestSplit(f, lnode, rnode),
                                    (lp[0] + rp[0], lp[1] + rp[1]),
                                    None,
                                )
                            )
        self.total += len(out)
        if self.total > self.max_items:
            raise BudgetExceeded(self.max_items, f"prefixes at depth {depth}")
        return out


def resplit(ds: BinaryDataset, cfg: RashomonConfig) -> PrefixForest:
    """Prefix-forest approximation of the near-optimal tree set.

    Phase 1 enumerates every admissible lookahead prefix (within epsilon of
    the optimal greedy-completed objective). Phase 2 attaches, at each
    boundary node, every splitting subtree at least as good as the greedy
    benchmark for that subproblem. Phase 3 annotates counts for indexing.
    """
    la_cfg = SolverConfig(
        depth_budget=cfg.depth_budget,
        lam=cfg.lam,
        n_global=ds.n,
        lookahead_depth=cfg.lookahead_depth,
        bounds_policy=BoundsPolicy.LOOKAHEAD_GREEDY,
    )
    engine = Engine(ds, la_cfg)
    engine.run()
    opt_pair, _ = engine.settle()
    scale = engine.scale
    cap = scale.key(opt_pair) + scale.slack_key(cfg.epsilon)

    enum = _PrefixEnumerator(engine, cfg.max_trees)
    items, _ = enum.enumerate(ds.full_mask, 0, cap)

    attachments: dict[int, TreeSet] = {}

    def attach(mask: int) -> TreeSet:
        got = attachments.get(mask)
        if got is not None:
            return got
        _, node = engine.get_or_create(mask, cfg.lookahead_depth)
        budget = cfg.depth_budget - cfg.lookahead_depth
        support = SupportSet.from_mask(ds, mask)
        try:
            ts = enumerate_rashomon(
                ds,
                support,
                budget,
                cfg.lam,
                ds.n,
                bound=scale.value(node.ub),
                max_trees=cfg.max_trees,
                bound_key=scale.key(node.ub),
                root_splits_only=True,
            )
        except BudgetExceeded as e:
            raise BudgetExceeded(e.limit, f"boundary subproblem mask={mask:#x}") from None
        attachments[mask] = ts
        return ts

    def materialize(item):
        if isinstance(item, tuple) and item and item[0] == "boundary":
            _, mask, depth, pair = item
            ts = attach(mask)
            if len(ts) == 0:
                return None
            return ForestBoundary(mask, depth, ts, scale.value(pair))
        if isinstance(item, ForestSplit):
            left = materialize(item.left)
            right = materialize(item.right)
            if left is None or right is None:
                return None
            return ForestSplit(item.feature, left, right)
        return item

    prefixes = []
    prefix_values = []
    for node, pair, _ in items:
        root = materialize(node)
        if root is None:
            continue  # a boundary attachment came up empty: no trees here
        prefixes.append(root)
        prefix_values.append(scale.value(pair))

    for p in prefixes:
        enumerate_subtree_counts(p)
    forest = PrefixForest(
        prefixes=prefixes,
        prefix_values=prefix_values,
        p_counts=[],
        t_count=0,
        config=cfg,
        optimum_value=scale.value(opt_pair),
        admission_value=scale.value(opt_pair) + cfg.epsilon,
        n=ds.n,
        k=ds.k,
        feature_names=list(ds.feature_names),
    )
    forest.p_counts, forest.t_count = rset_count(forest)
    if forest.t_count > cfg.max_trees:
        raise BudgetExceeded(cfg.max_trees, "the assembled forest")
    return forest


# -- on-disk form ------------------------------------------------------------


def _node_to_obj(node, feature_names):
    if isinstance(node, ForestLeaf):
        return {"leaf": node.prediction, "count": 1}
    if isinstance(node, ForestBoundary):
        from .trees import _node_to_obj as tree_obj

        return {
            "boundary": {
                "count": node.count,
                "benchmark": node.benchmark,
                "trees": [tree_obj(t, feature_names) for t in node.attachment.trees],
                "objectives": [
                    [o.misclassified, o.leaves] for o in node.attachment.objectives
                ],
            }
        }
    return {
        "split": feature_names[node.feature] if feature_names else node.feature,
        "count": node.count,
        "true": _node_to_obj(node.left, feature_names),
        "false": _node_to_obj(node.right, feature_names),
    }


def _node_from_obj(obj, feature_names, lam, n):
    if "leaf" in obj:
        return ForestLeaf(int(obj["leaf"]), 0, 0)
    if "boundary" in obj:
        from .trees import _node_from_obj as tree_node

        b = obj["boundary"]
        trees = [tree_node(t, feature_names, "") for t in b["trees"]]
        objectives = [Objective.from_counts(e, l, lam, n) for e, l in b["objectives"]]
        ts = TreeSet(trees, objectives, b["benchmark"], 0)
        node = ForestBoundary(0, 0, ts, b["benchmark"])
        node.count = b["count"]
        return node
    f = obj["split"]
    if isinstance(f, str):
        f = feature_names.index(f)
    node = ForestSplit(
        int(f),
        _node_from_obj(obj["true"], feature_names, lam, n),
        _node_from_obj(obj["false"], feature_names, lam, n),
    )
    node.count = obj["count"]
    return node


def save_forest(forest: PrefixForest, directory: str) -> None:
    """Forest directory: a manifest with counts and config plus one JSON
    file per prefix; indexing against the directory loads only the manifest
    and the owning prefix file."""
    os.makedirs(directory, exist_ok=True)
    manifest = {
        "format": "splitopt-forest/1",
        "t_count": forest.t_count,
        "p_counts": forest.p_counts,
        "prefix_values": forest.prefix_values,
        "optimum_value": forest.optimum_value,
        "admission_value": forest.admission_value,
        "config": {
            "lambda": forest.config.lam,
            "epsilon": forest.config.epsilon,
            "depth_budget": forest.config.depth_budget,
            "lookahead_depth": forest.config.lookahead_depth,
        },
        "n": forest.n,
        "k": forest.k,
        "feature_names": forest.feature_names,
    }
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")
    for i, p in enumerate(forest.prefixes):
        doc = {"index": i, "count": p.count, "structure": _node_to_obj(p, forest.feature_names)}
        with open(os.path.join(directory, f"prefix_{i:05d}.json"), "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True, indent=1)
            fh.write("\n")


class DiskForest:
    """Indexed access to a saved forest without loading every prefix."""

    def __init__(self, directory: str):
        self.directory = directory
        with open(os.path.join(directory, "manifest.json"), encoding="utf-8") as fh:
            m = json.load(fh)
        self.manifest = m
        self.t_count: int = m["t_count"]
        self.p_counts: list[int] = m["p_counts"]
        self.feature_names: list[str] = m["feature_names"]
        self.lam: float = m["config"]["lambda"]
        self.n: int = m["n"]
        self._cache: dict[int, object] = {}

    def _prefix(self, i: int):
        got = self._cache.get(i)
        if got is None:
            path = os.path.join(self.directory, f"prefix_{i:05d}.json")
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
            got = _node_from_obj(doc["structure"], self.feature_names, self.lam, self.n)
            self._cache[i] = got
        return got

    def tree_at_index(self, i: int) -> Tree:
        if not (0 <= i < self.t_count):
            raise IndexOutOfRange(f"index {i} not in [0, {self.t_count})")
        prefix_idx = bisect_right(self.p_counts, i)
        start = 0 if prefix_idx == 0 else self.p_counts[prefix_idx - 1]
        return _subtree_at(self._prefix(prefix_idx), i - start)


def load_forest(directory: str) -> DiskForest:
    return DiskForest(directory)
