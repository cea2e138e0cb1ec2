"""Branch-and-bound dynamic programming over the subproblem dependency graph.

One worklist engine serves three callers through its bounds policy:

  * STANDARD         -- full optimization down to the depth budget,
  * LOOKAHEAD_GREEDY -- optimization down to the lookahead depth, with
                        every boundary subproblem priced (and later
                        completed) by a greedy tree.

Subproblems are keyed by (support mask, depth from root): the same support
reached at a different depth has a different remaining budget and must not
share a cache entry. Bounds are exact integer-keyed objective pairs and
only ever tighten, so the final root bounds do not depend on pop order.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from .dataset import BinaryDataset, EmptySupport, SupportSet
from .greedy import _greedy_mask
from .trees import Internal, Leaf, Objective, Pair, PairScale, Tree


class IncompleteGraph(Exception):
    """A child required for extraction is missing: internal invariant breach."""


class BoundsPolicy(Enum):
    STANDARD = "standard"
    LOOKAHEAD_GREEDY = "lookahead_greedy"


@dataclass
class SolverConfig:
    depth_budget: int
    lam: float
    n_global: int
    lookahead_depth: Optional[int] = None  # None or == depth_budget: no lookahead
    time_limit: Optional[float] = None  # seconds
    bounds_policy: BoundsPolicy = BoundsPolicy.STANDARD
    share_subproblems: bool = True  # False: fresh node per path (testing only)

    def __post_init__(self):
        if self.depth_budget < 1:
            raise ValueError("depth budget must be >= 1")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.lookahead_depth is None:
            self.lookahead_depth = self.depth_budget
        if not (0 < self.lookahead_depth <= self.depth_budget):
            raise ValueError("lookahead depth must be in (0, depth budget]")

    @property
    def boundary_depth(self) -> int:
        """Depth at which subproblems stop being expanded and get priced
        directly: the lookahead depth, or the full budget for STANDARD."""
        if self.bounds_policy is BoundsPolicy.LOOKAHEAD_GREEDY:
            return self.lookahead_depth
        return self.depth_budget


@dataclass
class SolveStats:
    subproblems_created: int = 0
    subproblems_solved: int = 0
    queue_pushes: int = 0
    pops: int = 0
    wall_time: float = 0.0


class _Node:
    __slots__ = (
        "mask", "depth", "lb", "ub", "parents", "completion",
        "children", "minority", "majority_pred", "best_feature",
    )

    def __init__(self, mask, depth, lb, ub, minority, majority_pred, completion):
        self.mask = mask
        self.depth = depth
        self.lb: Pair = lb
        self.ub: Pair = ub
        self.parents: set = set()
        self.completion: Optional[Tree] = completion  # boundary greedy tree
        self.children = None  # [(feature, left key, right key)] once expanded
        self.minority = minority
        self.majority_pred = majority_pred
        self.best_feature: Optional[int] = None


# Prefix skeleton of a solved lookahead problem: splits above the boundary,
# genuine leaves where a leaf won, greedy completions at the boundary.
@dataclass(frozen=True)
class PrefixLeaf:
    prediction: int
    mask: int
    depth: int


@dataclass(frozen=True)
class PrefixBoundary:
    completion: Tree
    mask: int
    depth: int


@dataclass(frozen=True)
class PrefixSplit:
    feature: int
    left: "PrefixNode"
    right: "PrefixNode"


PrefixNode = Union[PrefixLeaf, PrefixBoundary, PrefixSplit]


def graft(p) -> Tree:
    """Materialize a prefix: boundary nodes become their greedy completions."""
    if isinstance(p, PrefixLeaf):
        return Leaf(p.prediction)
    if isinstance(p, PrefixBoundary):
        return p.completion
    return Internal(p.feature, graft(p.left), graft(p.right))


def prefix_leaves(p) -> list:
    """All frontier nodes of a prefix (genuine leaves and boundary nodes)."""
    if isinstance(p, PrefixSplit):
        return prefix_leaves(p.left) + prefix_leaves(p.right)
    return [p]


@dataclass
class SolveResult:
    root_lb: float
    root_ub: float
    converged: bool
    tree: Tree
    objective: Objective
    prefix: object
    stats: SolveStats
    engine: "Engine" = field(repr=False)


def standard_bounds(s: SupportSet, lam: float, n_global: int, remaining_depth: int) -> tuple[float, float]:
    """Initial bounds of a subproblem before exploration.

    ub prices the best single leaf. With depth remaining, any split costs at
    least two leaf penalties, so lb = min(ub, 2*lambda); with no depth left
    the leaf is forced and lb = ub.
    """
    if s.count < 1:
        raise EmptySupport("bounds need a nonempty support")
    ub = lam + min(s.pos_count, s.neg_count) / n_global
    if remaining_depth > 0:
        return min(ub, 2 * lam), ub
    return ub, ub


def equivalent_points_bound(ds: BinaryDataset, s: SupportSet, lam: float, n_global: int) -> float:
    """lambda plus the error no tree of any depth can avoid: rows with
    identical features but conflicting labels."""
    irr = _irreducible_errors(ds, s.mask)
    return lam + irr / n_global


def _irreducible_errors(ds: BinaryDataset, mask: int) -> int:
    total = 0
    for pos_mask, neg_mask in ds.conflict_groups():
        p = (mask & pos_mask).bit_count()
        if p:
            n = (mask & neg_mask).bit_count()
            if n:
                total += min(p, n)
    return total


def lookahead_bounds(
    ds: BinaryDataset, s: SupportSet, d_prime: int, cfg: SolverConfig
) -> tuple[float, float, Optional[Tree]]:
    """Bounds under the lookahead policy at depth d_prime.

    At the lookahead depth the subproblem is priced exactly by its greedy
    completion (lb = ub = its objective) and that tree is returned for
    later extraction; above it, the standard initial bounds apply.
    """
    if d_prime > cfg.lookahead_depth:
        raise ValueError("d_prime beyond the lookahead depth")
    if d_prime == cfg.lookahead_depth:
        scale = PairScale(cfg.lam, cfg.n_global)
        tree, pair = _greedy_mask(ds, s.mask, cfg.depth_budget - cfg.lookahead_depth, scale)
        alpha = scale.value(pair)
        return alpha, alpha, tree
    lb, ub = standard_bounds(s, cfg.lam, cfg.n_global, cfg.depth_budget - d_prime)
    return lb, ub, None


class Engine:
    """The dependency graph plus worklist for one solve call."""

    def __init__(self, ds: BinaryDataset, cfg: SolverConfig, root_mask: Optional[int] = None):
        self.ds = ds
        self.cfg = cfg
        self.scale = PairScale(cfg.lam, cfg.n_global)
        self.boundary = cfg.boundary_depth
        self.graph: dict = {}
        self.stats = SolveStats()
        self._serial = 0
        self._has_conflicts = bool(ds.conflict_groups())
        self.root_mask = ds.full_mask if root_mask is None else root_mask
        self.root_key = self._key(self.root_mask, 0)
        self._get_or_create(self.root_mask, 0, self.root_key)

    def _key(self, mask: int, depth: int):
        if self.cfg.share_subproblems:
            return (mask, depth)
        self._serial += 1
        return (mask, depth, self._serial)

    def node(self, key) -> _Node:
        return self.graph[key]

    @property
    def root(self) -> _Node:
        return self.graph[self.root_key]

    def get_or_create(self, mask: int, depth: int):
        """Public lookup used by the enumeration layer; shares the graph."""
        key = (mask, depth)
        if key not in self.graph:
            self._get_or_create(mask, depth, key)
        return key, self.graph[key]

    def _get_or_create(self, mask: int, depth: int, key) -> _Node:
        node = self.graph.get(key)
        if node is not None:
            return node
        cnt = mask.bit_count()
        pos = (mask & self.ds.label_bits).bit_count()
        neg = cnt - pos
        minority = min(pos, neg)
        majority_pred = 1 if pos > neg else 0
        if depth >= self.boundary:
            # priced terminally: greedy completion with the leftover budget
            # (budget 0 under STANDARD, so this is just the majority leaf)
            tree, pair = _greedy_mask(self.ds, mask, self.cfg.depth_budget - self.boundary, self.scale)
            node = _Node(mask, depth, pair, pair, minority, majority_pred, tree)
            self.stats.subproblems_solved += 1
        else:
            ub: Pair = (minority, 1)
            lb: Pair = (0, 2)  # two leaves minimum for any split
            if self._has_conflicts:
                eq: Pair = (_irreducible_errors(self.ds, mask), 1)
                if self.scale.key(eq) > self.scale.key(lb):
                    lb = eq
            if self.scale.key(lb) >= self.scale.key(ub):
                lb = ub  # leaf already optimal: solved at creation
                self.stats.subproblems_solved += 1
            node = _Node(mask, depth, lb, ub, minority, majority_pred, None)
        self.graph[key] = node
        self.stats.subproblems_created += 1
        return node

    def solved(self, node: _Node) -> bool:
        return self.scale.key(node.lb) == self.scale.key(node.ub)

    def _expand(self, node: _Node, key):
        children = []
        for f in range(self.ds.k):
            lmask = node.mask & self.ds.feature_bits[f]
            if lmask == 0 or lmask == node.mask:
                continue  # empty child: never part of a canonical tree
            rmask = node.mask ^ lmask
            d1 = node.depth + 1
            lkey = self._key(lmask, d1)
            rkey = self._key(rmask, d1)
            lnode = self._get_or_create(lmask, d1, lkey)
            rnode = self._get_or_create(rmask, d1, rkey)
            lnode.parents.add(key)
            rnode.parents.add(key)
            children.append((f, lkey, rkey))
        node.children = children

    def run(self) -> bool:
        """Process the worklist until the root converges, the queue drains,
        or the time limit expires. Returns the converged flag."""
        cfg = self.cfg
        scale = self.scale
        repropagate: deque = deque()  # priority band 1: parents to refresh
        explore: deque = deque()  # priority band 0: new subproblems
        queued_hi: set = set()  # dedup: one pending entry per node and band
        queued_lo: set = set()
        explore.append(self.root_key)
        queued_lo.add(self.root_key)
        self.stats.queue_pushes += 1
        deadline = None if cfg.time_limit is None else time.monotonic() + cfg.time_limit
        root = self.root
        timed_out = False
        while not self.solved(root):
            if repropagate:
                key = repropagate.popleft()
                queued_hi.discard(key)
            elif explore:
                key = explore.popleft()
                queued_lo.discard(key)
            else:
                break  # fixpoint: no pending work can change any bound
            node = self.graph.get(key)
            self.stats.pops += 1
            if deadline is not None and self.stats.pops % 64 == 0 and time.monotonic() > deadline:
                timed_out = True
                break
            if self.solved(node):
                continue
            if node.children is None:
                self._expand(node, key)
            best_lb: Optional[Pair] = None
            best_ub: Optional[Pair] = None
            best_f = None
            for f, lkey, rkey in node.children:
                ln = self.graph[lkey]
                rn = self.graph[rkey]
                cand_lb: Pair = (ln.lb[0] + rn.lb[0], ln.lb[1] + rn.lb[1])
                cand_ub: Pair = (ln.ub[0] + rn.ub[0], ln.ub[1] + rn.ub[1])
                if best_lb is None or scale.key(cand_lb) < scale.key(best_lb):
                    best_lb = cand_lb
                if best_ub is None or scale.less(cand_ub, best_ub):
                    best_ub = cand_ub
                    best_f = f
            changed = False
            if best_ub is not None and scale.less(best_ub, node.ub):
                node.ub = best_ub
                node.best_feature = best_f
                changed = True
            new_lb = node.lb if best_lb is None else max(node.lb, best_lb, key=scale.key)
            if scale.key(new_lb) >= scale.key(node.ub):
                new_lb = node.ub
            if scale.key(new_lb) != scale.key(node.lb):
                # bounds only tighten: lb rises, ub falls, lb stays <= ub
                assert scale.key(new_lb) > scale.key(node.lb)
                assert scale.key(new_lb) <= scale.key(node.ub)
                node.lb = new_lb
                changed = True
            if self.solved(node):
                self.stats.subproblems_solved += 1
            if changed:
                for pkey in node.parents:
                    if pkey not in queued_hi:
                        queued_hi.add(pkey)
                        repropagate.append(pkey)
                        self.stats.queue_pushes += 1
            if self.solved(node):
                continue
            # explore undominated, unsolved splits one level deeper
            if node.depth < self.boundary:
                node_ub_key = scale.key(node.ub)
                for f, lkey, rkey in node.children:
                    ln = self.graph[lkey]
                    rn = self.graph[rkey]
                    lb_sum = scale.key(ln.lb) + scale.key(rn.lb)
                    ub_sum = scale.key(ln.ub) + scale.key(rn.ub)
                    if lb_sum < ub_sum and lb_sum <= node_ub_key:
                        if not self.solved(ln) and lkey not in queued_lo:
                            queued_lo.add(lkey)
                            explore.append(lkey)
                            self.stats.queue_pushes += 1
                        if not self.solved(rn) and rkey not in queued_lo:
                            queued_lo.add(rkey)
                            explore.append(rkey)
                            self.stats.queue_pushes += 1
        return self.solved(root) and not timed_out

    # -- extraction ---------------------------------------------------------

    def settle(self, exact: bool = True):
        """Best (pair, prefix) for the root, recomputed bottom-up.

        A node that converged early can hold a stale leaf count in its ub
        pair when an objective tie appeared below it afterwards, so the
        stored pairs are not trusted; candidates are re-minimized from the
        children's settled pairs with the shared tie rules (leaf before
        split, smaller feature index first).

        exact=True descends on demand into created-but-unexpanded branches
        whose bound sums still tie the incumbent, which makes the returned
        pair the true lexicographic minimum of the search space; pruning by
        child lower bounds keeps that cheap once the worklist has converged.
        exact=False (the anytime path) prices unexpanded interiors as leaves
        and never grows the graph.
        """
        memo: dict = {}
        scale = self.scale

        def visit(key) -> tuple[Pair, object]:
            got = memo.get(key)
            if got is not None:
                return got
            node = self.graph.get(key)
            if node is None:
                raise IncompleteGraph(f"missing subproblem {key}")
            if node.completion is not None:
                out = (node.ub, PrefixBoundary(node.completion, node.mask, node.depth))
            elif node.children is None and not exact:
                out = ((node.minority, 1), PrefixLeaf(node.majority_pred, node.mask, node.depth))
            else:
                best: Pair = (node.minority, 1)
                best_prefix: object = PrefixLeaf(node.majority_pred, node.mask, node.depth)
                if node.children is None and scale.key(node.lb) < scale.key(best):
                    self._expand(node, key)
                if node.children is not None:
                    best_key = scale.key(best)
                    for f, lkey, rkey in node.children:
                        ln = self.graph[lkey]
                        rn = self.graph[rkey]
                        lb_sum = scale.key(ln.lb) + scale.key(rn.lb)
                        # a split has >= 2 leaves: on a key tie it can only
                        # win while the incumbent has more than 2
                        if lb_sum > best_key or (lb_sum == best_key and best[1] <= 2):
                            continue
                        lp, lpre = visit(lkey)
                        rp, rpre = visit(rkey)
                        cand: Pair = (lp[0] + rp[0], lp[1] + rp[1])
                        if scale.less(cand, best):
                            best = cand
                            best_prefix = PrefixSplit(f, lpre, rpre)
                            best_key = scale.key(best)
                    out = (best, best_prefix)
                else:
                    out = (best, best_prefix)
            memo[key] = out
            return out

        return visit(self.root_key)


def solve(ds: BinaryDataset, cfg: SolverConfig, support: Optional[SupportSet] = None) -> SolveResult:
    """Run the worklist algorithm and extract the certified tree.

    Anytime: on timeout the best currently-extractable tree is returned with
    converged=False; its objective still matches the reported root_ub.
    """
    t0 = time.monotonic()
    engine = Engine(ds, cfg, None if support is None else support.mask)
    converged = engine.run()
    pair, prefix = engine.settle(exact=converged)
    tree = graft(prefix)
    engine.stats.wall_time = time.monotonic() - t0
    obj = Objective.from_counts(pair[0], pair[1], cfg.lam, cfg.n_global)
    return SolveResult(
        root_lb=engine.scale.value(engine.root.lb),
        root_ub=engine.scale.value(pair),
        converged=converged,
        tree=tree,
        objective=obj,
        prefix=prefix,
        stats=engine.stats,
        engine=engine,
    )


def extract_tree(result: SolveResult) -> Tree:
    """Re-extract the tree from a solve's dependency graph."""
    _, prefix = result.engine.settle(exact=result.converged)
    return graft(prefix)
