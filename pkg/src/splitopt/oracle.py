"""Brute-force ground truth and seeded synthetic datasets for testing.

Two independent optimal-tree searches are provided: a memoized dynamic
program over (support, depth) cells, and a naive enumerator that walks
every canonical tree. They share only the objective definition and the
tie rules (leaf before split, then smaller feature index, then fewer
leaves), which are part of the problem statement, not the algorithms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .dataset import BinaryDataset, SupportSet
from .rng import CounterRng
from .trees import Internal, Leaf, Objective, Pair, PairScale, Tree


class LimitsExceeded(Exception):
    pass


@dataclass
class OracleLimits:
    max_n: int = 64
    max_k: int = 8
    max_depth: int = 3
    hard_cap: int = 2_000_000  # on (2k)^depth

    def check(self, ds: BinaryDataset, depth: int) -> None:
        if ds.n > self.max_n or ds.k > self.max_k or depth > self.max_depth:
            raise LimitsExceeded(
                f"instance (n={ds.n}, k={ds.k}, d={depth}) beyond oracle limits"
            )
        if (2 * ds.k) ** depth > self.hard_cap:
            raise LimitsExceeded("subproblem space too large for exhaustive search")


DEFAULT_LIMITS = OracleLimits()


def brute_force_optimal(
    ds: BinaryDataset,
    depth_budget: int,
    lam: float,
    support: Optional[SupportSet] = None,
    limits: Optional[OracleLimits] = DEFAULT_LIMITS,
    n_global: Optional[int] = None,
) -> tuple[Objective, Tree]:
    """Exhaustive optimum by DP over (support mask, remaining depth) cells."""
    if limits is not None:
        limits.check(ds, depth_budget)
    n_global = n_global or ds.n
    scale = PairScale(lam, n_global)
    memo: dict = {}

    def best(mask: int, rdepth: int) -> tuple[Pair, Tree]:
        key = (mask, rdepth)
        got = memo.get(key)
        if got is not None:
            return got
        cnt = mask.bit_count()
        pos = (mask & ds.label_bits).bit_count()
        neg = cnt - pos
        pair: Pair = (min(pos, neg), 1)
        tree: Tree = Leaf(1 if pos > neg else 0)
        if rdepth >= 1 and pair[0] > 0:
            for f in range(ds.k):
                lmask = mask & ds.feature_bits[f]
                if lmask == 0 or lmask == mask:
                    continue
                lp, lt = best(lmask, rdepth - 1)
                rp, rt = best(mask ^ lmask, rdepth - 1)
                cand: Pair = (lp[0] + rp[0], lp[1] + rp[1])
                if scale.less(cand, pair):
                    pair = cand
                    tree = Internal(f, lt, rt)
        memo[key] = (pair, tree)
        return pair, tree

    root = ds.full_mask if support is None else support.mask
    pair, tree = best(root, depth_budget)
    return Objective.from_counts(pair[0], pair[1], lam, n_global), tree


def enumerate_canonical_trees(
    ds: BinaryDataset, mask: int, rdepth: int
) -> Iterator[Tree]:
    """Every canonical tree on the support: both leaf predictions, and splits
    with nonempty children whose subtrees are not identical-prediction leaf
    pairs. Deliberately unmemoized; sizes explode quickly."""
    yield Leaf(0)
    yield Leaf(1)
    if rdepth < 1:
        return
    for f in range(ds.k):
        lmask = mask & ds.feature_bits[f]
        if lmask == 0 or lmask == mask:
            continue
        rmask = mask ^ lmask
        for lt in enumerate_canonical_trees(ds, lmask, rdepth - 1):
            for rt in enumerate_canonical_trees(ds, rmask, rdepth - 1):
                if isinstance(lt, Leaf) and isinstance(rt, Leaf) and lt.prediction == rt.prediction:
                    continue
                yield Internal(f, lt, rt)


def brute_force_optimal_naive(
    ds: BinaryDataset, depth_budget: int, lam: float, n_global: Optional[int] = None
) -> tuple[Objective, Tree]:
    """Second, independent optimum: walk every canonical tree. Tiny inputs only."""
    from .trees import misclassified_on, num_leaves

    n_global = n_global or ds.n
    scale = PairScale(lam, n_global)
    best_pair: Optional[Pair] = None
    best_tree: Optional[Tree] = None
    for t in enumerate_canonical_trees(ds, ds.full_mask, depth_budget):
        pair: Pair = (misclassified_on(t, ds, ds.full_mask), num_leaves(t))
        if best_pair is None or scale.less(pair, best_pair):
            best_pair = pair
            best_tree = t
    assert best_pair is not None and best_tree is not None
    return Objective.from_counts(best_pair[0], best_pair[1], lam, n_global), best_tree


def brute_force_rashomon(
    ds: BinaryDataset,
    depth_budget: int,
    lam: float,
    epsilon: float,
    limits: Optional[OracleLimits] = DEFAULT_LIMITS,
    absolute_bound: Optional[float] = None,
) -> tuple[list[Tree], list[Objective]]:
    """All canonical trees with objective <= optimum + epsilon (or <= the
    given absolute cap).

    Enumerates recursively, pruning subtrees whose best possible completion
    (from the DP optimum per cell) already busts the budget, so it stays
    usable a little beyond what the naive walk can do. Independent of the
    production enumerator.
    """
    if limits is not None:
        limits.check(ds, depth_budget)
    scale = PairScale(lam, ds.n)
    if absolute_bound is not None:
        bound_key = scale.bound_key(absolute_bound)
    else:
        opt_obj, _ = brute_force_optimal(ds, depth_budget, lam, limits=limits)
        bound_key = scale.key(opt_obj.pair) + scale.slack_key(epsilon)

    cell: dict = {}

    def cell_min(mask: int, rdepth: int) -> int:
        key = (mask, rdepth)
        got = cell.get(key)
        if got is not None:
            return got
        cnt = mask.bit_count()
        pos = (mask & ds.label_bits).bit_count()
        best = scale.key((min(pos, cnt - pos), 1))
        if rdepth >= 1:
            for f in range(ds.k):
                lmask = mask & ds.feature_bits[f]
                if lmask == 0 or lmask == mask:
                    continue
                cand = cell_min(lmask, rdepth - 1) + cell_min(mask ^ lmask, rdepth - 1)
                if cand < best:
                    best = cand
        cell[key] = best
        return best

    def admissible(mask: int, rdepth: int, cap: int) -> list[tuple[Tree, Pair]]:
        out: list[tuple[Tree, Pair]] = []
        cnt = mask.bit_count()
        pos = (mask & ds.label_bits).bit_count()
        for pred, errs in ((0, pos), (1, cnt - pos)):
            pair: Pair = (errs, 1)
            if scale.key(pair) <= cap:
                out.append((Leaf(pred), pair))
        if rdepth >= 1:
            for f in range(ds.k):
                lmask = mask & ds.feature_bits[f]
                if lmask == 0 or lmask == mask:
                    continue
                rmask = mask ^ lmask
                lmin = cell_min(lmask, rdepth - 1)
                rmin = cell_min(rmask, rdepth - 1)
                if lmin + rmin > cap:
                    continue
                lefts = admissible(lmask, rdepth - 1, cap - rmin)
                rights = admissible(rmask, rdepth - 1, cap - lmin)
                for lt, lp in lefts:
                    lkey = scale.key(lp)
                    for rt, rp in rights:
                        if lkey + scale.key(rp) > cap:
                            continue
                        if (
                            isinstance(lt, Leaf)
                            and isinstance(rt, Leaf)
                            and lt.prediction == rt.prediction
                        ):
                            continue
                        out.append((Internal(f, lt, rt), (lp[0] + rp[0], lp[1] + rp[1])))
        return out

    trees: list[Tree] = []
    objs: list[Objective] = []
    for t, pair in admissible(ds.full_mask, depth_budget, bound_key):
        trees.append(t)
        objs.append(Objective.from_counts(pair[0], pair[1], lam, ds.n))
    return trees, objs


# -- synthetic data ----------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """Seeded generator request. generator is one of:

    "xor"             -- the 4-row two-feature parity fixture
    "xor_majority"    -- y = x1 XOR Majority(x2..xd) w.p. 1-eps,
                         else Majority(x_{d+1}..x_{2d}); 2d features
    "tribes_majority" -- y = Tribes on the first d_l features w.p. 1-eps,
                         else Majority on the last d; d_l + d features
    """

    generator: str
    n: int = 0
    seed: int = 0
    d: int = 4
    d_l: int = 2
    eps: float = 0.05


def xor_dataset() -> BinaryDataset:
    X = [(0, 0), (0, 1), (1, 0), (1, 1)]
    y = [0, 1, 1, 0]
    return BinaryDataset.from_arrays(np.array(X), np.array(y), ["x0", "x1"])


def _majority(bits: list[int]) -> int:
    return 1 if sum(bits) * 2 >= len(bits) else 0


def tribes_width(ell: int) -> int:
    """Largest w with (1 - 2^-w)^(ell/w) <= 1/2."""
    best = 1
    for w in range(1, ell + 1):
        if (1.0 - 2.0 ** (-w)) ** (ell / w) <= 0.5:
            best = w
    return best


def _tribes(bits: list[int]) -> int:
    ell = len(bits)
    w = tribes_width(ell)
    t = ell // w
    for b in range(t):
        chunk = bits[b * w : (b + 1) * w]
        if all(chunk):
            return 1
    return 0


def generate(spec: SyntheticSpec) -> tuple[BinaryDataset, dict]:
    """Build the requested dataset; metadata records the accuracy bounds the
    construction is designed around."""
    if spec.generator == "xor":
        return xor_dataset(), {"optimal_accuracy": 1.0}
    rng = CounterRng(spec.seed)
    if spec.generator == "xor_majority":
        d = spec.d
        k = 2 * d
        rows = []
        labels = []
        for _ in range(spec.n):
            x = [rng.next_bit() for _ in range(k)]
            if rng.bernoulli(spec.eps):
                y = _majority(x[d:])
            else:
                y = x[0] ^ _majority(x[1:d])
            rows.append(x)
            labels.append(y)
        meta = {
            "lookahead_accuracy_floor": 1.0 - spec.eps,
            "greedy_accuracy_ceiling": 0.5 + spec.eps,
        }
        return (
            BinaryDataset.from_arrays(np.array(rows), np.array(labels), [f"x{i+1}" for i in range(k)]),
            meta,
        )
    if spec.generator == "tribes_majority":
        d_l, d = spec.d_l, spec.d
        k = d_l + d
        rows = []
        labels = []
        for _ in range(spec.n):
            x = [rng.next_bit() for _ in range(k)]
            if rng.bernoulli(spec.eps):
                y = _majority(x[d_l:])
            else:
                y = _tribes(x[:d_l])
            rows.append(x)
            labels.append(y)
        meta = {
            "tribes_width": tribes_width(d_l),
            "lookahead_accuracy_floor": 1.0 - spec.eps,
            "greedy_accuracy_ceiling": 0.5 + spec.eps,
        }
        return (
            BinaryDataset.from_arrays(np.array(rows), np.array(labels), [f"x{i+1}" for i in range(k)]),
            meta,
        )
    raise ValueError(f"unknown generator {spec.generator!r}")


def random_instance(
    rng: CounterRng, max_n: int = 64, max_k: int = 8, min_n: int = 4, min_k: int = 2
) -> BinaryDataset:
    """Random binary dataset for fuzzing, drawn with the counter RNG."""
    n = min_n + rng.next_below(max_n - min_n + 1)
    k = min_k + rng.next_below(max_k - min_k + 1)
    while True:
        rows = [[rng.next_bit() for _ in range(k)] for _ in range(n)]
        labels = [rng.next_bit() for _ in range(n)]
        X = np.array(rows)
        keep = [j for j in range(k) if 0 < X[:, j].sum() < n]
        if keep and 0 < sum(labels) < n:
            return BinaryDataset.from_arrays(X[:, keep], np.array(labels))
