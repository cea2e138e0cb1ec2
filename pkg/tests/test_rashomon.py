import json

import pytest

from splitopt.oracle import brute_force_optimal, brute_force_rashomon, random_instance
from splitopt.rashomon import (
    BudgetExceeded,
    ForestBoundary,
    ForestLeaf,
    ForestSplit,
    IndexOutOfRange,
    RashomonConfig,
    enumerate_rashomon,
    enumerate_subtree_counts,
    load_forest,
    resplit,
    rset_count,
    save_forest,
    tree_at_index,
)
from splitopt.rng import CounterRng
from splitopt.trees import Leaf, canonicalize, objective, serialize


def canon_set(trees):
    return sorted(serialize(canonicalize(t)) for t in trees)


def test_enumerate_pure_bound_lambda(tiny_pure):
    ts = enumerate_rashomon(tiny_pure, tiny_pure.full_support(), 2, 0.01, 4, 0.01)
    assert len(ts) == 1
    assert ts.trees[0] == Leaf(1)


def test_enumerate_xor_two_perfect(xor):
    ts = enumerate_rashomon(xor, xor.full_support(), 2, 0.01, 4, 0.04 + 0.05)
    assert len(ts) == 2
    assert all(o.pair == (0, 4) for o in ts.objectives)
    roots = {t.feature for t in ts.trees}
    assert roots == {0, 1}


def test_enumerate_xor_wider_bound_matches_brute_force(xor):
    ts = enumerate_rashomon(xor, xor.full_support(), 2, 0.01, 4, 0.52)
    bt, _ = brute_force_rashomon(xor, 2, 0.01, 0.0, absolute_bound=0.52)
    assert canon_set(ts.trees) == canon_set(bt)
    values = sorted(round(o.value, 4) for o in ts.objectives)
    assert values.count(0.51) == 2  # both bare leaves admitted
    assert values.count(0.28) == 8  # three-leaf trees


def test_enumerate_matches_brute_force_fuzz():
    rng = CounterRng(211)
    for _ in range(30):
        ds = random_instance(rng, max_n=24, max_k=4)
        lam = (0.0, 0.01, 0.05)[rng.next_below(3)]
        eps = (0.0, 0.02, 0.1)[rng.next_below(3)]
        opt, _ = brute_force_optimal(ds, 2, lam)
        bound_key = None
        ts = enumerate_rashomon(
            ds, ds.full_support(), 2, lam, ds.n, opt.value + eps, bound_key=bound_key
        )
        bt, _ = brute_force_rashomon(ds, 2, lam, 0.0, absolute_bound=opt.value + eps)
        assert canon_set(ts.trees) == canon_set(bt)


def test_enumerate_budget_exceeded(xor):
    with pytest.raises(BudgetExceeded):
        enumerate_rashomon(xor, xor.full_support(), 2, 0.01, 4, 10.0, max_trees=5)


def test_enumerate_empty_below_lambda(xor):
    ts = enumerate_rashomon(xor, xor.full_support(), 2, 0.01, 4, 0.005)
    assert len(ts) == 0


def test_resplit_pure(tiny_pure):
    forest = resplit(tiny_pure, RashomonConfig(lam=0.01, epsilon=0.0,
                                               depth_budget=2, lookahead_depth=1))
    assert forest.t_count == 1
    assert isinstance(forest.prefixes[0], ForestLeaf)
    assert tree_at_index(forest, 0) == Leaf(1)


def test_resplit_xor(xor):
    forest = resplit(xor, RashomonConfig(lam=0.01, epsilon=0.05,
                                         depth_budget=2, lookahead_depth=1))
    assert forest.t_count == 2
    assert forest.p_counts == [1, 2]
    t0 = tree_at_index(forest, 0)
    t1 = tree_at_index(forest, 1)
    assert {t0.feature, t1.feature} == {0, 1}
    for t in (t0, t1):
        assert objective(t, xor, xor.full_support(), 0.01, 4).pair == (0, 4)
    with pytest.raises(IndexOutOfRange):
        tree_at_index(forest, 2)


def test_counts_cross_product():
    left = ForestBoundary(0, 1, _fake_treeset(2), 0.0)
    right = ForestBoundary(0, 1, _fake_treeset(3), 0.0)
    node = ForestSplit(0, left, right)
    assert enumerate_subtree_counts(node) == 6
    assert node.count == 6 and left.count == 2 and right.count == 3


def _fake_treeset(n):
    from splitopt.rashomon import TreeSet
    from splitopt.trees import Internal

    trees = []
    for i in range(n):
        trees.append(Internal(i, Leaf(0), Leaf(1)))
    return TreeSet(trees, [], 0.0, 0)


def test_rset_count_cumulative(xor):
    forest = resplit(xor, RashomonConfig(lam=0.01, epsilon=0.05,
                                         depth_budget=2, lookahead_depth=1))
    p_counts, t_count = rset_count(forest)
    assert p_counts == forest.p_counts
    assert t_count == forest.t_count


def test_index_arithmetic_decomposition():
    # local index splits into (div, mod) against the right child count
    left = ForestBoundary(0, 1, _fake_treeset(2), 0.0)
    right = ForestBoundary(0, 1, _fake_treeset(3), 0.0)
    node = ForestSplit(5, left, right)
    enumerate_subtree_counts(node)
    from splitopt.rashomon import _subtree_at

    t = _subtree_at(node, 4)  # left_idx 1, right_idx 1
    assert t.left.feature == 1 and t.right.feature == 1


def test_index_bijection_fuzz():
    rng = CounterRng(223)
    checked = 0
    for _ in range(20):
        ds = random_instance(rng, max_n=24, max_k=4)
        cfg = RashomonConfig(lam=0.01, epsilon=0.03, depth_budget=3, lookahead_depth=2)
        forest = resplit(ds, cfg)
        trees = [tree_at_index(forest, i) for i in range(forest.t_count)]
        forms = {serialize(canonicalize(t)) for t in trees}
        assert len(forms) == forest.t_count
        # every indexed tree verifies against the admission bound
        scale_cap = forest.admission_value + 1e-9
        for t in trees:
            obj = objective(t, ds, ds.full_support(), cfg.lam, ds.n)
            assert obj.value <= scale_cap
        checked += forest.t_count
    assert checked > 0


def test_forest_roundtrip_disk(tmp_path, xor):
    forest = resplit(xor, RashomonConfig(lam=0.01, epsilon=0.05,
                                         depth_budget=2, lookahead_depth=1))
    d = str(tmp_path / "forest")
    save_forest(forest, d)
    disk = load_forest(d)
    assert disk.t_count == forest.t_count
    for i in range(forest.t_count):
        assert serialize(disk.tree_at_index(i)) == serialize(tree_at_index(forest, i))
    with pytest.raises(IndexOutOfRange):
        disk.tree_at_index(forest.t_count)
    manifest = json.loads((tmp_path / "forest" / "manifest.json").read_text())
    assert manifest["t_count"] == forest.t_count
    assert manifest["p_counts"] == forest.p_counts


def test_forest_manifest_deterministic(tmp_path, xor):
    cfg = RashomonConfig(lam=0.01, epsilon=0.05, depth_budget=2, lookahead_depth=1)
    d1, d2 = str(tmp_path / "f1"), str(tmp_path / "f2")
    save_forest(resplit(xor, cfg), d1)
    save_forest(resplit(xor, cfg), d2)
    read = lambda d, n: (tmp_path / d / n).read_bytes()
    assert read("f1", "manifest.json") == read("f2", "manifest.json")
    assert read("f1", "prefix_00000.json") == read("f2", "prefix_00000.json")
