import pytest

from splitopt.oracle import (
    LimitsExceeded,
    OracleLimits,
    SyntheticSpec,
    brute_force_optimal,
    brute_force_optimal_naive,
    brute_force_rashomon,
    enumerate_canonical_trees,
    generate,
    random_instance,
    tribes_width,
    xor_dataset,
)
from splitopt.rng import CounterRng
from splitopt.trees import Leaf, canonicalize, depth


def test_xor_values(xor):
    obj, t = brute_force_optimal(xor, 2, 0.01)
    assert obj.pair == (0, 4) and obj.value == pytest.approx(0.04)
    obj1, t1 = brute_force_optimal(xor, 1, 0.01)
    assert obj1.pair == (2, 1) and obj1.value == pytest.approx(0.51)
    assert t1 == Leaf(0)


def test_pure_dataset(tiny_pure):
    obj, t = brute_force_optimal(tiny_pure, 2, 0.01)
    assert t == Leaf(1) and obj.value == pytest.approx(0.01)


def test_memoized_vs_naive_agreement():
    rng = CounterRng(401)
    for _ in range(20):
        ds = random_instance(rng, max_n=12, max_k=3)
        for lam in (0.0, 0.01, 0.1):
            a, _ = brute_force_optimal(ds, 2, lam)
            b, _ = brute_force_optimal_naive(ds, 2, lam)
            assert a.pair == b.pair


def test_canonical_enumeration_is_canonical(xor):
    for t in enumerate_canonical_trees(xor, xor.full_mask, 2):
        assert canonicalize(t) == t
        assert depth(t) <= 2


def test_rashomon_eps_zero(xor):
    trees, objs = brute_force_rashomon(xor, 2, 0.01, 0.0)
    assert len(trees) == 2
    assert all(o.pair == (0, 4) for o in objs)


def test_rashomon_eps_infinite_counts_all(xor):
    trees, _ = brute_force_rashomon(xor, 2, 0.01, float("inf"))
    total = sum(1 for _ in enumerate_canonical_trees(xor, xor.full_mask, 2))
    assert len(trees) == total == 30


def test_rashomon_intermediate(xor):
    trees, objs = brute_force_rashomon(xor, 2, 0.01, 0.05)
    assert len(trees) == 2


def test_limits_enforced():
    rng = CounterRng(403)
    ds = random_instance(rng, max_n=16, max_k=4)
    with pytest.raises(LimitsExceeded):
        brute_force_optimal(ds, 9, 0.01, limits=OracleLimits(max_depth=3))


def test_optimal_leq_any_other_method():
    from splitopt.greedy import greedy_fit
    from splitopt.split_algos import licketysplit_fit

    rng = CounterRng(407)
    for _ in range(15):
        ds = random_instance(rng, max_n=32, max_k=5)
        opt, _ = brute_force_optimal(ds, 3, 0.01)
        _, g = greedy_fit(ds, ds.full_support(), 3, 0.01, ds.n)
        _, l = licketysplit_fit(ds, lam=0.01, depth_budget=3)
        assert opt.value <= g.value + 1e-12
        assert opt.value <= l.value + 1e-12


def test_generator_xor(xor):
    ds, meta = generate(SyntheticSpec("xor"))
    assert ds.n == 4 and ds.k == 2
    assert ds.feature_bits == xor.feature_bits
    assert ds.label_bits == xor.label_bits


def test_generator_xor_majority_balance_and_reproducibility():
    spec = SyntheticSpec("xor_majority", n=20000, seed=7, d=4, eps=0.05)
    ds1, meta = generate(spec)
    ds2, _ = generate(spec)
    assert ds1.feature_bits == ds2.feature_bits
    assert ds1.label_bits == ds2.label_bits
    assert ds1.k == 8
    prevalence = ds1.full_support().pos_count / ds1.n
    assert abs(prevalence - 0.5) < 0.02
    assert meta["greedy_accuracy_ceiling"] == pytest.approx(0.55)


def test_generator_different_seeds_differ():
    a, _ = generate(SyntheticSpec("xor_majority", n=1000, seed=1, d=4, eps=0.05))
    b, _ = generate(SyntheticSpec("xor_majority", n=1000, seed=2, d=4, eps=0.05))
    assert a.label_bits != b.label_bits


def test_tribes_width_by_direct_scan():
    ell = 8
    feasible = [w for w in range(1, ell + 1) if (1 - 2.0 ** (-w)) ** (ell / w) <= 0.5]
    assert tribes_width(ell) == max(feasible) == 2


def test_generator_tribes():
    ds, meta = generate(SyntheticSpec("tribes_majority", n=2000, seed=5, d=4, d_l=4, eps=0.1))
    assert ds.k == 8
    assert meta["tribes_width"] == tribes_width(4)
    ds2, _ = generate(SyntheticSpec("tribes_majority", n=2000, seed=5, d=4, d_l=4, eps=0.1))
    assert ds.label_bits == ds2.label_bits


def test_splitmix_reference_values():
    # documented stream: value i is splitmix64(seed + i * golden_gamma)
    from splitopt.rng import splitmix64

    assert splitmix64(0) == 16294208416658607535
    rng = CounterRng(0)
    assert rng.next_u64() == 16294208416658607535
    assert rng.next_u64() == 7960286522194355700
    assert rng.next_u64() == 487617019471545679
