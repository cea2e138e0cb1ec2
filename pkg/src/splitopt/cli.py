"""Command-line surface: data prep, fitting, near-optimal set workflows,
analysis, and benchmarks.

Results go to stdout as TSV, artifacts to disk as JSON, logs to stderr.
Every output directory gets a run manifest; model and forest files are
byte-stable across reruns with the same seed.

Exit codes: 2 dataset/input errors, 3 optimal fit hit its time limit,
4 tree budget exceeded, 5 index out of range, 6 dataset fingerprint
mismatch.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from statistics import median
from typing import Optional

import numpy as np

from . import __version__
from .analysis import (
    NoNodesAtLevel,
    greedy_split_proportion,
    monotone_gap_fraction,
    precision_vs_reference,
    predictive_multiplicity,
)
from .dataset import (
    Binarizer,
    BinaryDataset,
    DatasetError,
    RawDataset,
    load_csv,
)
from .greedy import greedy_fit
from .oracle import SyntheticSpec, generate
from .rashomon import (
    BudgetExceeded,
    IndexOutOfRange,
    RashomonConfig,
    load_forest,
    resplit,
    save_forest,
)
from .rng import CounterRng
from .solver import BoundsPolicy, SolverConfig, solve
from .split_algos import FitRequest, licketysplit_fit, split_fit
from .trees import (
    Tree,
    depth as tree_depth,
    load_model_document,
    misclassified_on,
    model_document,
    num_leaves,
    objective,
    serialize,
)

EXIT_DATA = 2
EXIT_TIMEOUT = 3
EXIT_BUDGET = 4
EXIT_INDEX = 5
EXIT_FINGERPRINT = 6


def log(msg: str) -> None:
    print(msg, file=sys.stderr)


def fingerprint(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_run_manifest(out_dir: str, command: str, config: dict, seed: Optional[int],
                       data_fingerprint: Optional[str], wall_time: float, artifacts: list[str]) -> None:
    doc = {
        "command": command,
        "config": config,
        "dataset_fingerprint": data_fingerprint,
        "seed": seed,
        "wall_time": wall_time,
        "artifacts": artifacts,
        "version": __version__,
    }
    with open(os.path.join(out_dir, "run_manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _threads(args) -> int:
    env = os.environ.get("SPLIT_OPT_THREADS")
    if env:
        return max(1, int(env))
    return max(1, getattr(args, "threads", 1))


# -- prep ---------------------------------------------------------------------


def _parse_binarize(spec: str) -> Binarizer:
    if spec == "exhaustive":
        return Binarizer("exhaustive")
    if spec.startswith("quantile:"):
        return Binarizer("quantile", {"q": int(spec.split(":", 1)[1])})
    if spec.startswith("guess:"):
        return Binarizer("threshold_guess", {"n_estimators": int(spec.split(":", 1)[1])})
    if spec == "guess":
        return Binarizer("threshold_guess", {})
    raise DatasetError(f"unknown binarize spec {spec!r}")


def _write_binary_csv(path: str, ds: BinaryDataset, rows: list[int]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join([*ds.feature_names, "label"]) + "\n")
        for i in rows:
            cells = [str((b >> i) & 1) for b in ds.feature_bits]
            cells.append(str((ds.label_bits >> i) & 1))
            fh.write(",".join(cells) + "\n")


def _subset_raw(raw: RawDataset, rows: list[int]) -> RawDataset:
    idx = np.asarray(rows, dtype=np.int64)
    return RawDataset(
        list(raw.column_names), [c[idx] for c in raw.columns], raw.labels[idx]
    )


def cmd_prep(args) -> int:
    t0 = time.monotonic()
    raw = load_csv(args.input, args.label)
    rng = CounterRng(args.seed)
    order = list(range(raw.n))
    rng.shuffle(order)
    n_train = int(args.split * raw.n)
    train_rows, test_rows = order[:n_train], order[n_train:]
    if args.balance:
        train_labels = [int(raw.labels[i]) for i in train_rows]
        pos = [i for i, y in zip(train_rows, train_labels) if y == 1]
        neg = [i for i, y in zip(train_rows, train_labels) if y == 0]
        m = min(len(pos), len(neg))
        if m == 0:
            raise DatasetError("balancing impossible: a class is absent from the train split")
        train_rows = sorted(pos[:m] + neg[:m])
    train_raw = _subset_raw(raw, train_rows)
    binarizer = _parse_binarize(args.binarize)
    binarizer.fit(train_raw, seed=args.seed)
    train_ds = binarizer.transform(train_raw)
    os.makedirs(args.out, exist_ok=True)
    train_path = os.path.join(args.out, "train.bin.csv")
    _write_binary_csv(train_path, train_ds, list(range(train_ds.n)))
    test_path = os.path.join(args.out, "test.bin.csv")
    if test_rows:
        test_ds = binarizer.transform(_subset_raw(raw, test_rows))
        _write_binary_csv(test_path, test_ds, list(range(test_ds.n)))
    else:
        with open(test_path, "w", encoding="utf-8") as fh:
            fh.write(",".join([*train_ds.feature_names, "label"]) + "\n")
    bin_path = os.path.join(args.out, "binarizer.json")
    with open(bin_path, "w", encoding="utf-8") as fh:
        fh.write(binarizer.to_json() + "\n")
    write_run_manifest(
        args.out, "prep",
        {"label": args.label, "binarize": args.binarize, "balance": args.balance, "split": args.split},
        args.seed, fingerprint(args.input), time.monotonic() - t0,
        ["train.bin.csv", "test.bin.csv", "binarizer.json"],
    )
    print(f"rows\t{raw.n}")
    print(f"train_rows\t{len(train_rows)}")
    print(f"test_rows\t{len(test_rows)}")
    print(f"features\t{train_ds.k}")
    return 0


# -- fit ------------------------------------------------------------------------


def _load_binary_csv(path: str) -> BinaryDataset:
    raw = load_csv(path, "label")
    for name, col in zip(raw.column_names, raw.columns):
        bad = np.flatnonzero((col != 0.0) & (col != 1.0))
        if bad.size:
            raise DatasetError(
                f"column {name!r} is not binarized (row {int(bad[0])}); run prep first"
            )
    X = np.column_stack(raw.columns) if raw.columns else np.zeros((raw.n, 0))
    return BinaryDataset.from_arrays(X, np.asarray(raw.labels), list(raw.column_names))


def fit_tree(ds: BinaryDataset, algo: str, lam: float, depth: int, lookahead: int,
             postprocess: bool, time_limit: Optional[float], threads: int = 1):
    """One fitted tree plus its objective and a converged flag."""
    if algo == "greedy":
        tree, obj = greedy_fit(ds, ds.full_support(), depth, lam, ds.n)
        return tree, obj, True
    if algo == "optimal":
        res = solve(ds, SolverConfig(depth_budget=depth, lam=lam, n_global=ds.n,
                                     time_limit=time_limit, bounds_policy=BoundsPolicy.STANDARD))
        return res.tree, res.objective, res.converged
    if algo == "split":
        report: list = []
        tree, obj = split_fit(
            ds,
            FitRequest(lam=lam, depth_budget=depth, lookahead_depth=min(lookahead, depth),
                       postprocess=postprocess, time_limit=time_limit),
            threads=threads, report=report,
        )
        return tree, obj, report[0].converged
    if algo == "lickety":
        tree, obj = licketysplit_fit(ds, lam=lam, depth_budget=depth)
        return tree, obj, True
    raise DatasetError(f"unknown algorithm {algo!r}")


def cmd_fit(args) -> int:
    t0 = time.monotonic()
    ds = _load_binary_csv(args.train)
    tree, obj, converged = fit_tree(
        ds, args.algo, getattr(args, "lambda"), args.depth, args.lookahead,
        not args.no_postprocess, args.time_limit, _threads(args),
    )
    wall = time.monotonic() - t0
    os.makedirs(args.out, exist_ok=True)
    doc = model_document(
        tree, obj, getattr(args, "lambda"), args.depth, ds.feature_names,
        extra={"algo": args.algo, "converged": converged,
               "dataset_fingerprint": fingerprint(args.train)},
    )
    model_path = os.path.join(args.out, "model.json")
    with open(model_path, "w", encoding="utf-8") as fh:
        fh.write(doc + "\n")
    write_run_manifest(
        args.out, "fit",
        {"algo": args.algo, "lambda": getattr(args, "lambda"), "depth": args.depth,
         "lookahead": args.lookahead, "postprocess": not args.no_postprocess,
         "time_limit": args.time_limit},
        args.seed, fingerprint(args.train), wall, ["model.json"],
    )
    print(f"objective\t{obj.value:.6f}")
    print(f"leaves\t{obj.leaves}")
    print(f"depth\t{tree_depth(tree)}")
    print(f"wall_time\t{wall:.3f}")
    if args.algo == "optimal" and not converged:
        log("time limit reached before convergence; best bound-certified tree written")
        return EXIT_TIMEOUT
    return 0


# -- rashomon / index ------------------------------------------------------------


def cmd_rashomon(args) -> int:
    t0 = time.monotonic()
    ds = _load_binary_csv(args.train)
    cfg = RashomonConfig(
        lam=getattr(args, "lambda"), epsilon=args.epsilon,
        depth_budget=args.depth, lookahead_depth=min(args.lookahead, args.depth),
        max_trees=args.max_trees,
    )
    forest = resplit(ds, cfg)
    os.makedirs(args.out, exist_ok=True)
    save_forest(forest, args.out)
    # fingerprint rides along for analyze-time consistency checks
    manifest_path = os.path.join(args.out, "manifest.json")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    manifest["dataset_fingerprint"] = fingerprint(args.train)
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")
    write_run_manifest(
        args.out, "rashomon",
        {"lambda": getattr(args, "lambda"), "epsilon": args.epsilon,
         "depth": args.depth, "lookahead": args.lookahead},
        args.seed, fingerprint(args.train), time.monotonic() - t0,
        ["manifest.json"] + [f"prefix_{i:05d}.json" for i in range(len(forest.prefixes))],
    )
    print(f"t_count\t{forest.t_count}")
    for i, p in enumerate(forest.prefixes):
        print(f"prefix\t{i}\t{p.count}")
    return 0


def cmd_index(args) -> int:
    disk = load_forest(args.forest)
    if args.count:
        print(disk.t_count)
        return 0
    if args.range:
        a, b = args.range.split("..", 1)
        indices = range(int(a), int(b))
    else:
        indices = [args.i]
    for i in indices:
        t = disk.tree_at_index(i)
        print(json.dumps({"index": i, "tree": json.loads(serialize(t))}, sort_keys=True))
    return 0


# -- analyze ---------------------------------------------------------------------


def _trees_from_inputs(inputs: list[str]) -> tuple[list[Tree], Optional[object]]:
    """Model files and/or a forest directory into a list of trees."""
    trees: list[Tree] = []
    disk = None
    for item in inputs:
        if os.path.isdir(item):
            disk = load_forest(item)
            for i in range(disk.t_count):
                trees.append(disk.tree_at_index(i))
        else:
            with open(item, encoding="utf-8") as fh:
                tree, _ = load_model_document(fh.read())
            trees.append(tree)
    return trees, disk


def _check_fingerprint(inputs: list[str], train_path: str) -> None:
    want = fingerprint(train_path)
    for item in inputs:
        if os.path.isdir(item):
            with open(os.path.join(item, "manifest.json"), encoding="utf-8") as fh:
                got = json.load(fh).get("dataset_fingerprint")
        else:
            with open(item, encoding="utf-8") as fh:
                got = json.load(fh).get("dataset_fingerprint")
        if got is not None and got != want:
            raise FingerprintMismatch(item)


class FingerprintMismatch(Exception):
    def __init__(self, where: str):
        super().__init__(f"{where} was built from a different dataset than the one provided")


def cmd_analyze(args) -> int:
    ds = _load_binary_csv(args.train)
    _check_fingerprint(args.inputs, args.train)
    trees, disk = _trees_from_inputs(args.inputs)
    if not trees:
        raise DatasetError("no models to analyze")
    if args.stat == "greedy-prop":
        print("level\tnumerator\tdenominator\tproportion")
        for level in range(args.depth + 1):
            try:
                st = greedy_split_proportion(ds, trees, level)
            except NoNodesAtLevel:
                continue
            print(f"{st.level}\t{st.numerator}\t{st.denominator}\t{st.proportion:.4f}")
        return 0
    if args.stat == "gap-mono":
        res = monotone_gap_fraction(ds, trees, getattr(args, "lambda"))
        print(json.dumps({
            "fraction": res.fraction, "monotone": res.monotone,
            "evaluated": res.evaluated, "excluded": res.excluded,
        }, sort_keys=True))
        return 0
    if args.stat == "multiplicity":
        res = predictive_multiplicity(ds, trees)
        print(json.dumps({"mean_variance": res.mean, "std_variance": res.std,
                          "rows": ds.n, "trees": len(trees)}, sort_keys=True))
        return 0
    if args.stat == "precision":
        lam = getattr(args, "lambda")
        eps = args.epsilon
        if disk is not None:
            lam = disk.manifest["config"]["lambda"]
            eps = disk.manifest["config"]["epsilon"]
            depth = disk.manifest["config"]["depth_budget"]
        else:
            depth = args.depth
        ref = solve(ds, SolverConfig(depth_budget=depth, lam=lam, n_global=ds.n))
        values = [objective(t, ds, ds.full_support(), lam, ds.n).value for t in trees]
        precision, slackened = precision_vs_reference(
            values, ref.root_ub, lam, eps, args.slack, n_global=ds.n
        )
        print(json.dumps({
            "precision": precision, "slackened_precision": slackened,
            "reference_optimum": ref.root_ub, "epsilon": eps, "slack": args.slack,
            "trees": len(trees),
        }, sort_keys=True))
        return 0
    raise DatasetError(f"unknown stat {args.stat!r}")


# -- bench -----------------------------------------------------------------------


def _planted_dataset(n: int, k: int, seed: int, noise: float = 0.08) -> BinaryDataset:
    """Labels from a fixed depth-3 rule over the first features, flipped with
    the given noise; remaining features are uniform distractors."""
    rng = CounterRng(seed)
    rows = []
    labels = []
    for _ in range(n):
        x = [rng.next_bit() for _ in range(k)]
        y = (x[0] & x[1]) | ((1 - x[0]) & x[2] & x[3]) | (x[0] & (1 - x[1]) & x[4] & x[5])
        if rng.bernoulli(noise):
            y = 1 - y
        rows.append(x)
        labels.append(y)
    return BinaryDataset.from_arrays(np.array(rows), np.array(labels),
                                     [f"x{i}" for i in range(k)])


def _accuracy(tree: Tree, ds: BinaryDataset) -> float:
    return 1.0 - misclassified_on(tree, ds, ds.full_mask) / ds.n


def cmd_bench(args) -> int:
    out_lines: list[str] = []
    if args.suite == "lookahead-sweep":
        ds = _planted_dataset(args.n, args.k, args.seed)
        out_lines.append("lookahead_depth\tmedian_wall_time\tobjective\tleaves")
        for d_l in range(1, args.depth):
            times = []
            for _ in range(args.repeats):
                t0 = time.monotonic()
                tree, obj = split_fit(ds, FitRequest(
                    lam=getattr(args, "lambda"), depth_budget=args.depth,
                    lookahead_depth=d_l, postprocess=True))
                times.append(time.monotonic() - t0)
            out_lines.append(f"{d_l}\t{median(times):.4f}\t{obj.value:.6f}\t{obj.leaves}")
    elif args.suite == "algo-frontier":
        full = _planted_dataset(args.n, args.k, args.seed)
        rng = CounterRng(args.seed + 1)
        order = list(range(full.n))
        rng.shuffle(order)
        cut = int(0.8 * full.n)
        X = full.to_matrix()
        y = np.array([(full.label_bits >> i) & 1 for i in range(full.n)])
        train = BinaryDataset.from_arrays(X[order[:cut]], y[order[:cut]], full.feature_names)
        test = BinaryDataset.from_arrays(X[order[cut:]], y[order[cut:]], full.feature_names)
        out_lines.append("algo\tlambda\ttest_loss\tleaves\twall_time")
        for lam in (0.001, 0.005, 0.01, 0.02, 0.05):
            for algo in ("greedy", "lickety", "split", "optimal"):
                t0 = time.monotonic()
                tree, obj, _ = fit_tree(train, algo, lam, args.depth,
                                        max(1, (args.depth - 1) // 2), True, args.time_limit)
                wall = time.monotonic() - t0
                test_loss = misclassified_on(tree, test, test.full_mask) / test.n
                out_lines.append(f"{algo}\t{lam}\t{test_loss:.4f}\t{num_leaves(tree)}\t{wall:.4f}")
    elif args.suite == "adversarial":
        ds, meta = generate(SyntheticSpec("xor_majority", n=args.n, seed=args.seed,
                                          d=4, eps=0.05))
        gt, _ = greedy_fit(ds, ds.full_support(), 4, getattr(args, "lambda"), ds.n)
        lt, _ = licketysplit_fit(ds, lam=getattr(args, "lambda"), depth_budget=4)
        st, _ = split_fit(ds, FitRequest(lam=getattr(args, "lambda"), depth_budget=4,
                                         lookahead_depth=2, postprocess=True))
        out_lines.append("algo\ttrain_accuracy")
        out_lines.append(f"greedy\t{_accuracy(gt, ds):.4f}")
        out_lines.append(f"lickety\t{_accuracy(lt, ds):.4f}")
        out_lines.append(f"split\t{_accuracy(st, ds):.4f}")
    else:
        raise DatasetError(f"unknown suite {args.suite!r}")
    text = "\n".join(out_lines)
    print(text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"bench_{args.suite}.tsv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        write_run_manifest(args.out, "bench", {"suite": args.suite}, args.seed,
                           None, 0.0, [os.path.basename(path)])
    return 0


# -- entry -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="splitopt", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("prep", help="binarize a CSV and split train/test")
    sp.add_argument("input")
    sp.add_argument("--label", default=None, help="label column name (default: last)")
    sp.add_argument("--binarize", default="exhaustive",
                    help="quantile:Q | exhaustive | guess:N_ESTIMATORS")
    sp.add_argument("--balance", action="store_true",
                    help="undersample the majority class to parity")
    sp.add_argument("--split", type=float, default=0.8, help="train fraction")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default="prep_out")
    sp.set_defaults(func=cmd_prep)

    sf = sub.add_parser("fit", help="fit one tree")
    sf.add_argument("train")
    sf.add_argument("--algo", choices=["greedy", "optimal", "split", "lickety"],
                    default="split")
    sf.add_argument("--lambda", type=float, default=0.01, dest="lambda")
    sf.add_argument("--depth", type=int, default=5)
    sf.add_argument("--lookahead", type=int, default=2)
    sf.add_argument("--no-postprocess", action="store_true")
    sf.add_argument("--time-limit", type=float, default=None)
    sf.add_argument("--threads", type=int, default=1)
    sf.add_argument("--seed", type=int, default=0)
    sf.add_argument("--out", default="fit_out")
    sf.set_defaults(func=cmd_fit)

    sr = sub.add_parser("rashomon", help="build a near-optimal prefix forest")
    sr.add_argument("train")
    sr.add_argument("--lambda", type=float, default=0.02, dest="lambda")
    sr.add_argument("--epsilon", type=float, default=0.01)
    sr.add_argument("--depth", type=int, default=5)
    sr.add_argument("--lookahead", type=int, default=3)
    sr.add_argument("--max-trees", type=int, default=10_000_000)
    sr.add_argument("--seed", type=int, default=0)
    sr.add_argument("--out", default="forest_out")
    sr.set_defaults(func=cmd_rashomon)

    si = sub.add_parser("index", help="materialize trees from a forest by index")
    si.add_argument("forest")
    g = si.add_mutually_exclusive_group(required=True)
    g.add_argument("--i", type=int)
    g.add_argument("--range", help="a..b (half-open)")
    g.add_argument("--count", action="store_true")
    si.set_defaults(func=cmd_index)

    sa = sub.add_parser("analyze", help="statistics over models or a forest")
    sa.add_argument("inputs", nargs="+", help="model.json files and/or a forest directory")
    sa.add_argument("train")
    sa.add_argument("--stat", choices=["greedy-prop", "gap-mono", "multiplicity", "precision"],
                    required=True)
    sa.add_argument("--lambda", type=float, default=0.01, dest="lambda")
    sa.add_argument("--epsilon", type=float, default=0.01)
    sa.add_argument("--depth", type=int, default=5)
    sa.add_argument("--slack", type=float, default=0.01)
    sa.set_defaults(func=cmd_analyze)

    sb = sub.add_parser("bench", help="benchmark suites")
    sb.add_argument("--suite", choices=["lookahead-sweep", "algo-frontier", "adversarial"],
                    required=True)
    sb.add_argument("--n", type=int, default=5000)
    sb.add_argument("--k", type=int, default=40)
    sb.add_argument("--depth", type=int, default=5)
    sb.add_argument("--lambda", type=float, default=0.01, dest="lambda")
    sb.add_argument("--repeats", type=int, default=5)
    sb.add_argument("--time-limit", type=float, default=None)
    sb.add_argument("--seed", type=int, default=7)
    sb.add_argument("--out", default=None)
    sb.set_defaults(func=cmd_bench)
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FingerprintMismatch as e:
        log(f"error: {e}")
        return EXIT_FINGERPRINT
    except IndexOutOfRange as e:
        log(f"error: {e}")
        return EXIT_INDEX
    except BudgetExceeded as e:
        log(f"error: {e}")
        return EXIT_BUDGET
    except DatasetError as e:
        log(f"error: {e}")
        return EXIT_DATA
    except (OSError, ValueError) as e:
        log(f"error: {e}")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
