import json
import os

import pytest

from splitopt.cli import (
    EXIT_BUDGET,
    EXIT_DATA,
    EXIT_FINGERPRINT,
    EXIT_INDEX,
    fingerprint,
    main,
)

XOR_CSV = "x0,x1,label\n0,0,0\n0,1,1\n1,0,1\n1,1,0\n"


@pytest.fixture
def xor_csv(tmp_path):
    p = tmp_path / "xor.csv"
    p.write_text(XOR_CSV)
    return str(p)


def run(argv):
    return main(argv)


def read_lines(capsys):
    return capsys.readouterr().out.strip().splitlines()


def test_prep_xor_exhaustive_full_train(tmp_path, xor_csv, capsys):
    out = str(tmp_path / "prep")
    assert run(["prep", xor_csv, "--binarize", "exhaustive", "--split", "1.0",
                "--seed", "3", "--out", out]) == 0
    lines = dict(l.split("\t") for l in read_lines(capsys))
    assert lines["train_rows"] == "4" and lines["features"] == "2"
    train = (tmp_path / "prep" / "train.bin.csv").read_text().splitlines()
    assert len(train) == 5
    assert (tmp_path / "prep" / "binarizer.json").exists()
    assert (tmp_path / "prep" / "run_manifest.json").exists()
    # test file is header-only at split 1.0
    assert len((tmp_path / "prep" / "test.bin.csv").read_text().splitlines()) == 1


def test_prep_single_class_guess_exits_2(tmp_path, capsys):
    p = tmp_path / "one.csv"
    p.write_text("a,label\n1,1\n2,1\n3,1\n")
    assert run(["prep", str(p), "--binarize", "guess:5", "--out", str(tmp_path / "o")]) == EXIT_DATA


def test_prep_balance(tmp_path, capsys):
    p = tmp_path / "imb.csv"
    rows = ["a,label"] + [f"{i},1" for i in range(8)] + [f"{i+8},0" for i in range(2)]
    p.write_text("\n".join(rows) + "\n")
    out = str(tmp_path / "bal")
    assert run(["prep", str(p), "--binarize", "exhaustive", "--split", "1.0",
                "--balance", "--out", out]) == 0
    lines = dict(l.split("\t") for l in read_lines(capsys))
    assert lines["train_rows"] == "4"  # 2 per class


def prep_xor(tmp_path, xor_csv):
    out = str(tmp_path / "prep")
    assert run(["prep", xor_csv, "--binarize", "exhaustive", "--split", "1.0", "--out", out]) == 0
    return os.path.join(out, "train.bin.csv")


@pytest.mark.parametrize("algo,expect_obj", [
    ("greedy", "0.040000"), ("optimal", "0.040000"),
    ("split", "0.040000"), ("lickety", "0.040000"),
])
def test_fit_all_algos_xor(tmp_path, xor_csv, capsys, algo, expect_obj):
    train = prep_xor(tmp_path, xor_csv)
    capsys.readouterr()
    out = str(tmp_path / f"fit_{algo}")
    assert run(["fit", train, "--algo", algo, "--lambda", "0.01", "--depth", "2",
                "--lookahead", "1", "--out", out]) == 0
    lines = dict(l.split("\t") for l in read_lines(capsys))
    assert lines["objective"] == expect_obj
    assert lines["leaves"] == "4"
    model = json.loads((tmp_path / f"fit_{algo}" / "model.json").read_text())
    assert model["objective"]["leaves"] == 4


def test_fit_pure_dataset_single_leaf(tmp_path, capsys):
    p = tmp_path / "pure.csv"
    p.write_text("a,label\n0,1\n1,1\n0,1\n1,1\n")
    out = str(tmp_path / "prep")
    assert run(["prep", str(p), "--binarize", "exhaustive", "--split", "1.0", "--out", out]) == 0
    capsys.readouterr()
    assert run(["fit", os.path.join(out, "train.bin.csv"), "--algo", "greedy",
                "--depth", "2", "--out", str(tmp_path / "f")]) == 0
    lines = dict(l.split("\t") for l in read_lines(capsys))
    assert lines["leaves"] == "1"


def test_fit_model_deterministic(tmp_path, xor_csv):
    train = prep_xor(tmp_path, xor_csv)
    for d in ("m1", "m2"):
        assert run(["fit", train, "--algo", "split", "--lambda", "0.01", "--depth", "2",
                    "--lookahead", "1", "--seed", "5", "--out", str(tmp_path / d)]) == 0
    m1 = (tmp_path / "m1" / "model.json").read_bytes()
    m2 = (tmp_path / "m2" / "model.json").read_bytes()
    assert m1 == m2


def test_rashomon_index_roundtrip(tmp_path, xor_csv, capsys):
    train = prep_xor(tmp_path, xor_csv)
    capsys.readouterr()
    forest = str(tmp_path / "forest")
    assert run(["rashomon", train, "--lambda", "0.01", "--epsilon", "0.05",
                "--depth", "2", "--lookahead", "1", "--out", forest]) == 0
    lines = read_lines(capsys)
    assert lines[0] == "t_count\t2"
    capsys.readouterr()
    assert run(["index", forest, "--count"]) == 0
    assert read_lines(capsys) == ["2"]
    assert run(["index", forest, "--i", "0"]) == 0
    doc = json.loads(read_lines(capsys)[-1])
    assert doc["index"] == 0 and "tree" in doc
    capsys.readouterr()
    assert run(["index", forest, "--range", "0..2"]) == 0
    out = read_lines(capsys)
    assert len(out) == 2
    assert out[0] != out[1]
    assert run(["index", forest, "--i", "2"]) == EXIT_INDEX


def test_rashomon_epsilon_zero_has_optimum(tmp_path, xor_csv, capsys):
    train = prep_xor(tmp_path, xor_csv)
    capsys.readouterr()
    forest = str(tmp_path / "forest0")
    assert run(["rashomon", train, "--lambda", "0.01", "--epsilon", "0.0",
                "--depth", "2", "--lookahead", "1", "--out", forest]) == 0
    lines = read_lines(capsys)
    t_count = int(lines[0].split("\t")[1])
    assert t_count >= 1


def test_rashomon_budget_exceeded(tmp_path, xor_csv):
    train = prep_xor(tmp_path, xor_csv)
    assert run(["rashomon", train, "--lambda", "0.0", "--epsilon", "1.0",
                "--depth", "2", "--lookahead", "1", "--max-trees", "1",
                "--out", str(tmp_path / "fx")]) == EXIT_BUDGET


def test_forest_manifest_deterministic(tmp_path, xor_csv):
    train = prep_xor(tmp_path, xor_csv)
    for d in ("fa", "fb"):
        assert run(["rashomon", train, "--lambda", "0.01", "--epsilon", "0.05",
                    "--depth", "2", "--lookahead", "1", "--seed", "9",
                    "--out", str(tmp_path / d)]) == 0
    a = (tmp_path / "fa" / "manifest.json").read_bytes()
    b = (tmp_path / "fb" / "manifest.json").read_bytes()
    assert a == b


def test_analyze_greedy_prop_single_model(tmp_path, xor_csv, capsys):
    train = prep_xor(tmp_path, xor_csv)
    assert run(["fit", train, "--algo", "greedy", "--lambda", "0.001", "--depth", "2",
                "--out", str(tmp_path / "g")]) == 0
    capsys.readouterr()
    model = str(tmp_path / "g" / "model.json")
    assert run(["analyze", model, train, "--stat", "greedy-prop", "--depth", "2"]) == 0
    lines = read_lines(capsys)
    assert lines[0] == "level\tnumerator\tdenominator\tproportion"
    for line in lines[1:]:
        assert line.endswith("1.0000")


def test_analyze_multiplicity_identical_pair(tmp_path, xor_csv, capsys):
    train = prep_xor(tmp_path, xor_csv)
    for d in ("m1", "m2"):
        assert run(["fit", train, "--algo", "optimal", "--lambda", "0.01", "--depth", "2",
                    "--out", str(tmp_path / d)]) == 0
    capsys.readouterr()
    assert run(["analyze", str(tmp_path / "m1" / "model.json"),
                str(tmp_path / "m2" / "model.json"), train,
                "--stat", "multiplicity"]) == 0
    doc = json.loads(read_lines(capsys)[0])
    assert doc["mean_variance"] == 0.0


def test_analyze_precision_forest(tmp_path, xor_csv, capsys):
    train = prep_xor(tmp_path, xor_csv)
    forest = str(tmp_path / "forest")
    assert run(["rashomon", train, "--lambda", "0.01", "--epsilon", "0.05",
                "--depth", "2", "--lookahead", "1", "--out", forest]) == 0
    capsys.readouterr()
    assert run(["analyze", forest, train, "--stat", "precision", "--slack", "10.0"]) == 0
    doc = json.loads(read_lines(capsys)[0])
    assert doc["slackened_precision"] == 1.0
    assert doc["precision"] == 1.0


def test_analyze_fingerprint_mismatch(tmp_path, xor_csv, capsys):
    train = prep_xor(tmp_path, xor_csv)
    assert run(["fit", train, "--algo", "greedy", "--depth", "2",
                "--out", str(tmp_path / "m")]) == 0
    other = tmp_path / "other.csv"
    other.write_text("x0,x1,label\n0,0,1\n0,1,0\n1,0,0\n1,1,1\n")
    outp = str(tmp_path / "prep2")
    assert run(["prep", str(other), "--binarize", "exhaustive", "--split", "1.0",
                "--out", outp]) == 0
    assert run(["analyze", str(tmp_path / "m" / "model.json"),
                os.path.join(outp, "train.bin.csv"),
                "--stat", "multiplicity"]) == EXIT_FINGERPRINT


def test_bench_adversarial_small(capsys):
    assert run(["bench", "--suite", "adversarial", "--n", "2000",
                "--lambda", "0.02", "--seed", "1"]) == 0
    lines = read_lines(capsys)
    table = {l.split("\t")[0]: float(l.split("\t")[1]) for l in lines[1:]}
    assert table["lickety"] > table["greedy"]
    assert table["split"] >= 0.9


def test_bench_lookahead_sweep_tiny(capsys):
    assert run(["bench", "--suite", "lookahead-sweep", "--n", "300", "--k", "8",
                "--depth", "3", "--repeats", "1", "--lambda", "0.02"]) == 0
    lines = read_lines(capsys)
    assert lines[0].startswith("lookahead_depth")
    assert len(lines) == 3  # d_l in {1, 2}


def test_bench_algo_frontier_tiny(capsys):
    assert run(["bench", "--suite", "algo-frontier", "--n", "400", "--k", "6",
                "--depth", "3"]) == 0
    lines = read_lines(capsys)
    assert lines[0] == "algo\tlambda\ttest_loss\tleaves\twall_time"
    assert len(lines) > 10


def test_fit_optimal_timeout_exit_3(tmp_path, capsys):
    # a dataset big enough that a zero time limit cannot converge
    from splitopt.rng import CounterRng

    rng = CounterRng(55)
    rows = ["%s,label" % ",".join(f"c{j}" for j in range(10))]
    for _ in range(300):
        cells = [str(rng.next_bit()) for _ in range(10)]
        cells.append(str(rng.next_bit()))
        rows.append(",".join(cells))
    p = tmp_path / "big.csv"
    p.write_text("\n".join(rows) + "\n")
    out = str(tmp_path / "prep")
    assert run(["prep", str(p), "--binarize", "exhaustive", "--split", "1.0", "--out", out]) == 0
    code = run(["fit", os.path.join(out, "train.bin.csv"), "--algo", "optimal",
                "--lambda", "0.0", "--depth", "5", "--time-limit", "0.0",
                "--out", str(tmp_path / "t")])
    assert code == 3
    # the model is still written, flagged as unconverged
    model = json.loads((tmp_path / "t" / "model.json").read_text())
    assert model["converged"] is False


def test_fingerprint_stable(tmp_path, xor_csv):
    assert fingerprint(xor_csv) == fingerprint(xor_csv)


def test_rerun_prep_deterministic(tmp_path, xor_csv):
    a, b = str(tmp_path / "p1"), str(tmp_path / "p2")
    for out in (a, b):
        assert run(["prep", xor_csv, "--binarize", "exhaustive", "--split", "0.5",
                    "--seed", "12", "--out", out]) == 0
    for name in ("train.bin.csv", "test.bin.csv", "binarizer.json"):
        assert (tmp_path / "p1" / name).read_bytes() == (tmp_path / "p2" / name).read_bytes()


def test_prep_train_test_headers_match(tmp_path):
    rng_rows = ["a,b,label"] + [f"{i},{(i * 7) % 5},{i % 2}" for i in range(20)]
    p = tmp_path / "d.csv"
    p.write_text("\n".join(rng_rows) + "\n")
    out = str(tmp_path / "o")
    assert run(["prep", str(p), "--binarize", "exhaustive", "--split", "0.5",
                "--seed", "2", "--out", out]) == 0
    train_head = (tmp_path / "o" / "train.bin.csv").read_text().splitlines()[0]
    test_head = (tmp_path / "o" / "test.bin.csv").read_text().splitlines()[0]
    assert train_head == test_head
