"""Decision tree values: prediction, the regularized objective, canonical
form, and JSON serialization.

Objectives are carried as exact integer pairs (misclassified, leaves).
All solvers compare pairs through the same scaled value err + lambda*N*L
with ties broken toward fewer leaves, so that equal objectives mean equal
pairs wherever that is arithmetically possible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Union

from .dataset import BinaryDataset, SupportSet


class RowOutOfRange(Exception):
    pass


class SchemaError(Exception):
    def __init__(self, path: str, message: str = "malformed tree document"):
        self.path = path
        super().__init__(f"{message} at {path or '<root>'}")


@dataclass(frozen=True)
class Leaf:
    prediction: int  # 0 or 1


@dataclass(frozen=True)
class Internal:
    feature: int
    left: "Tree"  # feature = 1 branch
    right: "Tree"  # feature = 0 branch


Tree = Union[Leaf, Internal]

# (misclassified count, leaf count); componentwise addition is exact
Pair = tuple[int, int]


class PairScale:
    """Exact comparison of objective pairs under one (lambda, N).

    A float lambda is a dyadic rational num/den, so
        err/N + lambda*L  <  err'/N + lambda*L'
    holds iff
        err*den + num*N*L  <  err'*den + num*N*L'
    over plain integers. All solvers, enumerators and oracles compare
    through these integer keys; ties break toward fewer leaves.
    """

    __slots__ = ("lam", "n", "den", "num_n")

    def __init__(self, lam: float, n_global: int):
        if lam < 0:
            raise ValueError("lambda must be >= 0")
        num, den = float(lam).as_integer_ratio()
        self.lam = float(lam)
        self.n = n_global
        self.den = den
        self.num_n = num * n_global

    def key(self, pair: Pair) -> int:
        return pair[0] * self.den + self.num_n * pair[1]

    def less(self, a: Pair, b: Pair) -> bool:
        ka = a[0] * self.den + self.num_n * a[1]
        kb = b[0] * self.den + self.num_n * b[1]
        if ka != kb:
            return ka < kb
        return a[1] < b[1]

    def value(self, pair: Pair) -> float:
        """Float objective for reporting; comparisons must use key()."""
        return pair[0] / self.n + self.lam * pair[1]

    def slack_key(self, epsilon: float) -> int:
        """Largest key increment worth at most epsilon: a pair is within
        epsilon of a reference pair iff key <= ref_key + slack_key(eps)."""
        if epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if epsilon == float("inf"):
            return 1 << 62
        num, den = float(epsilon).as_integer_ratio()
        return (num * self.n * self.den) // den

    def bound_key(self, bound: float) -> int:
        """Exact admission key for an absolute objective cap: value(pair)
        <= bound iff key(pair) <= bound_key(bound)."""
        if bound == float("inf"):
            return 1 << 62
        num, den = float(bound).as_integer_ratio()
        return (num * self.n * self.den) // den


@dataclass(frozen=True)
class Objective:
    """Regularized loss: misclassified/N + lambda * leaves."""

    misclassified: int
    leaves: int
    lam: float
    n_global: int
    value: float

    @staticmethod
    def from_counts(misclassified: int, leaves: int, lam: float, n_global: int) -> "Objective":
        value = misclassified / n_global + lam * leaves
        return Objective(misclassified, leaves, lam, n_global, value)

    @property
    def pair(self) -> Pair:
        return (self.misclassified, self.leaves)


def predict(t: Tree, ds: BinaryDataset, row: int) -> int:
    """Route one row: at an internal node go left iff its feature bit is set."""
    if row < 0 or row >= ds.n:
        raise RowOutOfRange(f"row {row} out of range [0, {ds.n})")
    while isinstance(t, Internal):
        t = t.left if (ds.feature_bits[t.feature] >> row) & 1 else t.right
    return t.prediction


def misclassified_on(t: Tree, ds: BinaryDataset, mask: int) -> int:
    """Errors of t restricted to the rows in mask, by mask arithmetic."""
    if isinstance(t, Leaf):
        wrong = ds.label_not if t.prediction == 1 else ds.label_bits
        return (mask & wrong).bit_count()
    f = t.feature
    return misclassified_on(t.left, ds, mask & ds.feature_bits[f]) + misclassified_on(
        t.right, ds, mask & ds.feature_not[f]
    )


def objective(t: Tree, ds: BinaryDataset, s: SupportSet, lam: float, n_global: int) -> Objective:
    """Objective of t on support s, normalized by the root dataset size."""
    errs = misclassified_on(t, ds, s.mask)
    return Objective.from_counts(errs, num_leaves(t), lam, n_global)


def num_leaves(t: Tree) -> int:
    if isinstance(t, Leaf):
        return 1
    return num_leaves(t.left) + num_leaves(t.right)


def depth(t: Tree) -> int:
    if isinstance(t, Leaf):
        return 0
    return 1 + max(depth(t.left), depth(t.right))


def canonicalize(t: Tree) -> Tree:
    """Collapse internal nodes whose children are identical-prediction leaves.
    Idempotent; never increases the leaf count."""
    if isinstance(t, Leaf):
        return t
    left = canonicalize(t.left)
    right = canonicalize(t.right)
    if isinstance(left, Leaf) and isinstance(right, Leaf) and left.prediction == right.prediction:
        return left
    return Internal(t.feature, left, right)


def _node_to_obj(t: Tree, feature_names: Optional[list[str]]):
    if isinstance(t, Leaf):
        return {"leaf": t.prediction}
    name = feature_names[t.feature] if feature_names else t.feature
    return {
        "feature": name,
        "true": _node_to_obj(t.left, feature_names),
        "false": _node_to_obj(t.right, feature_names),
    }


def _node_from_obj(obj, feature_names: Optional[list[str]], path: str) -> Tree:
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected an object")
    if "leaf" in obj:
        p = obj["leaf"]
        if p not in (0, 1):
            raise SchemaError(path + ".leaf", "leaf prediction must be 0 or 1")
        return Leaf(int(p))
    if "feature" not in obj or "true" not in obj or "false" not in obj:
        raise SchemaError(path, "node needs leaf or feature/true/false")
    f = obj["feature"]
    if isinstance(f, str):
        if feature_names is None or f not in feature_names:
            raise SchemaError(path + ".feature", f"unknown feature name {f!r}")
        f = feature_names.index(f)
    elif not isinstance(f, int) or isinstance(f, bool):
        raise SchemaError(path + ".feature", "feature must be an index or name")
    return Internal(
        int(f),
        _node_from_obj(obj["true"], feature_names, path + ".true"),
        _node_from_obj(obj["false"], feature_names, path + ".false"),
    )


def serialize(t: Tree, feature_names: Optional[list[str]] = None) -> str:
    """Tree to JSON: {"leaf": p} or {"feature": name-or-index, "true": ..., "false": ...}."""
    return json.dumps(_node_to_obj(t, feature_names), sort_keys=True)


def deserialize(text: str, feature_names: Optional[list[str]] = None) -> Tree:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError("", str(e)) from None
    return _node_from_obj(obj, feature_names, "")


def model_document(
    t: Tree,
    obj: Objective,
    lam: float,
    depth_budget: int,
    feature_names: Optional[list[str]] = None,
    extra: Optional[dict] = None,
) -> str:
    """Full model JSON: tree plus objective block and fit configuration."""
    doc = {
        "lambda": lam,
        "depth_budget": depth_budget,
        "objective": {
            "misclassified": obj.misclassified,
            "leaves": obj.leaves,
            "value": obj.value,
        },
        "feature_names": feature_names,
        "tree": _node_to_obj(t, feature_names),
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, sort_keys=True)


def load_model_document(text: str) -> tuple[Tree, dict]:
    obj = json.loads(text)
    names = obj.get("feature_names")
    tree = _node_from_obj(obj["tree"], names, "tree")
    return tree, obj
