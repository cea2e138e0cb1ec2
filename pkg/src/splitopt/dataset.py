"""Binary datasets as column bitsets, CSV ingestion, support-set algebra,
and binarization of continuous features.

Row masks are plain Python ints (bit i set <=> row i present), which makes
intersection, complement and popcount cheap and gives collision-free cache
keys for free.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class DatasetError(Exception):
    pass


class MissingFile(DatasetError):
    pass


class ParseError(DatasetError):
    def __init__(self, row: int, col: int, message: str = ""):
        self.row = row
        self.col = col
        super().__init__(f"row {row}, column {col}: {message or 'cannot parse value'}")


class NonBinaryLabel(DatasetError):
    def __init__(self, row: int):
        self.row = row
        super().__init__(f"label at row {row} is not in {{0, 1}}")


class DegenerateDataset(DatasetError):
    pass


class SingleClassLabels(DatasetError):
    pass


class FeatureOutOfRange(DatasetError):
    pass


class EmptySupport(DatasetError):
    pass


@dataclass
class RawDataset:
    """Named numeric feature columns plus a {0,1} label vector."""

    column_names: list[str]
    columns: list[np.ndarray]  # float64, one per name, all length n
    labels: np.ndarray  # int8 in {0, 1}

    @property
    def n(self) -> int:
        return len(self.labels)

    def __post_init__(self):
        if self.n < 1:
            raise DatasetError("dataset has no rows")
        for c in self.columns:
            if len(c) != self.n:
                raise DatasetError("column length mismatch")
        bad = np.flatnonzero((self.labels != 0) & (self.labels != 1))
        if bad.size:
            raise NonBinaryLabel(int(bad[0]))


def _mask_from_bools(values: np.ndarray) -> int:
    """Pack a boolean vector into an int mask with row 0 at bit 0."""
    packed = np.packbits(values.astype(np.uint8), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


@dataclass(frozen=True)
class SupportSet:
    """A subproblem: the rows reaching a node, with cached label counts."""

    mask: int
    count: int
    pos_count: int
    neg_count: int

    @staticmethod
    def from_mask(ds: "BinaryDataset", mask: int) -> "SupportSet":
        pos = (mask & ds.label_bits).bit_count()
        cnt = mask.bit_count()
        return SupportSet(mask, cnt, pos, cnt - pos)


class BinaryDataset:
    """Binary feature matrix stored as per-feature row bitsets."""

    def __init__(
        self,
        feature_bits: list[int],
        label_bits: int,
        n: int,
        feature_names: list[str],
        provenance: Optional[list[tuple[str, float]]] = None,
    ):
        if len(feature_bits) < 1:
            raise DegenerateDataset("no features")
        if len(set(feature_names)) != len(feature_names):
            raise DatasetError("feature names not unique")
        self.n = n
        self.k = len(feature_bits)
        self.feature_bits = feature_bits
        self.feature_names = feature_names
        # provenance[i] = (original column, threshold) for binarized features
        self.provenance = provenance
        self.full_mask = (1 << n) - 1
        self.label_bits = label_bits
        self.label_not = self.full_mask ^ label_bits
        self.feature_not = [self.full_mask ^ b for b in feature_bits]
        self._conflict_groups: Optional[list[tuple[int, int]]] = None

    @staticmethod
    def from_arrays(X, y, feature_names: Optional[list[str]] = None) -> "BinaryDataset":
        """Build from a 0/1 matrix (n rows, k columns) and a 0/1 label vector."""
        X = np.asarray(X)
        y = np.asarray(y)
        n, k = X.shape
        names = feature_names or [f"f{i}" for i in range(k)]
        bits = [_mask_from_bools(X[:, j] != 0) for j in range(k)]
        return BinaryDataset(bits, _mask_from_bools(y != 0), n, names)

    def full_support(self) -> SupportSet:
        return SupportSet.from_mask(self, self.full_mask)

    def row_pattern(self, i: int) -> tuple:
        return tuple((b >> i) & 1 for b in self.feature_bits)

    def conflict_groups(self) -> list[tuple[int, int]]:
        """(positive mask, negative mask) per group of identical feature rows
        that contains both labels. Used by the equivalent points bound."""
        if self._conflict_groups is None:
            groups: dict[tuple, int] = {}
            for i in range(self.n):
                key = self.row_pattern(i)
                groups[key] = groups.get(key, 0) | (1 << i)
            out = []
            for m in groups.values():
                pos = m & self.label_bits
                neg = m & self.label_not
                if pos and neg:
                    out.append((pos, neg))
            self._conflict_groups = out
        return self._conflict_groups

    def to_matrix(self) -> np.ndarray:
        X = np.zeros((self.n, self.k), dtype=np.int8)
        for j, b in enumerate(self.feature_bits):
            for i in range(self.n):
                X[i, j] = (b >> i) & 1
        return X


def load_csv(path: str, label_column: Optional[str] = None) -> RawDataset:
    """Parse a headered CSV of finite numbers with a {0,1} label column.

    The label column is chosen by name, defaulting to the last column.
    Rows with unparseable or missing cells are rejected with their location.
    """
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as e:
        raise MissingFile(str(e)) from e
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError("empty file") from None
        header = [h.strip() for h in header]
        if label_column is None:
            label_idx = len(header) - 1
        else:
            if label_column not in header:
                raise DatasetError(f"label column {label_column!r} not in header")
            label_idx = header.index(label_column)
        cols: list[list[float]] = [[] for _ in header]
        labels: list[int] = []
        for r, row in enumerate(reader):
            if len(row) != len(header):
                raise ParseError(r, 0, f"expected {len(header)} cells, got {len(row)}")
            for c, cell in enumerate(row):
                cell = cell.strip()
                if c == label_idx:
                    if cell == "0":
                        labels.append(0)
                    elif cell == "1":
                        labels.append(1)
                    else:
                        try:
                            v = float(cell)
                        except ValueError:
                            raise NonBinaryLabel(r) from None
                        if v == 0.0:
                            labels.append(0)
                        elif v == 1.0:
                            labels.append(1)
                        else:
                            raise NonBinaryLabel(r)
                else:
                    try:
                        v = float(cell)
                    except ValueError:
                        raise ParseError(r, c, f"not a number: {cell!r}") from None
                    if not math.isfinite(v):
                        raise ParseError(r, c, f"not finite: {cell!r}")
                    cols[c].append(v)
        if not labels:
            raise DatasetError("no data rows")
    names = [h for i, h in enumerate(header) if i != label_idx]
    columns = [np.asarray(cols[i], dtype=np.float64) for i in range(len(header)) if i != label_idx]
    return RawDataset(names, columns, np.asarray(labels, dtype=np.int8))


@dataclass
class Binarizer:
    """Binarization scheme: produces indicator features [value <= threshold].

    method is one of "quantile" (params: q), "exhaustive", or
    "threshold_guess" (params: n_estimators, learning_rate, max_thresholds).
    fit() fills thresholds per original column, strictly increasing.
    """

    method: str
    params: dict = field(default_factory=dict)
    thresholds: Optional[dict[str, list[float]]] = None

    def fit(self, raw: RawDataset, seed: int = 0) -> "Binarizer":
        if self.method == "exhaustive":
            thresholds = {
                name: _midpoint_thresholds(col)
                for name, col in zip(raw.column_names, raw.columns)
            }
        elif self.method == "quantile":
            q = int(self.params.get("q", 3))
            if q < 1:
                raise DatasetError("quantile count must be >= 1")
            thresholds = {
                name: _quantile_thresholds(col, q)
                for name, col in zip(raw.column_names, raw.columns)
            }
        elif self.method == "threshold_guess":
            thresholds = _threshold_guess(raw, self.params, seed)
        else:
            raise DatasetError(f"unknown binarization method {self.method!r}")
        # fix the feature set here: a threshold constant on the fit data is
        # dropped for good, so transform() emits identical columns for any
        # split of the same source
        kept: dict[str, list[float]] = {}
        total = 0
        for name, col in zip(raw.column_names, raw.columns):
            keep = []
            for t in thresholds.get(name, []):
                vec = col <= t
                if vec.all() or not vec.any():
                    continue
                keep.append(t)
            kept[name] = keep
            total += len(keep)
        if total == 0:
            raise DegenerateDataset("binarization produced no non-constant features")
        self.thresholds = kept
        return self

    def transform(self, raw: RawDataset) -> BinaryDataset:
        if self.thresholds is None:
            raise DatasetError("binarizer not fitted")
        bits: list[int] = []
        names: list[str] = []
        provenance: list[tuple[str, float]] = []
        for name, col in zip(raw.column_names, raw.columns):
            for t in self.thresholds.get(name, []):
                bits.append(_mask_from_bools(col <= t))
                names.append(f"{name}<={t:g}")
                provenance.append((name, t))
        if not bits:
            raise DegenerateDataset("binarizer holds no thresholds for these columns")
        return BinaryDataset(bits, _mask_from_bools(raw.labels != 0), raw.n, names, provenance)

    def to_json(self) -> str:
        return json.dumps(
            {"method": self.method, "params": self.params, "thresholds": self.thresholds},
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "Binarizer":
        obj = json.loads(text)
        return Binarizer(obj["method"], obj.get("params", {}), obj.get("thresholds"))


def binarize(raw: RawDataset, spec: Binarizer, seed: int = 0) -> BinaryDataset:
    """Fit the scheme on raw data and return the binary dataset."""
    return spec.fit(raw, seed=seed).transform(raw)


def _midpoint_thresholds(col: np.ndarray) -> list[float]:
    vals = np.unique(col)
    if len(vals) < 2:
        return []
    return [float((a + b) / 2.0) for a, b in zip(vals[:-1], vals[1:])]


def _quantile_thresholds(col: np.ndarray, q: int) -> list[float]:
    probs = [(i + 1) / (q + 1) for i in range(q)]
    cand = np.quantile(col, probs)
    out: list[float] = []
    for t in cand:
        t = float(t)
        if not out or t > out[-1]:
            out.append(t)
    # drop thresholds at or above the column max: indicator would be constant
    return [t for t in out if t < float(col.max())]


def _threshold_guess(raw: RawDataset, params: dict, seed: int) -> dict[str, list[float]]:
    """Harvest split thresholds from a boosted ensemble of depth-1 stumps,
    then greedily drop the least important ones while the ensemble's
    training predictions stay unchanged.

    Importance of a threshold is the summed impurity decrease of the stumps
    that use it (ties broken by column order then threshold)."""
    from sklearn.ensemble import GradientBoostingClassifier

    y = np.asarray(raw.labels, dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise SingleClassLabels("threshold guessing needs both label classes")
    if raw.n < 2:
        raise DatasetError("threshold guessing needs at least 2 rows")
    n_estimators = int(params.get("n_estimators", 40))
    learning_rate = float(params.get("learning_rate", 0.1))
    max_thresholds = params.get("max_thresholds")
    X = np.column_stack(raw.columns)
    clf = GradientBoostingClassifier(
        n_estimators=n_estimators,
        learning_rate=learning_rate,
        max_depth=1,
        random_state=seed,
    )
    clf.fit(X, y)

    # Per-stump (column, threshold, impurity decrease, contribution vector)
    stumps = []
    for est_row in clf.estimators_:
        tree = est_row[0].tree_
        if tree.node_count < 3:
            continue  # degenerate stump, no split
        feat = int(tree.feature[0])
        thr = float(tree.threshold[0])
        n_root = tree.weighted_n_node_samples[0]
        gain = tree.impurity[0] - (
            tree.weighted_n_node_samples[1] / n_root * tree.impurity[1]
            + tree.weighted_n_node_samples[2] / n_root * tree.impurity[2]
        )
        contrib = learning_rate * est_row[0].predict(X)
        stumps.append((feat, thr, float(gain), contrib))
    if not stumps:
        raise DegenerateDataset("boosted ensemble produced no splits")

    importance: dict[tuple[int, float], float] = {}
    contribs: dict[tuple[int, float], np.ndarray] = {}
    for feat, thr, gain, contrib in stumps:
        key = (feat, thr)
        importance[key] = importance.get(key, 0.0) + gain
        if key in contribs:
            contribs[key] = contribs[key] + contrib
        else:
            contribs[key] = contrib.copy()

    base = clf.decision_function(X)
    ref_pred = base > 0
    keys = sorted(importance, key=lambda kt: (importance[kt], kt[0], kt[1]))
    score = base.copy()
    kept = set(keys)
    for key in keys:  # ascending importance
        if len(kept) == 1:
            break
        trial = score - contribs[key]
        if np.array_equal(trial > 0, ref_pred):
            score = trial
            kept.discard(key)
    if max_thresholds is not None and len(kept) > int(max_thresholds):
        ranked = sorted(kept, key=lambda kt: (-importance[kt], kt[0], kt[1]))
        kept = set(ranked[: int(max_thresholds)])

    out: dict[str, list[float]] = {name: [] for name in raw.column_names}
    for feat, thr in sorted(kept):
        out[raw.column_names[feat]].append(thr)
    for name in out:
        out[name] = sorted(set(out[name]))
    return out


def split_support(ds: BinaryDataset, s: SupportSet, f: int) -> tuple[SupportSet, SupportSet]:
    """Partition s by feature f: (rows with f=1, rows with f=0)."""
    if f < 0 or f >= ds.k:
        raise FeatureOutOfRange(f"feature {f} out of range [0, {ds.k})")
    left = s.mask & ds.feature_bits[f]
    right = s.mask & ds.feature_not[f]
    return SupportSet.from_mask(ds, left), SupportSet.from_mask(ds, right)


def canonical_key(s: SupportSet) -> int:
    """Cache key for a support set. The mask itself: equal keys <=> equal masks."""
    return s.mask
