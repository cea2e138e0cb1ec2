"""splitopt: sparse decision-tree optimization.

Lookahead-bounded branch-and-bound with dynamic programming, a recursive
polynomial-time variant, and scalable near-optimal tree-set approximation
with exact tree indexing, over bitset-encoded binary datasets.
"""

from .dataset import (
    Binarizer,
    BinaryDataset,
    RawDataset,
    SupportSet,
    binarize,
    canonical_key,
    load_csv,
    split_support,
)
from .greedy import SplitScore, best_split, greedy_fit, weighted_child_entropy
from .rashomon import (
    BudgetExceeded,
    PrefixForest,
    RashomonConfig,
    TreeSet,
    enumerate_rashomon,
    enumerate_subtree_counts,
    load_forest,
    resplit,
    rset_count,
    save_forest,
    tree_at_index,
)
from .solver import (
    BoundsPolicy,
    SolveResult,
    SolverConfig,
    equivalent_points_bound,
    extract_tree,
    lookahead_bounds,
    solve,
    standard_bounds,
)
from .split_algos import FitRequest, licketysplit_fit, renormalize_lambda, split_fit
from .trees import (
    Internal,
    Leaf,
    Objective,
    PairScale,
    Tree,
    canonicalize,
    depth,
    deserialize,
    num_leaves,
    objective,
    predict,
    serialize,
)

__version__ = "0.1.0"

__all__ = [
    "Binarizer",
    "BinaryDataset",
    "BoundsPolicy",
    "BudgetExceeded",
    "FitRequest",
    "Internal",
    "Leaf",
    "Objective",
    "PairScale",
    "PrefixForest",
    "RashomonConfig",
    "RawDataset",
    "SolveResult",
    "SolverConfig",
    "SplitScore",
    "SupportSet",
    "Tree",
    "TreeSet",
    "best_split",
    "binarize",
    "canonical_key",
    "canonicalize",
    "depth",
    "deserialize",
    "enumerate_rashomon",
    "enumerate_subtree_counts",
    "equivalent_points_bound",
    "extract_tree",
    "greedy_fit",
    "licketysplit_fit",
    "load_csv",
    "load_forest",
    "lookahead_bounds",
    "num_leaves",
    "objective",
    "predict",
    "renormalize_lambda",
    "resplit",
    "rset_count",
    "save_forest",
    "serialize",
    "solve",
    "split_fit",
    "split_support",
    "standard_bounds",
    "tree_at_index",
    "weighted_child_entropy",
]
