import numpy as np
import pytest

from splitopt.dataset import BinaryDataset
from splitopt.oracle import xor_dataset


@pytest.fixture
def xor():
    return xor_dataset()


@pytest.fixture
def tiny_pure():
    # all labels 1: any sensible fit is a single leaf
    X = np.array([[0, 1], [1, 0], [1, 1], [0, 0]])
    y = np.array([1, 1, 1, 1])
    return BinaryDataset.from_arrays(X, y)
