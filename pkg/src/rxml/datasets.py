"""Small bundled dataset for demos, CLI smoke runs and the self-test.

Four groups of points, each with its own block of three signature features
(plus two low-amplitude noise features shared by everyone) and its own block
of five labels. Points in a group share all five group labels, so a correct
model ranks those labels on top for held-out group members.
"""

from __future__ import annotations

from importlib import resources

import numpy as np
import scipy.sparse as sp

from .dataio import SparseDataset, load_xmc_file
from .errors import InvalidInput

N_GROUPS = 4
SIGNATURE_FEATURES = 3
NOISE_FEATURES = 2
LABELS_PER_GROUP = 5


def generate_toy_dataset(n_train_per_group=20, n_test_per_group=5, seed=7):
    """Deterministic (train, test) pair of SparseDatasets."""
    if n_train_per_group < 1 or n_test_per_group < 1:
        raise InvalidInput("per-group counts must be positive")
    rng = np.random.default_rng(seed)
    d = N_GROUPS * SIGNATURE_FEATURES + NOISE_FEATURES
    l = N_GROUPS * LABELS_PER_GROUP

    def make(per_group, tag):
        xs = np.zeros((N_GROUPS * per_group, d))
        ys = np.zeros((N_GROUPS * per_group, l))
        row = 0
        for g in range(N_GROUPS):
            for _ in range(per_group):
                lo = g * SIGNATURE_FEATURES
                xs[row, lo : lo + SIGNATURE_FEATURES] = 1.0 + 0.05 * rng.uniform(
                    -1.0, 1.0, SIGNATURE_FEATURES
                )
                xs[row, d - NOISE_FEATURES :] = 0.01 * rng.uniform(
                    -1.0, 1.0, NOISE_FEATURES
                )
                ys[row, g * LABELS_PER_GROUP : (g + 1) * LABELS_PER_GROUP] = 1.0
                row += 1
        return SparseDataset(X=sp.csr_matrix(xs), Y=sp.csr_matrix(ys), name=tag)

    return make(n_train_per_group, "toy_train"), make(n_test_per_group, "toy_test")


def toy_path(split):
    """Filesystem path of the bundled toy split ("train" or "test")."""
    if split not in ("train", "test"):
        raise InvalidInput(f"split must be 'train' or 'test', got {split!r}")
    return resources.files("rxml").joinpath(f"data/toy_{split}.txt")


def load_toy(split):
    """Load the bundled toy split as a SparseDataset."""
    return load_xmc_file(toy_path(split))
