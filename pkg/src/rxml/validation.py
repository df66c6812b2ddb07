"""Input coercion shared by the training pipeline, estimator and CLI."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInput


def as_csr_rows(x, n_cols=None, name="X"):
    """Coerce a dense or sparse matrix to float64 CSR with sorted indices."""
    if sp.issparse(x):
        out = x.tocsr().astype(np.float64, copy=False)
    else:
        arr = np.asarray(x, dtype=np.float64)
        if arr.ndim != 2:
            raise InvalidInput(f"{name} must be 2-dimensional, got ndim={arr.ndim}")
        out = sp.csr_matrix(arr)
    if out.ndim != 2:
        raise InvalidInput(f"{name} must be 2-dimensional")
    if n_cols is not None and out.shape[1] != n_cols:
        raise InvalidInput(f"{name} has {out.shape[1]} columns, expected {n_cols}")
    if out.nnz and not np.all(np.isfinite(out.data)):
        raise InvalidInput(f"{name} contains non-finite entries")
    out.sort_indices()
    return out


def as_binary_labels(y, n_cols=None, name="Y"):
    """Coerce a label matrix to CSR with data exactly 1.0, dropping zeros."""
    out = as_csr_rows(y, n_cols=n_cols, name=name)
    out.eliminate_zeros()
    if out.nnz and not np.all(np.isin(out.data, (0.0, 1.0))):
        raise InvalidInput(f"{name} must contain only 0/1 entries")
    return out
