"""Lazily factored ambient matrices.

Least-squares gradients and tangent embeddings arise as products of a sparse
or tall factor with a small dense factor. The geometry code only ever needs
A @ M and A.T @ M for skinny M, so these wrappers keep matrices factored
instead of forming them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInput


@dataclass(frozen=True)
class ProductAmbient:
    """The matrix ``left @ right.T`` with left (m, k) and right (n, k).

    Either factor may be a scipy sparse matrix or a dense array (including
    transpose views); products are applied right-to-left so the full m x n
    matrix never materializes.
    """

    left: object
    right: object

    @property
    def shape(self):
        return (self.left.shape[0], self.right.shape[0])

    def dot(self, m):
        return self.left @ (self.right.T @ m)

    def tdot(self, m):
        return self.right @ (self.left.T @ m)

    def to_dense(self):
        right = self.right.toarray() if sp.issparse(self.right) else self.right
        return np.asarray(self.left @ right.T)


@dataclass(frozen=True)
class SumAmbient:
    """An implicit sum of ambient terms sharing one shape."""

    terms: tuple

    @property
    def shape(self):
        return ambient_shape(self.terms[0])

    def dot(self, m):
        out = amb_dot(self.terms[0], m)
        for term in self.terms[1:]:
            out = out + amb_dot(term, m)
        return out

    def tdot(self, m):
        out = amb_tdot(self.terms[0], m)
        for term in self.terms[1:]:
            out = out + amb_tdot(term, m)
        return out

    def to_dense(self):
        out = amb_to_dense(self.terms[0])
        for term in self.terms[1:]:
            out = out + amb_to_dense(term)
        return out


def ambient_sum(*terms):
    shapes = {ambient_shape(t) for t in terms}
    if len(shapes) != 1:
        raise InvalidInput(f"cannot sum ambient terms of shapes {sorted(shapes)}")
    return SumAmbient(tuple(terms))


def ambient_shape(a):
    return tuple(a.shape)


def amb_dot(a, m):
    """a @ m for dense arrays, scipy sparse matrices, or factored values."""
    if isinstance(a, (ProductAmbient, SumAmbient)):
        return a.dot(m)
    return a @ m


def amb_tdot(a, m):
    """a.T @ m for dense arrays, scipy sparse matrices, or factored values."""
    if isinstance(a, (ProductAmbient, SumAmbient)):
        return a.tdot(m)
    return a.T @ m


def amb_to_dense(a):
    if isinstance(a, (ProductAmbient, SumAmbient)):
        return a.to_dense()
    if sp.issparse(a):
        return a.toarray()
    return np.asarray(a, dtype=np.float64)
