"""Ranking metrics for multi-label prediction: precision@k and nDCG@k.

Both metrics average over all evaluation rows, including rows whose ground
truth is empty; such rows contribute 0 (they are counted, not skipped, and
the report says how many there were so comparisons against conventions that
skip them can be reconciled). Rankings shorter than the requested cutoff are
padded with the lowest-index labels not already ranked, matching how
predictions break score ties.
"""

from __future__ import annotations

import io
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput
from .validation import as_binary_labels

DEFAULT_CUTOFFS = (1, 3, 5)


def _as_ranking_matrix(pred):
    pred = np.asarray(pred, dtype=np.int64)
    if pred.ndim == 1:
        pred = pred[None, :]
    if pred.ndim != 2:
        raise InvalidInput(f"pred must be 1- or 2-dimensional, got ndim={pred.ndim}")
    return pred


def _as_truth_matrix(y):
    import scipy.sparse as sp

    if not sp.issparse(y):
        arr = np.asarray(y)
        if arr.ndim == 1:
            arr = arr[None, :]
        y = arr
    return as_binary_labels(y, name="truth")


def _check_ranking(pred, n_labels, k):
    if k < 1:
        raise InvalidInput(f"k must be >= 1, got {k}")
    if k > n_labels:
        raise InvalidInput(f"k={k} exceeds the label count {n_labels}")
    if pred.size and (pred.min() < 0 or pred.max() >= n_labels):
        raise InvalidInput(f"pred contains label indices outside [0, {n_labels})")


def pad_ranking(row, k, n_labels):
    """Extend a ranked row to length k with the lowest unused label indices."""
    row = np.asarray(row, dtype=np.int64)
    if row.size >= k:
        return row[:k]
    used = set(row.tolist())
    pad = []
    cand = 0
    while len(pad) < k - row.size:
        if cand not in used:
            pad.append(cand)
        cand += 1
    return np.concatenate([row, np.asarray(pad, dtype=np.int64)])


def _truth_sets(y):
    return [set(y.indices[y.indptr[i] : y.indptr[i + 1]].tolist()) for i in range(y.shape[0])]


def precision_at_k(pred, truth, k):
    """Mean over rows of |top-k predictions that are true labels| / k.

    pred holds ranked label indices, one row per sample (a single 1-d
    ranking and a single truth row are accepted); truth is a binary label
    matrix. Rows with empty truth score 0 and stay in the average.
    """
    y = _as_truth_matrix(truth)
    pred = _as_ranking_matrix(pred)
    _check_ranking(pred, y.shape[1], k)
    if pred.shape[0] != y.shape[0]:
        raise InvalidInput(f"pred has {pred.shape[0]} rows, truth has {y.shape[0]}")
    total = 0.0
    for i, truth_set in enumerate(_truth_sets(y)):
        row = pad_ranking(pred[i], k, y.shape[1])
        total += sum(1 for p in row.tolist() if p in truth_set) / k
    return total / max(y.shape[0], 1)


def ndcg_at_k(pred, truth, k):
    """Mean over rows of DCG@k normalized by the ideal DCG.

    DCG places gain 1 at each ranked position holding a true label, with the
    usual 1/log2(position + 1) discount; the ideal puts all min(k, #true)
    gains first. Rows with no true labels score 0.
    """
    y = _as_truth_matrix(truth)
    pred = _as_ranking_matrix(pred)
    _check_ranking(pred, y.shape[1], k)
    if pred.shape[0] != y.shape[0]:
        raise InvalidInput(f"pred has {pred.shape[0]} rows, truth has {y.shape[0]}")
    discounts = 1.0 / np.log2(np.arange(2, k + 2, dtype=np.float64))
    total = 0.0
    for i, truth_set in enumerate(_truth_sets(y)):
        if not truth_set:
            continue
        row = pad_ranking(pred[i], k, y.shape[1])
        gains = np.fromiter((1.0 if p in truth_set else 0.0 for p in row.tolist()), np.float64, k)
        ideal = discounts[: min(k, len(truth_set))].sum()
        total += float(gains @ discounts) / ideal
    return total / max(y.shape[0], 1)


@dataclass
class EvalReport:
    """Metric values keyed by (metric name, cutoff), plus row counts.

    ``train_seconds`` is carried over from the model's training report when
    available; ``eval_seconds`` covers prediction plus metric computation.
    Both are diagnostics and are excluded from the CSV rendering, which
    stays byte-deterministic.
    """

    n_rows: int
    n_empty_truth: int
    values: dict = field(default_factory=dict)
    train_seconds: float = float("nan")
    eval_seconds: float = float("nan")

    def to_text(self):
        cutoffs = sorted({k for _, k in self.values})
        width = max(len("metric"), 9)
        lines = [
            f"rows={self.n_rows} empty_truth={self.n_empty_truth}",
            "metric".ljust(width) + "".join(f"  @{k:<8d}" for k in cutoffs),
        ]
        for name in ("precision", "ndcg"):
            cells = "".join(f"  {self.values[(name, k)]:<9.4f}" for k in cutoffs)
            lines.append(name.ljust(width) + cells)
        lines.append(
            f"train_seconds={self.train_seconds:.3f} eval_seconds={self.eval_seconds:.3f}"
        )
        return "\n".join(lines)

    def to_csv(self):
        buf = io.StringIO()
        buf.write("metric,k,value\n")
        for (name, k) in sorted(self.values, key=lambda t: (t[0], t[1])):
            buf.write(f"{name},{k},{self.values[(name, k)]:.10g}\n")
        return buf.getvalue()


def rank_metrics(pred, truth, ks=DEFAULT_CUTOFFS):
    """Precision@k and nDCG@k of precomputed rankings at every cutoff."""
    y = _as_truth_matrix(truth)
    if not ks:
        raise InvalidInput("ks must be non-empty")
    values = {}
    for k in ks:
        values[("precision", int(k))] = precision_at_k(pred, y, int(k))
        values[("ndcg", int(k))] = ndcg_at_k(pred, y, int(k))
    if ("precision", 1) in values:
        # At a single position both metrics reduce to the same hit indicator.
        assert values[("ndcg", 1)] == values[("precision", 1)]
    empty = int(np.sum(np.diff(y.indptr) == 0))
    return EvalReport(n_rows=y.shape[0], n_empty_truth=empty, values=values)


def evaluate(model, test, ks=DEFAULT_CUTOFFS):
    """Score a trained ensemble on a labeled SparseDataset.

    Predicts once at the deepest cutoff and reads every k off that ranking.
    Deterministic given the model and data.
    """
    from .pipeline import predict  # deferred: pipeline imports this module

    if test.d != model.d:
        raise InvalidInput(f"test features have d={test.d}, model expects {model.d}")
    if test.l != model.l:
        raise InvalidInput(f"test labels have l={test.l}, model expects {model.l}")
    start = time.perf_counter()
    indices, _ = predict(model, test.X, p=max(ks))
    report = rank_metrics(indices, test.Y, ks)
    report.eval_seconds = time.perf_counter() - start
    if model.report is not None:
        report.train_seconds = model.report.wall_seconds
    return report
