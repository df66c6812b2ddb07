"""Clustered ensemble training and prediction.

Each learner partitions the training points by k-means on the feature rows,
then fits every cluster independently: build the neighbor pattern from label
inner products, fit a low-rank embedding to the masked Gram targets, train a
sparse linear regressor onto the embedding, and store the regressed member
embeddings with the member label rows. Prediction routes a query to its
nearest centroid per learner, embeds it with the cluster regressor, finds
the closest member embeddings, and sums their label rows; learner scores
are averaged and the top labels returned.
"""

from __future__ import annotations

import dataclasses
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInput
from .local_embedding import (
    AdmmConfig,
    build_neighbor_mask,
    solve_embedding_rcg,
    solve_embedding_svp,
    train_regressor_admm,
)
from .metrics import pad_ranking
from .rcg import RcgConfig
from .validation import as_binary_labels, as_csr_rows

_SOLVERS = ("rcg", "svp")
_DIST_CHUNK_ENTRIES = 8_000_000


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for the full training pipeline.

    ``embedding_dim`` is the rank of the per-cluster embeddings,
    ``n_neighbors`` the per-row neighbor budget for the Gram targets,
    ``n_clusters`` the partitions per learner, and ``admm`` carries the
    regressor weights (ridge, L1, splitting).
    """

    n_clusters: int
    embedding_dim: int
    num_learners: int
    n_neighbors: int = 25
    embedding_solver: str = "rcg"
    seed: int = 0
    rcg: RcgConfig = field(default_factory=RcgConfig)
    admm: AdmmConfig = field(default_factory=AdmmConfig)

    def __post_init__(self):
        for name in ("n_clusters", "embedding_dim", "num_learners", "n_neighbors"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise InvalidInput(f"{name} must be a positive integer, got {value!r}")
        if self.embedding_solver not in _SOLVERS:
            raise InvalidInput(
                f"embedding_solver must be one of {_SOLVERS}, got {self.embedding_solver!r}"
            )
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise InvalidInput(f"seed must be a nonnegative integer, got {self.seed!r}")

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data["rcg"] = RcgConfig(**data.get("rcg", {}))
        data["admm"] = AdmmConfig(**data.get("admm", {}))
        return cls(**data)


def default_hyperparameters(n):
    """Scale-aware defaults driven by the training-set size n.

    Cluster count grows as n / 6000; the embedding rank is 100 below 1e5
    points and 50 above; the ensemble uses 5, 10 or 20 learners by scale.
    """
    n = int(n)
    if n < 1:
        raise InvalidInput("n must be positive")
    if n < 20_000:
        learners = 5
    elif n < 100_000:
        learners = 10
    else:
        learners = 20
    return TrainConfig(
        n_clusters=max(1, n // 6000),
        embedding_dim=100 if n < 100_000 else 50,
        num_learners=learners,
        n_neighbors=25,
        rcg=RcgConfig(max_iters=30),
        admm=AdmmConfig(),
    )


@dataclass(eq=False)
class ClusterModel:
    """One trained cluster: centroid, regressor, member embeddings, labels."""

    centroid: np.ndarray
    V: np.ndarray
    Z: np.ndarray
    member_labels: sp.csr_matrix

    def __eq__(self, other):
        if not isinstance(other, ClusterModel):
            return NotImplemented
        a, b = self.member_labels, other.member_labels
        return (
            np.array_equal(self.centroid, other.centroid)
            and np.array_equal(self.V, other.V)
            and np.array_equal(self.Z, other.Z)
            and a.shape == b.shape
            and np.array_equal(a.indptr, b.indptr)
            and np.array_equal(a.indices, b.indices)
            and np.array_equal(a.data, b.data)
        )


@dataclass(frozen=True)
class ClusterTrainRecord:
    """Diagnostics for one (learner, cluster) fit."""

    learner: int
    cluster: int
    size: int
    rank: int
    objective: float
    target_norm_sq: float
    iterations: int
    objectives: tuple


@dataclass
class TrainReport:
    """Per-cluster training diagnostics plus total wall time."""

    records: list
    notes: list
    wall_seconds: float

    def summary_lines(self):
        return [
            f"learner={r.learner} cluster={r.cluster} size={r.size} rank={r.rank} "
            f"objective={r.objective:.6g} target={r.target_norm_sq:.6g} "
            f"iterations={r.iterations}"
            for r in self.records
        ]

    def trace_lines(self):
        """Deterministic per-cluster objective traces (no timing)."""
        lines = list(self.notes)
        for r in self.records:
            trail = ",".join(f"{v:.10g}" for v in r.objectives)
            lines.append(
                f"learner={r.learner} cluster={r.cluster} size={r.size} rank={r.rank} "
                f"target={r.target_norm_sq:.10g} objectives={trail}"
            )
        return lines


@dataclass(eq=False)
class EnsembleModel:
    """All learners' cluster models plus the configuration that built them.

    ``report`` is a training-time diagnostic (may be None on loaded models);
    it takes no part in equality and is not persisted.
    """

    config: TrainConfig
    d: int
    l: int
    learners: list
    report: TrainReport = None

    def __eq__(self, other):
        if not isinstance(other, EnsembleModel):
            return NotImplemented
        return (
            self.config == other.config
            and self.d == other.d
            and self.l == other.l
            and len(self.learners) == len(other.learners)
            and all(
                len(a) == len(b) and all(ca == cb for ca, cb in zip(a, b))
                for a, b in zip(self.learners, other.learners)
            )
        )


def _sq_dist_to_dense(x, row_sq, points):
    """Squared Euclidean distances from sparse rows to dense points."""
    cross = np.asarray(x @ points.T)
    out = row_sq[:, None] - 2.0 * cross + np.einsum("ij,ij->i", points, points)[None, :]
    np.maximum(out, 0.0, out=out)
    return out


def kmeans_partition(x, c, seed, max_iters=100):
    """Cluster sparse rows with seeded greedy init and Lloyd refinement.

    Empty clusters are repaired each round by stealing the point farthest
    from its centroid out of the currently largest cluster. Returns
    (assignments, centroids) with centroids equal to member means.
    """
    x = sp.csr_matrix(x)
    n = x.shape[0]
    if not 1 <= c <= n:
        raise InvalidInput(f"cluster count {c} outside [1, n={n}]")
    rng = np.random.default_rng(seed)
    row_sq = np.asarray(x.multiply(x).sum(axis=1)).ravel()

    centroids = np.empty((c, x.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = x[first].toarray().ravel()
    d2 = _sq_dist_to_dense(x, row_sq, centroids[:1]).ravel()
    for j in range(1, c):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        centroids[j] = x[idx].toarray().ravel()
        d2 = np.minimum(d2, _sq_dist_to_dense(x, row_sq, centroids[j : j + 1]).ravel())

    def member_means(assign):
        means = np.empty((c, x.shape[1]))
        for j in range(c):
            means[j] = np.asarray(x[assign == j].mean(axis=0)).ravel()
        return means

    prev = None
    assign = None
    for _ in range(max_iters):
        dist = _sq_dist_to_dense(x, row_sq, centroids)
        assign = np.argmin(dist, axis=1)
        sizes = np.bincount(assign, minlength=c)
        for j in np.flatnonzero(sizes == 0):
            donor = int(np.argmax(sizes))
            members = np.flatnonzero(assign == donor)
            stolen = members[int(np.argmax(dist[members, donor]))]
            assign[stolen] = j
            sizes[donor] -= 1
            sizes[j] += 1
        if prev is not None and np.array_equal(assign, prev):
            break
        prev = assign
        centroids = member_means(assign)
    return assign, member_means(assign)


def _fit_cluster(x, y, cfg, learner, cluster, members, centroid):
    x_c = x[members]
    y_c = y[members]
    n_c = members.size
    nbar = max(1, min(cfg.n_neighbors, n_c - 1))
    rank = min(cfg.embedding_dim, max(1, n_c - 1))
    note = None
    if rank < cfg.embedding_dim:
        note = (
            f"learner={learner} cluster={cluster}: only {n_c} members, "
            f"embedding rank reduced {cfg.embedding_dim} -> {rank}"
        )
    mask = build_neighbor_mask(y_c, nbar)
    if cfg.embedding_solver == "rcg":
        seed = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(learner, cluster))
        result = solve_embedding_rcg(mask, rank, cfg.rcg, seed=seed)
    else:
        result = solve_embedding_svp(mask, rank, max_iters=cfg.rcg.max_iters)
    v = train_regressor_admm(x_c, result.Z, cfg.admm)
    z = np.asarray(x_c @ v.T)
    record = ClusterTrainRecord(
        learner=learner,
        cluster=cluster,
        size=int(n_c),
        rank=int(rank),
        objective=float(result.final_objective),
        target_norm_sq=float(mask.target_norm_sq()),
        iterations=len(result.trace),
        objectives=tuple(result.trace.objectives) + (float(result.final_objective),),
    )
    model = ClusterModel(centroid=centroid, V=v, Z=z, member_labels=y_c)
    return model, record, note


def train(dataset, cfg=None, n_threads=1):
    """Train the clustered ensemble on a SparseDataset.

    Every learner re-partitions the data with its own derived seed;
    (learner, cluster) tasks are independent and run on n_threads workers.
    The result is deterministic for a fixed dataset, config and seed and
    carries a TrainReport on its ``report`` attribute. Clusters smaller
    than embedding_dim + 1 train at reduced rank, with a note recorded in
    the report.
    """
    x = as_csr_rows(dataset.X, name="X")
    y = as_binary_labels(dataset.Y, name="Y")
    if x.shape[0] != y.shape[0]:
        raise InvalidInput(f"X has {x.shape[0]} rows, Y has {y.shape[0]}")
    n, d = x.shape
    l = y.shape[1]
    if n < 1:
        raise InvalidInput("training set is empty")
    if cfg is None:
        cfg = default_hyperparameters(n)
    if cfg.n_clusters > n:
        raise InvalidInput(f"n_clusters={cfg.n_clusters} exceeds the row count {n}")
    if n_threads < 1:
        raise InvalidInput(f"n_threads must be >= 1, got {n_threads}")

    start = time.perf_counter()
    tasks = []
    for li in range(cfg.num_learners):
        seed = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(li,))
        assign, centroids = kmeans_partition(x, cfg.n_clusters, seed)
        for ci in range(cfg.n_clusters):
            members = np.flatnonzero(assign == ci)
            tasks.append((li, ci, members, centroids[ci]))

    results = {}
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            futures = {
                (li, ci): pool.submit(_fit_cluster, x, y, cfg, li, ci, members, centroid)
                for li, ci, members, centroid in tasks
            }
            for key, fut in futures.items():
                results[key] = fut.result()
    else:
        for li, ci, members, centroid in tasks:
            results[(li, ci)] = _fit_cluster(x, y, cfg, li, ci, members, centroid)

    learners = [
        [results[(li, ci)][0] for ci in range(cfg.n_clusters)]
        for li in range(cfg.num_learners)
    ]
    ordered = [results[key] for key in sorted(results)]
    report = TrainReport(
        records=[rec for _, rec, _ in ordered],
        notes=[note for _, _, note in ordered if note],
        wall_seconds=time.perf_counter() - start,
    )
    return EnsembleModel(config=cfg, d=d, l=l, learners=learners, report=report)


def _cluster_scores(x_rows, cm, n_neighbors):
    """Summed neighbor label rows for queries routed to one cluster."""
    z_members = cm.Z
    n_c = z_members.shape[0]
    nbar = max(1, min(n_neighbors, n_c))
    member_sq = np.einsum("ij,ij->i", z_members, z_members)
    m = x_rows.shape[0]
    chunk = max(1, _DIST_CHUNK_ENTRIES // max(n_c, 1))
    pieces = []
    for lo in range(0, m, chunk):
        zq = np.asarray(x_rows[lo : lo + chunk] @ cm.V.T)
        d2 = (
            np.einsum("ij,ij->i", zq, zq)[:, None]
            - 2.0 * (zq @ z_members.T)
            + member_sq[None, :]
        )
        neigh = np.argsort(d2, axis=1, kind="stable")[:, :nbar]
        rows = np.repeat(np.arange(zq.shape[0]), nbar)
        sel = sp.csr_matrix(
            (np.ones(rows.size), (rows, neigh.ravel())), shape=(zq.shape[0], n_c)
        )
        pieces.append((lo, (sel @ cm.member_labels).tocoo()))
    return pieces


def ensemble_scores(model, x, n_neighbors=None):
    """Mean over learners of the summed neighbor label rows, as CSR."""
    x = as_csr_rows(x, n_cols=model.d, name="X")
    nbar = model.config.n_neighbors if n_neighbors is None else int(n_neighbors)
    if nbar < 1:
        raise InvalidInput(f"n_neighbors must be >= 1, got {nbar}")
    m = x.shape[0]
    row_sq = np.asarray(x.multiply(x).sum(axis=1)).ravel()
    acc_rows, acc_cols, acc_data = [], [], []
    for clusters in model.learners:
        centroids = np.stack([cm.centroid for cm in clusters])
        assign = np.argmin(_sq_dist_to_dense(x, row_sq, centroids), axis=1)
        for ci, cm in enumerate(clusters):
            qs = np.flatnonzero(assign == ci)
            if qs.size == 0:
                continue
            for lo, piece in _cluster_scores(x[qs], cm, nbar):
                acc_rows.append(qs[lo + piece.row])
                acc_cols.append(piece.col)
                acc_data.append(piece.data)
    if acc_rows:
        total = sp.coo_matrix(
            (np.concatenate(acc_data), (np.concatenate(acc_rows), np.concatenate(acc_cols))),
            shape=(m, model.l),
        ).tocsr()
    else:
        total = sp.csr_matrix((m, model.l))
    total.sum_duplicates()
    total = total * (1.0 / len(model.learners))
    total.sort_indices()
    return total


def _top_k_rows(scores, k):
    m, l = scores.shape
    inds = np.empty((m, k), dtype=np.int64)
    vals = np.zeros((m, k))
    for i in range(m):
        lo, hi = scores.indptr[i], scores.indptr[i + 1]
        idx = scores.indices[lo:hi]
        val = scores.data[lo:hi]
        order = np.lexsort((idx, -val))[:k]
        inds[i] = pad_ranking(idx[order], k, l)
        vals[i, : order.size] = val[order]
    return inds, vals


def predict(model, x, n_neighbors=None, p=5):
    """Top-p label indices and scores for query features x.

    x may be a single feature vector (1-d array or one sparse row), giving
    1-d outputs of length p, or an (m, d) matrix, giving (m, p) outputs.
    n_neighbors defaults to the trained configuration. Score ties rank the
    lower label index first; rows with fewer than p scored labels are padded
    with the lowest-index unscored labels at score 0.
    """
    single = not sp.issparse(x) and np.asarray(x).ndim == 1
    if single:
        x = np.asarray(x, dtype=np.float64)[None, :]
    if not 1 <= p <= model.l:
        raise InvalidInput(f"p={p} outside [1, {model.l}]")
    inds, vals = _top_k_rows(ensemble_scores(model, x, n_neighbors), p)
    if single:
        return inds[0], vals[0]
    return inds, vals
