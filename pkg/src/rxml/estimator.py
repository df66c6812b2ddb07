"""Estimator facade over the training pipeline with the usual fit/predict
surface, so the model slots into pipelines and model-selection tooling."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .dataio import SparseDataset
from .errors import InvalidInput
from .local_embedding import AdmmConfig
from .metrics import precision_at_k
from .pipeline import TrainConfig, default_hyperparameters, ensemble_scores, predict, train
from .rcg import RcgConfig
from .validation import as_binary_labels, as_csr_rows


class RxmlClassifier(BaseEstimator):
    """Clustered low-rank embedding ensemble for multi-label ranking.

    Parameters left at None resolve to scale-aware defaults at fit time,
    based on the training set shape.

    Parameters
    ----------
    embedding_dim : int or None
        Rank of the per-cluster embeddings.
    n_clusters : int or None
        Partitions per learner.
    n_learners : int or None
        Ensemble size.
    n_neighbors : int or None
        Neighbors kept per row when building Gram targets and when scoring.
    ridge_penalty : float
        Quadratic penalty on the regressor weights.
    l1_penalty : float
        L1 penalty on the predicted embeddings (0 disables it).
    admm_rho : float
        Augmented Lagrangian weight for the regressor solver.
    max_iters : int
        Iteration cap for the per-cluster embedding solver.
    solver : str
        "rcg" (manifold conjugate gradient) or "svp" (projected gradient).
    random_state : int
        Seed controlling clustering and embedding initialization.
    n_threads : int
        Worker threads for independent (learner, cluster) fits.
    top_k : int
        Default ranking depth for predict and score.
    """

    def __init__(
        self,
        embedding_dim=None,
        n_clusters=None,
        n_learners=None,
        n_neighbors=None,
        ridge_penalty=0.1,
        l1_penalty=0.01,
        admm_rho=1.0,
        max_iters=30,
        solver="rcg",
        random_state=0,
        n_threads=1,
        top_k=5,
    ):
        self.embedding_dim = embedding_dim
        self.n_clusters = n_clusters
        self.n_learners = n_learners
        self.n_neighbors = n_neighbors
        self.ridge_penalty = ridge_penalty
        self.l1_penalty = l1_penalty
        self.admm_rho = admm_rho
        self.max_iters = max_iters
        self.solver = solver
        self.random_state = random_state
        self.n_threads = n_threads
        self.top_k = top_k

    def _resolve_config(self, n):
        base = default_hyperparameters(n)
        return TrainConfig(
            n_clusters=self.n_clusters if self.n_clusters is not None else base.n_clusters,
            embedding_dim=(
                self.embedding_dim if self.embedding_dim is not None else base.embedding_dim
            ),
            num_learners=(
                self.n_learners if self.n_learners is not None else base.num_learners
            ),
            n_neighbors=(
                self.n_neighbors if self.n_neighbors is not None else base.n_neighbors
            ),
            embedding_solver=self.solver,
            seed=self.random_state,
            rcg=RcgConfig(max_iters=self.max_iters),
            admm=AdmmConfig(lam=self.ridge_penalty, mu=self.l1_penalty, rho=self.admm_rho),
        )

    def fit(self, X, y):
        X = as_csr_rows(X, name="X")
        y = as_binary_labels(y, name="y")
        ds = SparseDataset(X=X, Y=y, name="fit")
        cfg = self._resolve_config(X.shape[0])
        self.model_ = train(ds, cfg, n_threads=self.n_threads)
        self.report_ = self.model_.report
        self.config_ = cfg
        self.n_features_in_ = X.shape[1]
        self.n_labels_ = y.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError(
                "This RxmlClassifier instance is not fitted yet; call fit first."
            )

    def predict(self, X, k=None):
        """Indices of the k highest-scoring labels per row, shape (m, k)."""
        self._check_fitted()
        k = self.top_k if k is None else k
        indices, _ = predict(self.model_, X, p=k)
        return indices

    def decision_function(self, X):
        """Sparse (m, n_labels_) matrix of ensemble label scores."""
        self._check_fitted()
        return ensemble_scores(self.model_, X)

    def score(self, X, y, k=None):
        """Mean precision at the configured (or given) ranking depth."""
        self._check_fitted()
        k = self.top_k if k is None else k
        if not 1 <= k <= self.n_labels_:
            raise InvalidInput(f"k={k} outside [1, {self.n_labels_}]")
        return float(precision_at_k(self.predict(X, k=k), y, k))
