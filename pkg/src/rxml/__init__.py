"""Riemannian low-rank optimization with a clustered multi-label ranking
engine built on top of it.

The package splits into three layers:

- geometry and solvers: fixed-rank and PSD fixed-rank manifolds, a manifold
  conjugate-gradient loop, a projected-gradient baseline, and an ADMM
  regressor;
- the learning pipeline: neighbor-masked Gram fitting per cluster, ensembled
  over seeded partitions, with ranking metrics;
- plumbing: dataset text format, binary model persistence, an estimator
  facade, and the ``rxml`` command line.
"""

from .ambient import ProductAmbient, SumAmbient, ambient_sum
from .dataio import (
    FORMAT_VERSION,
    SparseDataset,
    load_model,
    load_xmc_file,
    save_model,
    save_xmc_file,
)
from .datasets import generate_toy_dataset, load_toy, toy_path
from .errors import (
    CorruptModel,
    DivergenceError,
    InvalidInput,
    ParseError,
    RankDeficient,
    RankDropError,
    RxmlError,
    VersionError,
)
from .estimator import RxmlClassifier
from .fixed_rank import FixedRankManifold, FixedRankPoint, FixedRankTangent
from .global_model import GlobalProblem, global_closed_form
from .linalg import ThinSVD, thin_svd, truncated_sym_eig
from .local_embedding import (
    AdmmConfig,
    EmbeddingResult,
    NeighborMask,
    build_neighbor_mask,
    solve_embedding_rcg,
    solve_embedding_svp,
    train_regressor_admm,
)
from .metrics import EvalReport, evaluate, ndcg_at_k, precision_at_k
from .pipeline import (
    ClusterModel,
    EnsembleModel,
    TrainConfig,
    TrainReport,
    default_hyperparameters,
    ensemble_scores,
    kmeans_partition,
    predict,
    train,
)
from .psd_fixed_rank import HorizontalVector, PsdFixedRankManifold, PsdPoint
from .rcg import (
    IterationRecord,
    Problem,
    RcgConfig,
    RcgTrace,
    TerminationReason,
    rcg_minimize,
    regularized_objective,
)
from .selftest import run_selftest

__version__ = "0.1.0"

__all__ = [
    "AdmmConfig",
    "ClusterModel",
    "CorruptModel",
    "DivergenceError",
    "EmbeddingResult",
    "EnsembleModel",
    "EvalReport",
    "FORMAT_VERSION",
    "FixedRankManifold",
    "FixedRankPoint",
    "FixedRankTangent",
    "GlobalProblem",
    "HorizontalVector",
    "InvalidInput",
    "IterationRecord",
    "NeighborMask",
    "ParseError",
    "Problem",
    "ProductAmbient",
    "PsdFixedRankManifold",
    "PsdPoint",
    "RankDeficient",
    "RankDropError",
    "RcgConfig",
    "RcgTrace",
    "RxmlClassifier",
    "RxmlError",
    "SparseDataset",
    "SumAmbient",
    "TerminationReason",
    "ThinSVD",
    "TrainConfig",
    "TrainReport",
    "VersionError",
    "ambient_sum",
    "build_neighbor_mask",
    "default_hyperparameters",
    "ensemble_scores",
    "evaluate",
    "generate_toy_dataset",
    "global_closed_form",
    "kmeans_partition",
    "load_model",
    "load_toy",
    "load_xmc_file",
    "ndcg_at_k",
    "precision_at_k",
    "predict",
    "rcg_minimize",
    "regularized_objective",
    "run_selftest",
    "save_model",
    "save_xmc_file",
    "solve_embedding_rcg",
    "solve_embedding_svp",
    "thin_svd",
    "toy_path",
    "train",
    "train_regressor_admm",
    "truncated_sym_eig",
    "__version__",
]
