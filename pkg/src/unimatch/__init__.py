"""unimatch: unicity-constrained probe-gallery matching at the identity level.

A similarity-refinement toolkit: pairwise probe-gallery scores are turned
into one-to-one matchings, with per-camera identity merging, camera-pair
divide-and-conquer, accelerated solvers, retrieval metrics (CMC / mAP /
unicity fraction), and a seeded synthetic benchmark harness.
"""
from .errors import (
    ConfigError,
    FormatError,
    InfeasibleOneShotError,
    InputError,
    IntegrityError,
    ParameterError,
    ProtocolError,
    SizeError,
    UnimatchError,
)
from .types import (
    Assignment,
    EvalReport,
    IdentitySet,
    MatchOutcome,
    ProbeMatch,
    Sample,
    Split,
    as_embedding_matrix,
    as_similarity_matrix,
    validate_samples,
)
from .lap import SparseSimilarity, solve_dense, solve_oracle, solve_sparse, sparsify
from .cluster import (
    ConnectivityGraph,
    Dendrogram,
    agglomerate,
    knn_connectivity,
    select_cluster_count,
    silhouette,
)
from .metrics import EvalProtocol, cmc, evaluate, mean_average_precision, p_um
from .pipeline import (
    IdentityMatch,
    PipelineConfig,
    add_probes,
    divide_and_conquer,
    greedy_baseline,
    identity_similarity,
    image_level_refine,
    merge_sisc,
    one_shot_match,
    run_pipeline,
)
from .synth import SynthConfig, generate

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "ConfigError",
    "ConnectivityGraph",
    "Dendrogram",
    "EvalProtocol",
    "EvalReport",
    "FormatError",
    "IdentityMatch",
    "IdentitySet",
    "InfeasibleOneShotError",
    "InputError",
    "IntegrityError",
    "MatchOutcome",
    "ParameterError",
    "PipelineConfig",
    "ProbeMatch",
    "ProtocolError",
    "Sample",
    "SizeError",
    "SparseSimilarity",
    "Split",
    "SynthConfig",
    "UnimatchError",
    "add_probes",
    "agglomerate",
    "as_embedding_matrix",
    "as_similarity_matrix",
    "cmc",
    "divide_and_conquer",
    "evaluate",
    "generate",
    "greedy_baseline",
    "identity_similarity",
    "image_level_refine",
    "knn_connectivity",
    "mean_average_precision",
    "merge_sisc",
    "one_shot_match",
    "p_um",
    "run_pipeline",
    "select_cluster_count",
    "silhouette",
    "solve_dense",
    "solve_oracle",
    "solve_sparse",
    "sparsify",
    "validate_samples",
]
