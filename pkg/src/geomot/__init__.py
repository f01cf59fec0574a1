"""Graph-constrained latent geometry toolkit.

Entropic optimal-transport solvers, graph priors with shortest-path
metrics, factorized-representation training, geometry-aware metrics,
latent traversal strategies, leakage-safe dataset splitting, and an
empirical verifier of the output-variation bound, all on synthetic
desk-scale data.
"""

from . import (
    dataset_splitter,
    errors,
    factorization,
    geometry_metrics,
    graph_priors,
    numerics,
    ot_solvers,
    synthetic_bench,
    traversal,
)

__version__ = "0.1.0"

__all__ = [
    "dataset_splitter",
    "errors",
    "factorization",
    "geometry_metrics",
    "graph_priors",
    "numerics",
    "ot_solvers",
    "synthetic_bench",
    "traversal",
    "__version__",
]
