"""treeqcqp: global solutions of QCQPs whose sparsity graph is a tree.

The package solves non-convex quadratically constrained quadratic programs
with complex variables by semidefinite relaxation, certifies when the
relaxation is provably exact (tree sparsity plus a per-edge convex-hull
condition), recovers rank-1 optimizers through a perturbation cascade, and
falls back to a linearization heuristic otherwise.  A frontend formulates
optimal power flow on radial distribution networks in this form.
"""

from .linalg import (
    Spectrum,
    ValidationError,
    eig_hermitian,
    min_eigenvalue,
    numeric_rank,
    real_embedding,
    trace_product,
)

__version__ = "0.1.0"

__all__ = [
    "Spectrum",
    "ValidationError",
    "eig_hermitian",
    "min_eigenvalue",
    "numeric_rank",
    "real_embedding",
    "trace_product",
    "__version__",
]
