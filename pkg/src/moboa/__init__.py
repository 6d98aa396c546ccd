"""Multi-objective Bayesian optimization over discrete candidate sets.

Batches of candidates are selected by maximizing a Monte-Carlo estimate of
the batch expected-hypervolume-improvement acquisition, using simulated
annealing restricted to the candidate pool. A continuous multi-start local
search with relax-and-round snapping is provided as the comparison arm.
"""

__version__ = "0.1.0"

from moboa.core import (
    Dataset,
    Evaluation,
    OrientedObjectives,
    ParetoFront,
    dominates,
    extract_front,
)

__all__ = [
    "Dataset",
    "Evaluation",
    "OrientedObjectives",
    "ParetoFront",
    "dominates",
    "extract_front",
    "__version__",
]
