"""Shared fixtures: small fitted acquisition contexts and oracle helpers."""

from __future__ import annotations

import numpy as np
import pytest

from moboa.acquisition import AcquisitionContext, QehviConfig
from moboa.benchmarks import generate_candidates, get_problem
from moboa.core import Dataset, Evaluation, extract_front
from moboa.gp import FitConfig, fit


def build_context(
    problem_name: str = "dtlz2",
    n_candidates: int = 120,
    n_train: int = 12,
    q: int = 3,
    n_mc_samples: int = 64,
    seed: int = 0,
    zero_normals: bool = False,
):
    """Fit a small real GP surrogate over a candidate pool and wrap it.

    ``zero_normals=True`` replaces the Monte-Carlo base draws with zeros,
    which makes the acquisition surface the (deterministic, permutation
    invariant) hypervolume improvement of the posterior means.
    """
    problem = get_problem(problem_name)
    pool = generate_candidates(problem, n_candidates, "latin_hypercube", seed=seed)
    rng = np.random.default_rng(seed + 1)
    chosen = rng.choice(n_candidates, size=n_train, replace=False)
    dataset = Dataset(
        problem.d,
        problem.m,
        tuple(
            Evaluation(pool.points[i], problem.evaluate_canonical(pool.points[i]), int(i))
            for i in chosen
        ),
    )
    models = [
        fit(dataset, j, FitConfig(n_restarts=2, max_iters=50, seed=seed), (problem.lower, problem.upper))
        for j in range(problem.m)
    ]
    front = extract_front(dataset)
    objectives = dataset.objectives()
    reference = objectives.min(axis=0) - 0.1 * np.ptp(objectives, axis=0)
    if zero_normals:
        base = np.zeros((1, q, problem.m))
        config = QehviConfig(reference=reference, base_normals=base)
    else:
        config = QehviConfig.create(
            reference, q=q, m=problem.m, n_mc_samples=n_mc_samples, seed=seed + 2
        )
    return AcquisitionContext(models, front, config, pool)


@pytest.fixture(scope="session")
def dtlz2_ctx():
    """Stochastic-surface context on DTLZ2 (q=3, S=64)."""
    return build_context("dtlz2")


@pytest.fixture(scope="session")
def zdt1_small_ctx():
    """2-objective context on ZDT1 with a modest pool."""
    return build_context("zdt1", n_candidates=80, n_train=10, q=2, seed=3)


@pytest.fixture(scope="session")
def deterministic_ctx():
    """Zero-base-normal context: acquisition equals HVI of posterior means."""
    return build_context("dtlz2", n_candidates=40, n_train=10, q=2, seed=5, zero_normals=True)


def brute_force_front(objectives: np.ndarray) -> np.ndarray:
    """O(n^2) nondominated filter used as the independent oracle."""
    keep = []
    n = objectives.shape[0]
    for i in range(n):
        dominated = False
        for j in range(n):
            if i == j:
                continue
            if np.all(objectives[j] >= objectives[i]) and np.any(objectives[j] > objectives[i]):
                dominated = True
                break
            if np.array_equal(objectives[j], objectives[i]) and j < i:
                dominated = True  # collapse duplicates onto the first copy
                break
        if not dominated:
            keep.append(i)
    return objectives[keep]
