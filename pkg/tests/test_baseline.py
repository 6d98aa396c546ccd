"""Continuous pattern-search arm and relax-and-round snapping."""

import numpy as np
import pytest

from moboa.acquisition import qehvi_at_points, qehvi_batched
from moboa.baseline import (
    BaselineConfig,
    baseline_trace_to_csv,
    optimize_continuous,
    relax_and_round,
    run_baseline,
)
from moboa.core import ConfigurationError
from tests.conftest import build_context


@pytest.fixture(scope="module")
def small_ctx():
    return build_context("latent_aware", n_candidates=60, n_train=10, q=2, seed=8)


class TestOptimizeContinuous:
    def test_deterministic(self, small_ctx):
        config = BaselineConfig(n_restarts=1, max_local_iters=5, seed=3)
        x1, _ = optimize_continuous(small_ctx, 2, config)
        x2, _ = optimize_continuous(small_ctx, 2, config)
        assert np.array_equal(x1, x2)

    def test_zero_iterations_returns_best_start(self, small_ctx):
        config = BaselineConfig(n_restarts=4, max_local_iters=0, seed=4)
        x, trace = optimize_continuous(small_ctx, 2, config)
        start_values = [v for _, it, v in trace if it == 0]
        assert len(start_values) == 4
        assert float(qehvi_at_points(small_ctx, x[None])[0]) == max(start_values)

    def test_stays_in_bounds(self, small_ctx):
        config = BaselineConfig(n_restarts=2, max_local_iters=6, seed=5)
        x, _ = optimize_continuous(small_ctx, 2, config)
        problem = small_ctx.candidate_set.problem
        assert np.all(x >= problem.lower) and np.all(x <= problem.upper)

    def test_trace_monotone_per_restart(self, small_ctx):
        config = BaselineConfig(n_restarts=3, max_local_iters=6, seed=6)
        _, trace = optimize_continuous(small_ctx, 2, config)
        for restart in range(3):
            values = [v for r, _, v in trace if r == restart]
            assert all(b >= a for a, b in zip(values, values[1:]))

    def test_improves_on_grid_reference(self, small_ctx):
        """Search attains (nearly) the best acquisition on a dense point grid."""
        config = BaselineConfig(n_restarts=4, max_local_iters=25, seed=7)
        x, _ = optimize_continuous(small_ctx, 2, config)
        found = float(qehvi_at_points(small_ctx, x[None])[0])
        problem = small_ctx.candidate_set.problem
        rng = np.random.default_rng(0)
        grid = rng.uniform(problem.lower, problem.upper, size=(400, 2, problem.d))
        grid_best = float(qehvi_at_points(small_ctx, grid).max())
        assert found >= 0.9 * grid_best


class TestRelaxAndRound:
    def test_exact_candidate_maps_to_itself(self, small_ctx):
        pool = small_ctx.candidate_set
        batch = pool.points[[7, 19]]
        indices = relax_and_round(batch, pool, enforce_unique=True)
        assert indices.tolist() == [7, 19]

    def test_greedy_uniqueness(self, small_ctx):
        pool = small_ctx.candidate_set
        # both rows sit exactly on candidate 7; the second takes its next-nearest
        batch = pool.points[[7, 7]]
        indices = relax_and_round(batch, pool, enforce_unique=True)
        assert indices[0] == 7 and indices[1] != 7
        unit = (pool.points - pool.problem.lower) / (pool.problem.upper - pool.problem.lower)
        target = unit[7]
        dist = np.sum((unit - target) ** 2, axis=1)
        dist[7] = np.inf
        assert indices[1] == int(np.argmin(dist))

    def test_duplicates_allowed_without_uniqueness(self, small_ctx):
        pool = small_ctx.candidate_set
        batch = pool.points[[7, 7]]
        indices = relax_and_round(batch, pool, enforce_unique=False)
        assert indices.tolist() == [7, 7]

    def test_pool_too_small(self, small_ctx):
        pool = small_ctx.candidate_set.subset(np.array([0]))
        with pytest.raises(ConfigurationError):
            relax_and_round(np.zeros((2, 4)) + 0.5, pool, enforce_unique=True)

    def test_rounding_moves_value_both_directions(self, small_ctx):
        """Snapping can raise or lower the score; both directions occur."""
        rng = np.random.default_rng(1)
        problem = small_ctx.candidate_set.problem
        signs = set()
        for _ in range(20):
            x = rng.uniform(problem.lower, problem.upper, size=(2, problem.d))
            continuous = float(qehvi_at_points(small_ctx, x[None])[0])
            snapped = relax_and_round(x, small_ctx.candidate_set, True)
            discrete = float(qehvi_batched(small_ctx, [snapped])[0])
            if discrete > continuous:
                signs.add("up")
            elif discrete < continuous:
                signs.add("down")
        assert signs == {"up", "down"}


class TestRunBaseline:
    def test_returns_scored_snapped_batch(self, small_ctx):
        config = BaselineConfig(n_restarts=2, max_local_iters=5, seed=9)
        result = run_baseline(small_ctx, 2, config)
        assert result.best_indices.shape == (2,)
        assert len(set(result.best_indices.tolist())) == 2
        rescored = float(qehvi_batched(small_ctx, [result.best_indices])[0])
        assert result.value == rescored

    def test_deterministic(self, small_ctx):
        config = BaselineConfig(n_restarts=2, max_local_iters=4, seed=10)
        a = run_baseline(small_ctx, 2, config)
        b = run_baseline(small_ctx, 2, config)
        assert np.array_equal(a.best_indices, b.best_indices)
        assert a.value == b.value

    def test_value_bounded_by_enumeration_optimum(self, deterministic_ctx):
        import itertools

        best = max(
            float(qehvi_batched(deterministic_ctx, [np.array(pair)])[0])
            for pair in itertools.combinations(range(deterministic_ctx.n_candidates), 2)
        )
        config = BaselineConfig(n_restarts=2, max_local_iters=10, seed=11)
        result = run_baseline(deterministic_ctx, 2, config)
        assert result.value <= best + 1e-12

    def test_trace_csv(self, small_ctx, tmp_path):
        config = BaselineConfig(n_restarts=2, max_local_iters=3, seed=12)
        result = run_baseline(small_ctx, 2, config)
        path = tmp_path / "baseline.csv"
        baseline_trace_to_csv(result.trace, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "restart,iter,value"
        assert len(lines) == len(result.trace) + 1


class TestConfigValidation:
    def test_bad_values(self):
        with pytest.raises(ConfigurationError):
            BaselineConfig(n_restarts=0)
        with pytest.raises(ConfigurationError):
            BaselineConfig(shrink=1.0)
        with pytest.raises(ConfigurationError):
            BaselineConfig(initial_step=0.0)
