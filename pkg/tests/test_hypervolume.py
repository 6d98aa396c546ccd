"""Exact hypervolume against hand values and two independent oracles."""

import itertools

import numpy as np
import pytest

from moboa.core import DimensionError, ParetoFront
from moboa.hypervolume import (
    hv,
    hv_monte_carlo,
    hv_recursive,
    hv_sweep_2d,
    hvi,
    hvi_of_samples,
)


def hv_inclusion_exclusion(points, reference) -> float:
    """Independent oracle: inclusion-exclusion over all point subsets."""
    reference = np.asarray(reference, dtype=float)
    contributing = [p for p in np.asarray(points, dtype=float) if np.all(p > reference)]
    total = 0.0
    for k in range(1, len(contributing) + 1):
        sign = 1.0 if k % 2 == 1 else -1.0
        for subset in itertools.combinations(contributing, k):
            mins = np.min(np.vstack(subset), axis=0)
            total += sign * float(np.prod(mins - reference))
    return total


class TestHvExamples:
    def test_empty_front(self):
        assert hv(ParetoFront.empty(2), [0.0, 0.0]) == 0.0

    def test_single_box(self):
        assert hv(np.array([[2.0, 2.0]]), [0.0, 0.0]) == 4.0

    def test_two_point_overlap(self):
        assert hv(np.array([[1.0, 2.0], [2.0, 1.0]]), [0.0, 0.0]) == 3.0

    def test_dominated_point_adds_nothing(self):
        base = hv(np.array([[1.0, 1.0, 1.0]]), [0.0, 0.0, 0.0])
        with_dominated = hv(
            np.array([[1.0, 1.0, 1.0], [0.5, 0.5, 0.5]]), [0.0, 0.0, 0.0]
        )
        assert base == 1.0 and with_dominated == 1.0

    def test_reference_clips_noncontributors(self):
        # the second point fails strict dominance of the reference in one coord
        assert hv(np.array([[2.0, 2.0], [3.0, -1.0]]), [0.0, 0.0]) == 4.0

    def test_all_clipped(self):
        assert hv(np.array([[1.0, 1.0]]), [2.0, 2.0]) == 0.0

    def test_single_objective(self):
        assert hv(np.array([[5.0], [3.0]]), [1.0]) == 4.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            hv(np.array([[1.0, 2.0]]), [0.0, 0.0, 0.0])


class TestHviExamples:
    def test_dominated_new_points(self):
        front = np.array([[2.0, 2.0]])
        assert hvi(front, [[1.0, 1.0], [0.5, 1.5]], [0.0, 0.0]) == 0.0

    def test_empty_front_reduces_to_hv(self):
        assert hvi(ParetoFront.empty(2), [[1.0, 1.0]], [0.0, 0.0]) == 1.0

    def test_hand_value(self):
        front = np.array([[1.0, 2.0], [2.0, 1.0]])
        assert hvi(front, [[2.0, 2.0]], [0.0, 0.0]) == 1.0

    def test_always_nonnegative_random(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            m = rng.integers(2, 5)
            front = rng.uniform(0, 1, (rng.integers(1, 10), m))
            new = rng.uniform(-0.5, 1.2, (rng.integers(1, 5), m))
            assert hvi(front, new, np.zeros(m)) >= 0.0

    def test_equals_hv_difference(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            m = rng.integers(2, 5)
            front = rng.uniform(0.1, 1, (rng.integers(1, 8), m))
            new = rng.uniform(0.1, 1.2, (3, m))
            combined = np.vstack([front, new])
            want = hv(combined, np.zeros(m)) - hv(front, np.zeros(m))
            got = hvi(front, new, np.zeros(m))
            assert abs(got - max(want, 0.0)) < 1e-11


class TestOracles:
    def test_inclusion_exclusion_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(300):
            m = int(rng.integers(2, 6))
            n = int(rng.integers(1, 9))
            points = rng.uniform(-0.2, 1.0, (n, m))
            reference = rng.uniform(-0.5, 0.0, m)
            exact = hv(points, reference)
            oracle = hv_inclusion_exclusion(points, reference)
            assert abs(exact - oracle) <= 1e-10 * max(1.0, abs(oracle))

    def test_monte_carlo_oracle(self):
        rng = np.random.default_rng(7)
        for trial in range(30):
            m = int(rng.integers(2, 6))
            points = rng.uniform(0.2, 1.0, (int(rng.integers(1, 20)), m))
            exact = hv(points, np.zeros(m))
            estimate, se = hv_monte_carlo(points, np.zeros(m), np.ones(m), 100_000, seed=trial)
            assert abs(exact - estimate) <= 3.0 * se + 1e-9

    def test_monte_carlo_empty_front_exact_zero(self):
        estimate, se = hv_monte_carlo(ParetoFront.empty(3), np.zeros(3), np.ones(3), 1000, 0)
        assert estimate == 0.0 and se == 0.0

    def test_monte_carlo_upper_bound_violation(self):
        with pytest.raises(ValueError, match="upper_bounds"):
            hv_monte_carlo(np.array([[2.0, 2.0]]), [0.0, 0.0], [1.0, 1.0], 100, 0)

    def test_monte_carlo_known_box(self):
        estimate, se = hv_monte_carlo(np.array([[2.0, 2.0]]), [0.0, 0.0], [2.0, 2.0], 10_000, 3)
        assert estimate == 4.0  # the whole sampling box is dominated


class TestProperties:
    def test_monotone_under_insertion(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            m = int(rng.integers(2, 5))
            front = rng.uniform(0, 1, (int(rng.integers(1, 12)), m))
            extra = rng.uniform(-0.5, 1.5, m)
            assert hv(np.vstack([front, extra[None]]), np.zeros(m)) >= hv(front, np.zeros(m))

    def test_translation_consistency(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            m = int(rng.integers(2, 5))
            front = rng.uniform(0.2, 1.0, (int(rng.integers(1, 12)), m))
            shift = rng.uniform(-5, 5, m)
            a = hv(front, np.zeros(m))
            b = hv(front + shift, shift)
            assert abs(a - b) <= 1e-10 * max(1.0, abs(a))

    def test_sweep_matches_recursion_bitwise(self):
        rng = np.random.default_rng(5)
        for _ in range(500):
            n = int(rng.integers(1, 25))
            front = rng.uniform(-0.2, 1.0, (n, 2))
            reference = rng.uniform(-0.4, 0.0, 2)
            assert hv_sweep_2d(front, reference) == hv_recursive(front, reference)

    def test_sweep_requires_two_objectives(self):
        with pytest.raises(DimensionError):
            hv_sweep_2d(np.array([[1.0, 1.0, 1.0]]), [0.0, 0.0, 0.0])

    def test_duplicate_points_are_harmless(self):
        front = np.array([[1.0, 2.0], [1.0, 2.0], [2.0, 1.0]])
        assert hv(front, [0.0, 0.0]) == 3.0


class TestHviOfSamples:
    def test_matches_scalar_hvi_bitwise(self):
        rng = np.random.default_rng(6)
        front = rng.uniform(0.2, 1.0, (6, 3))
        samples = rng.uniform(0.0, 1.3, (40, 4, 3))
        batch = hvi_of_samples(front, samples, np.zeros(3))
        scalar = np.array([hvi(front, samples[s], np.zeros(3)) for s in range(40)])
        assert np.array_equal(batch, scalar)

    def test_shape_validation(self):
        with pytest.raises(DimensionError):
            hvi_of_samples(np.array([[1.0, 1.0]]), np.zeros((3, 2)), [0.0, 0.0])
