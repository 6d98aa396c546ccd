"""Dominance, front maintenance, and dataset invariants."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moboa.core import (
    Dataset,
    DimensionError,
    Direction,
    Evaluation,
    OrientedObjectives,
    ParetoFront,
    dominates,
    extract_front,
    update_front,
)
from tests.conftest import brute_force_front


class TestDominates:
    def test_strict_improvement(self):
        assert dominates([2, 2], [1, 1])

    def test_identical_points_do_not_dominate(self):
        assert not dominates([1, 1], [1, 1])

    def test_incomparable_pair(self):
        assert not dominates([2, 0], [1, 1])
        assert not dominates([1, 1], [2, 0])

    def test_partial_improvement(self):
        assert dominates([2, 1], [1, 1])

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            dominates([1, 2], [1, 2, 3])

    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=5))
    def test_irreflexive(self, values):
        assert not dominates(values, values)

    @given(
        st.integers(2, 5),
        st.integers(0, 2**32 - 1),
    )
    @settings(max_examples=200)
    def test_transitive_on_constructed_chains(self, m, seed):
        """a > b and b > c componentwise-with-strictness implies a > c."""
        rng = np.random.default_rng(seed)
        c = rng.uniform(-5, 5, m)
        delta1 = rng.uniform(0, 1, m)
        delta1[rng.integers(m)] += 0.1  # guarantee one strict gap
        b = c + delta1
        delta2 = rng.uniform(0, 1, m)
        delta2[rng.integers(m)] += 0.1
        a = b + delta2
        assert dominates(b, c) and dominates(a, b)
        assert dominates(a, c)


class TestUpdateFront:
    def test_dominator_evicts_all(self):
        front = ParetoFront(np.array([[1.0, 2.0], [2.0, 1.0]]))
        out = update_front(front, np.array([3.0, 3.0]))
        assert out.points.tolist() == [[3.0, 3.0]]

    def test_dominated_point_ignored(self):
        front = ParetoFront(np.array([[1.0, 2.0], [2.0, 1.0]]))
        out = update_front(front, np.array([0.0, 0.0]))
        assert out is front

    def test_empty_front_insertion(self):
        out = update_front(ParetoFront.empty(2), np.array([1.0, 1.0]))
        assert out.points.tolist() == [[1.0, 1.0]]

    def test_duplicate_point_ignored(self):
        front = ParetoFront(np.array([[1.0, 2.0]]))
        out = update_front(front, np.array([1.0, 2.0]))
        assert len(out) == 1

    def test_incomparable_point_joins(self):
        front = ParetoFront(np.array([[1.0, 2.0]]))
        out = update_front(front, np.array([2.0, 1.0]))
        assert len(out) == 2

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            update_front(ParetoFront.empty(2), np.array([np.nan, 1.0]))
        with pytest.raises(ValueError):
            update_front(ParetoFront.empty(2), np.array([np.inf, 1.0]))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            update_front(ParetoFront.empty(2), np.array([1.0, 2.0, 3.0]))


def _dataset_from(objectives: np.ndarray) -> Dataset:
    evs = tuple(
        Evaluation(np.array([float(i)]), row) for i, row in enumerate(objectives)
    )
    return Dataset(1, objectives.shape[1], evs)


class TestExtractFront:
    def test_simple(self):
        ds = _dataset_from(np.array([[1.0, 2.0], [2.0, 1.0], [0.0, 0.0]]))
        front = extract_front(ds)
        assert sorted(front.points.tolist()) == [[1.0, 2.0], [2.0, 1.0]]

    def test_single_objective(self):
        ds = _dataset_from(np.array([[5.0]]))
        assert extract_front(ds).points.tolist() == [[5.0]]

    def test_duplicate_objectives_collapse(self):
        # distinct inputs may share objectives; the front keeps one copy
        evs = (
            Evaluation(np.array([0.0]), np.array([1.0, 1.0])),
            Evaluation(np.array([1.0]), np.array([1.0, 1.0])),
        )
        front = extract_front(Dataset(1, 2, evs))
        assert front.points.tolist() == [[1.0, 1.0]]

    def test_empty_dataset(self):
        assert len(extract_front(Dataset(1, 2))) == 0

    @given(st.integers(0, 2**32 - 1), st.integers(1, 200), st.integers(1, 5))
    @settings(max_examples=60, deadline=None)
    def test_matches_brute_force(self, seed, n, m):
        rng = np.random.default_rng(seed)
        objs = rng.integers(0, 6, size=(n, m)).astype(float)  # ties are frequent
        front = ParetoFront.from_points(objs)
        oracle = brute_force_front(objs)
        assert sorted(front.points.tolist()) == sorted(oracle.tolist())

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_incremental_equals_batch(self, seed):
        """update_front over any permutation reproduces extract_front."""
        rng = np.random.default_rng(seed)
        objs = rng.uniform(-3, 3, size=(rng.integers(1, 40), rng.integers(1, 4)))
        incremental = ParetoFront.empty(objs.shape[1])
        for row in objs[rng.permutation(objs.shape[0])]:
            incremental = update_front(incremental, row)
        batch = ParetoFront.from_points(objs)
        assert sorted(incremental.points.tolist()) == sorted(batch.points.tolist())


class TestDataset:
    def test_duplicate_inputs_rejected(self):
        ev = Evaluation(np.array([1.0, 2.0]), np.array([0.0]))
        with pytest.raises(ValueError, match="duplicate"):
            Dataset(2, 1, (ev, Evaluation(np.array([1.0, 2.0]), np.array([3.0]))))

    def test_dimension_checks(self):
        with pytest.raises(DimensionError):
            Dataset(2, 1, (Evaluation(np.array([1.0]), np.array([0.0])),))
        with pytest.raises(DimensionError):
            Dataset(1, 2, (Evaluation(np.array([1.0]), np.array([0.0])),))

    def test_with_evaluation_is_persistent(self):
        ds = Dataset(1, 1)
        ds2 = ds.with_evaluation(Evaluation(np.array([0.0]), np.array([1.0])))
        assert len(ds) == 0 and len(ds2) == 1

    def test_contains_input_exact_equality(self):
        ds = Dataset(1, 1).with_evaluation(Evaluation(np.array([0.1]), np.array([1.0])))
        assert ds.contains_input(np.array([0.1]))
        assert not ds.contains_input(np.array([0.1 + 1e-16]) + 1e-12)

    def test_non_finite_objectives_rejected(self):
        with pytest.raises(ValueError):
            Evaluation(np.array([0.0]), np.array([np.nan]))


class TestOrientedObjectives:
    def test_minimize_negates(self):
        oo = OrientedObjectives((Direction.MINIMIZE, Direction.MAXIMIZE))
        np.testing.assert_array_equal(oo.to_canonical([2.0, 3.0]), [-2.0, 3.0])

    def test_round_trip(self):
        oo = OrientedObjectives.minimize_all(3)
        y = np.array([1.0, -2.0, 0.5])
        np.testing.assert_array_equal(oo.from_canonical(oo.to_canonical(y)), y)

    def test_matrix_input(self):
        oo = OrientedObjectives((Direction.MINIMIZE, Direction.MAXIMIZE))
        out = oo.to_canonical(np.array([[1.0, 2.0], [3.0, 4.0]]))
        np.testing.assert_array_equal(out, [[-1.0, 2.0], [-3.0, 4.0]])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            OrientedObjectives.maximize_all(2).to_canonical([1.0, 2.0, 3.0])
