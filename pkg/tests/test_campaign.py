"""Campaign loop: initialization, stepping, determinism, persistence."""

import json

import numpy as np
import pytest

import moboa.campaign as campaign_mod
from moboa.benchmarks import get_problem
from moboa.campaign import (
    CampaignConfig,
    FixedReference,
    OptimizerSpec,
    WorstObservedMinusMargin,
    config_from_dict,
    config_to_dict,
    initialize,
    load_state,
    run,
    run_seed,
    save_state,
    step,
)
from moboa.core import ConfigurationError, SchemaError


def tiny_config(**overrides) -> CampaignConfig:
    defaults = dict(
        problem=get_problem("dtlz2"),
        n_candidates=120,
        candidate_seed=5,
        q=2,
        n_bo_iterations=2,
        n_init=6,
        optimizer=OptimizerSpec(kind="sa_sequential", n_iterations=80),
        n_mc_samples=16,
        seeds=(1,),
        gp_restarts=2,
        gp_max_iters=30,
    )
    defaults.update(overrides)
    return CampaignConfig(**defaults)


class TestInitialize:
    def test_design_comes_from_pool(self):
        state = initialize(tiny_config(), seed=1)
        assert len(state.dataset) == 6
        for ev in state.dataset.evaluations:
            assert ev.candidate_index is not None
            np.testing.assert_array_equal(
                ev.input, state.candidate_set.points[ev.candidate_index]
            )
        assert state.active.shape[0] == 120 - 6

    def test_fixed_reference_used_exactly(self):
        config = tiny_config(reference=FixedReference((-3.0, -3.0, -3.0)))
        state = initialize(config, seed=1)
        np.testing.assert_array_equal(state.reference, [-3.0, -3.0, -3.0])

    def test_margin_reference_formula(self):
        """reference = worst - fraction * range, per objective, canonical."""
        state = initialize(tiny_config(reference=WorstObservedMinusMargin(0.1)), seed=2)
        objectives = state.dataset.objectives()
        worst = objectives.min(axis=0)
        ranges = objectives.max(axis=0) - worst
        np.testing.assert_allclose(state.reference, worst - 0.1 * ranges, rtol=0, atol=0)

    def test_trace_starts_at_iteration_zero(self):
        state = initialize(tiny_config(), seed=3)
        assert state.hv_trace[0][0] == 0
        assert state.hv_trace[0][1] >= 0

    def test_spread_design(self):
        # max-min greedy should not return clustered duplicates of a region
        state = initialize(tiny_config(n_init=4), seed=4)
        inputs = state.dataset.inputs()
        dists = [
            np.linalg.norm(inputs[i] - inputs[j])
            for i in range(4)
            for j in range(i + 1, 4)
        ]
        assert min(dists) > 0.1


class TestStep:
    def test_grows_by_q(self):
        state = initialize(tiny_config(), seed=1)
        after = step(state)
        assert len(after.dataset) == len(state.dataset) + 2
        assert after.iteration == 1
        assert after.active.shape[0] == state.active.shape[0] - 2

    def test_hv_trace_monotone(self):
        state = initialize(tiny_config(), seed=5)
        for _ in range(2):
            state = step(state)
        values = [v for _, v in state.hv_trace]
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))

    def test_all_evaluations_are_candidate_rows(self):
        state = initialize(tiny_config(), seed=6)
        state = step(state)
        pool = {row.tobytes() for row in state.candidate_set.points}
        for ev in state.dataset.evaluations:
            assert ev.input.tobytes() in pool

    def test_no_reevaluation(self):
        state = initialize(tiny_config(), seed=7)
        for _ in range(2):
            state = step(state)
        indices = [ev.candidate_index for ev in state.dataset.evaluations]
        assert len(indices) == len(set(indices))

    def test_planted_dominator_strictly_increases_hv(self, monkeypatch):
        """A batch holding a point that dominates the front must grow the front."""
        config = tiny_config(problem=get_problem("latent_aware"), n_init=2)
        state = initialize(config, seed=1)
        canonical = np.array(
            [state.config.problem.evaluate_canonical(state.candidate_set.points[i]) for i in state.active]
        )
        front = state.front.points
        dominators = [
            k
            for k in range(canonical.shape[0])
            if np.all(canonical[k][None, :] >= front)
            and np.all(np.any(canonical[k][None, :] > front, axis=1))
            and np.all(canonical[k] > state.reference)
        ]
        assert dominators, "instance chosen so the pool holds a front dominator"
        planted = dominators[0]
        other = 1 if planted != 1 else 2

        def fake_optimizer(ctx, st):
            return np.array([planted, other]), 0.0

        monkeypatch.setattr(campaign_mod, "_run_optimizer", fake_optimizer)
        after = step(state)
        planted_objectives = canonical[planted]
        assert any(np.array_equal(p, planted_objectives) for p in after.front.points)
        assert after.hv_trace[-1][1] > state.hv_trace[-1][1]

    def test_pool_too_small_rejected_at_config(self):
        with pytest.raises(ConfigurationError):
            tiny_config(n_candidates=9, n_init=6, n_bo_iterations=2)  # needs >= 10


class TestRun:
    def test_deterministic_bytes(self):
        config = tiny_config(seeds=(1, 2))
        a = run(config).canonical_json()
        b = run(config).canonical_json()
        assert a == b

    def test_threaded_matches_serial(self):
        config = tiny_config(seeds=(1, 2))
        serial = run(config, n_workers=1).canonical_json()
        threaded = run(config, n_workers=2).canonical_json()
        assert serial == threaded

    def test_zero_iterations(self):
        result = run(tiny_config(n_bo_iterations=0))
        assert len(result.seed_results[0].hv_trace) == 1

    def test_aggregate_statistics(self):
        result = run(tiny_config(seeds=(1, 2, 3)))
        assert len(result.aggregate) == 3  # init + 2 iterations
        for it, mean, lo, hi in result.aggregate:
            assert lo <= mean <= hi

    def test_paired_arms_share_randomness(self):
        sa_config = tiny_config()
        baseline_config = tiny_config(
            optimizer=OptimizerSpec(kind="baseline", n_restarts=1, max_local_iters=2)
        )
        sa_state = initialize(sa_config, seed=9)
        baseline_state = initialize(baseline_config, seed=9)
        assert np.array_equal(sa_state.candidate_set.points, baseline_state.candidate_set.points)
        np.testing.assert_array_equal(sa_state.dataset.inputs(), baseline_state.dataset.inputs())
        np.testing.assert_array_equal(sa_state.reference, baseline_state.reference)

    def test_baseline_metadata_disclosure(self):
        result = run(
            tiny_config(optimizer=OptimizerSpec(kind="baseline", n_restarts=1, max_local_iters=2))
        )
        assert "standing in" in result.optimizer_metadata["stand_in_disclosure"]

    def test_parallel_optimizer_runs(self):
        config = tiny_config(
            optimizer=OptimizerSpec(kind="sa_parallel", n_iterations=20, n_chains=3)
        )
        result = run(config)
        assert result.seed_results[0].error is None

    def test_native_front_orientation(self):
        result = run(tiny_config())
        native = result.seed_results[0].front_native
        canonical = result.seed_results[0].front_canonical
        np.testing.assert_array_equal(native, -canonical)  # dtlz2 is minimize-all


class TestPersistence:
    def test_round_trip_resumes_bit_identically(self, tmp_path):
        config = tiny_config(n_bo_iterations=2)
        state = initialize(config, seed=1)
        state = step(state)
        path = tmp_path / "state.json"
        save_state(state, path)
        resumed = load_state(path)
        a = step(state)
        b = step(resumed)
        assert a.hv_trace == b.hv_trace
        np.testing.assert_array_equal(a.dataset.inputs(), b.dataset.inputs())
        np.testing.assert_array_equal(a.dataset.objectives(), b.dataset.objectives())
        np.testing.assert_array_equal(a.active, b.active)

    def test_resumed_equals_straight_run(self, tmp_path):
        config = tiny_config(n_bo_iterations=2)
        straight, _ = run_seed(config, 1)
        state = initialize(config, seed=1)
        state = step(state)
        path = tmp_path / "mid.json"
        save_state(state, path)
        resumed = step(load_state(path))
        assert straight.hv_trace == resumed.hv_trace
        np.testing.assert_array_equal(straight.dataset.inputs(), resumed.dataset.inputs())

    def test_schema_version_mismatch(self, tmp_path):
        config = tiny_config()
        state = initialize(config, seed=1)
        path = tmp_path / "state.json"
        save_state(state, path)
        payload = json.loads(path.read_text())
        payload["schema_version"] = 999
        path.write_text(json.dumps(payload))
        with pytest.raises(SchemaError, match="999"):
            load_state(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text("")
        with pytest.raises(SchemaError):
            load_state(path)

    def test_corrupt_file(self, tmp_path):
        path = tmp_path / "corrupt.json"
        path.write_text('{"schema_version": 1, "config":')
        with pytest.raises(SchemaError):
            load_state(path)


class TestConfigSerialization:
    def test_round_trip(self):
        config = tiny_config(reference=FixedReference((-1.0, -2.0, -3.0)))
        rebuilt = config_from_dict(config_to_dict(config))
        assert config_to_dict(rebuilt) == config_to_dict(config)

    def test_latent_bounds_round_trip(self):
        config = CampaignConfig(
            problem=get_problem("latent_aware", bounds=((0.2, 1.5),) * 4),
            n_candidates=50,
            q=2,
            n_bo_iterations=1,
            n_init=4,
            seeds=(1,),
        )
        rebuilt = config_from_dict(config_to_dict(config))
        assert rebuilt.problem.bounds == config.problem.bounds

    def test_invalid_reference_policy(self):
        d = config_to_dict(tiny_config())
        d["reference"] = {"policy": "bogus"}
        with pytest.raises(ConfigurationError):
            config_from_dict(d)

    def test_validation_errors(self):
        with pytest.raises(ConfigurationError, match="N >= n_init"):
            tiny_config(n_candidates=9)
        with pytest.raises(ConfigurationError):
            tiny_config(seeds=())
        with pytest.raises(ConfigurationError):
            tiny_config(reference=FixedReference((0.0, 0.0)))  # m = 3 problem
