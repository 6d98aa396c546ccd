"""The closed Bayesian-optimization loop over a discrete candidate pool.

Each seed runs independently: sample a space-filling initial design from the
pool, evaluate it, then repeat (fit per-objective GPs, draw fresh Monte-Carlo
base normals, maximize the batch acquisition with the configured optimizer,
evaluate the chosen candidates, update the front and the hypervolume trace).

Every piece of randomness is derived from ``(campaign seed, iteration,
phase)``, so reruns are byte-identical, paired optimizer arms share their
candidate pool, initial design and base draws, and a saved state resumes
bit-identically. Evaluated candidates leave the pool; the reference point is
frozen after initialization so hypervolume traces are monotone.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from moboa import __version__
from moboa.acquisition import AcquisitionContext, QehviConfig
from moboa.annealer import ParallelSaConfig, SaConfig, run_parallel, run_sequential
from moboa.baseline import BaselineConfig, run_baseline
from moboa.benchmarks import (
    CandidateSet,
    ProblemDef,
    generate_candidates,
    get_problem,
    LATENT_AWARE_DEFAULT_BOUNDS,
)
from moboa.core import (
    ConfigurationError,
    Dataset,
    Evaluation,
    NumericalError,
    ParetoFront,
    SchemaError,
    extract_front,
    update_front,
)
from moboa.gp import FitConfig, GpModel, KernelParams, fit
from moboa.hypervolume import hv

SCHEMA_VERSION = 1

# distinct per-phase tags keep derived RNG streams independent
_TAG_INIT, _TAG_NORMALS, _TAG_OPTIMIZER, _TAG_FIT = 11, 13, 17, 19

OPTIMIZER_KINDS = ("sa_sequential", "sa_parallel", "baseline")


@dataclass(frozen=True)
class FixedReference:
    values: tuple[float, ...]


@dataclass(frozen=True)
class WorstObservedMinusMargin:
    fraction: float = 0.1


@dataclass(frozen=True)
class OptimizerSpec:
    """Flat optimizer settings; only the fields for ``kind`` are used."""

    kind: str = "sa_sequential"
    t0: float = 5.0
    alpha: float = 0.95
    n_iterations: int = 4000
    p_change: tuple[float, float, float] = (0.6, 0.3, 0.1)
    n_chains: int = 10
    proposals_per_chain: int = 2
    n_restarts: int = 10
    max_local_iters: int = 200
    initial_step: float = 0.1
    shrink: float = 0.5

    def __post_init__(self) -> None:
        if self.kind not in OPTIMIZER_KINDS:
            raise ConfigurationError(
                f"unknown optimizer kind {self.kind!r}; choose from {OPTIMIZER_KINDS}"
            )

    def build(self, q: int, seed: int, enforce_unique: bool):
        if self.kind == "sa_sequential":
            return SaConfig(
                q=q,
                t0=self.t0,
                alpha=self.alpha,
                n_iterations=self.n_iterations,
                p_change=self.p_change,
                enforce_unique=enforce_unique,
                seed=seed,
            )
        if self.kind == "sa_parallel":
            return ParallelSaConfig(
                base=SaConfig(
                    q=q,
                    t0=self.t0,
                    alpha=self.alpha,
                    n_iterations=self.n_iterations,
                    p_change=self.p_change,
                    enforce_unique=enforce_unique,
                    seed=seed,
                ),
                n_chains=self.n_chains,
                proposals_per_chain=self.proposals_per_chain,
            )
        return BaselineConfig(
            n_restarts=self.n_restarts,
            max_local_iters=self.max_local_iters,
            initial_step=self.initial_step,
            shrink=self.shrink,
            seed=seed,
        )


@dataclass(frozen=True)
class CampaignConfig:
    problem: ProblemDef
    n_candidates: int = 2000
    candidate_scheme: str = "latin_hypercube"
    candidate_seed: int = 0
    q: int = 4
    n_bo_iterations: int = 10
    n_init: int | None = None  # defaults to 2 * d
    optimizer: OptimizerSpec = OptimizerSpec()
    n_mc_samples: int = 128
    reference: FixedReference | WorstObservedMinusMargin = WorstObservedMinusMargin()
    seeds: tuple[int, ...] = (0,)
    enforce_unique: bool = True
    gp_restarts: int = 8
    gp_max_iters: int = 200

    def __post_init__(self) -> None:
        if self.q < 1:
            raise ConfigurationError(f"batch size must be >= 1, got {self.q}")
        if self.n_bo_iterations < 0:
            raise ConfigurationError("n_bo_iterations must be nonnegative")
        if self.effective_n_init < 2:
            raise ConfigurationError(
                f"initial design needs at least 2 points, got {self.effective_n_init}"
            )
        if not self.seeds:
            raise ConfigurationError("at least one seed is required")
        needed = self.effective_n_init + self.q * self.n_bo_iterations
        if self.enforce_unique and self.n_candidates < needed:
            raise ConfigurationError(
                f"unique campaign needs N >= n_init + q * n_bo_iterations = {needed}, "
                f"got N={self.n_candidates}"
            )
        if isinstance(self.reference, FixedReference) and len(
            self.reference.values
        ) != self.problem.m:
            raise ConfigurationError(
                f"fixed reference has {len(self.reference.values)} values, "
                f"problem has m={self.problem.m}"
            )

    @property
    def effective_n_init(self) -> int:
        return self.n_init if self.n_init is not None else 2 * self.problem.d


@dataclass(frozen=True)
class CampaignState:
    """Snapshot of one seed's campaign between iterations."""

    config: CampaignConfig
    seed: int
    candidate_set: CandidateSet
    dataset: Dataset
    front: ParetoFront
    reference: np.ndarray
    iteration: int
    active: np.ndarray  # candidate-set rows not yet evaluated
    hv_trace: tuple[tuple[int, float], ...]
    prev_params: tuple[KernelParams, ...] | None = None


def _derived_seed(seed: int, iteration: int, tag: int) -> int:
    return int(np.random.SeedSequence((seed, iteration, tag)).generate_state(1)[0])


def _maximin_indices(unit_points: np.ndarray, n_init: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy max-min-distance design from a random starting row."""
    n = unit_points.shape[0]
    first = int(rng.integers(n))
    chosen = [first]
    dmin = np.sum((unit_points - unit_points[first]) ** 2, axis=1)
    dmin[first] = -np.inf
    for _ in range(n_init - 1):
        nxt = int(np.argmax(dmin))
        chosen.append(nxt)
        dmin = np.minimum(dmin, np.sum((unit_points - unit_points[nxt]) ** 2, axis=1))
        dmin[nxt] = -np.inf
    return np.array(chosen, dtype=np.int64)


def _reference_from_policy(
    policy: FixedReference | WorstObservedMinusMargin, objectives: np.ndarray
) -> np.ndarray:
    if isinstance(policy, FixedReference):
        return np.asarray(policy.values, dtype=np.float64)
    worst = objectives.min(axis=0)
    ranges = objectives.max(axis=0) - worst
    return worst - policy.fraction * ranges


def initialize(config: CampaignConfig, seed: int) -> CampaignState:
    """Sample and evaluate the initial design, fixing the reference point."""
    problem = config.problem
    candidate_set = generate_candidates(
        problem, config.n_candidates, config.candidate_scheme, config.candidate_seed
    )
    n_init = config.effective_n_init
    if n_init > candidate_set.n:
        raise ConfigurationError(
            f"initial design of {n_init} exceeds candidate pool of {candidate_set.n}"
        )
    width = problem.upper - problem.lower
    unit = (candidate_set.points - problem.lower) / width
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0, _TAG_INIT)))
    chosen = _maximin_indices(unit, n_init, rng)
    evaluations = [
        Evaluation(
            candidate_set.points[i],
            problem.evaluate_canonical(candidate_set.points[i]),
            int(i),
        )
        for i in chosen
    ]
    dataset = Dataset(problem.d, problem.m, tuple(evaluations))
    front = extract_front(dataset)
    reference = _reference_from_policy(config.reference, dataset.objectives())
    active = np.setdiff1d(np.arange(candidate_set.n, dtype=np.int64), chosen)
    return CampaignState(
        config=config,
        seed=seed,
        candidate_set=candidate_set,
        dataset=dataset,
        front=front,
        reference=reference,
        iteration=0,
        active=active,
        hv_trace=((0, hv(front, reference)),),
    )


def _fit_models(
    state: CampaignState, noise_floor_scale: float = 1.0
) -> list[GpModel]:
    config = state.config
    problem = config.problem
    models = []
    for j in range(problem.m):
        init = state.prev_params[j] if state.prev_params is not None else None
        fit_config = FitConfig(
            n_restarts=config.gp_restarts,
            max_iters=config.gp_max_iters,
            seed=_derived_seed(state.seed, state.iteration, _TAG_FIT),
            noise_floor=1e-6 * noise_floor_scale,
            init_params=init,
        )
        models.append(fit(state.dataset, j, fit_config, (problem.lower, problem.upper)))
    return models


def _run_optimizer(
    ctx: AcquisitionContext, state: CampaignState
) -> tuple[np.ndarray, float]:
    """Returns (local batch indices into ctx's candidate subset, value)."""
    config = state.config
    opt_seed = _derived_seed(state.seed, state.iteration, _TAG_OPTIMIZER)
    built = config.optimizer.build(config.q, opt_seed, config.enforce_unique)
    if isinstance(built, SaConfig):
        result = run_sequential(ctx, built)
        return result.best_batch, result.best_value
    if isinstance(built, ParallelSaConfig):
        result = run_parallel(ctx, built)
        return result.best_batch, result.best_value
    result = run_baseline(ctx, config.q, built, config.enforce_unique)
    return result.best_indices, result.value


def _step_once(state: CampaignState, noise_floor_scale: float) -> CampaignState:
    config = state.config
    problem = config.problem
    if config.enforce_unique and state.active.shape[0] < config.q:
        raise ConfigurationError(
            f"candidate pool exhausted: {state.active.shape[0]} rows left, q={config.q}"
        )
    models = _fit_models(state, noise_floor_scale)
    normals_rng = np.random.default_rng(
        np.random.SeedSequence((state.seed, state.iteration, _TAG_NORMALS))
    )
    base_normals = normals_rng.standard_normal((config.n_mc_samples, config.q, problem.m))
    qehvi_config = QehviConfig(reference=state.reference, base_normals=base_normals)
    pool = state.candidate_set.subset(state.active)
    ctx = AcquisitionContext(models, state.front, qehvi_config, pool)

    local_batch, _ = _run_optimizer(ctx, state)
    original = state.active[np.asarray(local_batch, dtype=np.int64)]

    new_evaluations = []
    seen: set[bytes] = set()
    for idx in original:
        x = state.candidate_set.points[int(idx)]
        key = x.tobytes()
        if key in seen or state.dataset.contains_input(x):
            continue  # duplicate query on a noiseless problem adds nothing
        seen.add(key)
        new_evaluations.append(
            Evaluation(x, problem.evaluate_canonical(x), int(idx))
        )
    dataset = state.dataset.with_evaluations(new_evaluations)
    front = state.front
    for ev in new_evaluations:
        front = update_front(front, ev.objectives)
    active = np.setdiff1d(state.active, original)
    iteration = state.iteration + 1
    return replace(
        state,
        dataset=dataset,
        front=front,
        iteration=iteration,
        active=active,
        hv_trace=state.hv_trace + ((iteration, hv(front, state.reference)),),
        prev_params=tuple(m.params for m in models),
    )


def step(state: CampaignState) -> CampaignState:
    """One BO iteration: fit, optimize, evaluate, update front and trace.

    A numerical failure is retried once with an escalated GP noise floor
    before aborting (the caller keeps the pre-step state).
    """
    try:
        return _step_once(state, noise_floor_scale=1.0)
    except NumericalError:
        return _step_once(state, noise_floor_scale=100.0)


@dataclass
class SeedResult:
    seed: int
    hv_trace: list[tuple[int, float]]
    front_canonical: np.ndarray | None
    front_native: np.ndarray | None
    evaluations: list[dict]
    error: str | None = None


@dataclass
class CampaignResult:
    config_dict: dict
    seed_results: list[SeedResult]
    aggregate: list[tuple[int, float, float, float]]  # iteration, mean, min, max
    optimizer_metadata: dict
    timings: dict[str, float] = field(default_factory=dict)

    def canonical_dict(self) -> dict:
        """Deterministic content (timings excluded) for hashing and tests."""
        return {
            "config": self.config_dict,
            "optimizer_metadata": self.optimizer_metadata,
            "seeds": [
                {
                    "seed": r.seed,
                    "error": r.error,
                    "hv_trace": [[it, v] for it, v in r.hv_trace],
                    "front_native": None
                    if r.front_native is None
                    else r.front_native.tolist(),
                    "evaluations": r.evaluations,
                }
                for r in self.seed_results
            ],
            "aggregate": [list(row) for row in self.aggregate],
        }

    def canonical_json(self) -> str:
        return json.dumps(self.canonical_dict(), sort_keys=True, separators=(",", ":"))


def _optimizer_metadata(config: CampaignConfig) -> dict:
    meta = {
        "kind": config.optimizer.kind,
        "tool_version": __version__,
    }
    if config.optimizer.kind == "baseline":
        meta["stand_in_disclosure"] = (
            "the continuous arm is a multi-start derivative-free pattern search "
            "with relax-and-round snapping, standing in for a gradient-based "
            "continuous optimizer"
        )
    return meta


def run_seed(config: CampaignConfig, seed: int) -> tuple[CampaignState, dict[str, float]]:
    """Initialize and advance one seed to completion; returns state + timings."""
    timings = {"initialize": 0.0, "steps": 0.0}
    t0 = time.perf_counter()
    state = initialize(config, seed)
    timings["initialize"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    for _ in range(config.n_bo_iterations):
        state = step(state)
    timings["steps"] = time.perf_counter() - t0
    return state, timings


def _seed_result(config: CampaignConfig, seed: int) -> tuple[SeedResult, dict[str, float]]:
    directions = config.problem.directions
    try:
        state, seed_timings = run_seed(config, seed)
        return (
            SeedResult(
                seed=seed,
                hv_trace=list(state.hv_trace),
                front_canonical=state.front.points,
                front_native=directions.from_canonical(state.front.points),
                evaluations=[
                    {
                        "input": ev.input.tolist(),
                        "objectives": directions.from_canonical(ev.objectives).tolist(),
                        "candidate_index": ev.candidate_index,
                    }
                    for ev in state.dataset.evaluations
                ],
            ),
            seed_timings,
        )
    except Exception as exc:  # noqa: BLE001 - per-seed isolation is the contract
        return (
            SeedResult(
                seed=seed,
                hv_trace=[],
                front_canonical=None,
                front_native=None,
                evaluations=[],
                error=f"{type(exc).__name__}: {exc}",
            ),
            {},
        )


def run(config: CampaignConfig, n_workers: int = 1) -> CampaignResult:
    """Run every configured seed; failures are isolated and flagged.

    Seeds are independent, so ``n_workers > 1`` runs them on a thread pool;
    results are identical to the serial order either way.
    """
    seed_results: list[SeedResult] = []
    timings: dict[str, float] = {}
    if n_workers > 1 and len(config.seeds) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            outcomes = list(pool.map(lambda s: _seed_result(config, s), config.seeds))
    else:
        outcomes = [_seed_result(config, seed) for seed in config.seeds]
    for (result, seed_timings), seed in zip(outcomes, config.seeds):
        seed_results.append(result)
        for key, value in seed_timings.items():
            timings[f"seed_{seed}.{key}"] = value
    ok = [r for r in seed_results if r.error is None]
    aggregate: list[tuple[int, float, float, float]] = []
    if ok:
        n_points = min(len(r.hv_trace) for r in ok)
        for i in range(n_points):
            values = [r.hv_trace[i][1] for r in ok]
            aggregate.append(
                (ok[0].hv_trace[i][0], float(np.mean(values)), float(np.min(values)), float(np.max(values)))
            )
    return CampaignResult(
        config_dict=config_to_dict(config),
        seed_results=seed_results,
        aggregate=aggregate,
        optimizer_metadata=_optimizer_metadata(config),
        timings=timings,
    )


# ---------------------------------------------------------------------------
# configuration and state (de)serialization


def _problem_to_dict(problem: ProblemDef) -> dict:
    out: dict = {"name": problem.name}
    if problem.name == "latent_aware":
        out["bounds"] = [list(b) for b in problem.bounds]
        out["maximize"] = all(d.value == "maximize" for d in problem.directions.directions)
    return out


def _problem_from_dict(d: dict) -> ProblemDef:
    name = d["name"]
    if name == "latent_aware":
        bounds = [tuple(b) for b in d.get("bounds", LATENT_AWARE_DEFAULT_BOUNDS)]
        return get_problem(name, bounds=bounds, maximize=d.get("maximize", True))
    return get_problem(name)


def config_to_dict(config: CampaignConfig) -> dict:
    ref = config.reference
    if isinstance(ref, FixedReference):
        ref_dict = {"policy": "fixed", "values": list(ref.values)}
    else:
        ref_dict = {"policy": "worst_observed_minus_margin", "fraction": ref.fraction}
    opt = config.optimizer
    return {
        "problem": _problem_to_dict(config.problem),
        "candidates": {
            "n": config.n_candidates,
            "scheme": config.candidate_scheme,
            "seed": config.candidate_seed,
        },
        "campaign": {
            "q": config.q,
            "n_bo_iterations": config.n_bo_iterations,
            "n_init": config.n_init,
            "seeds": list(config.seeds),
            "enforce_unique": config.enforce_unique,
        },
        "qehvi": {"n_mc_samples": config.n_mc_samples},
        "reference": ref_dict,
        "gp": {"n_restarts": config.gp_restarts, "max_iters": config.gp_max_iters},
        "optimizer": {
            "kind": opt.kind,
            "t0": opt.t0,
            "alpha": opt.alpha,
            "n_iterations": opt.n_iterations,
            "p_change": list(opt.p_change),
            "n_chains": opt.n_chains,
            "proposals_per_chain": opt.proposals_per_chain,
            "n_restarts": opt.n_restarts,
            "max_local_iters": opt.max_local_iters,
            "initial_step": opt.initial_step,
            "shrink": opt.shrink,
        },
    }


def config_from_dict(d: dict) -> CampaignConfig:
    try:
        problem = _problem_from_dict(d["problem"])
        cand = d.get("candidates", {})
        camp = d.get("campaign", {})
        ref_dict = d.get("reference", {"policy": "worst_observed_minus_margin"})
        if ref_dict.get("policy") == "fixed":
            reference: FixedReference | WorstObservedMinusMargin = FixedReference(
                tuple(float(v) for v in ref_dict["values"])
            )
        elif ref_dict.get("policy") in ("worst_observed_minus_margin", None):
            reference = WorstObservedMinusMargin(float(ref_dict.get("fraction", 0.1)))
        else:
            raise ConfigurationError(
                f"reference.policy must be 'fixed' or 'worst_observed_minus_margin', "
                f"got {ref_dict.get('policy')!r}"
            )
        opt_dict = dict(d.get("optimizer", {}))
        if "p_change" in opt_dict:
            opt_dict["p_change"] = tuple(float(v) for v in opt_dict["p_change"])
        optimizer = OptimizerSpec(**opt_dict)
        gp_dict = d.get("gp", {})
        return CampaignConfig(
            problem=problem,
            n_candidates=int(cand.get("n", 2000)),
            candidate_scheme=cand.get("scheme", "latin_hypercube"),
            candidate_seed=int(cand.get("seed", 0)),
            q=int(camp.get("q", 4)),
            n_bo_iterations=int(camp.get("n_bo_iterations", 10)),
            n_init=None if camp.get("n_init") is None else int(camp["n_init"]),
            optimizer=optimizer,
            n_mc_samples=int(d.get("qehvi", {}).get("n_mc_samples", 128)),
            reference=reference,
            seeds=tuple(int(s) for s in camp.get("seeds", [0])),
            enforce_unique=bool(camp.get("enforce_unique", True)),
            gp_restarts=int(gp_dict.get("n_restarts", 8)),
            gp_max_iters=int(gp_dict.get("max_iters", 200)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid campaign configuration: {exc}") from exc


def save_state(state: CampaignState, path) -> None:
    """Persist a campaign state as versioned JSON; resuming is bit-identical."""
    payload = {
        "schema_version": SCHEMA_VERSION,
        "config": config_to_dict(state.config),
        "seed": state.seed,
        "iteration": state.iteration,
        "reference": state.reference.tolist(),
        "active": state.active.tolist(),
        "hv_trace": [[it, v] for it, v in state.hv_trace],
        "dataset": [
            {
                "input": ev.input.tolist(),
                "objectives": ev.objectives.tolist(),
                "candidate_index": ev.candidate_index,
            }
            for ev in state.dataset.evaluations
        ],
        "prev_params": None
        if state.prev_params is None
        else [
            {
                "lengthscales": p.lengthscales.tolist(),
                "signal_variance": p.signal_variance,
                "noise_variance": p.noise_variance,
                "constant_mean": p.constant_mean,
            }
            for p in state.prev_params
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_state(path) -> CampaignState:
    """Inverse of :func:`save_state`; raises SchemaError on bad files."""
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SchemaError(f"cannot parse campaign state {path}: {exc}") from exc
    if not isinstance(payload, dict) or "schema_version" not in payload:
        raise SchemaError(f"{path} is not a campaign state file (no schema_version)")
    version = payload["schema_version"]
    if version != SCHEMA_VERSION:
        raise SchemaError(
            f"state schema version {version} unsupported; this build reads {SCHEMA_VERSION}"
        )
    try:
        config = config_from_dict(payload["config"])
        problem = config.problem
        candidate_set = generate_candidates(
            problem, config.n_candidates, config.candidate_scheme, config.candidate_seed
        )
        evaluations = tuple(
            Evaluation(
                np.array(row["input"], dtype=np.float64),
                np.array(row["objectives"], dtype=np.float64),
                row["candidate_index"],
            )
            for row in payload["dataset"]
        )
        dataset = Dataset(problem.d, problem.m, evaluations)
        prev = payload["prev_params"]
        prev_params = (
            None
            if prev is None
            else tuple(
                KernelParams(
                    lengthscales=np.array(p["lengthscales"], dtype=np.float64),
                    signal_variance=float(p["signal_variance"]),
                    noise_variance=float(p["noise_variance"]),
                    constant_mean=float(p["constant_mean"]),
                )
                for p in prev
            )
        )
        return CampaignState(
            config=config,
            seed=int(payload["seed"]),
            candidate_set=candidate_set,
            dataset=dataset,
            front=extract_front(dataset),
            reference=np.array(payload["reference"], dtype=np.float64),
            iteration=int(payload["iteration"]),
            active=np.array(payload["active"], dtype=np.int64),
            hv_trace=tuple((int(it), float(v)) for it, v in payload["hv_trace"]),
            prev_params=prev_params,
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed campaign state {path}: {exc}") from exc
