"""Simulated annealing over index subsets of a discrete candidate pool.

Two drivers are provided: a single-chain sequential annealer and a
multi-chain variant in which every chain generates several proposals per
iteration, all proposals are scored in one batched acquisition call, each
chain keeps its best proposal under the Metropolis rule, and all chain
temperatures cool synchronously. Every batch ever proposed is an index
subset of the candidate pool, so returned designs never need rounding or
repair.

Reproducibility: chain c draws from an independent stream derived from
``(seed, c)``; the sequential driver is exactly chain 0, so the parallel
driver with one chain and one proposal per iteration degenerates to it
trace-for-trace.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from moboa.acquisition import AcquisitionContext, qehvi_batched
from moboa.benchmarks import CandidateSet
from moboa.core import ConfigurationError

DEFAULT_P_CHANGE = (0.6, 0.3, 0.1)


@dataclass(frozen=True)
class SaConfig:
    """Annealer settings. Defaults are the hard-quench benchmark profile."""

    q: int
    t0: float = 5.0
    alpha: float = 0.95
    n_iterations: int = 4000
    p_change: tuple[float, ...] = DEFAULT_P_CHANGE
    enforce_unique: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.q < 1:
            raise ConfigurationError(f"batch size must be >= 1, got {self.q}")
        if self.t0 <= 0:
            raise ConfigurationError(f"initial temperature must be positive, got {self.t0}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError(f"cooling rate must be in (0, 1), got {self.alpha}")
        if self.n_iterations < 0:
            raise ConfigurationError("iteration count must be nonnegative")
        p = np.asarray(self.p_change, dtype=np.float64)
        if p.shape != (3,) or np.any(p < 0) or abs(float(p.sum()) - 1.0) > 1e-12:
            raise ConfigurationError(
                f"p_change must be 3 nonnegative probabilities summing to 1, got {self.p_change}"
            )
        if self.seed < 0:
            raise ConfigurationError("seed must be a nonnegative integer")
        object.__setattr__(self, "p_change", tuple(float(v) for v in p))

    @classmethod
    def campaign_profile(cls, q: int, seed: int = 0, **overrides) -> "SaConfig":
        """Slow-cooling profile for long production runs."""
        base = cls(q=q, t0=1.0, alpha=0.9999, n_iterations=100_000, seed=seed)
        return replace(base, **overrides) if overrides else base


@dataclass(frozen=True)
class ParallelSaConfig:
    """Multi-chain settings wrapping a per-chain :class:`SaConfig`."""

    base: SaConfig
    n_chains: int = 10
    proposals_per_chain: int = 2

    def __post_init__(self) -> None:
        if self.n_chains < 1 or self.proposals_per_chain < 1:
            raise ConfigurationError("need at least one chain and one proposal per chain")

    @classmethod
    def campaign_profile(cls, q: int, seed: int = 0, **overrides) -> "ParallelSaConfig":
        base = SaConfig(q=q, t0=1.0, alpha=0.9999, n_iterations=20_000, seed=seed)
        if overrides:
            base = replace(base, **overrides)
        return cls(base=base)


@dataclass
class ChainState:
    """Mutable per-chain bookkeeping used by the drivers."""

    batch: np.ndarray
    temperature: float
    best_batch: np.ndarray
    best_value: float
    current_value: float
    rng: np.random.Generator


@dataclass(frozen=True)
class SaTrace:
    """Per-iteration history of one chain."""

    iteration: np.ndarray
    temperature: np.ndarray
    current_value: np.ndarray
    best_value: np.ndarray
    accepted: np.ndarray
    n_changed: np.ndarray

    def __len__(self) -> int:
        return self.iteration.shape[0]

    @classmethod
    def from_rows(cls, rows: list[tuple]) -> "SaTrace":
        if not rows:
            empty_f = np.empty(0)
            empty_i = np.empty(0, dtype=np.int64)
            return cls(empty_i, empty_f, empty_f, empty_f, np.empty(0, dtype=bool), empty_i)
        cols = list(zip(*rows))
        return cls(
            iteration=np.array(cols[0], dtype=np.int64),
            temperature=np.array(cols[1]),
            current_value=np.array(cols[2]),
            best_value=np.array(cols[3]),
            accepted=np.array(cols[4], dtype=bool),
            n_changed=np.array(cols[5], dtype=np.int64),
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["iter", "temperature", "current", "best", "accepted", "n_changed"])
            for i in range(len(self)):
                writer.writerow(
                    [
                        int(self.iteration[i]),
                        repr(float(self.temperature[i])),
                        repr(float(self.current_value[i])),
                        repr(float(self.best_value[i])),
                        int(self.accepted[i]),
                        int(self.n_changed[i]),
                    ]
                )


class SaResult(NamedTuple):
    best_batch: np.ndarray
    best_value: float
    trace: SaTrace


class ParallelSaResult(NamedTuple):
    best_batch: np.ndarray
    best_value: float
    traces: list[SaTrace]


def chain_rng(seed: int, chain: int) -> np.random.Generator:
    """Independent stream for one chain; chain 0 is the sequential stream."""
    return np.random.default_rng(np.random.SeedSequence((seed, chain)))


def _pool_size(candidate_set) -> int:
    if isinstance(candidate_set, CandidateSet):
        return candidate_set.n
    return int(candidate_set)


def perturb(
    batch: np.ndarray,
    k: int,
    candidate_set,
    enforce_unique: bool,
    rng: np.random.Generator,
) -> np.ndarray:
    """Replace exactly k batch positions with fresh candidate indices.

    Under ``enforce_unique`` the replacements are drawn from candidates not
    already in the batch (and kept mutually distinct), so the result has q
    distinct indices; otherwise each replacement merely avoids the value it
    replaces, so exactly k positions change either way.

    Args:
        batch: current index batch of length q.
        k: number of positions to modify, 1 <= k <= q.
        candidate_set: a CandidateSet or the plain pool size N.
        enforce_unique: require all-distinct output indices.
        rng: per-chain generator.
    """
    n = _pool_size(candidate_set)
    batch = np.asarray(batch, dtype=np.int64)
    q = batch.shape[0]
    if not 1 <= k <= q:
        raise ValueError(f"k must be in [1, {q}], got {k}")
    if enforce_unique and n < q:
        raise ConfigurationError(
            f"uniqueness requires pool size >= batch size, got N={n} < q={q}"
        )
    positions = rng.choice(q, size=k, replace=False)
    result = batch.copy()
    excluded = set(int(v) for v in batch) if enforce_unique else set()
    for pos in positions:
        banned = excluded if enforce_unique else {int(result[pos])}
        if len(banned) >= n:
            raise ConfigurationError(
                "no distinct replacement exists: the batch already uses the whole pool; "
                "grow the candidate set or disable uniqueness"
            )
        choice = int(rng.integers(n))
        while choice in banned:
            choice = int(rng.integers(n))
        result[pos] = choice
        if enforce_unique:
            excluded.add(choice)
    return result


def accept(delta: float, temperature: float, rng: np.random.Generator) -> bool:
    """Metropolis rule: improvements always pass, others pass with exp(delta/T)."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    if delta > 0:
        return True
    return float(rng.random()) < math.exp(delta / temperature)


def cool(temperature: float, alpha: float) -> float:
    """One geometric cooling step."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"cooling rate must be in (0, 1), got {alpha}")
    return alpha * temperature


def _sample_k(rng: np.random.Generator, p_change: tuple[float, ...], q: int) -> int:
    # k is drawn over {1,2,3}; clamp covers q < 3 batches
    k = int(rng.choice(3, p=np.asarray(p_change))) + 1
    return min(k, q)


def _initial_batch(
    rng: np.random.Generator, n: int, q: int, enforce_unique: bool
) -> np.ndarray:
    if enforce_unique:
        if n < q:
            raise ConfigurationError(
                f"uniqueness requires pool size >= batch size, got N={n} < q={q}"
            )
        return np.asarray(rng.choice(n, size=q, replace=False), dtype=np.int64)
    return np.asarray(rng.integers(n, size=q), dtype=np.int64)


def run_sequential(ctx: AcquisitionContext, config: SaConfig) -> SaResult:
    """Single-chain annealing of the acquisition surface.

    Returns the best-ever batch (the final batch remains readable from the
    trace), its acquisition value, and the full per-iteration trace.
    Deterministic given the context and ``config.seed``.
    """
    n = ctx.n_candidates
    rng = chain_rng(config.seed, 0)
    batch = _initial_batch(rng, n, config.q, config.enforce_unique)
    current = float(qehvi_batched(ctx, [batch])[0])
    best_batch, best_value = batch.copy(), current
    temperature = config.t0
    rows: list[tuple] = []
    for it in range(config.n_iterations):
        k = _sample_k(rng, config.p_change, config.q)
        proposal = perturb(batch, k, n, config.enforce_unique, rng)
        value = float(qehvi_batched(ctx, [proposal])[0])
        accepted = accept(value - current, temperature, rng)
        if accepted:
            batch, current = proposal, value
            if current > best_value:
                best_batch, best_value = proposal.copy(), current
        rows.append((it, temperature, current, best_value, accepted, k))
        temperature = cool(temperature, config.alpha)
    return SaResult(best_batch, best_value, SaTrace.from_rows(rows))


def run_parallel(ctx: AcquisitionContext, config: ParallelSaConfig) -> ParallelSaResult:
    """Multi-chain annealing with batched proposal scoring.

    Each iteration every chain perturbs its batch into r proposals; all
    M*r proposals are scored in one batched call; each chain applies the
    Metropolis rule to its best proposal (lowest index wins ties); then all
    temperatures cool together. The returned batch is the best-ever across
    chains. Deterministic given the context and ``config.base.seed``.
    """
    base = config.base
    n = ctx.n_candidates
    n_chains, r = config.n_chains, config.proposals_per_chain
    chains: list[ChainState] = []
    initial_batches = []
    for c in range(n_chains):
        rng = chain_rng(base.seed, c)
        batch = _initial_batch(rng, n, base.q, base.enforce_unique)
        initial_batches.append(batch)
        chains.append(
            ChainState(
                batch=batch,
                temperature=base.t0,
                best_batch=batch.copy(),
                best_value=-np.inf,
                current_value=-np.inf,
                rng=rng,
            )
        )
    initial_values = qehvi_batched(ctx, initial_batches)
    for c, chain in enumerate(chains):
        chain.current_value = float(initial_values[c])
        chain.best_value = float(initial_values[c])

    rows: list[list[tuple]] = [[] for _ in range(n_chains)]
    for it in range(base.n_iterations):
        proposals: list[np.ndarray] = []
        ks: list[list[int]] = []
        for chain in chains:
            chain_ks = []
            for _ in range(r):
                k = _sample_k(chain.rng, base.p_change, base.q)
                proposals.append(perturb(chain.batch, k, n, base.enforce_unique, chain.rng))
                chain_ks.append(k)
            ks.append(chain_ks)
        values = qehvi_batched(ctx, proposals)
        for c, chain in enumerate(chains):
            chain_values = values[c * r : (c + 1) * r]
            j_star = int(np.argmax(chain_values))
            value = float(chain_values[j_star])
            accepted = accept(value - chain.current_value, chain.temperature, chain.rng)
            if accepted:
                chain.batch = proposals[c * r + j_star]
                chain.current_value = value
                if value > chain.best_value:
                    chain.best_batch = chain.batch.copy()
                    chain.best_value = value
            rows[c].append(
                (it, chain.temperature, chain.current_value, chain.best_value, accepted, ks[c][j_star])
            )
        for chain in chains:
            chain.temperature = cool(chain.temperature, base.alpha)

    best_chain = int(np.argmax([chain.best_value for chain in chains]))
    traces = [SaTrace.from_rows(chain_rows) for chain_rows in rows]
    return ParallelSaResult(
        chains[best_chain].best_batch,
        chains[best_chain].best_value,
        traces,
    )
