"""Monte-Carlo batch expected-hypervolume-improvement acquisition.

The estimator draws S joint posterior samples for a proposed batch using a
fixed tensor of standard-normal base draws (common random numbers), computes
the exact hypervolume improvement of each sampled objective set over the
current front, and averages. Because the base draws are frozen for the
lifetime of one annealing run, the acquisition surface seen by the optimizer
is deterministic.

:class:`AcquisitionContext` precomputes cross-covariances between the whole
candidate pool and the training set so that scoring an index batch costs a
few small matrix products rather than fresh kernel evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from moboa.benchmarks import CandidateSet
from moboa.core import DimensionError, ParetoFront, as_vector
from moboa.gp import BatchPosterior, GpModel, _factor_for_sampling, matern52, sample
from moboa.hypervolume import _hv_nd, _hvi_batch_kernel, _prepare


@dataclass(frozen=True)
class QehviConfig:
    """Reference point plus frozen Monte-Carlo base draws.

    ``base_normals`` has shape (n_mc_samples, q, m) and must stay fixed for
    one optimizer run; regenerate per outer-loop iteration.
    """

    reference: np.ndarray
    base_normals: np.ndarray

    def __post_init__(self) -> None:
        ref = as_vector(self.reference).copy()
        normals = np.asarray(self.base_normals, dtype=np.float64).copy()
        if normals.ndim != 3:
            raise DimensionError(
                f"base_normals must be (S, q, m), got shape {normals.shape}"
            )
        if normals.shape[2] != ref.shape[0]:
            raise DimensionError(
                f"base_normals cover {normals.shape[2]} objectives, reference has {ref.shape[0]}"
            )
        ref.setflags(write=False)
        normals.setflags(write=False)
        object.__setattr__(self, "reference", ref)
        object.__setattr__(self, "base_normals", normals)

    @classmethod
    def create(
        cls,
        reference,
        q: int,
        m: int,
        n_mc_samples: int = 128,
        seed: int = 0,
        base_normals: np.ndarray | None = None,
    ) -> "QehviConfig":
        if base_normals is None:
            base_normals = np.random.default_rng(seed).standard_normal((n_mc_samples, q, m))
        return cls(reference=as_vector(reference), base_normals=base_normals)

    @property
    def n_mc_samples(self) -> int:
        return self.base_normals.shape[0]

    @property
    def q(self) -> int:
        return self.base_normals.shape[1]


class AcquisitionContext:
    """Immutable bundle of models, front, config and candidate pool.

    Construction precomputes, per objective: predictive means for every
    candidate, the triangular-solve matrix needed for batch covariances, and
    the prepared front with its hypervolume. Treat instances as read-only.
    """

    def __init__(
        self,
        models: list[GpModel],
        front: ParetoFront,
        config: QehviConfig,
        candidate_set: CandidateSet,
    ) -> None:
        if len(models) != config.base_normals.shape[2]:
            raise DimensionError(
                f"{len(models)} models but base_normals cover {config.base_normals.shape[2]} objectives"
            )
        if front.m != len(models):
            raise DimensionError(f"front has {front.m} objectives, got {len(models)} models")
        self.models = list(models)
        self.front = front
        self.config = config
        self.candidate_set = candidate_set

        self._cand_norm = [m.normalize_inputs(candidate_set.points) for m in models]
        self._std = [m.std_params() for m in models]  # (ls, signal, noise, const)
        self._t_std = [m.target_std for m in models]
        self._cand_means = []
        self._v = []
        for j, model in enumerate(models):
            ls, signal, _, const = self._std[j]
            kxc = matern52(model.train_inputs, self._cand_norm[j], ls, signal)
            mean_std = const + kxc.T @ model.alpha
            self._cand_means.append(model.target_mean + model.target_std * mean_std)
            self._v.append(np.linalg.solve(model.chol, kxc))
        self._prepared_front = _prepare(front.points, config.reference)
        self._hv_front = (
            float(_hv_nd(self._prepared_front)) if self._prepared_front.shape[0] else 0.0
        )

    @property
    def n_candidates(self) -> int:
        return self.candidate_set.n

    @property
    def m(self) -> int:
        return len(self.models)

    def hv_front(self) -> float:
        """Hypervolume of the current front under the configured reference."""
        return self._hv_front

    def posterior_for_indices(self, indices: np.ndarray) -> BatchPosterior:
        """Joint posterior over candidate rows, from the precomputed caches."""
        indices = _check_indices(indices, self.n_candidates)
        q = indices.shape[0]
        means = np.empty((self.m, q))
        covs = np.empty((self.m, q, q))
        for j, model in enumerate(self.models):
            ls, signal, _, _ = self._std[j]
            b = self._cand_norm[j][indices]
            kbb = matern52(b, b, ls, signal)
            vb = self._v[j][:, indices]
            cov_std = kbb - vb.T @ vb
            cov_std = 0.5 * (cov_std + cov_std.T)
            means[j] = self._cand_means[j][indices]
            covs[j] = model.target_std**2 * cov_std
        return BatchPosterior(means=means, covariances=covs)


def _check_indices(indices, n: int) -> np.ndarray:
    arr = np.asarray(indices)
    if arr.ndim != 1:
        raise DimensionError(f"batch indices must be 1-D, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise ValueError("batch must contain at least one index")
    if not np.issubdtype(arr.dtype, np.integer):
        raise IndexError(f"batch indices must be integers, got dtype {arr.dtype}")
    if np.any(arr < 0) or np.any(arr >= n):
        raise IndexError(f"batch indices out of range [0, {n}): {arr.tolist()}")
    return arr.astype(np.int64)


def _samples_for_posterior(post: BatchPosterior, base_normals: np.ndarray) -> np.ndarray:
    out = np.empty((base_normals.shape[0], post.q, post.m))
    for j in range(post.m):
        factor = _factor_for_sampling(post.covariances[j])
        out[:, :, j] = post.means[j] + base_normals[:, :, j] @ factor.T
    return out


def qehvi_from_posterior(
    post: BatchPosterior,
    base_normals: np.ndarray,
    front: ParetoFront,
    reference,
) -> float:
    """Estimator applied to an explicit posterior (no candidate caching).

    With a zero covariance this reduces exactly to the hypervolume
    improvement of the posterior means.
    """
    ref = as_vector(reference)
    samples = sample(post, base_normals=base_normals)
    prepared = _prepare(front.points, ref)
    hv_front = float(_hv_nd(prepared)) if prepared.shape[0] else 0.0
    improvements = _hvi_batch_kernel(prepared, np.ascontiguousarray(samples), ref, hv_front)
    return float(np.mean(improvements))


def qehvi_batched(ctx: AcquisitionContext, batches) -> np.ndarray:
    """Score many index batches on the shared deterministic surface.

    Elementwise identical to calling :func:`qehvi` per batch; batching exists
    to amortize sampling and hypervolume kernel dispatch across proposals.
    """
    batch_list = [np.asarray(b) for b in batches]
    if not batch_list:
        return np.empty(0)
    q = ctx.config.q
    for b in batch_list:
        if b.shape[0] != q:
            raise DimensionError(
                f"batch size {b.shape[0]} does not match base_normals q={q}"
            )
    n_batches = len(batch_list)
    base = ctx.config.base_normals
    s = base.shape[0]
    samples = np.empty((n_batches * s, q, ctx.m))
    for i, b in enumerate(batch_list):
        post = ctx.posterior_for_indices(b)
        samples[i * s : (i + 1) * s] = _samples_for_posterior(post, base)
    improvements = _hvi_batch_kernel(
        ctx._prepared_front, samples, ctx.config.reference, ctx._hv_front
    )
    return improvements.reshape(n_batches, s).mean(axis=1)


def qehvi(ctx: AcquisitionContext, batch_indices) -> float:
    """Monte-Carlo expected hypervolume improvement of one index batch.

    Deterministic given the context (fixed base draws) and always >= 0.
    """
    return float(qehvi_batched(ctx, [batch_indices])[0])


def qehvi_at_points(ctx: AcquisitionContext, point_batches: np.ndarray) -> np.ndarray:
    """Score batches of arbitrary in-box points (continuous relaxation).

    Args:
        point_batches: (B, q, d) stack of candidate batches in the original
            input space; q must match the configured base draws.

    Returns:
        Length-B array of acquisition values on the same deterministic
        surface used for index batches.
    """
    pts = np.asarray(point_batches, dtype=np.float64)
    if pts.ndim == 2:
        pts = pts[None]
    n_batches, q, d = pts.shape
    if q != ctx.config.q:
        raise DimensionError(f"batch size {q} does not match base_normals q={ctx.config.q}")
    base = ctx.config.base_normals
    s = base.shape[0]
    flat = pts.reshape(n_batches * q, d)
    samples = np.empty((n_batches * s, q, ctx.m))
    means = np.empty((ctx.m, n_batches, q))
    covs = np.empty((ctx.m, n_batches, q, q))
    for j, model in enumerate(ctx.models):
        ls, signal, _, const = ctx._std[j]
        b = model.normalize_inputs(flat)
        kxb = matern52(model.train_inputs, b, ls, signal)
        v = np.linalg.solve(model.chol, kxb)
        mean_std = const + kxb.T @ model.alpha
        for i in range(n_batches):
            sl = slice(i * q, (i + 1) * q)
            kbb = matern52(b[sl], b[sl], ls, signal)
            cov_std = kbb - v[:, sl].T @ v[:, sl]
            cov_std = 0.5 * (cov_std + cov_std.T)
            means[j, i] = model.target_mean + model.target_std * mean_std[sl]
            covs[j, i] = model.target_std**2 * cov_std
    for i in range(n_batches):
        post = BatchPosterior(means=means[:, i], covariances=covs[:, i])
        samples[i * s : (i + 1) * s] = _samples_for_posterior(post, base)
    improvements = _hvi_batch_kernel(
        ctx._prepared_front, samples, ctx.config.reference, ctx._hv_front
    )
    return improvements.reshape(n_batches, s).mean(axis=1)
