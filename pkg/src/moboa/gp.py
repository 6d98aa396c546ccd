"""Independent per-objective Gaussian-process surrogates.

Each objective gets its own Matérn-5/2 ARD kernel with a constant mean.
Inputs are normalized to the unit box and targets standardized to zero mean
and unit variance before fitting; :class:`KernelParams` reports
``signal_variance``, ``noise_variance`` and ``constant_mean`` in the
original target units, while ``lengthscales`` live in normalized input
space. Hyperparameters are chosen by multi-start gradient ascent on the log
marginal likelihood with analytic gradients and backtracking line search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numpy.linalg import LinAlgError

from moboa.core import Dataset, DimensionError, NumericalError

SQRT5 = math.sqrt(5.0)

# escalation sequence applied to the kernel diagonal on Cholesky failure
JITTER_LADDER = (0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)

DEFAULT_NOISE_FLOOR = 1e-6


@dataclass(frozen=True)
class KernelParams:
    """Matérn-5/2 hyperparameters.

    ``lengthscales`` apply to unit-box-normalized inputs; the variance and
    mean fields are in the units of the targets they were fitted on.
    """

    lengthscales: np.ndarray
    signal_variance: float
    noise_variance: float
    constant_mean: float

    def __post_init__(self) -> None:
        ls = np.asarray(self.lengthscales, dtype=np.float64).copy()
        if np.any(ls <= 0) or self.signal_variance <= 0 or self.noise_variance < 0:
            raise ValueError("lengthscales and signal_variance must be positive")
        ls.setflags(write=False)
        object.__setattr__(self, "lengthscales", ls)


@dataclass(frozen=True)
class FitConfig:
    n_restarts: int = 8
    max_iters: int = 200
    seed: int = 0
    noise_floor: float = DEFAULT_NOISE_FLOOR
    grad_tol: float = 1e-5
    init_params: KernelParams | None = None


@dataclass(frozen=True)
class GpModel:
    """A fitted single-objective GP with a cached Cholesky factorization."""

    params: KernelParams
    train_inputs: np.ndarray  # (n, d) normalized
    train_targets: np.ndarray  # (n,) standardized
    target_mean: float
    target_std: float
    input_lower: np.ndarray
    input_upper: np.ndarray
    chol: np.ndarray  # lower factor of K + (noise + jitter) I, standardized space
    alpha: np.ndarray  # solve(K + noise I, y_std - c_std)
    log_marginal: float
    jitter: float

    @property
    def n(self) -> int:
        return self.train_inputs.shape[0]

    @property
    def d(self) -> int:
        return self.train_inputs.shape[1]

    def normalize_inputs(self, x: np.ndarray) -> np.ndarray:
        width = self.input_upper - self.input_lower
        return (np.asarray(x, dtype=np.float64) - self.input_lower) / width

    def std_params(self) -> tuple[np.ndarray, float, float, float]:
        """(lengthscales, signal, noise, mean) in standardized target space."""
        var = self.target_std**2
        return (
            self.params.lengthscales,
            self.params.signal_variance / var,
            self.params.noise_variance / var,
            (self.params.constant_mean - self.target_mean) / self.target_std,
        )


@dataclass(frozen=True)
class BatchPosterior:
    """Joint posterior over a batch of q points, one block per objective.

    ``means`` is (m, q) and ``covariances`` (m, q, q), both in original
    target units. Objectives are mutually independent, so there is no
    cross-objective covariance.
    """

    means: np.ndarray
    covariances: np.ndarray

    @property
    def m(self) -> int:
        return self.means.shape[0]

    @property
    def q(self) -> int:
        return self.means.shape[1]


def matern52(x1: np.ndarray, x2: np.ndarray, lengthscales: np.ndarray, signal_variance: float) -> np.ndarray:
    """Matérn-5/2 cross-covariance between two point sets (no noise term)."""
    diff = x1[:, None, :] - x2[None, :, :]
    r2 = np.sum((diff / lengthscales) ** 2, axis=2)
    r = np.sqrt(r2)
    return signal_variance * (1.0 + SQRT5 * r + (5.0 / 3.0) * r2) * np.exp(-SQRT5 * r)


def _cholesky_with_ladder(k: np.ndarray) -> tuple[np.ndarray, float]:
    """Cholesky factor after escalating diagonal jitter; raises on exhaustion."""
    scale = float(np.mean(np.diag(k))) or 1.0
    for level in JITTER_LADDER:
        try:
            return np.linalg.cholesky(k + level * scale * np.eye(k.shape[0])), level * scale
        except LinAlgError:
            continue
    raise NumericalError(
        f"kernel matrix not positive definite after jitter ladder {JITTER_LADDER}"
    )


def _lml_terms(
    theta_ls: np.ndarray,
    signal: float,
    noise: float,
    const: float,
    d2: np.ndarray,
    targets: np.ndarray,
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Shared pieces for the LML and its gradient.

    ``d2`` is the (n, n, d) tensor of squared coordinate differences.
    Returns (lml, L, alpha, s, base) where ``s`` holds per-dimension scaled
    squared distances and ``base`` the noiseless kernel without variance.
    """
    n = targets.shape[0]
    s = d2 / theta_ls**2  # (n, n, d)
    r2 = np.sum(s, axis=2)
    r = np.sqrt(r2)
    base = (1.0 + SQRT5 * r + (5.0 / 3.0) * r2) * np.exp(-SQRT5 * r)
    k = signal * base + noise * np.eye(n)
    L, _ = _cholesky_with_ladder(k)
    resid = targets - const
    z = np.linalg.solve(L, resid)
    alpha = np.linalg.solve(L.T, z)
    lml = -0.5 * float(resid @ alpha) - float(np.sum(np.log(np.diag(L)))) - 0.5 * n * math.log(2.0 * math.pi)
    return lml, L, alpha, s, base


def log_marginal_likelihood(
    params: KernelParams, inputs: np.ndarray, targets: np.ndarray
) -> float:
    """Exact Gaussian log marginal likelihood of ``targets`` under ``params``.

    The parameters are interpreted in the space of the supplied inputs and
    targets; no normalization or standardization is applied here.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    d2 = (inputs[:, None, :] - inputs[None, :, :]) ** 2
    lml, *_ = _lml_terms(
        params.lengthscales,
        params.signal_variance,
        params.noise_variance,
        params.constant_mean,
        d2,
        targets,
    )
    return lml


def log_marginal_likelihood_grad(
    params: KernelParams, inputs: np.ndarray, targets: np.ndarray
) -> tuple[float, np.ndarray]:
    """LML and its analytic gradient.

    Gradient layout: [d/d log lengthscale_1..d, d/d log signal_variance,
    d/d log noise_variance, d/d constant_mean].
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    n = targets.shape[0]
    d2 = (inputs[:, None, :] - inputs[None, :, :]) ** 2
    signal, noise = params.signal_variance, params.noise_variance
    lml, L, alpha, s, base = _lml_terms(
        params.lengthscales, signal, noise, params.constant_mean, d2, targets
    )
    k_inv = np.linalg.solve(L.T, np.linalg.solve(L, np.eye(n)))
    m_mat = np.outer(alpha, alpha) - k_inv

    r = np.sqrt(np.sum(s, axis=2))
    # d base / d log ls_i = (5/3)(1 + sqrt5 r) exp(-sqrt5 r) * s_i
    core = (5.0 / 3.0) * (1.0 + SQRT5 * r) * np.exp(-SQRT5 * r)
    w = m_mat * (signal * core)
    grad_ls = 0.5 * np.einsum("ab,abd->d", w, s)
    grad_signal = 0.5 * float(np.sum(m_mat * (signal * base)))
    grad_noise = 0.5 * noise * float(np.trace(m_mat))
    grad_mean = float(np.sum(alpha))
    grad = np.concatenate([grad_ls, [grad_signal, grad_noise, grad_mean]])
    return lml, grad


def _optimize_single_start(
    theta0: np.ndarray,
    d2: np.ndarray,
    targets: np.ndarray,
    noise_floor: float,
    max_iters: int,
    grad_tol: float,
) -> tuple[np.ndarray, float]:
    """Backtracking gradient ascent in log-parameter space.

    theta = [log ls (d), log signal, t_noise, const] with
    noise = floor + exp(t_noise), so the floor is always respected.
    """
    d = d2.shape[2]
    lo = np.concatenate([np.full(d, -10.0), [-10.0, -30.0, -10.0]])
    hi = np.concatenate([np.full(d, 10.0), [10.0, 5.0, 10.0]])
    theta = np.clip(theta0, lo, hi)

    def value_and_grad(th: np.ndarray) -> tuple[float, np.ndarray]:
        ls = np.exp(th[:d])
        signal = math.exp(th[d])
        noise = noise_floor + math.exp(th[d + 1])
        const = th[d + 2]
        try:
            lml, L, alpha, s, base = _lml_terms(ls, signal, noise, const, d2, targets)
        except NumericalError:
            return -np.inf, np.zeros_like(th)
        n = targets.shape[0]
        k_inv = np.linalg.solve(L.T, np.linalg.solve(L, np.eye(n)))
        m_mat = np.outer(alpha, alpha) - k_inv
        r = np.sqrt(np.sum(s, axis=2))
        core = (5.0 / 3.0) * (1.0 + SQRT5 * r) * np.exp(-SQRT5 * r)
        g = np.empty_like(th)
        g[:d] = 0.5 * np.einsum("ab,abd->d", m_mat * (signal * core), s)
        g[d] = 0.5 * float(np.sum(m_mat * (signal * base)))
        g[d + 1] = 0.5 * math.exp(th[d + 1]) * float(np.trace(m_mat))
        g[d + 2] = float(np.sum(alpha))
        return lml, g

    value, grad = value_and_grad(theta)
    if not np.isfinite(value):
        return theta, -np.inf
    lr = 0.1
    for _ in range(max_iters):
        gnorm = float(np.max(np.abs(grad)))
        if gnorm < grad_tol:
            break
        improved = False
        step = lr
        for _ in range(30):
            cand = np.clip(theta + step * grad, lo, hi)
            cand_value, cand_grad = value_and_grad(cand)
            if cand_value > value + 1e-4 * step * float(grad @ grad):
                theta, value, grad = cand, cand_value, cand_grad
                lr = min(step * 2.0, 1.0)
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return theta, value


def fit(
    dataset: Dataset,
    objective_index: int,
    config: FitConfig = FitConfig(),
    input_bounds: tuple[np.ndarray, np.ndarray] | None = None,
) -> GpModel:
    """Fit one objective's GP by multi-start gradient ascent on the LML.

    Args:
        dataset: observed evaluations (needs at least two).
        objective_index: which objective column to model.
        config: restart/iteration budget and optional warm-start parameters.
        input_bounds: (lower, upper) box used to normalize inputs; defaults
            to the data's own bounding box.

    Returns:
        The model with the best log marginal likelihood across restarts.
    """
    n = len(dataset)
    if n < 2:
        raise ValueError(f"GP fitting needs at least 2 evaluations, got {n}")
    x_raw = dataset.inputs()
    y_raw = dataset.objectives()[:, objective_index]
    if not np.all(np.isfinite(y_raw)):
        raise ValueError(f"objective {objective_index} has non-finite targets")

    if input_bounds is None:
        lower, upper = x_raw.min(axis=0), x_raw.max(axis=0)
    else:
        lower = np.asarray(input_bounds[0], dtype=np.float64)
        upper = np.asarray(input_bounds[1], dtype=np.float64)
    width = upper - lower
    width = np.where(width > 0, width, 1.0)
    upper = lower + width
    x = (x_raw - lower) / width

    t_mean = float(np.mean(y_raw))
    t_std = float(np.std(y_raw))
    if t_std < 1e-12:
        t_std = 1.0
    y = (y_raw - t_mean) / t_std

    d = x.shape[1]
    d2 = (x[:, None, :] - x[None, :, :]) ** 2
    rng = np.random.default_rng((config.seed, objective_index))

    starts: list[np.ndarray] = []
    if config.init_params is not None:
        p = config.init_params
        std_signal = max(p.signal_variance / t_std**2, 1e-12)
        std_noise = max(p.noise_variance / t_std**2 - config.noise_floor, 1e-12)
        std_const = (p.constant_mean - t_mean) / t_std
        starts.append(
            np.concatenate(
                [np.log(p.lengthscales), [math.log(std_signal), math.log(std_noise), std_const]]
            )
        )
    # deterministic interpolation-first start: noise pinned at the floor wins
    # LML ties against noisier solutions on degenerate (flat-ridge) instances
    starts.append(np.concatenate([np.full(d, math.log(0.3)), [0.0, -27.0, 0.0]]))
    while len(starts) < config.n_restarts:
        starts.append(
            np.concatenate(
                [
                    rng.normal(math.log(0.3), 0.7, size=d),
                    [rng.normal(0.0, 0.5), rng.normal(-6.0, 1.0), 0.0],
                ]
            )
        )

    outcomes: list[tuple[np.ndarray, float]] = []
    for theta0 in starts:
        outcomes.append(
            _optimize_single_start(
                theta0, d2, y, config.noise_floor, config.max_iters, config.grad_tol
            )
        )
    finite = [(theta, value) for theta, value in outcomes if np.isfinite(value)]
    if not finite:
        raise NumericalError("all fitting restarts failed to produce a finite LML")
    top = max(value for _, value in finite)
    # the signal/noise split can sit on a flat likelihood ridge (e.g. tiny
    # datasets); among near-ties prefer the interpolating (low-noise) solution
    tied = [
        (theta, value)
        for theta, value in finite
        if value >= top - 1e-6 * max(1.0, abs(top))
    ]
    best_theta, best_value = min(tied, key=lambda tv: tv[0][d + 1])

    ls = np.exp(best_theta[:d])
    std_signal = math.exp(best_theta[d])
    std_noise = config.noise_floor + math.exp(best_theta[d + 1])
    std_const = best_theta[d + 2]

    k = matern52(x, x, ls, std_signal) + std_noise * np.eye(n)
    L, jitter = _cholesky_with_ladder(k)
    alpha = np.linalg.solve(L.T, np.linalg.solve(L, y - std_const))

    params = KernelParams(
        lengthscales=ls,
        signal_variance=std_signal * t_std**2,
        noise_variance=std_noise * t_std**2,
        constant_mean=t_mean + t_std * std_const,
    )
    return GpModel(
        params=params,
        train_inputs=x,
        train_targets=y,
        target_mean=t_mean,
        target_std=t_std,
        input_lower=lower,
        input_upper=upper,
        chol=L,
        alpha=alpha,
        log_marginal=best_value,
        jitter=jitter,
    )


def posterior(models: list[GpModel], batch: np.ndarray) -> BatchPosterior:
    """Joint posterior of every objective over a batch of raw-space points.

    Args:
        models: one fitted GP per objective.
        batch: (q, d) matrix in the original input space.

    Returns:
        BatchPosterior with de-standardized means and covariances; the
        covariance diagonal equals the pointwise posterior variances.
    """
    if not models:
        raise ValueError("posterior requires at least one model")
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2:
        raise DimensionError(f"batch must be (q, d), got shape {batch.shape}")
    q = batch.shape[0]
    m = len(models)
    means = np.empty((m, q))
    covs = np.empty((m, q, q))
    for j, model in enumerate(models):
        if batch.shape[1] != model.d:
            raise DimensionError(
                f"batch has {batch.shape[1]} coords, model {j} expects {model.d}"
            )
        ls, signal, _, const = model.std_params()
        b = model.normalize_inputs(batch)
        kxb = matern52(model.train_inputs, b, ls, signal)  # (n, q)
        kbb = matern52(b, b, ls, signal)
        mean_std = const + kxb.T @ model.alpha
        v = np.linalg.solve(model.chol, kxb)  # (n, q)
        cov_std = kbb - v.T @ v
        cov_std = 0.5 * (cov_std + cov_std.T)
        means[j] = model.target_mean + model.target_std * mean_std
        covs[j] = model.target_std**2 * cov_std
    return BatchPosterior(means=means, covariances=covs)


def _factor_for_sampling(cov: np.ndarray) -> np.ndarray:
    """Factor F with F Fᵀ = cov; tolerates rank-deficient covariances.

    Exactly duplicated batch points produce exactly duplicated covariance
    rows; those are collapsed before factorization and the factor rows
    re-expanded, so twins consume the same base normals and sample
    identically (bit-for-bit). Remaining non-PSD failures fall back to an
    eigendecomposition with negative eigenvalues clamped to zero; no jitter
    is added, which would break the twin property.
    """
    q = cov.shape[0]
    seen: dict[bytes, int] = {}
    unique_rows: list[int] = []
    row_map = np.empty(q, dtype=np.int64)
    for i in range(q):
        key = cov[i].tobytes()
        if key in seen:
            row_map[i] = seen[key]
        else:
            seen[key] = len(unique_rows)
            row_map[i] = len(unique_rows)
            unique_rows.append(i)
    if len(unique_rows) < q:
        sub = cov[np.ix_(unique_rows, unique_rows)]
        sub_factor = _factor_for_sampling(sub)
        factor = np.zeros((q, q))
        factor[:, : len(unique_rows)] = sub_factor[row_map]
        return factor
    try:
        return np.linalg.cholesky(cov)
    except LinAlgError:
        pass
    try:
        eigvals, eigvecs = np.linalg.eigh(cov)
    except LinAlgError as exc:  # pragma: no cover - eigh failure is pathological
        raise NumericalError(f"covariance factorization failed: {exc}") from exc
    eigvals = np.clip(eigvals, 0.0, None)
    return eigvecs * np.sqrt(eigvals)


def sample(
    post: BatchPosterior,
    n_samples: int | None = None,
    base_normals: np.ndarray | None = None,
    seed: int | None = None,
) -> np.ndarray:
    """Draw joint posterior samples as an (S, q, m) tensor.

    Samples follow mean + F z per objective where F factors the covariance.
    Pass ``base_normals`` of shape (S, q, m) for common-random-number
    determinism, or ``n_samples`` with a ``seed`` to generate fresh draws.
    """
    q, m = post.q, post.m
    if base_normals is None:
        if n_samples is None or seed is None:
            raise ValueError("provide base_normals, or n_samples with a seed")
        base_normals = np.random.default_rng(seed).standard_normal((n_samples, q, m))
    base_normals = np.asarray(base_normals, dtype=np.float64)
    if base_normals.ndim != 3 or base_normals.shape[1:] != (q, m):
        raise DimensionError(
            f"base_normals must be (S, {q}, {m}), got shape {base_normals.shape}"
        )
    s = base_normals.shape[0]
    out = np.empty((s, q, m))
    for j in range(m):
        factor = _factor_for_sampling(post.covariances[j])
        out[:, :, j] = post.means[j] + base_normals[:, :, j] @ factor.T
    return out
