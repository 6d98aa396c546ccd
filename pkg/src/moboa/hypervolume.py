"""Exact hypervolume and hypervolume-improvement computation.

All functions use the canonical maximize orientation: the hypervolume of a
front is the Lebesgue measure of the union of boxes spanned between the
reference point and each front point. Points that do not strictly dominate
the reference contribute zero and are clipped out rather than rejected.

The 2-objective case uses a sort-and-sweep; higher dimensions use an
exclusive-volume recursion whose 2-D base case is the same sweep, so both
code paths agree bit-for-bit on 2-D inputs. The kernels are JIT-compiled
because the annealer evaluates hypervolume improvements millions of times
per campaign.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from moboa.core import DimensionError, ParetoFront, as_vector


@njit(cache=True, nogil=True)
def _hv_2d(pts: np.ndarray) -> float:
    """Sweep hypervolume for strictly positive 2-D points, reference at origin."""
    n = pts.shape[0]
    if n == 0:
        return 0.0
    order = np.argsort(pts[:, 0], kind="mergesort")
    total = 0.0
    ymax = 0.0
    for k in range(n - 1, -1, -1):
        i = order[k]
        x = pts[i, 0]
        nx = pts[order[k - 1], 0] if k > 0 else 0.0
        if pts[i, 1] > ymax:
            ymax = pts[i, 1]
        total += (x - nx) * ymax
    return total


@njit(cache=True, nogil=True)
def _pareto_filter(pts: np.ndarray) -> np.ndarray:
    """Keep the maximal rows; exact duplicates collapse to the first copy."""
    n, m = pts.shape
    keep = np.ones(n, np.bool_)
    for i in range(n):
        if not keep[i]:
            continue
        for j in range(n):
            if j == i or not keep[j]:
                continue
            ge = True
            gt = False
            for k in range(m):
                d = pts[j, k] - pts[i, k]
                if d < 0.0:
                    ge = False
                    break
                elif d > 0.0:
                    gt = True
            if ge and gt:
                keep[i] = False
                break
            if ge and not gt and j < i:
                keep[i] = False
                break
    return pts[keep]


@njit(cache=True, nogil=True)
def _hv_3d(pts: np.ndarray) -> float:
    """3-D hypervolume by sweeping z slabs, reference at origin.

    Requires rows sorted descending by the third coordinate; dominated and
    duplicate rows are tolerated. The cross-section at each slab is the 2-D
    hypervolume of the points already swept past.
    """
    n = pts.shape[0]
    if n == 0:
        return 0.0
    xy = np.empty((n, 2))
    total = 0.0
    for i in range(n):
        xy[i, 0] = pts[i, 0]
        xy[i, 1] = pts[i, 1]
        z = pts[i, 2]
        nz = pts[i + 1, 2] if i + 1 < n else 0.0
        if z - nz > 0.0:
            total += (z - nz) * _hv_2d(xy[: i + 1])
    return total


@njit(cache=True, nogil=True)
def _hv_nd(pts: np.ndarray) -> float:
    """Exclusive-volume recursion for strictly positive points, reference at origin.

    Rows must be sorted descending by the last coordinate (preserved by the
    limit sets, which also keeps the recursion shallow); for four or more
    objectives they must additionally be mutually nondominated.
    """
    n, m = pts.shape
    if n == 0:
        return 0.0
    if m == 1:
        best = pts[0, 0]
        for i in range(1, n):
            if pts[i, 0] > best:
                best = pts[i, 0]
        return best
    if m == 2:
        return _hv_2d(pts)
    if m == 3:
        return _hv_3d(pts)
    total = 0.0
    for i in range(n):
        box = 1.0
        for k in range(m):
            box *= pts[i, k]
        if i + 1 < n:
            limited = np.minimum(pts[i + 1 :], pts[i])
            total += box - _hv_nd(_pareto_filter(limited))
        else:
            total += box
    return total


@njit(cache=True, nogil=True)
def _hvi_batch_kernel(
    front_t: np.ndarray, samples: np.ndarray, ref: np.ndarray, hv_front: float
) -> np.ndarray:
    """Per-sample hypervolume improvement against a fixed prepared front.

    ``front_t`` must already be clipped, translated to the origin, sorted
    descending by the last coordinate and Pareto-filtered; ``samples`` is the
    raw (S, q, m) tensor of candidate objective vectors.
    """
    S, q, m = samples.shape
    F = front_t.shape[0]
    out = np.empty(S)
    comb = np.empty((F + q, m))
    comb[:F] = front_t
    for s in range(S):
        cnt = F
        for i in range(q):
            ok = True
            for k in range(m):
                if samples[s, i, k] - ref[k] <= 0.0:
                    ok = False
                    break
            if ok:
                for k in range(m):
                    comb[cnt, k] = samples[s, i, k] - ref[k]
                cnt += 1
        if cnt == F:
            out[s] = 0.0
            continue
        sub = comb[:cnt].copy()
        if m == 2:
            # the sweep tolerates dominated rows; skip sorting and filtering
            v = _hv_2d(sub) - hv_front
        else:
            order = np.argsort(sub[:, m - 1], kind="mergesort")
            sorted_pts = np.ascontiguousarray(sub[order[::-1]])
            if m == 3:
                v = _hv_3d(sorted_pts) - hv_front
            else:
                v = _hv_nd(_pareto_filter(sorted_pts)) - hv_front
        out[s] = v if v > 0.0 else 0.0
    return out


def _front_points(front: ParetoFront | np.ndarray) -> np.ndarray:
    pts = front.points if isinstance(front, ParetoFront) else np.asarray(front, dtype=np.float64)
    if pts.ndim != 2:
        raise DimensionError(f"front must be a (k, m) matrix, got shape {pts.shape}")
    return pts


def _prepare(pts: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Clip to strict dominators of the reference, translate, sort, filter."""
    if pts.shape[0] == 0:
        return np.empty((0, ref.shape[0]))
    mask = np.all(pts > ref, axis=1)
    pts_t = np.ascontiguousarray(pts[mask] - ref, dtype=np.float64)
    if pts_t.shape[0] == 0:
        return pts_t
    order = np.argsort(pts_t[:, -1], kind="mergesort")[::-1]
    return _pareto_filter(np.ascontiguousarray(pts_t[order]))


def _check_dims(pts: np.ndarray, ref: np.ndarray) -> None:
    if pts.shape[0] > 0 and pts.shape[1] != ref.shape[0]:
        raise DimensionError(
            f"front has {pts.shape[1]} objectives, reference has {ref.shape[0]}"
        )


def hv(front: ParetoFront | np.ndarray, reference) -> float:
    """Exact hypervolume dominated by ``front`` and bounded by ``reference``.

    Args:
        front: a ParetoFront or raw (k, m) array of objective vectors in
            maximize orientation. Dominated or duplicate rows are tolerated.
        reference: length-m reference point strictly dominated by every
            contributing front point.

    Returns:
        The Lebesgue measure of the union of boxes [reference, p]; zero for
        an empty (or fully clipped) front.
    """
    ref = as_vector(reference)
    pts = _front_points(front)
    _check_dims(pts, ref)
    prepared = _prepare(pts, ref)
    if prepared.shape[0] == 0:
        return 0.0
    return float(_hv_nd(prepared))


def hv_sweep_2d(front: ParetoFront | np.ndarray, reference) -> float:
    """2-objective sweep entry point (same preparation as :func:`hv`)."""
    ref = as_vector(reference)
    pts = _front_points(front)
    _check_dims(pts, ref)
    if ref.shape[0] != 2:
        raise DimensionError(f"sweep requires m=2, got m={ref.shape[0]}")
    prepared = _prepare(pts, ref)
    if prepared.shape[0] == 0:
        return 0.0
    return float(_hv_2d(prepared))


def hv_recursive(front: ParetoFront | np.ndarray, reference) -> float:
    """General recursion entry point (same preparation as :func:`hv`)."""
    ref = as_vector(reference)
    pts = _front_points(front)
    _check_dims(pts, ref)
    prepared = _prepare(pts, ref)
    if prepared.shape[0] == 0:
        return 0.0
    return float(_hv_nd(prepared))


def hvi(front: ParetoFront | np.ndarray, new_points, reference) -> float:
    """Hypervolume improvement from adding ``new_points`` to ``front``.

    Equals ``hv(front ∪ new_points) - hv(front)`` and is clamped at zero
    (the union measure can only grow).
    """
    ref = as_vector(reference)
    pts = _front_points(front)
    _check_dims(pts, ref)
    new = np.asarray(new_points, dtype=np.float64)
    if new.ndim == 1:
        new = new[None, :]
    if new.shape[0] > 0 and new.shape[1] != ref.shape[0]:
        raise DimensionError(
            f"new points have {new.shape[1]} objectives, reference has {ref.shape[0]}"
        )
    prepared = _prepare(pts, ref)
    hv_front = float(_hv_nd(prepared)) if prepared.shape[0] else 0.0
    if new.shape[0] == 0:
        return 0.0
    samples = np.ascontiguousarray(new[None, :, :])
    return float(_hvi_batch_kernel(prepared, samples, ref, hv_front)[0])


def hvi_of_samples(
    front: ParetoFront | np.ndarray, samples: np.ndarray, reference
) -> np.ndarray:
    """Vectorized :func:`hvi` over an (S, q, m) stack of point sets.

    Element s equals ``hvi(front, samples[s], reference)`` bit-for-bit; this
    exists so Monte-Carlo acquisition estimates amortize front preparation.
    """
    ref = as_vector(reference)
    pts = _front_points(front)
    _check_dims(pts, ref)
    samples = np.ascontiguousarray(samples, dtype=np.float64)
    if samples.ndim != 3 or samples.shape[2] != ref.shape[0]:
        raise DimensionError(
            f"samples must be (S, q, {ref.shape[0]}), got shape {samples.shape}"
        )
    prepared = _prepare(pts, ref)
    hv_front = float(_hv_nd(prepared)) if prepared.shape[0] else 0.0
    return _hvi_batch_kernel(prepared, samples, ref, hv_front)


def hv_monte_carlo(
    front: ParetoFront | np.ndarray,
    reference,
    upper_bounds,
    n_samples: int,
    seed: int,
) -> tuple[float, float]:
    """Unbiased box-sampling estimate of the hypervolume, with standard error.

    Used only as a test oracle for the exact algorithms. Uniform samples are
    drawn in the box [reference, upper_bounds]; the dominated fraction times
    the box volume estimates the hypervolume.

    Returns:
        (estimate, standard_error)
    """
    ref = as_vector(reference)
    upper = as_vector(upper_bounds)
    pts = _front_points(front)
    _check_dims(pts, ref)
    if upper.shape[0] != ref.shape[0]:
        raise DimensionError("upper_bounds dimension mismatch")
    contributing = pts[np.all(pts > ref, axis=1)] if pts.shape[0] else pts
    if contributing.shape[0] > 0 and not np.all(contributing <= upper):
        raise ValueError("upper_bounds must dominate every contributing front point")
    if contributing.shape[0] == 0:
        return 0.0, 0.0
    box_volume = float(np.prod(upper - ref))
    rng = np.random.default_rng(seed)
    hits = 0
    remaining = n_samples
    while remaining > 0:
        chunk = min(remaining, 65536)
        x = rng.uniform(ref, upper, size=(chunk, ref.shape[0]))
        dominated = np.any(np.all(x[:, None, :] <= contributing[None, :, :], axis=2), axis=1)
        hits += int(dominated.sum())
        remaining -= chunk
    frac = hits / n_samples
    estimate = frac * box_volume
    se = box_volume * float(np.sqrt(max(frac * (1.0 - frac), 0.0) / n_samples))
    return estimate, se
