"""Value types and Pareto-dominance primitives shared by all modules.

The internal convention throughout the package is maximize-all: every
objective vector stored in a :class:`Dataset`, :class:`ParetoFront` or
reference point is oriented so that larger is better. Problems whose native
objectives are minimized are negated on ingestion via
:class:`OrientedObjectives` and un-negated on export.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np


class MoboaError(Exception):
    """Base class for all package errors."""


class DimensionError(MoboaError):
    """Mismatched vector/matrix dimensions."""


class DomainError(MoboaError):
    """Input outside a problem's admissible domain."""


class ConfigurationError(MoboaError):
    """Invalid or contradictory configuration values."""


class NumericalError(MoboaError):
    """A numerical procedure failed beyond recovery (e.g. factorization)."""


class SchemaError(MoboaError):
    """Malformed or version-incompatible serialized state."""


def as_vector(values: Sequence[float] | np.ndarray) -> np.ndarray:
    """Coerce to a 1-D float64 array without copying when possible."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {arr.shape}")
    return arr


def require_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{what} contains non-finite entries: {values!r}")


class Direction(Enum):
    MAXIMIZE = "maximize"
    MINIMIZE = "minimize"


@dataclass(frozen=True)
class OrientedObjectives:
    """Per-objective optimization directions with canonicalization helpers.

    Canonical form is maximize-all: :meth:`to_canonical` negates every
    objective declared ``MINIMIZE`` and :meth:`from_canonical` restores the
    native orientation.
    """

    directions: tuple[Direction, ...]

    @classmethod
    def maximize_all(cls, m: int) -> "OrientedObjectives":
        return cls(tuple(Direction.MAXIMIZE for _ in range(m)))

    @classmethod
    def minimize_all(cls, m: int) -> "OrientedObjectives":
        return cls(tuple(Direction.MINIMIZE for _ in range(m)))

    @property
    def m(self) -> int:
        return len(self.directions)

    def _sign(self) -> np.ndarray:
        return np.array(
            [1.0 if d is Direction.MAXIMIZE else -1.0 for d in self.directions]
        )

    def to_canonical(self, native: np.ndarray) -> np.ndarray:
        """Map native objective values onto the internal maximize-all form."""
        native = np.asarray(native, dtype=np.float64)
        if native.shape[-1] != self.m:
            raise DimensionError(
                f"objective vector has {native.shape[-1]} entries, expected {self.m}"
            )
        return native * self._sign()

    def from_canonical(self, canonical: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`to_canonical` (negation is an involution)."""
        return self.to_canonical(canonical)


def dominates(a: np.ndarray, b: np.ndarray) -> bool:
    """Pareto dominance in maximize orientation.

    Args:
        a, b: objective vectors of equal length.

    Returns:
        True iff ``a >= b`` componentwise with at least one strict inequality.
    """
    a = as_vector(a)
    b = as_vector(b)
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    return bool(np.all(a >= b) and np.any(a > b))


def _nondominated_mask(points: np.ndarray) -> np.ndarray:
    """Boolean mask of the maximal (nondominated) rows; duplicates keep one copy."""
    n = points.shape[0]
    keep = np.ones(n, dtype=bool)
    for i in range(n):
        if not keep[i]:
            continue
        p = points[i]
        ge = np.all(points >= p, axis=1)
        gt = np.any(points > p, axis=1)
        dominated_by_other = ge & gt
        dominated_by_other[i] = False
        if dominated_by_other.any():
            keep[i] = False
            continue
        # collapse exact duplicates onto the first occurrence
        dup = np.all(points == p, axis=1)
        dup[: i + 1] = False
        keep[dup] = False
    return keep


@dataclass(frozen=True)
class ParetoFront:
    """An immutable set of mutually nondominated objective vectors.

    ``points`` is a (k, m) array in canonical maximize orientation with
    duplicate rows collapsed. The empty front has shape (0, m).
    """

    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise DimensionError(f"front points must be (k, m), got {pts.shape}")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def empty(cls, m: int) -> "ParetoFront":
        return cls(np.empty((0, m), dtype=np.float64))

    @classmethod
    def from_points(cls, points: Iterable[Sequence[float]], m: int | None = None) -> "ParetoFront":
        """Build a front from arbitrary points, filtering to the maximal subset."""
        rows = [as_vector(p) for p in points]
        if not rows:
            if m is None:
                raise DimensionError("cannot infer objective count from an empty set")
            return cls.empty(m)
        arr = np.vstack(rows)
        require_finite(arr, "front points")
        return cls(arr[_nondominated_mask(arr)])

    @property
    def m(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def contains(self, point: np.ndarray) -> bool:
        point = as_vector(point)
        return len(self) > 0 and bool(np.any(np.all(self.points == point, axis=1)))


def update_front(front: ParetoFront, candidate: np.ndarray) -> ParetoFront:
    """Insert one point, evicting everything it dominates.

    Returns the front unchanged (same object) when the candidate is dominated
    by, or equal to, an existing point.
    """
    candidate = as_vector(candidate)
    if candidate.shape[0] != front.m:
        raise DimensionError(
            f"candidate has {candidate.shape[0]} objectives, front has {front.m}"
        )
    if not np.all(np.isfinite(candidate)):
        raise ValueError(f"candidate objective vector is not finite: {candidate!r}")
    if len(front) == 0:
        return ParetoFront(candidate[None, :])
    pts = front.points
    ge = np.all(pts >= candidate, axis=1)
    gt = np.any(pts > candidate, axis=1)
    if np.any(ge & gt) or np.any(np.all(pts == candidate, axis=1)):
        return front
    evicted = np.all(candidate >= pts, axis=1) & np.any(candidate > pts, axis=1)
    return ParetoFront(np.vstack([pts[~evicted], candidate[None, :]]))


@dataclass(frozen=True)
class Evaluation:
    """One observed input/objective pair in canonical maximize orientation."""

    input: np.ndarray
    objectives: np.ndarray
    candidate_index: int | None = None

    def __post_init__(self) -> None:
        x = as_vector(self.input).copy()
        y = as_vector(self.objectives).copy()
        require_finite(x, "evaluation input")
        require_finite(y, "evaluation objectives")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "input", x)
        object.__setattr__(self, "objectives", y)


@dataclass(frozen=True)
class Dataset:
    """An ordered, duplicate-free collection of evaluations.

    Immutable: :meth:`with_evaluation` returns a new dataset. Duplicate input
    coordinates (exact float equality) are rejected at insertion.
    """

    d: int
    m: int
    evaluations: tuple[Evaluation, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        seen: set[bytes] = set()
        for ev in self.evaluations:
            if ev.input.shape[0] != self.d:
                raise DimensionError(
                    f"evaluation input has {ev.input.shape[0]} coords, expected {self.d}"
                )
            if ev.objectives.shape[0] != self.m:
                raise DimensionError(
                    f"evaluation has {ev.objectives.shape[0]} objectives, expected {self.m}"
                )
            key = ev.input.tobytes()
            if key in seen:
                raise ValueError(
                    f"duplicate input coordinates rejected: {ev.input.tolist()}"
                )
            seen.add(key)

    def __len__(self) -> int:
        return len(self.evaluations)

    def contains_input(self, x: np.ndarray) -> bool:
        key = as_vector(x).astype(np.float64).tobytes()
        return any(ev.input.tobytes() == key for ev in self.evaluations)

    def with_evaluation(self, ev: Evaluation) -> "Dataset":
        return Dataset(self.d, self.m, self.evaluations + (ev,))

    def with_evaluations(self, evs: Iterable[Evaluation]) -> "Dataset":
        return Dataset(self.d, self.m, self.evaluations + tuple(evs))

    def inputs(self) -> np.ndarray:
        """All inputs as an (n, d) matrix."""
        if not self.evaluations:
            return np.empty((0, self.d))
        return np.vstack([ev.input for ev in self.evaluations])

    def objectives(self) -> np.ndarray:
        """All objective vectors as an (n, m) matrix (canonical orientation)."""
        if not self.evaluations:
            return np.empty((0, self.m))
        return np.vstack([ev.objectives for ev in self.evaluations])


def extract_front(dataset: Dataset) -> ParetoFront:
    """The maximal nondominated subset of a dataset's objectives.

    An empty dataset yields the empty front.
    """
    if len(dataset) == 0:
        return ParetoFront.empty(dataset.m)
    objs = dataset.objectives()
    return ParetoFront(objs[_nondominated_mask(objs)])
