"""Synthetic multi-objective test problems and candidate-set generation.

Four problems are provided: ZDT1 (30 inputs, 2 objectives), DTLZ2 (7 inputs,
3 objectives), Kursawe (3 inputs, 2 objectives) and a latent-aware synthetic
function composed of six base mappings (4 inputs, 2 objectives). The first
three are classically minimized; the latent-aware function is registered as
maximized by default. ``ProblemDef.directions`` records the native
orientation so callers can canonicalize.

Candidate sets are finite design pools sampled from the problem box; all
optimization in this package proposes index subsets of such a pool.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from moboa.core import (
    ConfigurationError,
    DimensionError,
    Direction,
    DomainError,
    OrientedObjectives,
    as_vector,
)

SCHEMES = ("latin_hypercube", "uniform_random", "grid")


@dataclass(frozen=True)
class ProblemDef:
    """A box-bounded vector-valued test problem.

    ``evaluate`` returns objectives in the problem's native orientation;
    :meth:`evaluate_canonical` applies the direction adapter so the result is
    maximize-all.
    """

    name: str
    d: int
    m: int
    bounds: tuple[tuple[float, float], ...]
    directions: OrientedObjectives
    _fn: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self) -> None:
        if len(self.bounds) != self.d:
            raise DimensionError(f"{self.name}: {len(self.bounds)} bounds for d={self.d}")
        for low, high in self.bounds:
            if not low < high:
                raise ConfigurationError(f"{self.name}: invalid bound ({low}, {high})")

    @property
    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds])

    def check_in_bounds(self, x: np.ndarray) -> None:
        x = as_vector(x)
        if x.shape[0] != self.d:
            raise DimensionError(f"{self.name}: input has {x.shape[0]} coords, d={self.d}")
        if np.any(x < self.lower) or np.any(x > self.upper):
            raise DomainError(f"{self.name}: input {x.tolist()} outside the problem box")

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Native-orientation objective vector at an in-bounds point."""
        x = as_vector(x)
        self.check_in_bounds(x)
        y = self._fn(x)
        return np.asarray(y, dtype=np.float64)

    def evaluate_canonical(self, x: np.ndarray) -> np.ndarray:
        """Objectives mapped onto the internal maximize-all orientation."""
        return self.directions.to_canonical(self.evaluate(x))


def _zdt1(x: np.ndarray) -> np.ndarray:
    f1 = x[0]
    g = 1.0 + 9.0 / (x.shape[0] - 1) * np.sum(x[1:])
    f2 = g * (1.0 - math.sqrt(f1 / g))
    return np.array([f1, f2])


def _dtlz2(x: np.ndarray) -> np.ndarray:
    g = float(np.sum((x[2:7] - 0.5) ** 2))
    a1 = 0.5 * math.pi * x[0]
    a2 = 0.5 * math.pi * x[1]
    return np.array(
        [
            (1.0 + g) * math.cos(a1) * math.cos(a2),
            (1.0 + g) * math.cos(a1) * math.sin(a2),
            (1.0 + g) * math.sin(a1),
        ]
    )


def _kursawe(x: np.ndarray) -> np.ndarray:
    f1 = -10.0 * math.exp(-0.2 * math.sqrt(x[0] ** 2 + x[1] ** 2)) - 10.0 * math.exp(
        -0.2 * math.sqrt(x[1] ** 2 + x[2] ** 2)
    )
    f2 = float(np.sum(np.abs(x) ** 0.8 + 5.0 * np.sin(x**3)))
    return np.array([f1, f2])


def _latent_aware(x: np.ndarray) -> np.ndarray:
    x1, x2, x3, x4 = x
    # guard every denominator before evaluating anything
    if x3 == 0.0:
        raise DomainError("latent_aware: x3 = 0 makes exp(-x2/x3) undefined")
    if 1.0 + x3 == 0.0:
        raise DomainError("latent_aware: x3 = -1 makes x2/(1+x3) undefined")
    f1 = x1**2 + math.exp(-x2 / x3)
    f2 = x1 + x3
    f3 = x2 / (1.0 + x3)
    if f3 == 0.0:
        raise DomainError("latent_aware: f3 = 0 (x2 = 0) divides the first output")
    if f1 == 0.0:
        raise DomainError("latent_aware: f1 = 0 divides the second output")
    f4 = math.log(x4 + 1.0) * x1
    f5 = x2 * math.sin(x4) + math.exp(x1)
    f6 = math.sin(x3) + math.cos(x4)
    y = (f1 * f2 + f2 / f3 + f5 * f4 + f6) / 10.0
    y_prime = f3 * f2**2 + f4 / f1 + f5 * f6
    return np.array([y, y_prime])


def zdt1() -> ProblemDef:
    return ProblemDef(
        name="zdt1",
        d=30,
        m=2,
        bounds=tuple((0.0, 1.0) for _ in range(30)),
        directions=OrientedObjectives.minimize_all(2),
        _fn=_zdt1,
    )


def dtlz2() -> ProblemDef:
    return ProblemDef(
        name="dtlz2",
        d=7,
        m=3,
        bounds=tuple((0.0, 1.0) for _ in range(7)),
        directions=OrientedObjectives.minimize_all(3),
        _fn=_dtlz2,
    )


def kursawe() -> ProblemDef:
    return ProblemDef(
        name="kursawe",
        d=3,
        m=2,
        bounds=tuple((-5.0, 5.0) for _ in range(3)),
        directions=OrientedObjectives.minimize_all(2),
        _fn=_kursawe,
    )


# No published box exists for the latent-aware function; [0.1, 2]^4 keeps
# x3, f1 and f3 bounded away from zero and exp(x1) moderate.
LATENT_AWARE_DEFAULT_BOUNDS = tuple((0.1, 2.0) for _ in range(4))


def latent_aware(
    bounds: Sequence[tuple[float, float]] = LATENT_AWARE_DEFAULT_BOUNDS,
    maximize: bool = True,
) -> ProblemDef:
    directions = (
        OrientedObjectives.maximize_all(2) if maximize else OrientedObjectives.minimize_all(2)
    )
    return ProblemDef(
        name="latent_aware",
        d=4,
        m=2,
        bounds=tuple((float(lo), float(hi)) for lo, hi in bounds),
        directions=directions,
        _fn=_latent_aware,
    )


def _materials_shape(x: np.ndarray) -> np.ndarray:
    total = float(np.sum(x))
    y1 = math.sin(2.0 * x[0]) + x[1] * x[2] + 0.5 * math.cos(3.0 * x[3]) + x[4] ** 2
    y2 = math.exp(-((x[0] - 0.3) ** 2 + (x[5] - 0.7) ** 2)) + 0.3 * x[6]
    y3 = x[7] * (1.0 - x[8]) + math.sin(x[1] + x[4])
    y4 = 1.0 / (1.0 + math.exp(-(total - 4.5)))
    y5 = (x[0] - 0.5) ** 2 + (x[3] - 0.2) ** 2 + 0.2 * abs(x[6] - x[8])
    return np.array([y1, y2, y3, y4, y5])


def materials_shape() -> ProblemDef:
    """Synthetic 9-input/5-objective problem exercising the campaign shape
    of real materials studies (four maximized properties, one minimized).
    The surface itself is made up; real campaigns supply their own
    ProblemDef externally."""
    return ProblemDef(
        name="materials_shape",
        d=9,
        m=5,
        bounds=tuple((0.0, 1.0) for _ in range(9)),
        directions=OrientedObjectives(
            (
                Direction.MAXIMIZE,
                Direction.MAXIMIZE,
                Direction.MAXIMIZE,
                Direction.MAXIMIZE,
                Direction.MINIMIZE,
            )
        ),
        _fn=_materials_shape,
    )


PROBLEM_FACTORIES: dict[str, Callable[..., ProblemDef]] = {
    "zdt1": zdt1,
    "dtlz2": dtlz2,
    "kursawe": kursawe,
    "latent_aware": latent_aware,
    "materials_shape": materials_shape,
}


def get_problem(name: str, **kwargs) -> ProblemDef:
    """Look up a benchmark by name; ``latent_aware`` accepts config overrides."""
    try:
        factory = PROBLEM_FACTORIES[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown problem {name!r}; choose from {sorted(PROBLEM_FACTORIES)}"
        ) from None
    return factory(**kwargs)


@dataclass(frozen=True)
class CandidateSet:
    """A finite pool of in-bounds, pairwise-distinct design points."""

    points: np.ndarray
    problem: ProblemDef
    seed: int
    scheme: str = "external"

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise DimensionError(f"candidate matrix must be (N>=1, d), got {pts.shape}")
        if pts.shape[1] != self.problem.d:
            raise DimensionError(
                f"candidates have {pts.shape[1]} coords, problem d={self.problem.d}"
            )
        if np.any(pts < self.problem.lower) or np.any(pts > self.problem.upper):
            raise DomainError("candidate set contains out-of-bounds rows")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise ValueError("candidate set contains duplicate rows")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def subset(self, indices: np.ndarray) -> "CandidateSet":
        """Restriction to a subset of rows (used when evaluated rows retire)."""
        return CandidateSet(self.points[indices], self.problem, self.seed, self.scheme)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([f"x{i + 1}" for i in range(self.points.shape[1])])
            for row in self.points:
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path, problem: ProblemDef, seed: int = 0) -> "CandidateSet":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            expected = [f"x{i + 1}" for i in range(problem.d)]
            if header != expected:
                raise ValueError(f"bad candidate CSV header {header}, expected {expected}")
            rows = [[float(v) for v in row] for row in reader if row]
        return cls(np.array(rows), problem, seed)


def _latin_hypercube(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    u = np.empty((n, d))
    for j in range(d):
        u[:, j] = (rng.permutation(n) + rng.uniform(size=n)) / n
    return u


def generate_candidates(
    problem: ProblemDef, n: int, scheme: str, seed: int
) -> CandidateSet:
    """Deterministically sample a candidate pool over the problem box.

    Args:
        problem: the owning problem definition (supplies bounds).
        n: pool size; the grid scheme requires n to be a perfect d-th power.
        scheme: one of ``latin_hypercube``, ``uniform_random``, ``grid``.
        seed: RNG seed; identical arguments yield a bit-identical matrix.
    """
    if n < 1:
        raise ConfigurationError(f"candidate count must be >= 1, got {n}")
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    lower, upper = problem.lower, problem.upper
    rng = np.random.default_rng(seed)

    if scheme == "grid":
        k = round(n ** (1.0 / problem.d))
        if k**problem.d != n:
            lo = int(math.floor(n ** (1.0 / problem.d)))
            sizes = sorted({max(1, lo) ** problem.d, (lo + 1) ** problem.d})
            raise ConfigurationError(
                f"grid scheme needs n = k^{problem.d}; nearest valid sizes to {n} are {sizes}"
            )
        axes = [np.linspace(lower[j], upper[j], k) for j in range(problem.d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        return CandidateSet(pts, problem, seed, scheme)

    for _ in range(100):
        if scheme == "latin_hypercube":
            unit = _latin_hypercube(rng, n, problem.d)
        else:
            unit = rng.uniform(size=(n, problem.d))
        pts = lower + unit * (upper - lower)
        if np.unique(pts, axis=0).shape[0] == n:
            return CandidateSet(pts, problem, seed, scheme)
    # continuous draws collide with probability zero; defensive only
    raise RuntimeError("could not draw distinct candidate rows")  # pragma: no cover
