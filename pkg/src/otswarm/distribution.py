"""Reference distribution: a Gaussian mixture on a rectangle, and its sample-point form."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Pinned generator identity, echoed into every run summary.
RNG_IDENTITY = "numpy.PCG64/raw53-uniform/box-muller-v1"

MAX_DRAWS_PER_POINT = 10**6


@dataclass
class WeightedPointSet:
    """Positions with nonnegative masses. Used for the reference ledger and agent histories."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(self.points) != len(self.weights):
            raise ValueError(
                f"{len(self.points)} points but {len(self.weights)} weights"
            )
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite and nonnegative")

    def __len__(self):
        return len(self.weights)

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def copy(self) -> WeightedPointSet:
        return WeightedPointSet(self.points.copy(), self.weights.copy())

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("idx,x,y,weight\n")
            for i, ((x, y), w) in enumerate(zip(self.points, self.weights)):
                fh.write(f"{i},{x:.17g},{y:.17g},{w:.17g}\n")

    @classmethod
    def from_csv(cls, path) -> WeightedPointSet:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 1:3], data[:, 3])


@dataclass
class GaussianComponent:
    mean: np.ndarray
    cov: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(2)
        self.cov = np.asarray(self.cov, dtype=float).reshape(2, 2)
        self.weight = float(self.weight)
        c = self.cov
        if not np.allclose(c, c.T, rtol=0, atol=1e-12 * max(1.0, np.abs(c).max())):
            raise ValueError(f"covariance is not symmetric: {c.tolist()}")
        if c[0, 0] <= 0 or c[1, 1] <= 0 or np.linalg.det(c) <= 0:
            raise ValueError(f"covariance is not positive definite: {c.tolist()}")
        if self.weight < 0 or not math.isfinite(self.weight):
            raise ValueError("mixture weight must be nonnegative")

    @property
    def cholesky(self) -> tuple[float, float, float]:
        """Lower factor (l11, l21, l22) of the 2x2 covariance."""
        a, b, d = self.cov[0, 0], self.cov[1, 0], self.cov[1, 1]
        l11 = math.sqrt(a)
        l21 = b / l11
        l22 = math.sqrt(d - l21 * l21)
        return l11, l21, l22

    def pdf(self, point) -> float:
        diff = np.asarray(point, dtype=float) - self.mean
        inv = np.linalg.inv(self.cov)
        q = float(diff @ inv @ diff)
        return math.exp(-0.5 * q) / (2.0 * math.pi * math.sqrt(np.linalg.det(self.cov)))


@dataclass
class GaussianMixture:
    """Mixture of 2-D Gaussians restricted to the rectangle [0, width] x [0, height].

    Component weights are normalized on construction.
    """

    components: list[GaussianComponent]
    domain: tuple[float, float]
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.components = [
            c if isinstance(c, GaussianComponent) else GaussianComponent(*c)
            for c in self.components
        ]
        if not self.components:
            raise ValueError("mixture needs at least one component")
        w, h = (float(v) for v in self.domain)
        if not (w > 0 and h > 0):
            raise ValueError(f"domain must have positive extent, got {self.domain}")
        self.domain = (w, h)
        total = sum(c.weight for c in self.components)
        if total <= 0:
            raise ValueError("mixture weights sum to zero")
        for c in self.components:
            c.weight = c.weight / total
        self._cum = np.cumsum([c.weight for c in self.components])

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    def contains(self, point) -> bool:
        x, y = point
        return 0.0 <= x <= self.domain[0] and 0.0 <= y <= self.domain[1]


def _uniform(bitgen: np.random.PCG64) -> float:
    # 53 high bits of one raw 64-bit draw; stable across numpy releases.
    return (int(bitgen.random_raw()) >> 11) * (1.0 / 9007199254740992.0)


def sample_reference(mix: GaussianMixture, N: int, seed: int) -> WeightedPointSet:
    """Draw ``N`` points from ``mix`` inside its domain, each with weight ``1/N``.

    Component choice and the Gaussian draw both consume a PCG64 stream seeded
    with ``seed``; out-of-domain draws are rejected and redrawn.
    """
    if int(N) < 1:
        raise ValueError(f"N must be positive, got {N}")
    N = int(N)
    bitgen = np.random.PCG64(int(seed) & (2**64 - 1))
    factors = [c.cholesky for c in mix.components]
    cum = mix._cum
    points = np.empty((N, 2))
    for n in range(N):
        for _ in range(MAX_DRAWS_PER_POINT):
            u = _uniform(bitgen)
            k = min(int(np.searchsorted(cum, u, side="right")), len(cum) - 1)
            u1 = 1.0 - _uniform(bitgen)
            u2 = _uniform(bitgen)
            r = math.sqrt(-2.0 * math.log(u1))
            z0 = r * math.cos(2.0 * math.pi * u2)
            z1 = r * math.sin(2.0 * math.pi * u2)
            l11, l21, l22 = factors[k]
            mean = mix.components[k].mean
            x = mean[0] + l11 * z0
            y = mean[1] + l21 * z0 + l22 * z1
            if mix.contains((x, y)):
                points[n] = (x, y)
                break
        else:
            raise RuntimeError(
                f"rejection sampling exceeded {MAX_DRAWS_PER_POINT} draws; "
                "the mixture has almost no mass inside the domain"
            )
    return WeightedPointSet(points, np.full(N, 1.0 / N))


def density_at(mix: GaussianMixture, point) -> float:
    """Unnormalized-by-domain mixture pdf at ``point`` (diagnostics only)."""
    return float(sum(c.weight * c.pdf(point) for c in mix.components))
