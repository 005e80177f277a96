"""Statistical experiments reduced to sufficient-statistic samplers.

Three models share one informal protocol: ``statistic_dim``, ``contains`` /
``require_member``, ``sample_statistic(theta, rng, size)``,
``central_sequence``, ``information_matrix`` and ``log_likelihood_ratio``.
All are immutable after construction and sampling takes an explicit
generator, so concurrent sampling is safe whenever each worker owns its own
stream.

- GaussianLocationModel: n i.i.d. N_d(theta, I_d) observations, sufficient
  statistic Z = n^{-1/2} * sum(X_i) ~ N_d(sqrt(n) theta, I_d). Also exposes
  per-observation sampling for tests that consume raw data.
- ScaledGaussianModel: n i.i.d. N_d(theta, d^3 I_d) observations with the
  open cube (-1, 1)^d as parameter space; the sufficient statistic (the
  sample mean ~ N_d(theta, (d^3/n) I_d)) is sampled directly since the law
  is exact and costs O(d) per draw.
- FixedDesignRegression: y = X theta + noise with known noise scale; the
  "statistic" is the full response vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError, ParameterError
from .rng import substream

_MAX_DESIGN_COND = 1e6


def as_theta(theta, dim: int) -> np.ndarray:
    """Coerce to a 1-d float vector of length ``dim``."""
    arr = np.atleast_1d(np.asarray(theta, dtype=float))
    if arr.ndim != 1 or arr.shape[0] != dim:
        raise DomainError(f"parameter must be a vector of length {dim}, got shape {arr.shape}")
    return arr


def embed(theta, d2: int) -> np.ndarray:
    """Pad a parameter vector with zeros up to dimension ``d2``.

    This is the canonical embedding of a low-dimensional testing problem into
    a higher-dimensional one; it maps the null to the null and preserves the
    Euclidean norm.
    """
    arr = np.atleast_1d(np.asarray(theta, dtype=float))
    if arr.ndim != 1:
        raise DomainError("theta must be a vector")
    if d2 <= arr.shape[0]:
        raise DomainError(f"target dimension {d2} must exceed len(theta) = {arr.shape[0]}")
    out = np.zeros(d2)
    out[: arr.shape[0]] = arr
    return out


@dataclass(frozen=True)
class SpikeAlternative:
    """Single-coordinate alternative theta = magnitude * e_coordinate with
    magnitude max(sqrt(log(d)/2), 1) / sqrt(n).

    ``coordinate`` is 1-based. The floor keeps the magnitude well defined for
    small d; it is inactive once log(d) >= 2, where the magnitude equals
    sqrt(log(d) / (2 n)).
    """

    coordinate: int
    magnitude: float
    n: int
    d: int

    @property
    def theta(self) -> np.ndarray:
        out = np.zeros(self.d)
        out[self.coordinate - 1] = self.magnitude
        return out

    @property
    def mean_shift(self) -> float:
        """Shift of the statistic coordinate, sqrt(n) * magnitude."""
        return math.sqrt(self.n) * self.magnitude

    def to_dict(self) -> dict:
        return {
            "coordinate": self.coordinate,
            "magnitude": self.magnitude,
            "n": self.n,
            "d": self.d,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SpikeAlternative":
        return cls(
            coordinate=data["coordinate"],
            magnitude=data["magnitude"],
            n=data["n"],
            d=data["d"],
        )


def spike_magnitude(n: int, d: int) -> float:
    if n < 1 or d < 1:
        raise DomainError(f"n and d must be >= 1, got n={n}, d={d}")
    return max(math.sqrt(math.log(d) / 2.0), 1.0) / math.sqrt(n)


def spike_alternative(n: int, d: int, i: int) -> SpikeAlternative:
    """The i-th coordinate spike (1-based) at scale max(sqrt(log d / 2), 1)/sqrt(n)."""
    if not 1 <= i <= d:
        raise DomainError(f"spike coordinate must be in [1, {d}], got {i}")
    return SpikeAlternative(coordinate=i, magnitude=spike_magnitude(n, d), n=n, d=d)


class _ModelBase:
    n: int
    d: int

    def contains(self, theta) -> bool:
        raise NotImplementedError

    def require_member(self, theta) -> np.ndarray:
        arr = as_theta(theta, self.d)
        if not self.contains(arr):
            raise ParameterError(self._membership_message(arr))
        return arr

    def _membership_message(self, theta: np.ndarray) -> str:
        return f"theta outside the parameter space of {type(self).__name__}"


@dataclass(frozen=True)
class GaussianLocationModel(_ModelBase):
    """n i.i.d. d-variate unit-covariance Gaussians with unknown mean."""

    n: int
    d: int

    def __post_init__(self) -> None:
        if self.n < 1 or self.d < 1:
            raise DomainError(f"n and d must be >= 1, got n={self.n}, d={self.d}")

    @property
    def statistic_dim(self) -> int:
        return self.d

    def contains(self, theta) -> bool:
        arr = as_theta(theta, self.d)
        return bool(np.all(np.isfinite(arr)))

    def _membership_message(self, theta: np.ndarray) -> str:
        return "theta must be finite"

    def sample_statistic(self, theta, rng: np.random.Generator, size: int = 1) -> np.ndarray:
        """Draws of Z ~ N_d(sqrt(n) theta, I_d), shape (size, d)."""
        arr = self.require_member(theta)
        z = rng.standard_normal((size, self.d))
        shift = math.sqrt(self.n) * arr
        if np.any(shift != 0.0):
            z += shift
        return z

    def sample_observations(self, theta, rng: np.random.Generator, size: int = 1) -> np.ndarray:
        """Raw data X ~ N_d(theta, I_d)^n, shape (size, n, d)."""
        arr = self.require_member(theta)
        x = rng.standard_normal((size, self.n, self.d))
        if np.any(arr != 0.0):
            x += arr
        return x

    def central_sequence(self, stats: np.ndarray) -> np.ndarray:
        return np.asarray(stats, dtype=float)

    def information_matrix(self) -> np.ndarray:
        return np.eye(self.d)

    def log_likelihood_ratio(self, stats: np.ndarray, theta) -> np.ndarray:
        """log dP_theta/dP_0 evaluated on statistic draws (batch-friendly)."""
        arr = self.require_member(theta)
        z = np.atleast_2d(np.asarray(stats, dtype=float))
        mean = math.sqrt(self.n) * arr
        out = z @ mean - 0.5 * float(mean @ mean)
        return out if np.asarray(stats).ndim > 1 else out[0]


@dataclass(frozen=True)
class ScaledGaussianModel(_ModelBase):
    """n i.i.d. N_d(theta, d^3 I_d) observations restricted to the open cube.

    The inflating d^3 covariance makes the problem asymptotically
    non-testable along d = n, which is what the non-testability diagnostic
    demonstrates.
    """

    n: int
    d: int

    def __post_init__(self) -> None:
        if self.n < 1 or self.d < 1:
            raise DomainError(f"n and d must be >= 1, got n={self.n}, d={self.d}")

    @property
    def statistic_dim(self) -> int:
        return self.d

    @property
    def statistic_sd(self) -> float:
        """Per-coordinate standard deviation of the mean statistic."""
        return math.sqrt(self.d**3 / self.n)

    def contains(self, theta) -> bool:
        arr = as_theta(theta, self.d)
        return bool(np.all(np.isfinite(arr)) and np.all(np.abs(arr) < 1.0))

    def _membership_message(self, theta: np.ndarray) -> str:
        bad = int(np.argmax(~(np.abs(theta) < 1.0)))
        return (
            f"theta[{bad}] = {float(theta[bad])!r} violates the parameter space "
            f"(-1, 1)^{self.d}: every coordinate must lie strictly inside (-1, 1)"
        )

    def sample_statistic(self, theta, rng: np.random.Generator, size: int = 1) -> np.ndarray:
        """Draws of the sample mean ~ N_d(theta, (d^3/n) I_d), shape (size, d)."""
        arr = self.require_member(theta)
        return arr + self.statistic_sd * rng.standard_normal((size, self.d))

    def central_sequence(self, stats: np.ndarray) -> np.ndarray:
        x = np.asarray(stats, dtype=float)
        return math.sqrt(self.n) * x / self.d**3

    def information_matrix(self) -> np.ndarray:
        return np.eye(self.d) / self.d**3

    def log_likelihood_ratio(self, stats: np.ndarray, theta) -> np.ndarray:
        arr = self.require_member(theta)
        x = np.atleast_2d(np.asarray(stats, dtype=float))
        scale = self.n / self.d**3
        out = scale * (x @ arr - 0.5 * float(arr @ arr))
        return out if np.asarray(stats).ndim > 1 else out[0]


@dataclass(frozen=True)
class FixedDesignRegression(_ModelBase):
    """Gaussian linear regression with a fixed design and known noise scale.

    The statistic is the full response vector y = X theta + noise_sd * u.
    """

    n: int
    d: int
    design: np.ndarray
    noise_sd: float = 1.0

    def __post_init__(self) -> None:
        x = np.asarray(self.design, dtype=float)
        if x.shape != (self.n, self.d):
            raise DomainError(f"design must have shape ({self.n}, {self.d}), got {x.shape}")
        if self.n < self.d:
            raise DomainError(f"need n >= d, got n={self.n}, d={self.d}")
        if not np.all(np.isfinite(x)):
            raise DomainError("design must be finite")
        if self.noise_sd <= 0.0:
            raise DomainError(f"noise_sd must be > 0, got {self.noise_sd!r}")
        object.__setattr__(self, "design", x)
        gram_scaled = x.T @ x / self.n
        cond = np.linalg.cond(gram_scaled)
        if not np.isfinite(cond) or cond > _MAX_DESIGN_COND:
            raise DomainError(f"design is rank deficient or ill conditioned (cond={cond:.3g})")

    @classmethod
    def default_design(
        cls, n: int, d: int, noise_sd: float = 1.0, design_seed: int = 0
    ) -> "FixedDesignRegression":
        """Deterministic orthonormalized design scaled so X'X = n I.

        Columns come from QR on a seeded Gaussian matrix with a fixed sign
        convention, so the design (and every closed-form null law built on
        it) is reproducible from the seed alone.
        """
        if n < d:
            raise DomainError(f"need n >= d, got n={n}, d={d}")
        raw = substream(design_seed, "regression-design").standard_normal((n, d))
        q, r = np.linalg.qr(raw)
        signs = np.sign(np.diag(r))
        signs[signs == 0.0] = 1.0
        q = q * signs
        return cls(n=n, d=d, design=math.sqrt(n) * q, noise_sd=noise_sd)

    @property
    def statistic_dim(self) -> int:
        return self.n

    @cached_property
    def gram(self) -> np.ndarray:
        return self.design.T @ self.design

    def contains(self, theta) -> bool:
        arr = as_theta(theta, self.d)
        return bool(np.all(np.isfinite(arr)))

    def _membership_message(self, theta: np.ndarray) -> str:
        return "theta must be finite"

    def sample_statistic(self, theta, rng: np.random.Generator, size: int = 1) -> np.ndarray:
        """Response draws y = X theta + noise, shape (size, n)."""
        arr = self.require_member(theta)
        y = self.noise_sd * rng.standard_normal((size, self.n))
        mean = self.design @ arr
        if np.any(mean != 0.0):
            y += mean
        return y

    def ols_estimate(self, y: np.ndarray) -> np.ndarray:
        """(X'X)^{-1} X'y for a single response vector or a batch of them."""
        arr = np.asarray(y, dtype=float)
        single = arr.ndim == 1
        arr = np.atleast_2d(arr)
        if arr.shape[1] != self.n:
            raise DomainError(f"response must have length {self.n}, got {arr.shape[1]}")
        coef = np.linalg.solve(self.gram, self.design.T @ arr.T).T
        return coef[0] if single else coef

    def central_sequence(self, y: np.ndarray) -> np.ndarray:
        """Score at the null: Z = n^{-1/2} X'y / noise_sd^2."""
        arr = np.asarray(y, dtype=float)
        single = arr.ndim == 1
        arr = np.atleast_2d(arr)
        z = (arr @ self.design) / (math.sqrt(self.n) * self.noise_sd**2)
        return z[0] if single else z

    def information_matrix(self) -> np.ndarray:
        return self.gram / (self.n * self.noise_sd**2)

    def log_likelihood_ratio(self, y: np.ndarray, theta) -> np.ndarray:
        """Computed from X'y and the Gram matrix, avoiding the cancellation-prone
        ||y||^2 - ||y - X theta||^2 form."""
        arr = self.require_member(theta)
        resp = np.atleast_2d(np.asarray(y, dtype=float))
        sigma2 = self.noise_sd**2
        out = (resp @ (self.design @ arr)) / sigma2 - 0.5 * float(arr @ self.gram @ arr) / sigma2
        return out if np.asarray(y).ndim > 1 else out[0]


Model = GaussianLocationModel | ScaledGaussianModel | FixedDesignRegression
