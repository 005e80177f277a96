"""Constructors for the concrete tests plus the power enhancement combinator.

Every test is a ``TestFunction``: a deterministic map from an observed
statistic to a rejection value in [0, 1], carrying enough metadata (name,
nominal level, input dimension and kind) for the Monte Carlo engine to treat
it as a black box. Tests return values rather than booleans so randomized
tests are representable; the engine averages the values directly, which is
an unbiased, lower-variance estimate of the same rejection probability.

The string mini-grammar ``name(:key=value,...)`` with ``enhance(a,b)``
composition is parsed here as well (see ``make_test``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .distributions import (
    chi2_cdf,
    chi2_quantile,
    clamp01,
    noncentral_chi2_cdf,
    std_normal_cdf,
    std_normal_quantile,
)
from .errors import CalibrationError, DomainError, SpecError
from .mc import McConfig, block_layout
from .models import FixedDesignRegression, GaussianLocationModel, spike_magnitude
from .rng import substream

_RANGE_SLACK = 1e-12


@dataclass(frozen=True)
class TestFunction:
    """A measurable test phi: statistic -> [0, 1].

    ``consumes`` is "statistic" for tests of the model's sufficient
    statistic and "observations" for tests that need raw per-observation
    data (one batch element is then an (n_obs, dim) matrix).
    """

    name: str
    dim: int
    batch: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    level: float | None = None
    consumes: str = "statistic"
    calibration_seed: int | None = None

    def evaluate(self, z) -> float:
        """Rejection value for a single observed statistic."""
        arr = np.asarray(z, dtype=float)
        vals = self.evaluate_batch(arr[np.newaxis, ...])
        return float(vals[0])

    def evaluate_batch(self, draws: np.ndarray) -> np.ndarray:
        """Vectorized evaluation over the leading axis; validates range."""
        vals = np.asarray(self.batch(np.asarray(draws, dtype=float)), dtype=float)
        if vals.min(initial=0.0) < -_RANGE_SLACK or vals.max(initial=0.0) > 1.0 + _RANGE_SLACK:
            raise DomainError(f"test {self.name!r} produced rejection values outside [0, 1]")
        return np.clip(vals, 0.0, 1.0)


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must be in (0, 1), got {alpha!r}")
    return alpha


def chi2_euclidean_test(n: int, d: int, alpha: float) -> TestFunction:
    """Reject when the squared Euclidean norm of the statistic exceeds the
    1 - alpha central chi-square quantile. Exact size alpha for every n."""
    alpha = _check_alpha(alpha)
    threshold = chi2_quantile(d, 1.0 - alpha)

    def batch(z: np.ndarray) -> np.ndarray:
        return (np.einsum("ij,ij->i", z, z) > threshold).astype(float)

    return TestFunction(name=f"chi2(alpha={alpha:g})", dim=d, batch=batch, level=alpha)


def chi2_exact_power(n: int, d: int, alpha: float, theta) -> float:
    """Closed-form power of the chi-square test: noncentrality n * ||theta||^2."""
    alpha = _check_alpha(alpha)
    arr = np.asarray(theta, dtype=float)
    lam = n * float(arr @ arr)
    return clamp01(1.0 - noncentral_chi2_cdf(d, lam, chi2_quantile(d, 1.0 - alpha)))


def _spike_threshold(n: int, d: int) -> float:
    # (sqrt(n) * a_n)^(1/2); the floored magnitude keeps it >= 1 for small d
    return math.sqrt(math.sqrt(n) * spike_magnitude(n, d))


def spike_z_test(n: int, d: int, i: int) -> TestFunction:
    """Two-sided z-test on coordinate ``i`` (1-based) at the spike threshold
    (log(d)/2)^{1/4}; its size tends to 0 while it stays consistent against
    the matching coordinate spike."""
    if not 1 <= i <= d:
        raise DomainError(f"spike coordinate must be in [1, {d}], got {i}")
    threshold = _spike_threshold(n, d)
    idx = i - 1

    def batch(z: np.ndarray) -> np.ndarray:
        return (np.abs(z[:, idx]) > threshold).astype(float)

    return TestFunction(
        name=f"spike(i={i})", dim=d, batch=batch, level=spike_z_exact_size(n, d)
    )


def spike_z_exact_size(n: int, d: int) -> float:
    """Exact null rejection probability of the spike z-test."""
    return clamp01(2.0 * std_normal_cdf(-_spike_threshold(n, d)))


def spike_z_exact_power_at_spike(n: int, d: int) -> float:
    """Exact power of the spike z-test against its own coordinate spike."""
    shift = math.sqrt(n) * spike_magnitude(n, d)
    thr = _spike_threshold(n, d)
    return clamp01(std_normal_cdf(shift - thr) + std_normal_cdf(-shift - thr))


def sup_norm_test(n: int, d: int) -> TestFunction:
    """Reject when max_i |z_i| exceeds sqrt(2 log d); the union bound puts the
    size below 2 d Phi(-sqrt(2 log d)), which decreases in d."""
    if d < 2:
        raise DomainError(f"sup-norm test requires d >= 2, got {d}")
    threshold = math.sqrt(2.0 * math.log(d))

    def batch(z: np.ndarray) -> np.ndarray:
        return (np.abs(z).max(axis=1) > threshold).astype(float)

    return TestFunction(name="supnorm", dim=d, batch=batch, level=sup_norm_exact_size(d))


def sup_norm_exact_size(d: int) -> float:
    """Exact size under independent standard normal coordinates."""
    threshold = math.sqrt(2.0 * math.log(d))
    inside = 2.0 * std_normal_cdf(threshold) - 1.0
    return clamp01(1.0 - inside**d)


def halfspace_test(n: int, d: int, alpha: float = 0.05, seed: int = 0) -> TestFunction:
    """Reject when the projection on a seeded random unit direction exceeds the
    1 - alpha normal quantile; exact size alpha. A stand-in for an arbitrary
    user-supplied test in the gap-bound checks."""
    alpha = _check_alpha(alpha)
    direction = substream(seed, "halfspace-direction").standard_normal(d)
    direction /= np.linalg.norm(direction)
    threshold = std_normal_quantile(1.0 - alpha)

    def batch(z: np.ndarray) -> np.ndarray:
        return (z @ direction > threshold).astype(float)

    return TestFunction(
        name=f"halfspace(alpha={alpha:g},seed={seed})",
        dim=d,
        batch=batch,
        level=alpha,
        calibration_seed=seed,
    )


def constant_test(d: int, value: float = 1.0) -> TestFunction:
    """The trivial test phi = value (phi = 1 is never enhanceable)."""
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"constant test value must be in [0, 1], got {value!r}")

    def batch(z: np.ndarray) -> np.ndarray:
        return np.full(z.shape[0], value)

    return TestFunction(name="one" if value == 1.0 else f"const({value:g})", dim=d, batch=batch, level=value)


def enhance(phi: TestFunction, nu: TestFunction) -> TestFunction:
    """Power enhancement combinator psi = min(phi + nu, 1).

    psi dominates both components pointwise, so it has nowhere smaller power,
    and its size is at most size(phi) + size(nu). The dominance is asserted
    on every evaluated batch.
    """
    if phi.dim != nu.dim:
        raise DomainError(f"statistic dimensions differ: {phi.dim} vs {nu.dim}")
    if phi.consumes != nu.consumes:
        raise DomainError("cannot combine tests consuming different inputs")

    def batch(z: np.ndarray) -> np.ndarray:
        base = phi.evaluate_batch(z)
        comp = nu.evaluate_batch(z)
        vals = np.minimum(base + comp, 1.0)
        if np.any(vals < base) or np.any(vals < comp):
            raise DomainError("enhancement dominance violated")
        return vals

    return TestFunction(
        name=f"enhance({phi.name},{nu.name})",
        dim=phi.dim,
        batch=batch,
        level=phi.level,
        consumes=phi.consumes,
    )


def truncated_score_test(
    model: GaussianLocationModel,
    alpha: float,
    C: float | None = None,
    calibration: McConfig | None = None,
) -> TestFunction:
    """Norm test of the truncated, centered score, calibrated by simulation.

    The per-observation score of the Gaussian location model at the null is
    the observation itself, truncated to L_C(x) = x * 1{||x|| <= C}. The test
    statistic is ||n^{-1/2} sum_i L_C(X_i)|| (the null expectation of L_C is
    exactly zero by symmetry) and the critical value is the Monte Carlo
    1 - alpha quantile of the norm of N_d(0, M), where the truncated-score
    covariance M = chi2_cdf(d + 2, C^2) * I_d is available in closed form.

    Default C = 3 sqrt(d) keeps more than 98% of the score mass untruncated
    at desk-scale d, so M stays well conditioned. The calibration seed and
    replication count are part of the test's identity.
    """
    alpha = _check_alpha(alpha)
    d = model.d
    n = model.n
    if C is None:
        C = 3.0 * math.sqrt(d)
    C = float(C)
    if not C > 0.0:
        raise DomainError(f"truncation radius must be > 0, got {C!r}")
    if calibration is None:
        calibration = McConfig(reps=1_000_000, master_seed=0)

    cov_coef = 1.0 if math.isinf(C) else chi2_cdf(d + 2, C * C)
    if cov_coef < 1e-8:
        raise CalibrationError(
            f"truncated-score covariance is numerically singular: C={C:g} keeps "
            f"only a {cov_coef:.3g} fraction of the score variance; increase C"
        )

    norms = np.empty(calibration.reps)
    offset = 0
    for b, m in block_layout(calibration.reps, d):
        rng = substream(calibration.master_seed, "truncated-score-calibration", b)
        draws = rng.standard_normal((m, d))
        norms[offset : offset + m] = np.linalg.norm(draws, axis=1)
        offset += m
    q_alpha = math.sqrt(cov_coef) * float(np.quantile(norms, 1.0 - alpha))

    def batch(x: np.ndarray) -> np.ndarray:
        if x.ndim != 3 or x.shape[1] != n or x.shape[2] != d:
            raise DomainError(f"expected observation batches of shape (m, {n}, {d}), got {x.shape}")
        if math.isinf(C):
            scores = x.sum(axis=1)
        else:
            keep = np.einsum("ijk,ijk->ij", x, x) <= C * C
            scores = np.einsum("ijk,ij->ik", x, keep.astype(float))
        stat = np.linalg.norm(scores, axis=1) / math.sqrt(n)
        return (stat >= q_alpha).astype(float)

    return TestFunction(
        name=f"tscore(alpha={alpha:g},C={C:g},cal_seed={calibration.master_seed})",
        dim=d,
        batch=batch,
        level=alpha,
        consumes="observations",
        calibration_seed=calibration.master_seed,
    )


def wald_test(model: FixedDesignRegression, C: float) -> TestFunction:
    """Reject when sqrt(n) * ||OLS estimate|| >= C; C = 0 gives the constant
    test 1. With the orthonormal default design and unit noise the scaled
    estimator is exactly N_d(sqrt(n) theta, I_d), so size and power reduce to
    noncentral chi-square closed forms."""
    C = float(C)
    if C < 0.0:
        raise DomainError(f"wald threshold must be >= 0, got {C!r}")
    root_n = math.sqrt(model.n)

    def batch(y: np.ndarray) -> np.ndarray:
        coef = model.ols_estimate(y)
        return (root_n * np.linalg.norm(coef, axis=1) >= C).astype(float)

    return TestFunction(name=f"wald(C={C:g})", dim=model.n, batch=batch)


def wald_test_at_level(model: FixedDesignRegression, alpha: float) -> TestFunction:
    """Wald test with C = sqrt(chi2_quantile(d, 1 - alpha)); exact size alpha
    under the orthonormal default design with unit noise."""
    alpha = _check_alpha(alpha)
    test = wald_test(model, math.sqrt(chi2_quantile(model.d, 1.0 - alpha)))
    return TestFunction(
        name=f"wald(alpha={alpha:g})",
        dim=test.dim,
        batch=test.batch,
        level=alpha,
    )


# ---------------------------------------------------------------------------
# test-spec mini-grammar:  name(:key=value(,key=value)*)?  |  enhance(a,b)
# ---------------------------------------------------------------------------

_INT_KEYS = {"i", "seed", "cal_seed", "cal_reps"}


def _parse_kv(args: str, allowed: set[str], spec: str) -> dict:
    out: dict = {}
    if not args:
        return out
    for part in args.split(","):
        if "=" not in part:
            raise SpecError(f"malformed option {part!r} in test spec {spec!r}")
        key, _, raw = part.partition("=")
        key = key.strip()
        if key not in allowed:
            raise SpecError(f"unknown option {key!r} for test spec {spec!r}")
        try:
            out[key] = int(raw) if key in _INT_KEYS else float(raw)
        except ValueError as exc:
            raise SpecError(f"bad value {raw!r} for option {key!r} in {spec!r}") from exc
    return out


def _split_top_level(body: str) -> list[str]:
    parts, depth, start = [], 0, 0
    for pos, ch in enumerate(body):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise SpecError(f"unbalanced parentheses in {body!r}")
        elif ch == "," and depth == 0:
            parts.append(body[start:pos])
            start = pos + 1
    parts.append(body[start:])
    return parts


def make_test(spec: str, n: int, d: int, *, model=None) -> TestFunction:
    """Build a TestFunction from its string specification.

    Examples: ``chi2:alpha=0.05``, ``spike:i=3``, ``supnorm``,
    ``halfspace:alpha=0.05,seed=7``, ``tscore:alpha=0.05,C=4.2``, ``one``,
    ``wald:alpha=0.05`` (regression model required),
    ``enhance(chi2:alpha=0.05,supnorm)``.
    """
    spec = spec.strip()
    if not spec:
        raise SpecError("empty test spec")
    if spec.startswith("enhance(") and spec.endswith(")"):
        inner = _split_top_level(spec[len("enhance(") : -1])
        if len(inner) != 2:
            raise SpecError(f"enhance(...) takes exactly two components, got {spec!r}")
        return enhance(
            make_test(inner[0], n, d, model=model),
            make_test(inner[1], n, d, model=model),
        )

    name, _, args = spec.partition(":")
    name = name.strip()
    if name == "chi2":
        opts = _parse_kv(args, {"alpha"}, spec)
        return chi2_euclidean_test(n, d, opts.get("alpha", 0.05))
    if name == "spike":
        opts = _parse_kv(args, {"i"}, spec)
        return spike_z_test(n, d, opts.get("i", 1))
    if name == "supnorm":
        _parse_kv(args, set(), spec)
        return sup_norm_test(n, d)
    if name == "halfspace":
        opts = _parse_kv(args, {"alpha", "seed"}, spec)
        return halfspace_test(n, d, opts.get("alpha", 0.05), opts.get("seed", 0))
    if name == "one":
        _parse_kv(args, set(), spec)
        return constant_test(d)
    if name == "tscore":
        opts = _parse_kv(args, {"alpha", "C", "cal_seed", "cal_reps"}, spec)
        base = model if isinstance(model, GaussianLocationModel) else GaussianLocationModel(n=n, d=d)
        calibration = McConfig(reps=opts.get("cal_reps", 1_000_000), master_seed=opts.get("cal_seed", 0))
        return truncated_score_test(base, opts.get("alpha", 0.05), opts.get("C"), calibration)
    if name == "wald":
        opts = _parse_kv(args, {"alpha", "C"}, spec)
        if not isinstance(model, FixedDesignRegression):
            raise SpecError("wald test requires a fixed-design regression model (--model regression)")
        if "C" in opts:
            return wald_test(model, opts["C"])
        return wald_test_at_level(model, opts.get("alpha", 0.05))
    raise SpecError(f"unknown test name {name!r} in spec {spec!r}")
