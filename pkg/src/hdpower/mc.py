"""Block-parallel Monte Carlo engine.

Replications are partitioned into fixed-size blocks; block ``b`` of an
operation draws from the substream keyed by (master_seed, tag, b) and block
results are reduced in block order. Both facts together make every estimate
bit-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .errors import DomainError
from .rng import substream

BLOCK_REPS = 4096
# cap on elements drawn per block so observation-level sampling stays bounded
_BLOCK_ELEMS = 1 << 22


@dataclass(frozen=True)
class McConfig:
    """Replication budget, master seed, and worker count for one MC run."""

    reps: int
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise DomainError(f"reps must be >= 1, got {self.reps}")
        if self.workers < 1:
            raise DomainError(f"workers must be >= 1, got {self.workers}")
        if self.master_seed < 0:
            raise DomainError(f"master_seed must be >= 0, got {self.master_seed}")


@dataclass(frozen=True)
class PowerEstimate:
    """Monte Carlo rejection probability with its standard error and provenance."""

    mean: float
    se: float
    reps: int
    seed: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.mean <= 1.0:
            raise DomainError(f"estimate mean {self.mean!r} outside [0, 1]")
        if self.se < 0.0:
            raise DomainError(f"standard error must be >= 0, got {self.se!r}")

    def to_dict(self) -> dict[str, Any]:
        return {"mean": self.mean, "se": self.se, "reps": self.reps, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PowerEstimate":
        return cls(mean=d["mean"], se=d["se"], reps=d["reps"], seed=d["seed"])


def block_layout(reps: int, elems_per_rep: int = 1) -> list[tuple[int, int]]:
    """(block_index, block_size) pairs covering ``reps`` replications.

    The layout depends only on (reps, elems_per_rep), never on the worker
    count, so streams line up across runs.
    """
    block = BLOCK_REPS
    if elems_per_rep > 1:
        block = max(1, min(block, _BLOCK_ELEMS // elems_per_rep))
    out = []
    b = 0
    left = reps
    while left > 0:
        m = min(block, left)
        out.append((b, m))
        left -= m
        b += 1
    return out


def run_blocks(
    work: Callable[[int, int], Any],
    blocks: list[tuple[int, int]],
    workers: int,
) -> list[Any]:
    """Run ``work(block_index, block_size)`` over all blocks, returning
    results in block order regardless of execution order."""
    if workers <= 1 or len(blocks) <= 1:
        return [work(b, m) for b, m in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(work, b, m) for b, m in blocks]
        return [f.result() for f in futures]


def summarize(count: int, total: float, total_sq: float, seed: int) -> PowerEstimate:
    """Mean and sample-variance standard error from merged block sums."""
    mean = total / count
    if count > 1:
        var = max(0.0, (total_sq - total * total / count) / (count - 1))
        se = math.sqrt(var / count)
    else:
        se = 0.0
    return PowerEstimate(mean=float(np.clip(mean, 0.0, 1.0)), se=se, reps=count, seed=seed)


def estimate_rejection_prob(test, model, theta, mc: McConfig, tag: str = "rejection-prob") -> PowerEstimate:
    """Monte Carlo estimate of the rejection probability of ``test`` when the
    data-generating parameter is ``theta``.

    The test's declared input kind decides what gets sampled: the model's
    sufficient statistic, or raw per-observation data for tests that need it.
    """
    theta = model.require_member(theta)
    if test.consumes == "statistic":
        if test.dim != model.statistic_dim:
            raise DomainError(
                f"test consumes statistics of dimension {test.dim}, "
                f"model produces dimension {model.statistic_dim}"
            )
        elems = model.statistic_dim
        sample = model.sample_statistic
    elif test.consumes == "observations":
        if not hasattr(model, "sample_observations"):
            raise DomainError(f"model {model!r} does not expose per-observation sampling")
        if test.dim != model.d:
            raise DomainError(
                f"test consumes observations of dimension {test.dim}, model has dimension {model.d}"
            )
        elems = model.n * model.d
        sample = model.sample_observations
    else:
        raise DomainError(f"unknown test input kind {test.consumes!r}")

    blocks = block_layout(mc.reps, elems)

    def work(b: int, m: int) -> tuple[int, float, float]:
        rng = substream(mc.master_seed, tag, b)
        draws = sample(theta, rng, m)
        vals = test.evaluate_batch(draws)
        return m, float(vals.sum()), float((vals * vals).sum())

    parts = run_blocks(work, blocks, mc.workers)
    count = sum(p[0] for p in parts)
    total = math.fsum(p[1] for p in parts)
    total_sq = math.fsum(p[2] for p in parts)
    return summarize(count, total, total_sq, mc.master_seed)


__all__ = [
    "BLOCK_REPS",
    "McConfig",
    "PowerEstimate",
    "block_layout",
    "estimate_rejection_prob",
    "run_blocks",
    "summarize",
]
