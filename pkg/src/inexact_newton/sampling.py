"""Sub-sampled gradient and Hessian oracles for finite-sum objectives."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError

ROLE_GRAD = 0
ROLE_HESS = 1
ROLE_EIG = 2


def _resolve(size, ratio, n):
    if size is not None:
        return min(int(size), n)
    if ratio is not None:
        return min(n, max(1, math.ceil(ratio * n)))
    return None


@dataclass(frozen=True)
class SampleConfig:
    """Sample sizes (absolute or as a ratio of ``n``) for gradient and Hessian.

    Leaving both the size and the ratio of a role unset means that role uses
    the exact (full) oracle.
    """

    grad_size: int | None = None
    grad_ratio: float | None = None
    hess_size: int | None = None
    hess_ratio: float | None = None
    resample: bool = True
    replace: bool = True
    seed: int = 42

    def __post_init__(self):
        for role in ("grad", "hess"):
            size = getattr(self, f"{role}_size")
            ratio = getattr(self, f"{role}_ratio")
            if size is not None and ratio is not None:
                raise UsageError(f"give either {role}_size or {role}_ratio, not both")
            if size is not None and (int(size) != size or size < 1):
                raise UsageError(f"{role}_size must be a positive integer")
            if ratio is not None and not 0.0 < ratio <= 1.0:
                raise UsageError(f"{role}_ratio must lie in (0, 1]")
        if int(self.seed) != self.seed or self.seed < 0:
            raise UsageError("seed must be a non-negative integer")

    @property
    def exact_gradient(self) -> bool:
        return self.grad_size is None and self.grad_ratio is None

    @property
    def exact_hessian(self) -> bool:
        return self.hess_size is None and self.hess_ratio is None

    def resolve(self, n: int) -> tuple[int | None, int | None]:
        """Sample sizes for ``n`` components; ``None`` means exact."""
        return (_resolve(self.grad_size, self.grad_ratio, n),
                _resolve(self.hess_size, self.hess_ratio, n))


@dataclass(frozen=True)
class AccuracyBudget:
    """Target gradient/Hessian errors and failure probability, all in (0, 1)."""

    delta_g: float
    delta_h: float
    delta: float

    def __post_init__(self):
        for name in ("delta_g", "delta_h", "delta"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise UsageError(f"{name} must lie in (0, 1), got {v}")


def keyed_rng(seed: int, iteration: int, role: int) -> np.random.Generator:
    """Independent generator for one (seed, iteration, role) triple."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(iteration), int(role)]))


def draw_sample(n: int, size: int, rng: np.random.Generator, replace: bool = True) -> np.ndarray:
    """Uniform indices in ``[0, n)``; i.i.d. with replacement unless ``replace=False``."""
    if size < 1:
        raise UsageError("sample size must be at least 1")
    if replace:
        return rng.integers(0, n, size=size)
    if size > n:
        raise UsageError("cannot draw more than n indices without replacement")
    return np.sort(rng.choice(n, size=size, replace=False))


def sampled_gradient(problem, x, sample) -> np.ndarray:
    """Mean component gradient over ``sample`` (charged ``w_g`` per index)."""
    if sample is None or len(sample) == 0:
        raise UsageError("sample must be nonempty")
    return problem.grad(x, sample=sample)


def sampled_hvp(problem, x, v, sample) -> np.ndarray:
    """Mean component Hessian applied to ``v`` (charged ``w_h`` per index)."""
    if sample is None or len(sample) == 0:
        raise UsageError("sample must be nonempty")
    return problem.hvp(x, v, sample=sample)


def _ceil(value: float) -> int:
    # absorb float noise in products that are integers in exact arithmetic
    return math.ceil(value * (1.0 - 1e-12))


def sample_sizes_for_accuracy(budget: AccuracyBudget, K_g: float, K_H: float, d: int) -> tuple[int, int]:
    """Sample sizes giving gradient/Hessian errors below ``budget`` w.p. ``1 - delta``.

    ``K_g`` and ``K_H`` bound the per-component gradient norm and Hessian
    spectral norm; ``d`` is the problem dimension.
    """
    if K_g <= 0 or K_H <= 0 or d < 1:
        raise UsageError("K_g, K_H must be positive and d >= 1")
    s_g = 16.0 * K_g ** 2 / budget.delta_g ** 2 * math.log(1.0 / budget.delta)
    s_h = 16.0 * K_H ** 2 / budget.delta_h ** 2 * math.log(2.0 * d / budget.delta)
    return _ceil(s_g), _ceil(s_h)
