"""Objective oracles and propagation accounting.

Optimizers and sub-problem solvers only see an :class:`ObjectiveOracle`:
function values, gradients and Hessian-vector products, optionally averaged
over a sample of finite-sum components.  Every call is charged to a
:class:`PropLedger` in units of weighted per-component oracle calls.
"""

from __future__ import annotations

import abc
import threading
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, UsageError

DEFAULT_WEIGHTS = (1, 2, 4)


class PropLedger:
    """Cumulative propagation counter.

    Per-kind counters hold the number of per-component evaluations; ``total``
    is the weighted sum ``w_f * function + w_g * gradient + w_h * hvp``.
    """

    def __init__(self, w_f: int = 1, w_g: int = 2, w_h: int = 4):
        for name, w in (("w_f", w_f), ("w_g", w_g), ("w_h", w_h)):
            if int(w) != w or w <= 0:
                raise UsageError(f"{name} must be a positive integer, got {w!r}")
        self.w_f, self.w_g, self.w_h = int(w_f), int(w_g), int(w_h)
        self.function = 0
        self.gradient = 0
        self.hvp = 0
        self._lock = threading.Lock()

    @property
    def total(self) -> int:
        return self.w_f * self.function + self.w_g * self.gradient + self.w_h * self.hvp

    def charge_function(self, count: int) -> None:
        with self._lock:
            self.function += int(count)

    def charge_gradient(self, count: int) -> None:
        with self._lock:
            self.gradient += int(count)

    def charge_hvp(self, count: int) -> None:
        with self._lock:
            self.hvp += int(count)

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "function": self.function,
                "gradient": self.gradient,
                "hvp": self.hvp,
                "total": self.total,
            }

    def __repr__(self):
        return (f"PropLedger(total={self.total}, function={self.function}, "
                f"gradient={self.gradient}, hvp={self.hvp})")


def check_finite(value, what: str):
    """Raise :class:`NumericalError` unless ``value`` is entirely finite."""
    arr = np.asarray(value)
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"non-finite {what}", value=value)
    return value


def as_matvec(H):
    """Return a callable ``v -> H v`` for a matrix, operator object or callable."""
    if isinstance(H, np.ndarray):
        return lambda v: H @ v
    if hasattr(H, "matvec"):
        return H.matvec
    if callable(H):
        return H
    raise UsageError(f"cannot interpret {type(H).__name__} as a linear operator")


class HessianOperator:
    """Hessian (exact or sub-sampled) frozen at one point, applied matrix-free.

    Each product is charged ``w_h`` per component in the sample.
    """

    def __init__(self, apply, dim: int, count: int, ledger: PropLedger):
        self._apply = apply
        self.dim = dim
        self.count = count
        self.ledger = ledger
        self.calls = 0

    def matvec(self, v):
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.dim,):
            raise UsageError(f"expected vector of length {self.dim}, got shape {v.shape}")
        out = np.asarray(self._apply(v), dtype=np.float64)
        self.ledger.charge_hvp(self.count)
        self.calls += 1
        return check_finite(out, "Hessian-vector product")

    __call__ = matvec


class ObjectiveOracle(abc.ABC):
    """Access to ``F``, its gradient and Hessian-vector products.

    Subclasses implement the uncharged primitives ``_value``, ``_grad`` and
    ``_hessian_apply``; each receives either ``None`` (all components) or an
    index array (a sample, possibly with repeats) and returns the mean over
    those components.  Non-finite-sum problems have ``n_components == 1`` and
    reject samples.
    """

    dim: int
    n_components: int = 1
    finite_sum: bool = False
    exact_hessian_available: bool = True

    def __init__(self, ledger: PropLedger | None = None):
        self.ledger = ledger if ledger is not None else PropLedger()

    # -- primitives -------------------------------------------------------
    @abc.abstractmethod
    def _value(self, x, sample) -> float: ...

    @abc.abstractmethod
    def _grad(self, x, sample) -> np.ndarray: ...

    @abc.abstractmethod
    def _hessian_apply(self, x, sample):
        """Return a callable ``v -> (mean Hessian over sample) @ v``."""

    def initial_point(self) -> np.ndarray:
        return np.zeros(self.dim)

    # -- charged public API ------------------------------------------------
    def _vector(self, x, name="x"):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise UsageError(f"{name} must have length {self.dim}, got shape {x.shape}")
        return x

    def _sample(self, sample):
        if sample is None:
            return None, self.n_components
        if not self.finite_sum:
            raise UsageError("sampling requires a finite-sum objective")
        idx = np.asarray(sample, dtype=np.intp).ravel()
        if idx.size == 0:
            raise UsageError("sample must be nonempty")
        if idx.min() < 0 or idx.max() >= self.n_components:
            raise UsageError(f"sample indices must lie in [0, {self.n_components})")
        return idx, idx.size

    def eval(self, x, sample=None) -> float:
        x = self._vector(x)
        idx, count = self._sample(sample)
        value = float(self._value(x, idx))
        self.ledger.charge_function(count)
        return check_finite(value, "function value")

    def grad(self, x, sample=None) -> np.ndarray:
        x = self._vector(x)
        idx, count = self._sample(sample)
        g = np.asarray(self._grad(x, idx), dtype=np.float64)
        self.ledger.charge_gradient(count)
        return check_finite(g, "gradient")

    def hessian_operator(self, x, sample=None) -> HessianOperator:
        x = self._vector(x)
        idx, count = self._sample(sample)
        return HessianOperator(self._hessian_apply(x, idx), self.dim, count, self.ledger)

    def hvp(self, x, v, sample=None) -> np.ndarray:
        return self.hessian_operator(x, sample).matvec(self._vector(v, "v"))


@dataclass(frozen=True)
class DenseView:
    """Dense Hessian assembled column by column (test and check helper)."""

    matrix: np.ndarray

    @classmethod
    def from_operator(cls, H, dim: int) -> "DenseView":
        mv = as_matvec(H)
        cols = [mv(e) for e in np.eye(dim)]
        M = np.column_stack(cols)
        return cls(0.5 * (M + M.T))
