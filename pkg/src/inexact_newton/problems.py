"""Concrete objectives: sigmoid nonlinear least squares and synthetic test problems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .data_io import Dataset
from .errors import UsageError
from .oracle import ObjectiveOracle, PropLedger

DENSE_MAX_DIM = 64


def sigmoid(z):
    """Logistic function, evaluated without overflow for large ``|z|``."""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


@dataclass(frozen=True)
class TheoryConstants:
    """Regularity constants; known only for synthetic problems.

    Never read by the optimizers.  ``None`` marks a constant that is unknown
    or does not apply.
    """

    L_F: float | None = None
    K_F: float | None = None
    K_g: float | None = None
    K_H: float | None = None


class NlsProblem(ObjectiveOracle):
    """``F(w) = (1/n) sum_i (y_i - sigmoid(<x_i, w>))^2`` over a :class:`Dataset`."""

    finite_sum = True

    def __init__(self, data: Dataset, ledger: PropLedger | None = None):
        super().__init__(ledger)
        self.data = data
        self.dim = data.d
        self.n_components = data.n
        X = data.X
        self._X = X.toarray() if data.d <= DENSE_MAX_DIM else sp.csr_matrix(X)
        self._y = np.asarray(data.labels, dtype=np.float64)
        self.theory = None

    def _rows(self, sample):
        if sample is None:
            return self._X, self._y
        return self._X[sample], self._y[sample]

    def _value(self, w, sample):
        X, y = self._rows(sample)
        r = y - sigmoid(X @ w)
        return np.mean(r * r)

    def _grad(self, w, sample):
        X, y = self._rows(sample)
        p = sigmoid(X @ w)
        coef = -2.0 * (y - p) * p * (1.0 - p)
        return np.asarray(X.T @ coef).ravel() / y.shape[0]

    def _hessian_apply(self, w, sample):
        X, y = self._rows(sample)
        p = sigmoid(X @ w)
        dp = p * (1.0 - p)
        ddp = dp * (1.0 - 2.0 * p)
        curv = 2.0 * dp * dp - 2.0 * (y - p) * ddp
        m = y.shape[0]
        return lambda v: np.asarray(X.T @ (curv * (X @ v))).ravel() / m


def _component_index(problem: NlsProblem, i) -> list:
    if not 0 <= int(i) < problem.n_components:
        raise UsageError(f"component index {i} out of range [0, {problem.n_components})")
    return [int(i)]


def nls_component_value(problem: NlsProblem, i: int, w) -> float:
    return problem.eval(w, sample=_component_index(problem, i))


def nls_component_grad(problem: NlsProblem, i: int, w) -> np.ndarray:
    return problem.grad(w, sample=_component_index(problem, i))


def nls_component_hvp(problem: NlsProblem, i: int, w, v) -> np.ndarray:
    return problem.hvp(w, v, sample=_component_index(problem, i))


class QuadraticProblem(ObjectiveOracle):
    """``F(x) = 0.5 x^T A x - b^T x`` with symmetric ``A``."""

    kind = "quadratic"

    def __init__(self, A, b=None, x0=None, ledger: PropLedger | None = None):
        super().__init__(ledger)
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        if A.shape[0] != A.shape[1]:
            raise UsageError("A must be square")
        scale = max(np.abs(A).max(), 1.0)
        if np.abs(A - A.T).max() > 1e-12 * scale:
            raise UsageError("A must be symmetric")
        self.A = A
        self.dim = A.shape[0]
        self.b = np.zeros(self.dim) if b is None else np.asarray(b, dtype=np.float64)
        self._x0 = np.ones(self.dim) if x0 is None else np.asarray(x0, dtype=np.float64)
        self.theory = TheoryConstants(L_F=0.0, K_F=float(np.linalg.norm(A, 2)))

    def initial_point(self):
        return self._x0.copy()

    def _value(self, x, sample):
        return 0.5 * x @ (self.A @ x) - self.b @ x

    def _grad(self, x, sample):
        return self.A @ x - self.b

    def _hessian_apply(self, x, sample):
        A = self.A
        return lambda v: A @ v


class SaddleProblem(ObjectiveOracle):
    """Separable ``F(x) = 0.5 sum c_j x_j^2 + (q/4) sum x_j^4``.

    With ``q = 0`` this is the pure quadratic saddle; ``q > 0`` confines it so
    that escaping the saddle at the origin leads to finite minima.
    """

    kind = "saddle"

    def __init__(self, curvatures, quartic=0.0, x0=None, ledger: PropLedger | None = None):
        super().__init__(ledger)
        self.c = np.asarray(curvatures, dtype=np.float64).ravel()
        self.quartic = float(quartic)
        if self.quartic < 0:
            raise UsageError("quartic coefficient must be non-negative")
        self.dim = self.c.size
        if x0 is None:
            x0 = np.zeros(self.dim)
            x0[int(np.argmax(self.c))] = 1.0
        self._x0 = np.asarray(x0, dtype=np.float64)
        if self.quartic == 0.0:
            self.theory = TheoryConstants(L_F=0.0, K_F=float(np.abs(self.c).max()))
        else:
            self.theory = None

    def initial_point(self):
        return self._x0.copy()

    def _value(self, x, sample):
        return 0.5 * np.sum(self.c * x * x) + 0.25 * self.quartic * np.sum(x ** 4)

    def _grad(self, x, sample):
        return self.c * x + self.quartic * x ** 3

    def _hessian_apply(self, x, sample):
        diag = self.c + 3.0 * self.quartic * x * x
        return lambda v: diag * v


def make_saddle_problem(curvatures, quartic=0.0, x0=None, ledger=None) -> SaddleProblem:
    """Build a saddle problem; at least one curvature must be negative."""
    c = np.asarray(curvatures, dtype=np.float64).ravel()
    if c.size == 0 or np.all(c >= 0):
        raise UsageError("a saddle needs at least one negative curvature")
    return SaddleProblem(c, quartic=quartic, x0=x0, ledger=ledger)


class RosenbrockProblem(ObjectiveOracle):
    """Chained Rosenbrock ``sum_i b (x_{i+1} - x_i^2)^2 + (a - x_i)^2``."""

    kind = "rosenbrock"

    def __init__(self, dim=2, a=1.0, b=100.0, ledger: PropLedger | None = None):
        super().__init__(ledger)
        if dim < 2:
            raise UsageError("Rosenbrock needs dim >= 2")
        self.dim = int(dim)
        self.a, self.b = float(a), float(b)
        self.theory = None

    def initial_point(self):
        x0 = np.ones(self.dim)
        x0[::2] = -1.2
        return x0

    def _value(self, x, sample):
        u, v = x[:-1], x[1:]
        return np.sum(self.b * (v - u * u) ** 2 + (self.a - u) ** 2)

    def _grad(self, x, sample):
        u, v = x[:-1], x[1:]
        t = v - u * u
        g = np.zeros_like(x)
        g[:-1] += -4.0 * self.b * u * t - 2.0 * (self.a - u)
        g[1:] += 2.0 * self.b * t
        return g

    def _hessian_apply(self, x, sample):
        u, v = x[:-1], x[1:]
        diag = np.zeros_like(x)
        diag[:-1] += -4.0 * self.b * v + 12.0 * self.b * u * u + 2.0
        diag[1:] += 2.0 * self.b
        off = -4.0 * self.b * u

        def apply(w):
            out = diag * w
            out[:-1] += off * w[1:]
            out[1:] += off * w[:-1]
            return out

        return apply
