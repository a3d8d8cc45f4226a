"""Inexact trust-region and adaptive cubic regularization outer loops."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .cubic_subproblem import CubicModel, solve_cubic_subproblem
from .errors import DegenerateModel, NumericalError, UsageError
from .negcurv import approx_min_eig
from .sampling import ROLE_EIG, ROLE_GRAD, ROLE_HESS, SampleConfig, draw_sample, keyed_rng
from .tr_subproblem import TrModel, solve_tr_subproblem

log = logging.getLogger(__name__)

OPTIMALITY = "optimality"
MAX_ITERATIONS = "max-iterations"
PROP_BUDGET = "prop-budget"
NUMERICAL = "numerical"

STALL_LIMIT = 50
DEGENERATE_FACTOR = 100.0


@dataclass(frozen=True)
class OptimizerConfig:
    """Tunables shared by both outer loops.

    ``radius0`` is used by trust region, ``sigma0`` by cubic regularization.
    ``fixed_sigma`` freezes the regularization (no adaptation).  ``sampling``
    set to ``None`` means exact gradient and Hessian.
    """

    eps_g: float = 1e-5
    eps_h: float = 1e-3
    eta: float = 0.1
    gamma: float = 2.0
    radius0: float = 1.0
    sigma0: float = 10.0
    nu: float = 0.9
    zero_small_grad: bool = False
    arc_mode: str = "lanczos"
    fixed_sigma: float | None = None
    max_iters: int = 1000
    max_props: int | None = None
    sampling: SampleConfig | None = None
    seed: int = 42
    record_time: bool = False

    def __post_init__(self):
        if not 0 < self.eps_g < 1 or not 0 < self.eps_h < 1:
            raise UsageError("eps_g and eps_h must lie in (0, 1)")
        if not 0 < self.eta <= 1:
            raise UsageError(f"eta must lie in (0, 1], got {self.eta}")
        if not self.gamma > 1:
            raise UsageError(f"gamma must exceed 1, got {self.gamma}")
        if not self.radius0 > 0 or not self.sigma0 > 0:
            raise UsageError("radius0 and sigma0 must be positive")
        if not 0 < self.nu < 1:
            raise UsageError("nu must lie in (0, 1)")
        if self.arc_mode not in ("cauchy", "lanczos"):
            raise UsageError(f"arc_mode must be 'cauchy' or 'lanczos', got {self.arc_mode!r}")
        if self.fixed_sigma is not None and not self.fixed_sigma > 0:
            raise UsageError("fixed_sigma must be positive")
        if self.max_iters < 1:
            raise UsageError("max_iters must be at least 1")
        if self.max_props is not None and self.max_props < 1:
            raise UsageError("max_props must be positive")
        if int(self.seed) != self.seed or self.seed < 0:
            raise UsageError("seed must be a non-negative integer")


@dataclass
class TraceRecord:
    """One outer iteration.

    ``loss`` is ``F`` after the iteration's accept/reject decision and
    ``props`` the cumulative propagation count at that moment;
    ``radius_or_sigma`` is the value used by this iteration.
    """

    iteration: int
    props: int
    loss: float
    grad_norm: float
    radius_or_sigma: float
    rho: float
    success: bool
    step_norm: float
    status: str
    inner_iters: int
    lambda_hat: float
    wall_ms: float
    degenerate: bool = False

    def as_row(self) -> dict:
        return {
            "iter": self.iteration,
            "props": self.props,
            "loss": self.loss,
            "grad_norm": self.grad_norm,
            "radius_or_sigma": self.radius_or_sigma,
            "rho": self.rho,
            "success": self.success,
            "step_norm": self.step_norm,
            "inner_iters": self.inner_iters,
            "lambda_hat": self.lambda_hat,
            "wall_ms": self.wall_ms,
        }


@dataclass
class RunResult:
    x: np.ndarray
    reason: str
    trace: list = field(default_factory=list)
    message: str = ""

    @property
    def final_loss(self) -> float:
        return self.trace[-1].loss if self.trace else math.nan

    @property
    def total_props(self) -> int:
        return self.trace[-1].props if self.trace else 0


def compute_rho(f_old: float, f_new: float, model_value: float, threshold: float = 0.0) -> float:
    """Actual over predicted decrease.

    Raises :class:`DegenerateModel` when the predicted decrease
    ``-model_value`` does not exceed ``threshold``.
    """
    if not -model_value > threshold:
        raise DegenerateModel(f"model predicts no decrease (m = {model_value!r})", value=model_value)
    return (f_old - f_new) / (-model_value)


class _Oracles:
    """Per-iteration gradient/Hessian refresh, exact or sub-sampled."""

    def __init__(self, problem, config: OptimizerConfig):
        self.problem = problem
        self.sampling = config.sampling
        self.seed = config.seed
        if self.sampling is not None and not problem.finite_sum:
            if not (self.sampling.exact_gradient and self.sampling.exact_hessian):
                raise UsageError("sub-sampling requires a finite-sum problem")
        n = problem.n_components
        self.sizes = self.sampling.resolve(n) if self.sampling is not None else (None, None)

    def _sample(self, t, role, size):
        if size is None:
            return None
        key = t if self.sampling.resample else 0
        return draw_sample(self.problem.n_components, size,
                           keyed_rng(self.seed, key, role), self.sampling.replace)

    def refresh(self, x, t):
        g = self.problem.grad(x, sample=self._sample(t, ROLE_GRAD, self.sizes[0]))
        H = self.problem.hessian_operator(x, sample=self._sample(t, ROLE_HESS, self.sizes[1]))
        return g, H


def _run(problem, config: OptimizerConfig, x0, method: str, callback=None) -> RunResult:
    is_tr = method == "tr"
    ledger = problem.ledger
    oracles = _Oracles(problem, config)
    d = problem.dim
    x = np.array(problem.initial_point() if x0 is None else x0, dtype=np.float64)
    if x.shape != (d,):
        raise UsageError(f"x0 must have length {d}")
    param = config.radius0 if is_tr else (config.fixed_sigma or config.sigma0)
    fixed = (not is_tr) and config.fixed_sigma is not None
    trace: list[TraceRecord] = []
    start = time.perf_counter()

    def wall():
        return (time.perf_counter() - start) * 1e3 if config.record_time else 0.0

    try:
        fx = problem.eval(x)
    except NumericalError as exc:
        return RunResult(x, NUMERICAL, trace, str(exc))

    stalled = 0
    degenerate_run = 0
    for t in range(config.max_iters):
        try:
            g, H = oracles.refresh(x, t)
            gnorm = float(np.linalg.norm(g))
            eig = None
            if gnorm <= config.eps_g:
                eig = approx_min_eig(H, d, nu=config.nu, rng=keyed_rng(config.seed, t, ROLE_EIG))
                if eig.converged and eig.eigenvalue >= -config.eps_h:
                    trace.append(TraceRecord(t, ledger.total, fx, gnorm, param, math.nan, False, 0.0,
                                             "terminated", 0, eig.eigenvalue, wall()))
                    if callback:
                        callback(trace[-1])
                    return RunResult(x, OPTIMALITY, trace)
            zeroed = config.zero_small_grad and eig is not None and eig.eigenvalue < 0
            if is_tr:
                model = TrModel(g, H, param, zeroed=zeroed)
                res = solve_tr_subproblem(model, eig=eig, eps_h=config.eps_h)
            else:
                model = CubicModel(g, H, param, zeroed=zeroed)
                res = solve_cubic_subproblem(model, mode=config.arc_mode, eig=eig, eps_h=config.eps_h,
                                             rng=keyed_rng(config.seed, t, ROLE_EIG))
            threshold = DEGENERATE_FACTOR * np.finfo(float).eps * (1.0 + abs(fx))
            degenerate = False
            rho = math.nan
            try:
                compute_rho(0.0, 0.0, res.model_value, threshold)
            except DegenerateModel:
                degenerate = True
            if degenerate:
                success = False
            else:
                f_new = problem.eval(x + res.s)
                rho = compute_rho(fx, f_new, res.model_value, threshold)
                success = rho >= config.eta
        except NumericalError as exc:
            log.warning("numerical failure at iteration %d: %s", t, exc)
            return RunResult(x, NUMERICAL, trace, str(exc))

        if success:
            x = x + res.s
            fx = f_new
        degenerate_run = degenerate_run + 1 if degenerate else 0
        stalled = 0 if success else stalled + 1
        trace.append(TraceRecord(
            t, ledger.total, fx, gnorm, param, rho, success, float(np.linalg.norm(res.s)),
            res.status, res.inner_iterations, eig.eigenvalue if eig is not None else math.nan,
            wall(), degenerate,
        ))
        if callback:
            callback(trace[-1])

        if not fixed:
            if is_tr:
                param = param * config.gamma if success else param / config.gamma
            else:
                param = param / config.gamma if success else param * config.gamma

        if degenerate_run >= STALL_LIMIT:
            return RunResult(x, NUMERICAL, trace, "model predicted no decrease repeatedly")
        tiny = param < 1e-14 if is_tr else param > 1e14
        if stalled >= STALL_LIMIT and tiny:
            return RunResult(x, NUMERICAL, trace, "step control parameter collapsed")
        if config.max_props is not None and ledger.total >= config.max_props:
            return RunResult(x, PROP_BUDGET, trace)
    return RunResult(x, MAX_ITERATIONS, trace)


def run_tr(problem, config: OptimizerConfig | None = None, x0=None, callback=None) -> RunResult:
    """Inexact trust region.

    Each iteration refreshes ``g_t`` and ``H_t`` (sampled or exact), stops when
    ``||g_t|| <= eps_g`` and the converged eigenvalue estimate of ``H_t`` is at
    least ``-eps_h``, solves the trust-region sub-problem (Steihaug-CG, with an
    eigen step competing at small gradients), and accepts the step when the
    ratio of actual (exact ``F``) to predicted decrease reaches ``eta``.  The
    radius grows by ``gamma`` on success and shrinks by ``gamma`` otherwise.
    """
    return _run(problem, config or OptimizerConfig(), x0, "tr", callback)


def run_arc(problem, config: OptimizerConfig | None = None, x0=None, callback=None) -> RunResult:
    """Inexact adaptive cubic regularization.

    Same outer loop as :func:`run_tr` with the cubic sub-problem (Cauchy point
    or generalized Lanczos).  ``sigma`` shrinks by ``gamma`` on success and
    grows by ``gamma`` otherwise, unless ``config.fixed_sigma`` is set.
    """
    return _run(problem, config or OptimizerConfig(), x0, "arc", callback)


def with_sampling(config: OptimizerConfig, grad_ratio=None, hess_ratio=None) -> OptimizerConfig:
    if grad_ratio is None and hess_ratio is None:
        return replace(config, sampling=None)
    return replace(config, sampling=SampleConfig(grad_ratio=grad_ratio, hess_ratio=hess_ratio,
                                                 seed=config.seed))
