import io
import math

import numpy as np
import pytest

from inexact_newton.data_io import make_synthetic_dataset, write_trace_csv
from inexact_newton.errors import DegenerateModel, UsageError
from inexact_newton.negcurv import approx_min_eig
from inexact_newton.oracle import DenseView, ObjectiveOracle
from inexact_newton.optimizers import (
    MAX_ITERATIONS, NUMERICAL, OPTIMALITY, PROP_BUDGET, OptimizerConfig, compute_rho, run_arc, run_tr,
)
from inexact_newton.problems import NlsProblem, QuadraticProblem, RosenbrockProblem, make_saddle_problem
from inexact_newton.sampling import SampleConfig


def _successes(trace):
    return [r for r in trace if r.success]


def assert_monotone(result):
    losses = [r.loss for r in result.trace]
    assert all(b <= a for a, b in zip(losses, losses[1:]))
    for prev, rec in zip(result.trace, result.trace[1:]):
        if not rec.success:
            assert rec.loss == prev.loss


def assert_update_rule(result, start, gamma, method):
    k = 0
    for rec in result.trace:
        assert rec.radius_or_sigma == start * gamma ** k
        if rec.rho != rec.rho and rec.status == "terminated":
            continue
        up = rec.success if method == "tr" else not rec.success
        k += 1 if up else -1


def test_config_validation():
    for bad in (dict(eta=1.5), dict(eta=0.0), dict(gamma=1.0), dict(eps_g=0.0), dict(eps_h=1.0),
                dict(radius0=0.0), dict(sigma0=-1.0), dict(nu=1.0), dict(arc_mode="newton"),
                dict(fixed_sigma=0.0), dict(max_iters=0), dict(max_props=0), dict(seed=-3)):
        with pytest.raises(UsageError):
            OptimizerConfig(**bad)
    OptimizerConfig(eta=1.0)


def test_compute_rho_examples():
    assert compute_rho(2.0, 1.0, -1.0) == 1.0
    assert compute_rho(1.0, 1.5, -1.0) < 0
    with pytest.raises(DegenerateModel):
        compute_rho(1.0, 0.5, 0.0)
    with pytest.raises(DegenerateModel):
        compute_rho(1.0, 0.5, -1e-20, threshold=1e-15)


def test_quadratic_tr_reaches_optimality():
    p = QuadraticProblem(np.diag([1.0, 10.0]))
    r = run_tr(p, OptimizerConfig(eps_g=1e-6))
    assert r.reason == OPTIMALITY
    assert np.linalg.norm(p.A @ r.x) <= 1e-6
    last = r.trace[-1]
    assert last.grad_norm <= 1e-6 and last.lambda_hat >= -1e-3


def test_exact_quadratic_interior_step_has_unit_rho():
    r = run_tr(QuadraticProblem(np.diag([1.0, 10.0])), OptimizerConfig(radius0=100.0, eps_g=1e-6))
    assert r.trace[0].status == "interior"
    assert r.trace[0].rho == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("mode", ["lanczos", "cauchy"])
def test_quadratic_arc_reaches_optimality(mode):
    p = QuadraticProblem(np.diag([1.0, 10.0]))
    r = run_arc(p, OptimizerConfig(arc_mode=mode))
    assert r.reason == OPTIMALITY
    assert np.linalg.norm(p.A @ r.x) <= 1e-5


@pytest.mark.parametrize("runner", [run_tr, run_arc])
@pytest.mark.parametrize("zero", [False, True])
def test_saddle_escape(runner, zero):
    p = make_saddle_problem([1.0, -1.0], quartic=1.0, x0=[1.0, 0.0])
    r = runner(p, OptimizerConfig(zero_small_grad=zero))
    assert r.reason == OPTIMALITY and r.final_loss < 0.0
    assert any(rec.status == "eigen-step" for rec in r.trace)
    assert abs(abs(r.x[1]) - 1.0) < 1e-4


def test_pure_quadratic_saddle_never_certifies():
    r = run_tr(make_saddle_problem([1.0, -1.0], x0=[1.0, 0.0]), OptimizerConfig(max_iters=100))
    assert r.reason == MAX_ITERATIONS and r.final_loss < -1e10


@pytest.mark.parametrize("runner", [run_tr, run_arc])
def test_monotone_and_update_rules(runner):
    p = RosenbrockProblem()
    cfg = OptimizerConfig(gamma=3.0, radius0=0.7, sigma0=2.5)
    r = runner(p, cfg)
    assert r.reason == OPTIMALITY
    assert_monotone(r)
    method = "tr" if runner is run_tr else "arc"
    start = cfg.radius0 if method == "tr" else cfg.sigma0
    k = 0
    for prev, rec in zip(r.trace, r.trace[1:]):
        if method == "tr":
            expect = prev.radius_or_sigma * 3.0 if prev.success else prev.radius_or_sigma / 3.0
        else:
            expect = prev.radius_or_sigma / 3.0 if prev.success else prev.radius_or_sigma * 3.0
        assert rec.radius_or_sigma == expect
    assert r.trace[0].radius_or_sigma == start
    assert any(not rec.success for rec in r.trace[:-1])


def test_sigma_ledger_exact_with_power_of_two_gamma():
    r = run_arc(RosenbrockProblem(), OptimizerConfig(gamma=2.0, sigma0=1.0))
    assert_update_rule(r, 1.0, 2.0, "arc")


def test_fixed_sigma_constant():
    p = NlsProblem(make_synthetic_dataset(500, 6, seed=1))
    cfg = OptimizerConfig(fixed_sigma=7.5, sampling=SampleConfig(grad_ratio=0.2, hess_ratio=0.05), max_iters=30)
    r = run_arc(p, cfg)
    assert all(rec.radius_or_sigma == 7.5 for rec in r.trace)


class Instrumented(ObjectiveOracle):
    """Finite-sum least squares with independent call counters."""

    finite_sum = True

    def __init__(self, A, b):
        super().__init__()
        self.A, self.b = A, b
        self.n_components, self.dim = A.shape
        self.count = {"f": 0, "g": 0, "h": 0}

    def _rows(self, sample):
        return (self.A, self.b) if sample is None else (self.A[sample], self.b[sample])

    def _value(self, x, sample):
        A, b = self._rows(sample)
        self.count["f"] += len(b)
        return 0.5 * np.mean((A @ x - b) ** 2) + 0.25 * np.sum(x ** 4) - 0.5 * x[0] ** 2

    def _grad(self, x, sample):
        A, b = self._rows(sample)
        self.count["g"] += len(b)
        g = A.T @ (A @ x - b) / len(b) + x ** 3
        g[0] -= x[0]
        return g

    def _hessian_apply(self, x, sample):
        A, _ = self._rows(sample)
        m = len(A)
        extra = 3 * x ** 2
        extra[0] -= 1.0

        def apply(v):
            self.count["h"] += m
            return A.T @ (A @ v) / m + extra * v
        return apply


@pytest.mark.parametrize("runner", [run_tr, run_arc])
def test_prop_accounting_reconciles(runner):
    rng = np.random.default_rng(0)
    p = Instrumented(rng.standard_normal((200, 4)), rng.standard_normal(200))
    cfg = OptimizerConfig(sampling=SampleConfig(grad_ratio=0.3, hess_ratio=0.1), max_iters=40)
    r = runner(p, cfg)
    c = p.count
    assert p.ledger.total == c["f"] + 2 * c["g"] + 4 * c["h"]
    assert r.trace[-1].props == p.ledger.total
    # one exact F at start plus one per non-degenerate trial point
    trials = sum(1 for rec in r.trace if rec.rho == rec.rho)
    assert c["f"] == 200 * (1 + trials)
    assert c["g"] == 60 * len(r.trace)
    props = [rec.props for rec in r.trace]
    assert all(b > a for a, b in zip(props, props[1:]))


@pytest.mark.parametrize("runner", [run_tr, run_arc])
def test_bitwise_reproducible(runner):
    def once():
        p = NlsProblem(make_synthetic_dataset(800, 8, seed=2))
        cfg = OptimizerConfig(sampling=SampleConfig(grad_ratio=0.1, hess_ratio=0.05), max_iters=25, seed=7)
        buf = io.StringIO()
        write_trace_csv(runner(p, cfg).trace, buf)
        return buf.getvalue()
    assert once() == once()


def test_different_seeds_differ():
    def trace(seed):
        p = NlsProblem(make_synthetic_dataset(800, 8, seed=2))
        cfg = OptimizerConfig(sampling=SampleConfig(grad_ratio=0.1, hess_ratio=0.05), max_iters=5, seed=seed)
        return [rec.loss for rec in run_tr(p, cfg).trace]
    assert trace(1) != trace(2)


def test_prop_budget_termination():
    p = NlsProblem(make_synthetic_dataset(300, 5, seed=3))
    r = run_tr(p, OptimizerConfig(max_props=5000))
    assert r.reason == PROP_BUDGET and r.total_props >= 5000
    assert r.trace[-2].props < 5000


def test_max_iterations_termination():
    r = run_tr(RosenbrockProblem(), OptimizerConfig(max_iters=3))
    assert r.reason == MAX_ITERATIONS and len(r.trace) == 3


class Plateau(ObjectiveOracle):
    """Huge constant plus a tiny slope: every model decrease is below rounding."""

    dim = 2

    def _value(self, x, sample):
        return 1e12 + 1e-4 * x[0]

    def _grad(self, x, sample):
        return np.array([1e-4, 0.0])

    def _hessian_apply(self, x, sample):
        return lambda v: np.zeros(2)


def test_repeated_degenerate_models_end_numerically():
    r = run_tr(Plateau(), OptimizerConfig())
    assert r.reason == NUMERICAL
    assert len(r.trace) == 50 and all(rec.degenerate and not rec.success for rec in r.trace)
    assert all(math.isnan(rec.rho) for rec in r.trace)


class Blowup(QuadraticProblem):
    def _value(self, x, sample):
        return np.nan if abs(x[0]) < 0.5 else super()._value(x, sample)


def test_oracle_failure_ends_numerically():
    r = run_tr(Blowup(np.eye(2)), OptimizerConfig())
    assert r.reason == NUMERICAL and "non-finite" in r.message


def test_dimension_mismatch_and_sampling_on_plain_problem():
    with pytest.raises(UsageError):
        run_tr(QuadraticProblem(np.eye(2)), OptimizerConfig(), x0=np.ones(3))
    with pytest.raises(UsageError):
        run_tr(QuadraticProblem(np.eye(2)), OptimizerConfig(sampling=SampleConfig(grad_ratio=0.5)))


@pytest.mark.parametrize("runner", [run_tr, run_arc])
def test_termination_certificate_dense(runner):
    for p in (RosenbrockProblem(4), make_saddle_problem([2.0, -1.0, 0.5], quartic=0.3)):
        r = runner(p, OptimizerConfig())
        assert r.reason == OPTIMALITY
        assert np.linalg.norm(p.grad(r.x)) <= 1e-5
        H = DenseView.from_operator(p.hessian_operator(r.x), p.dim).matrix
        assert np.linalg.eigvalsh(H)[0] >= -1e-3


def test_terminal_record_uses_converged_estimate():
    p = QuadraticProblem(np.diag([1.0, 2.0]))
    r = run_tr(p, OptimizerConfig())
    H = p.hessian_operator(r.x)
    est = approx_min_eig(H, 2)
    assert r.trace[-1].lambda_hat == pytest.approx(est.eigenvalue, abs=1e-12)
