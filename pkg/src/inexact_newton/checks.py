"""Fast built-in invariant suite behind ``inexact-newton check``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .cubic_subproblem import CubicModel, cauchy_point_arc, cauchy_step_norm, subspace_cubic_solve
from .data_io import make_synthetic_dataset
from .negcurv import approx_min_eig
from .optimizers import OPTIMALITY, OptimizerConfig, run_arc, run_tr
from .problems import NlsProblem, make_saddle_problem
from .sampling import AccuracyBudget, sample_sizes_for_accuracy
from .tr_subproblem import TrModel, cauchy_point_tr


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


class _PerturbedNls(NlsProblem):
    # negative-control hook: a deliberately wrong gradient
    def __init__(self, data, offset):
        super().__init__(data)
        self.offset = offset

    def _grad(self, w, sample):
        return super()._grad(w, sample) + self.offset


def _nls(seed, perturb):
    data = make_synthetic_dataset(50, 10, seed=seed, signal=3.0)
    return _PerturbedNls(data, perturb) if perturb else NlsProblem(data)


def _rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12)


def check_nls_gradient(perturb=0.0, trials=20):
    worst = 0.0
    for k in range(trials):
        p = _nls(k, perturb)
        w = np.random.default_rng(k).standard_normal(p.dim)
        h = 1e-6 * (1.0 + np.linalg.norm(w))
        fd = np.array([(p.eval(w + h * e) - p.eval(w - h * e)) / (2 * h) for e in np.eye(p.dim)])
        worst = max(worst, _rel(p.grad(w), fd))
    return worst < 1e-5, f"max relative error {worst:.2e}"


def check_nls_hvp(trials=20):
    worst = 0.0
    for k in range(trials):
        p = _nls(k, 0.0)
        rng = np.random.default_rng(100 + k)
        w, v = rng.standard_normal(p.dim), rng.standard_normal(p.dim)
        h = 1e-6 * (1.0 + np.linalg.norm(w))
        fd = (p.grad(w + h * v) - p.grad(w - h * v)) / (2 * h)
        worst = max(worst, _rel(p.hvp(w, v), fd))
    return worst < 1e-5, f"max relative error {worst:.2e}"


def _random_instance(rng, d):
    A = rng.standard_normal((d, d))
    return 0.5 * (A + A.T), rng.standard_normal(d)


def check_tr_cauchy(trials=50):
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(trials):
        H, g = _random_instance(rng, 6)
        radius = 10 ** rng.uniform(-1, 1)
        res = cauchy_point_tr(TrModel(g, H, radius))
        u = -g / np.linalg.norm(g)
        line = minimize_scalar(lambda a: a * (g @ u) + 0.5 * a * a * (u @ H @ u),
                               bounds=(0.0, radius), method="bounded", options={"xatol": 1e-12})
        best = min(line.fun, radius * (g @ u) + 0.5 * radius ** 2 * (u @ H @ u))
        worst = max(worst, res.model_value - best)
    return worst <= 1e-8, f"max excess over 1-D search {worst:.2e}"


def check_arc_cauchy(trials=50):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(trials):
        H, g = _random_instance(rng, 6)
        sigma = 10 ** rng.uniform(-1, 1)
        gn = np.linalg.norm(g)
        K = g @ H @ g / gn ** 2
        res = cauchy_point_arc(CubicModel(g, H, sigma))
        a = np.linalg.norm(res.s)
        worst = max(worst, abs(-gn + K * a + sigma * a * a) / gn,
                    abs(a - cauchy_step_norm(K, gn, sigma)))
    return worst <= 1e-10, f"max root residual {worst:.2e}"


def _dense_secular(T, beta0, sigma):
    mu, V = np.linalg.eigh(T)
    c = -beta0 * V[0]
    low = max(0.0, -mu[0])

    def phi(lam):
        return np.linalg.norm(c / (mu + lam)) - lam / sigma

    hi = low + 1.0
    while phi(hi) > 0:
        hi = low + 2 * (hi - low)
    lam = brentq(phi, low + 1e-14, hi, xtol=1e-15)
    return V @ (c / (mu + lam))


def check_secular(trials=50):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(trials):
        k = int(rng.integers(1, 9))
        diag, off = rng.standard_normal(k), np.abs(rng.standard_normal(k - 1)) + 0.1
        beta0, sigma = abs(rng.standard_normal()) + 0.1, 10 ** rng.uniform(-1, 1)
        T = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)

        def psi(y):
            return beta0 * y[0] + 0.5 * y @ T @ y + sigma / 3 * np.linalg.norm(y) ** 3

        y, _ = subspace_cubic_solve(diag, off, beta0, sigma)
        worst = max(worst, psi(y) - psi(_dense_secular(T, beta0, sigma)))
    return worst <= 1e-8, f"max excess over dense reference {worst:.2e}"


def check_min_eig():
    est = approx_min_eig(np.diag([1.0, -2.0, 3.0]), 3, rng=np.random.default_rng(0))
    ok = est.converged and est.eigenvalue <= -1.8 and abs(abs(est.u[1]) - 1.0) < 1e-8
    return ok, f"estimate {est.eigenvalue:.6g}"


def check_sample_sizes():
    sg, _ = sample_sizes_for_accuracy(AccuracyBudget(0.1, 0.1, 0.01), 1.0, 1.0, 1)
    _, sh = sample_sizes_for_accuracy(AccuracyBudget(0.1, 0.1, 0.01), 1.0, 1.0, 50)
    return (sg, sh) == (7369, 14737), f"sizes ({sg}, {sh})"


def check_saddle_escape():
    details = []
    ok = True
    for run in (run_tr, run_arc):
        p = make_saddle_problem([1.0, -1.0], quartic=1.0, x0=[1.0, 0.0])
        res = run(p, OptimizerConfig())
        ok &= res.reason == OPTIMALITY and res.final_loss < 0
        details.append(f"{run.__name__}: {res.reason}, F={res.final_loss:.3g}")
    return ok, "; ".join(details)


def run_checks(perturb_gradient: float = 0.0, report: Callable[[str], None] | None = print) -> list[CheckResult]:
    """Run the suite; ``perturb_gradient`` corrupts the NLS gradient (negative control)."""
    checks = [
        ("nls-gradient-fd", lambda: check_nls_gradient(perturb_gradient)),
        ("nls-hvp-fd", check_nls_hvp),
        ("tr-cauchy-closed-form", check_tr_cauchy),
        ("arc-cauchy-closed-form", check_arc_cauchy),
        ("secular-vs-dense", check_secular),
        ("lanczos-min-eig", check_min_eig),
        ("sample-size-calculator", check_sample_sizes),
        ("saddle-escape", check_saddle_escape),
    ]
    results = []
    for name, fn in checks:
        try:
            passed, detail = fn()
        except Exception as exc:  # a crashing check is a failing check
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(passed), detail))
        if report:
            report(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    return results
