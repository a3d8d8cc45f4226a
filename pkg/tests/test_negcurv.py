import numpy as np
import pytest

from inexact_newton.errors import UsageError
from inexact_newton.negcurv import approx_min_eig
from oracles import random_symmetric


def test_diagonal_indefinite():
    est = approx_min_eig(np.diag([1.0, -2.0, 3.0]), 3, nu=0.9, rng=np.random.default_rng(0))
    assert est.converged
    assert est.eigenvalue <= -1.8
    assert abs(abs(est.u[1]) - 1.0) < 1e-10


def test_positive_definite_estimate_above_min():
    tol = 1e-6
    est = approx_min_eig(np.diag([1.0, 2.0]), 2, tol=tol, rng=np.random.default_rng(1))
    assert est.eigenvalue >= 1.0 - tol


def test_random_matrices_meet_quality_target():
    rng = np.random.default_rng(2)
    checked = 0
    for trial in range(50):
        H = random_symmetric(rng, 8)
        lam_min = np.linalg.eigvalsh(H)[0]
        est = approx_min_eig(H, 8, nu=0.9, rng=np.random.default_rng(trial))
        assert est.converged
        if lam_min < -1e-8:
            checked += 1
            assert est.eigenvalue <= 0.9 * lam_min
    assert checked > 30


def test_rayleigh_quotient_consistency_and_monotone_ritz():
    rng = np.random.default_rng(3)
    for trial in range(30):
        d = int(rng.integers(2, 40))
        H = random_symmetric(rng, d)
        est = approx_min_eig(H, d, rng=np.random.default_rng(trial))
        assert abs(np.linalg.norm(est.u) - 1.0) <= 1e-12
        rq = est.u @ H @ est.u
        assert abs(rq - est.eigenvalue) <= 1e-10 * max(abs(rq), 1.0)
        hist = np.array(est.ritz_history)
        assert np.all(np.diff(hist) <= 1e-12 * np.abs(H).max())


def test_deterministic_given_seed():
    H = random_symmetric(np.random.default_rng(4), 30)
    a = approx_min_eig(H, 30, rng=np.random.default_rng(9))
    b = approx_min_eig(H, 30, rng=np.random.default_rng(9))
    assert a.eigenvalue == b.eigenvalue
    np.testing.assert_array_equal(a.u, b.u)


def test_iteration_cap_reports_not_converged():
    H = random_symmetric(np.random.default_rng(5), 50)
    est = approx_min_eig(H, 50, max_iter=3, rng=np.random.default_rng(0))
    assert not est.converged and est.iterations == 3
    assert est.eigenvalue >= np.linalg.eigvalsh(H)[0]


def test_invariant_start_subspace_is_extended():
    # block structure: a start vector in the top block alone would miss -5
    H = np.diag([1.0, 2.0, 3.0, -5.0])
    est = approx_min_eig(H, 4, rng=np.random.default_rng(6))
    assert est.converged and est.eigenvalue == pytest.approx(-5.0, abs=1e-12)


def test_identity_breakdown_handled():
    est = approx_min_eig(np.eye(6), 6, rng=np.random.default_rng(0))
    assert est.eigenvalue == pytest.approx(1.0, abs=1e-14) and est.converged


def test_validation():
    with pytest.raises(UsageError):
        approx_min_eig(np.eye(2), 2, nu=1.0)
    with pytest.raises(UsageError):
        approx_min_eig(np.eye(2), 0)
