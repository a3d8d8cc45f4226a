"""Approximate solves of the cubic-regularized sub-problem.

Standard model: ``m(s) = <g, s> + 0.5 <s, H s> + (sigma/3) ||s||^3``.
Zeroed-gradient model: ``m(s) = <s, H s> + (2 sigma/3) ||s||^3``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded, eigh_tridiagonal, eigvalsh_tridiagonal

from .errors import NumericalError, UsageError
from .oracle import as_matvec
from .tr_subproblem import CAUCHY, EIGEN_STEP, INTERIOR, SubproblemResult

MAX_KRYLOV_DIM = 200
HARD_CASE_TOL = 1e-12


class CubicModel:
    """Cubic-regularized model around the current iterate."""

    def __init__(self, g, H, sigma: float, zeroed: bool = False):
        if not sigma > 0:
            raise UsageError("cubic regularization sigma must be positive")
        self.g = np.asarray(g, dtype=np.float64)
        self.H = H
        self.matvec = as_matvec(H)
        self.sigma = float(sigma)
        self.zeroed = bool(zeroed)

    @property
    def linear(self) -> np.ndarray:
        return np.zeros_like(self.g) if self.zeroed else self.g

    def value(self, s, Hs=None) -> float:
        if Hs is None:
            Hs = self.matvec(s)
        ns = np.linalg.norm(s)
        if self.zeroed:
            return float(s @ Hs + (2.0 * self.sigma / 3.0) * ns ** 3)
        return float(self.g @ s + 0.5 * (s @ Hs) + (self.sigma / 3.0) * ns ** 3)

    def gradient(self, s, Hs=None) -> np.ndarray:
        """Gradient of the standard model at ``s``."""
        if Hs is None:
            Hs = self.matvec(s)
        return self.g + Hs + self.sigma * np.linalg.norm(s) * s


@dataclass
class KrylovFactorization:
    """Orthonormal basis ``Q``, ``HQ`` and tridiagonal ``T`` of a Lanczos run."""

    Q: np.ndarray
    HQ: np.ndarray
    diag: np.ndarray
    offdiag: np.ndarray
    beta0: float

    @property
    def k(self) -> int:
        return self.diag.size

    def T(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)


def cauchy_step_norm(K: float, gnorm: float, sigma: float) -> float:
    """Positive root ``r`` of ``sigma r^2 + K r - ||g|| = 0``."""
    root = math.sqrt(K * K + 4.0 * sigma * gnorm)
    if K > 0:
        return 2.0 * gnorm / (root + K)
    return (root - K) / (2.0 * sigma)


def cauchy_point_arc(model: CubicModel) -> SubproblemResult:
    """Global minimizer of the model along the ray ``-alpha g``, ``alpha >= 0``."""
    if model.zeroed:
        raise UsageError("Cauchy point is undefined for a zeroed-gradient model")
    g = model.g
    gnorm = np.linalg.norm(g)
    if gnorm == 0.0:
        raise UsageError("Cauchy point needs a nonzero gradient")
    Hg = model.matvec(g)
    K = (g @ Hg) / gnorm ** 2
    alpha = cauchy_step_norm(K, gnorm, model.sigma) / gnorm
    s, Hs = -alpha * g, -alpha * Hg
    return SubproblemResult(s, model.value(s, Hs), CAUCHY, 1)


def _ray_minimizer(b, lam, sigma):
    """Global minimizer over alpha of ``b a + 0.5 lam a^2 + (sigma/3)|a|^3``."""
    def f(a):
        return b * a + 0.5 * lam * a * a + sigma / 3.0 * abs(a) ** 3

    cands = [0.0]
    # stationary points on each half-line: sigma a^2 -+ lam a ... = 0
    for sign in (1.0, -1.0):
        disc = lam * lam - 4.0 * sigma * sign * b
        if disc >= 0:
            a = (-lam + math.sqrt(disc)) / (2.0 * sigma)
            if a > 0:
                cands.append(sign * a)
    # ties broken toward a step with <g, s> <= 0, then toward positive alpha
    return min(cands, key=lambda a: (f(a), b * a > 0, -a))


def eigen_point_arc(model: CubicModel, eig) -> SubproblemResult:
    """Minimizer of the model along the line spanned by ``u``."""
    lam = float(eig.eigenvalue)
    if not lam < 0:
        raise UsageError("eigen point needs a negative curvature estimate")
    u = np.asarray(eig.u, dtype=np.float64)
    sigma = model.sigma
    if model.zeroed or not np.any(model.g @ u):
        mag = abs(lam) / sigma
        alpha = -mag if model.g @ u > 0 else mag
    else:
        alpha = _ray_minimizer(float(model.g @ u), lam, sigma)
    s = alpha * u
    a = abs(alpha)
    if model.zeroed:
        m = alpha * alpha * lam + (2.0 * sigma / 3.0) * a ** 3
    else:
        m = alpha * float(model.g @ u) + 0.5 * alpha * alpha * lam + sigma / 3.0 * a ** 3
    return SubproblemResult(s, float(m), EIGEN_STEP, 0)


def _tridiag_dense(diag, off):
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


def _shifted_solver(diag, off, lam):
    k = diag.size
    ab = np.zeros((2, k))
    ab[0, 1:] = off
    ab[1, :] = diag + lam
    cb = cholesky_banded(ab, lower=False)
    return lambda rhs: cho_solve_banded((cb, False), rhs)


def subspace_cubic_solve(diag, offdiag, beta0: float, sigma: float, tol: float | None = None,
                         max_steps: int = 200):
    """Global minimizer of ``beta0 y_1 + 0.5 y^T T y + (sigma/3)||y||^3``.

    ``T`` is the symmetric tridiagonal matrix with the given diagonal and
    off-diagonal.  The minimizer satisfies ``(T + lam I) y = -beta0 e_1`` with
    ``lam = sigma ||y||`` and ``T + lam I`` positive semidefinite.  ``lam`` is
    found by safeguarded Newton iteration on ``1/||y(lam)|| - sigma/lam``
    (concave and increasing, so Newton iterates approach the root from the
    left) with a bisection fallback.  In the hard case the solution gets an
    explicit bottom-eigenvector component.

    Returns
    -------
    y : ndarray, shape (k,)
    lam : float
    """
    diag = np.asarray(diag, dtype=np.float64)
    off = np.asarray(offdiag, dtype=np.float64)
    k = diag.size
    if off.size != max(k - 1, 0):
        raise UsageError("off-diagonal must have length k - 1")
    if not sigma > 0 or beta0 < 0:
        raise UsageError("need sigma > 0 and beta0 >= 0")
    tol = 1e-12 * max(1.0, sigma) if tol is None else tol

    mu = eigvalsh_tridiagonal(diag, off) if k > 1 else diag.copy()
    mu_min = float(mu[0])
    lam_low = max(0.0, -mu_min)
    scale = max(float(np.abs(mu).max()), np.finfo(float).tiny)

    rhs = np.zeros(k)
    rhs[0] = -beta0
    bottom = int(np.count_nonzero(mu <= mu_min + 1e-10 * scale))
    if k > 1:
        V = eigh_tridiagonal(diag, off, select="i", select_range=(0, bottom - 1))[1]
    else:
        V = np.ones((1, 1))
    e1_weight = np.linalg.norm(V[0, :])

    if mu_min <= 0 and e1_weight <= HARD_CASE_TOL:
        # e_1 (numerically) orthogonal to the bottom eigenspace
        P = V @ V.T
        y_perp = np.linalg.solve(_tridiag_dense(diag, off) + lam_low * np.eye(k) + P, rhs - P @ rhs)
        y_perp -= P @ y_perp
        n_perp = np.linalg.norm(y_perp)
        if sigma * n_perp <= lam_low:
            tau = math.sqrt(max((lam_low / sigma) ** 2 - n_perp ** 2, 0.0))
            return y_perp + tau * V[:, 0], lam_low
    if beta0 == 0.0:
        return np.zeros(k), 0.0

    lo = lam_low
    hi = 0.5 * (-mu_min + math.sqrt(mu_min * mu_min + 4.0 * sigma * beta0))
    hi = max(hi, lam_low) * (1.0 + 1e-14) + np.finfo(float).tiny
    lam = hi
    best = None
    for _ in range(max_steps):
        try:
            solve = _shifted_solver(diag, off, lam)
        except LinAlgError:
            lo = lam
            lam = 0.5 * (lo + hi)
            continue
        y = solve(rhs)
        ny = np.linalg.norm(y)
        psi = 1.0 / ny - sigma / lam
        best = (lam, y)
        if psi < 0:
            lo = lam
        else:
            hi = lam
        dpsi = (y @ solve(y)) / ny ** 3 + sigma / lam ** 2
        step = psi / dpsi
        new = lam - step
        if abs(step) <= max(tol, 4.0 * np.finfo(float).eps * lam) or hi - lo <= tol:
            if lo < new < hi or new == lam:
                try:
                    y = _shifted_solver(diag, off, new)(rhs)
                    best = (new, y)
                except LinAlgError:
                    pass
            lam, y = best
            # near the hard case ||y|| carries the conditioning error; report the
            # multiplier consistent with the returned y
            return y, max(sigma * np.linalg.norm(y), lam_low)
        if not lo < new < hi:
            new = 0.5 * (lo + hi)
        lam = new
    raise NumericalError(
        f"secular iteration did not converge in {max_steps} steps "
        f"(bracket [{lo!r}, {hi!r}], sigma={sigma!r}, beta0={beta0!r}, mu_min={mu_min!r})",
        value=lam,
    )


def _fresh_direction(Q, rng, d):
    for _ in range(10):
        r = rng.standard_normal(d)
        for _ in range(2):
            r = r - Q @ (Q.T @ r)
        nr = np.linalg.norm(r)
        if nr > 1e-8:
            return r / nr
    return None


def lanczos_cubic(model: CubicModel, max_dim: int | None = None, stop_rule: bool = True,
                  rng: np.random.Generator | None = None, return_factorization: bool = False):
    """Generalized Lanczos solve of the cubic model.

    Grows a Krylov basis from ``g / ||g||`` (full reorthogonalization), solves
    the model restricted to the basis at every dimension and stops once
    ``||grad m(s)|| <= (min(1, ||s||) / 5) ||g||`` or ``max_dim`` is reached.
    ``H Q`` is cached, so the model gradient at ``s = Q y`` costs no extra
    Hessian products.  With ``stop_rule=False`` the run continues to
    ``max_dim``, restarting with a random orthogonal direction whenever the
    Krylov space becomes invariant, so a full-dimension run attains the global
    minimizer (hard case included).
    """
    if model.zeroed:
        raise UsageError("generalized Lanczos needs the gradient term")
    g = model.g
    gnorm = np.linalg.norm(g)
    if gnorm == 0.0:
        raise UsageError("generalized Lanczos needs a nonzero gradient")
    d = g.size
    sigma = model.sigma
    kmax = min(d, MAX_KRYLOV_DIM) if max_dim is None else min(d, int(max_dim))
    rng = rng if rng is not None else np.random.default_rng(0)

    Q = np.zeros((d, kmax))
    W = np.zeros((d, kmax))
    alphas = np.zeros(kmax)
    betas = np.zeros(max(kmax - 1, 0))
    q = g / gnorm
    converged = False
    k = 0
    for j in range(kmax):
        Q[:, j] = q
        w = model.matvec(q)
        W[:, j] = w
        alphas[j] = q @ w
        k = j + 1
        y, _ = subspace_cubic_solve(alphas[:k], betas[:k - 1], gnorm, sigma)
        s = Q[:, :k] @ y
        Hs = W[:, :k] @ y
        ns = np.linalg.norm(s)
        if stop_rule:
            grad = g + Hs + sigma * ns * s
            if np.linalg.norm(grad) <= min(1.0, ns) / 5.0 * gnorm:
                converged = True
                break
        if k == kmax:
            converged = converged or k == d
            break
        r = w - alphas[j] * q
        if j:
            r -= betas[j - 1] * Q[:, j - 1]
        for _ in range(2):
            r -= Q[:, :k] @ (Q[:, :k].T @ r)
        beta = np.linalg.norm(r)
        scale = max(np.abs(alphas[:k]).max(), np.abs(betas[:j]).max() if j else 0.0, np.finfo(float).tiny)
        if beta <= 1e-12 * scale:
            betas[j] = 0.0
            q = _fresh_direction(Q[:, :k], rng, d)
            if q is None:
                converged = True
                break
        else:
            betas[j] = beta
            q = r / beta

    result = SubproblemResult(s, model.value(s, Hs), INTERIOR, k, converged)
    if return_factorization:
        fact = KrylovFactorization(Q[:, :k].copy(), W[:, :k].copy(), alphas[:k].copy(),
                                   betas[:k - 1].copy(), float(gnorm))
        return result, fact
    return result


def solve_cubic_subproblem(model: CubicModel, mode: str = "lanczos", eig=None, eps_h: float = 0.0,
                           max_dim: int | None = None, rng=None) -> SubproblemResult:
    """Dispatch on the model and mode.

    * zeroed (or exactly zero) gradient: eigen point (needs ``eig`` with a
      negative eigenvalue);
    * ``mode="cauchy"``: the Cauchy point;
    * ``mode="lanczos"``: generalized Lanczos with the ``theta`` stopping test.

    In both modes an eigen point competes when ``eig`` reports curvature
    below ``-eps_h``; the smaller model value wins.
    """
    if mode not in ("cauchy", "lanczos"):
        raise UsageError(f"unknown cubic sub-problem mode {mode!r}")
    if model.zeroed or not np.any(model.g):
        if eig is None or not eig.eigenvalue < 0:
            raise UsageError("zero gradient model without negative curvature estimate")
        return eigen_point_arc(model, eig)
    if mode == "cauchy":
        best = cauchy_point_arc(model)
    else:
        best = lanczos_cubic(model, max_dim=max_dim, rng=rng)
    if eig is not None and eig.eigenvalue < -eps_h:
        cand = eigen_point_arc(model, eig)
        if cand.model_value < best.model_value:
            cand.inner_iterations = best.inner_iterations
            best = cand
    return best
