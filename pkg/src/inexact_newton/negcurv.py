"""Approximate most-negative curvature of a matrix-free symmetric operator."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal, eigvalsh_tridiagonal

from .errors import UsageError
from .oracle import as_matvec

MAX_LANCZOS_DIM = 100


@dataclass
class EigEstimate:
    """Rayleigh quotient ``eigenvalue = <u, H u>`` of the unit vector ``u``."""

    eigenvalue: float
    u: np.ndarray
    converged: bool
    iterations: int
    ritz_history: list = field(default_factory=list)


def _orthogonalize(r, Q):
    # two passes of classical Gram-Schmidt ("twice is enough")
    for _ in range(2):
        r = r - Q @ (Q.T @ r)
    return r


def _fresh_direction(Q, rng, d):
    for _ in range(10):
        r = _orthogonalize(rng.standard_normal(d), Q)
        nr = np.linalg.norm(r)
        if nr > 1e-8:
            return r / nr
    return None


def approx_min_eig(H, d: int, nu: float = 0.9, tol: float = 1e-6, max_iter: int | None = None,
                   rng: np.random.Generator | None = None, patience: int = 3) -> EigEstimate:
    """Lanczos estimate of the smallest eigenpair of ``H``.

    Starts from a uniformly random unit vector and fully reorthogonalizes.
    An invariant subspace found before the dimension cap is extended with a
    fresh random direction, so the whole space can be explored.  Converged
    means either the Krylov space spans ``R^d`` or the smallest Ritz value
    moved by at most ``tol`` (relative to the Ritz spread) for ``patience``
    consecutive steps.

    ``nu`` is the target quality ``eigenvalue <= nu * lambda_min(H)``; it holds
    with high probability for a random start but is not certified at run time.
    """
    if not 0.0 < nu < 1.0:
        raise UsageError("nu must lie in (0, 1)")
    if d < 1:
        raise UsageError("dimension must be positive")
    matvec = as_matvec(H)
    rng = rng if rng is not None else np.random.default_rng(0)
    kmax = min(d, MAX_LANCZOS_DIM) if max_iter is None else min(d, int(max_iter))

    Q = np.zeros((d, kmax))
    W = np.zeros((d, kmax))
    alphas = np.zeros(kmax)
    betas = np.zeros(max(kmax - 1, 0))
    q = rng.standard_normal(d)
    q /= np.linalg.norm(q)
    history = []
    quiet = 0
    converged = False
    k = 0
    for j in range(kmax):
        Q[:, j] = q
        w = matvec(q)
        W[:, j] = w
        alphas[j] = q @ w
        k = j + 1
        theta = eigvalsh_tridiagonal(alphas[:k], betas[:k - 1]) if k > 1 else alphas[:1]
        history.append(float(theta[0]))
        if k == d:
            converged = True
            break
        if k > 1:
            spread = max(abs(theta[0]), abs(theta[-1]), np.finfo(float).tiny)
            quiet = quiet + 1 if abs(history[-1] - history[-2]) <= tol * spread else 0
            if quiet >= patience:
                converged = True
                break
        if k == kmax:
            break
        r = _orthogonalize(w - alphas[j] * q - (betas[j - 1] * Q[:, j - 1] if j else 0.0), Q[:, :k])
        beta = np.linalg.norm(r)
        scale = max(abs(alphas[:k]).max(), np.finfo(float).tiny)
        if beta <= 1e-12 * scale:
            betas[j] = 0.0
            q = _fresh_direction(Q[:, :k], rng, d)
            if q is None:
                converged = True
                break
        else:
            betas[j] = beta
            q = r / beta

    if k == 1:
        z = np.ones(1)
    else:
        _, vecs = eigh_tridiagonal(alphas[:k], betas[:k - 1], select="i", select_range=(0, 0))
        z = vecs[:, 0]
    u = Q[:, :k] @ z
    nu_ = np.linalg.norm(u)
    u /= nu_
    Hu = (W[:, :k] @ z) / nu_
    return EigEstimate(float(u @ Hu), u, converged, k, history)
