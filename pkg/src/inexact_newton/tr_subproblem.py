"""Approximate trust-region sub-problem solves.

The model is ``m(s) = <g, s> + 0.5 <s, H s>`` on ``||s|| <= radius``.  When
the gradient has been zeroed the model becomes ``<s, H s>`` (no one-half),
and the stored gradient is only used to orient eigen steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .oracle import as_matvec

INTERIOR = "interior"
BOUNDARY = "boundary"
NEGATIVE_CURVATURE = "negative-curvature-exit"
EIGEN_STEP = "eigen-step"
CAUCHY = "cauchy-fallback"


@dataclass
class SubproblemResult:
    s: np.ndarray
    model_value: float
    status: str
    inner_iterations: int
    converged: bool = True


class TrModel:
    """Trust-region model around the current iterate."""

    def __init__(self, g, H, radius: float, zeroed: bool = False):
        if not radius > 0:
            raise UsageError("trust-region radius must be positive")
        self.g = np.asarray(g, dtype=np.float64)
        self.H = H
        self.matvec = as_matvec(H)
        self.radius = float(radius)
        self.zeroed = bool(zeroed)

    @property
    def linear(self) -> np.ndarray:
        return np.zeros_like(self.g) if self.zeroed else self.g

    def value(self, s, Hs=None) -> float:
        if Hs is None:
            Hs = self.matvec(s)
        if self.zeroed:
            return float(s @ Hs)
        return float(self.g @ s + 0.5 * (s @ Hs))


def _clip(s, Hs, radius):
    ns = np.linalg.norm(s)
    if ns > radius:
        f = radius / ns
        return s * f, Hs * f
    return s, Hs


def boundary_step(s, p, radius) -> float:
    """Positive ``tau`` with ``||s + tau p|| = radius`` (requires ``||s|| <= radius``)."""
    a = p @ p
    b = 2.0 * (s @ p)
    c = s @ s - radius * radius
    disc = max(b * b - 4.0 * a * c, 0.0)
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    if q == 0.0:
        return 0.0
    return max(q / a, c / q)


def cauchy_point_tr(model: TrModel) -> SubproblemResult:
    """Exact minimizer of the model along ``-g`` inside the ball."""
    if model.zeroed:
        raise UsageError("Cauchy point is undefined for a zeroed-gradient model")
    g = model.g
    gnorm = np.linalg.norm(g)
    if gnorm == 0.0:
        raise UsageError("Cauchy point needs a nonzero gradient")
    Hg = model.matvec(g)
    kappa = (g @ Hg) / gnorm ** 2
    alpha = model.radius if kappa <= 0 else min(model.radius, gnorm / kappa)
    s = -(alpha / gnorm) * g
    Hs = -(alpha / gnorm) * Hg
    return SubproblemResult(s, model.value(s, Hs), CAUCHY, 1)


def _eigen_alpha_tr(b, lam, radius, zeroed, g_dir):
    # concave along u: the minimizer sits on the boundary
    if zeroed or b == 0.0:
        # both signs tie on the model; orient so that <g, s> <= 0
        return -radius if g_dir > 0 else radius
    return -radius if b > 0 else radius


def eigen_point_tr(model: TrModel, eig) -> SubproblemResult:
    """Minimizer of the model along ``+-u`` with ``|alpha| <= radius``."""
    lam = float(eig.eigenvalue)
    if not lam < 0:
        raise UsageError("eigen point needs a negative curvature estimate")
    u = np.asarray(eig.u, dtype=np.float64)
    g_dir = float(model.g @ u)
    b = float(model.linear @ u)
    alpha = _eigen_alpha_tr(b, lam, model.radius, model.zeroed, g_dir)
    s = alpha * u
    if model.zeroed:
        m = alpha * alpha * lam
    else:
        m = alpha * b + 0.5 * alpha * alpha * lam
    return SubproblemResult(s, float(m), EIGEN_STEP, 0)


def default_cg_tol(gnorm: float) -> float:
    return min(0.5, math.sqrt(gnorm))


def steihaug_cg(model: TrModel, tol: float | None = None, max_iter: int | None = None) -> SubproblemResult:
    """Steihaug-Toint truncated conjugate gradients.

    Stops at the boundary on non-positive curvature or when an iterate leaves
    the ball, otherwise once ``||r|| <= tol * ||g||``.  The first step is the
    Cauchy step, and if rounding ever leaves the final model value above the
    Cauchy value the Cauchy point is returned instead.
    """
    if model.zeroed:
        raise UsageError("Steihaug-CG needs the gradient term")
    g = model.g
    gnorm = np.linalg.norm(g)
    if gnorm == 0.0:
        raise UsageError("Steihaug-CG needs a nonzero gradient")
    d = g.size
    tol = default_cg_tol(gnorm) if tol is None else tol
    max_iter = min(2 * d, 250) if max_iter is None else max_iter
    radius = model.radius

    s = np.zeros(d)
    Hs = np.zeros(d)
    r = g.copy()
    p = -g
    rr = gnorm ** 2
    cauchy = None
    status = INTERIOR
    converged = False
    k = 0
    for k in range(1, max_iter + 1):
        Hp = model.matvec(p)
        curv = p @ Hp
        if k == 1:
            kappa = curv / rr
            a = radius if kappa <= 0 else min(radius, gnorm / kappa)
            cauchy = (-(a / gnorm) * g, (a / gnorm) * Hp)
        if curv <= 0:
            tau = boundary_step(s, p, radius)
            s, Hs = s + tau * p, Hs + tau * Hp
            status, converged = NEGATIVE_CURVATURE, True
            break
        alpha = rr / curv
        s_next = s + alpha * p
        if np.linalg.norm(s_next) >= radius:
            tau = boundary_step(s, p, radius)
            s, Hs = s + tau * p, Hs + tau * Hp
            status, converged = BOUNDARY, True
            break
        s, Hs = s_next, Hs + alpha * Hp
        r = r + alpha * Hp
        rr_next = r @ r
        if math.sqrt(rr_next) <= tol * gnorm:
            converged = True
            break
        p = -r + (rr_next / rr) * p
        rr = rr_next

    s, Hs = _clip(s, Hs, radius)
    m = model.value(s, Hs)
    if cauchy is not None:
        sc, Hsc = _clip(*cauchy, radius)
        mc = model.value(sc, Hsc)
        if mc < m:
            return SubproblemResult(sc, mc, CAUCHY, k, converged)
    return SubproblemResult(s, m, status, k, converged)


def solve_tr_subproblem(model: TrModel, eig=None, tol=None, max_iter=None, eps_h: float = 0.0) -> SubproblemResult:
    """Step at least as good as both the Cauchy and the eigen point.

    With a zeroed (or exactly zero) gradient the eigen point is returned; this
    requires a negative curvature estimate.  Otherwise Steihaug-CG runs and,
    when ``eig`` reports curvature below ``-eps_h``, the eigen point competes
    and the smaller model value wins.
    """
    if model.zeroed or not np.any(model.g):
        if eig is None or not eig.eigenvalue < 0:
            raise UsageError("zero gradient model without negative curvature estimate")
        return eigen_point_tr(model, eig)
    best = steihaug_cg(model, tol=tol, max_iter=max_iter)
    if eig is not None and eig.eigenvalue < -eps_h:
        cand = eigen_point_tr(model, eig)
        if cand.model_value < best.model_value:
            cand.inner_iterations = best.inner_iterations
            best = cand
    return best
