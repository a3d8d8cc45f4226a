"""Independent dense reference computations used only by the test-suite."""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, lo, hi, iters=200):
    """Minimize a unimodal ``f`` on ``[lo, hi]``; also checks both endpoints."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    cands = [(f(lo), lo), (f(hi), hi), (f(x), x)]
    return min(cands)[1]


def grid_then_golden(f, lo, hi, n=2001):
    """Global 1-D minimization: coarse grid followed by golden-section polish."""
    xs = np.linspace(lo, hi, n)
    vals = np.array([f(x) for x in xs])
    i = int(np.argmin(vals))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, n - 1)]
    return golden_section(f, a, b)


def tr_model(g, H, s, zeroed=False):
    if zeroed:
        return float(s @ H @ s)
    return float(g @ s + 0.5 * s @ H @ s)


def cubic_model(g, H, sigma, s, zeroed=False):
    ns = np.linalg.norm(s)
    if zeroed:
        return float(s @ H @ s + 2.0 * sigma / 3.0 * ns ** 3)
    return float(g @ s + 0.5 * s @ H @ s + sigma / 3.0 * ns ** 3)


def dense_cubic_minimizer(g, H, sigma, hard_tol=1e-10):
    """Global minimizer of ``<g,s> + s'Hs/2 + sigma/3 ||s||^3`` by eigendecomposition.

    Works in the eigenbasis and solves ``||y(lam)|| = lam / sigma`` with
    Brent's method, adding a bottom-eigenvector component in the hard case.
    """
    evals, V = np.linalg.eigh(H)
    gh = V.T @ g
    lam1 = evals[0]
    low = max(0.0, -lam1)
    bottom = np.abs(evals - lam1) <= 1e-10 * max(1.0, abs(lam1))
    weight = np.linalg.norm(gh[bottom])
    gnorm = np.linalg.norm(g)

    def y_of(lam):
        with np.errstate(divide="ignore"):
            return -gh / (evals + lam)

    def phi(lam):
        return np.linalg.norm(y_of(lam)) - lam / sigma

    if weight <= hard_tol * max(gnorm, 1e-300):
        # candidate hard case: y_perp at lam = low
        gperp = np.where(bottom, 0.0, gh)
        with np.errstate(divide="ignore", invalid="ignore"):
            yperp = np.where(bottom, 0.0, -gperp / (evals + low))
        if np.linalg.norm(yperp) <= low / sigma:
            tau = math.sqrt(max((low / sigma) ** 2 - yperp @ yperp, 0.0))
            e = np.zeros_like(gh)
            e[np.argmax(bottom)] = 1.0
            best = None
            for sgn in (1.0, -1.0):
                y = yperp + sgn * tau * e
                s = V @ y
                m = cubic_model(g, H, sigma, s)
                if best is None or m < best[0]:
                    best = (m, s)
            return best[1]
        gh = gperp
    hi = low + 1.0
    while phi(hi) > 0:
        hi = low + 2.0 * (hi - low)
    lo = low + 1e-300
    if phi(lo) <= 0:
        return V @ y_of(lo)
    lam = brentq(phi, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return V @ y_of(lam)


def random_symmetric(rng, d, scale=1.0):
    A = rng.standard_normal((d, d)) * scale
    return 0.5 * (A + A.T)


def hard_case_instance(rng, d):
    """Indefinite ``H`` with ``g`` orthogonal to its bottom eigenvector and small.

    The gradient is small enough that the secular equation has no root above
    ``-lambda_min``, so the minimizer needs an eigenvector component.
    """
    V, _ = np.linalg.qr(rng.standard_normal((d, d)))
    evals = np.sort(rng.uniform(-1.0, 3.0, d))
    evals[0] = -abs(evals[0]) - 0.5
    evals[1:] = np.maximum(evals[1:], evals[0] + 0.5)
    H = V @ np.diag(evals) @ V.T
    H = 0.5 * (H + H.T)
    gh = rng.standard_normal(d)
    gh[0] = 0.0
    gh *= 1e-2 / np.linalg.norm(gh)
    return H, V @ gh, V[:, 0], evals[0]
