"""Spectral estimators of the rank-1 signal and their evaluation metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator

from .errors import BelowThreshold, NoConvergence
from .model import ProblemInstance, rng_stream, whitened_view
from .spectra import CovarianceModel
from .theory import TheoryParams

OPTIMAL = "OptimalSpectral"
VANILLA = "Vanilla"
WHITEN = "Whiten"
BAYES_AMP = "BayesAMP"
ESTIMATORS = (OPTIMAL, VANILLA, WHITEN, BAYES_AMP)

_POWER_STREAM = 99


@dataclass
class EstimateReport:
    estimator: str
    overlap_u: float
    overlap_v: float
    mse_uu: float
    mse_vv: float
    mse_uv: float
    sigma1_Astar: Optional[float] = None
    sigma2_Astar: Optional[float] = None
    iterations_used: int = 0
    u_hat: Optional[np.ndarray] = field(default=None, repr=False)
    v_hat: Optional[np.ndarray] = field(default=None, repr=False)


class SingularPair(NamedTuple):
    sigma1: float
    u1: np.ndarray
    v1: np.ndarray
    sigma2: float
    iterations: int


def evaluate(estimator, u_hat, v_hat, u_star, v_star, **extra) -> EstimateReport:
    """Overlaps and matrix errors of ``(u_hat, v_hat)`` against the truth.

    The pair is flipped jointly so that ``<u_hat, u*> >= 0``; every metric is
    invariant under that flip.
    """
    n, d = u_star.size, v_star.size
    if np.dot(u_hat, u_star) < 0:
        u_hat, v_hat = -u_hat, -v_hat
    uu = np.dot(u_hat, u_star)
    vv = np.dot(v_hat, v_star)
    nu_hat, nv_hat = np.dot(u_hat, u_hat), np.dot(v_hat, v_hat)
    nu_star, nv_star = np.dot(u_star, u_star), np.dot(v_star, v_star)
    # ||a a^T - b b^T||_F^2 = |a|^4 + |b|^4 - 2 <a,b>^2, likewise for a c^T - b e^T
    return EstimateReport(
        estimator=estimator,
        overlap_u=abs(uu) / math.sqrt(nu_hat * nu_star),
        overlap_v=abs(vv) / math.sqrt(nv_hat * nv_star),
        mse_uu=(nu_star**2 + nu_hat**2 - 2 * uu**2) / n**2,
        mse_vv=(nv_star**2 + nv_hat**2 - 2 * vv**2) / d**2,
        mse_uv=(nu_star * nv_star + nu_hat * nv_hat - 2 * uu * vv) / (n * d),
        u_hat=u_hat,
        v_hat=v_hat,
        **extra,
    )


# --------------------------------------------------------------------------
# Top singular pair
# --------------------------------------------------------------------------


def _as_operator(m):
    if isinstance(m, LinearOperator):
        return m
    m = np.asarray(m, dtype=np.float64)
    return LinearOperator(m.shape, matvec=m.dot, rmatvec=m.T.dot, dtype=np.float64)


def _power_sym(apply_gram, start, tol, max_iter, basis=None):
    """Power iteration on a PSD operator, optionally in the complement of ``basis``."""
    x = start
    if basis is not None:
        x = x - basis * np.dot(basis, x)
    norm = np.linalg.norm(x)
    if norm == 0:
        return 0.0, x, 0
    x = x / norm
    for it in range(1, max_iter + 1):
        y = apply_gram(x)
        if basis is not None:
            y = y - basis * np.dot(basis, y)
        lam = float(np.dot(x, y))
        if lam <= 0.0 or np.linalg.norm(y - lam * x) < tol * lam:
            return max(lam, 0.0), x, it
        x = y / np.linalg.norm(y)
        if basis is not None:
            # re-orthogonalise every step to stop leakage back into span(basis)
            x = x - basis * np.dot(basis, x)
            x /= np.linalg.norm(x)
    raise NoConvergence(f"power iteration did not reach tol={tol} in {max_iter} steps")


def top_singular_pair(m, tol: float = 1e-10, max_iter: int = 20000, method: str = "auto", seed: int = 0):
    """Top singular triplet and second singular value of ``m``.

    ``method="power"`` runs power iteration on ``m m^T`` from a seeded start
    vector until ``||m m^T u - s^2 u|| < tol * s^2``, then repeats in the
    orthogonal complement of ``u1`` for ``sigma2``. ``method="dense"`` takes
    the eigendecomposition of the smaller Gram matrix. ``"auto"`` picks
    dense for arrays and power for :class:`LinearOperator` inputs.
    """
    if tol > 1e-8:
        raise ValueError("tol must be at most 1e-8")
    if method == "auto":
        method = "power" if isinstance(m, LinearOperator) else "dense"
    if method == "dense":
        return _dense_pair(np.asarray(m, dtype=np.float64))
    if method != "power":
        raise ValueError(f"unknown method {method!r}")
    op = _as_operator(m)
    n = op.shape[0]

    def gram(x):
        return op.matvec(op.rmatvec(x)).ravel()

    start = rng_stream(seed, _POWER_STREAM).standard_normal(n)
    s1, u1, it1 = _power_sym(gram, start, tol, max_iter)
    sigma1 = math.sqrt(s1)
    v1 = op.rmatvec(u1).ravel() / sigma1 if sigma1 > 0 else np.zeros(op.shape[1])
    start2 = rng_stream(seed + 1, _POWER_STREAM).standard_normal(n)
    s2, _, it2 = _power_sym(gram, start2, tol, max_iter, basis=u1)
    return SingularPair(sigma1, u1, v1, math.sqrt(s2), it1 + it2)


def _dense_pair(m):
    n, d = m.shape
    if n >= d:
        evals, evecs = np.linalg.eigh(m.T @ m)
        s = np.sqrt(np.clip(evals[::-1], 0.0, None))
        v1 = evecs[:, -1]
        u1 = m @ v1 / s[0] if s[0] > 0 else np.zeros(n)
    else:
        evals, evecs = np.linalg.eigh(m @ m.T)
        s = np.sqrt(np.clip(evals[::-1], 0.0, None))
        u1 = evecs[:, -1]
        v1 = m.T @ u1 / s[0] if s[0] > 0 else np.zeros(d)
    s2 = s[1] if s.size > 1 else 0.0
    return SingularPair(float(s[0]), u1, v1, float(s2), 1)


# --------------------------------------------------------------------------
# Pre-processing and estimators
# --------------------------------------------------------------------------


def _scalings(theory: TheoryParams):
    lam = theory.lam
    shift_u = lam * (theory.mu_star + theory.b_star)
    shift_v = lam * (theory.nu_star + theory.c_star)
    left = lambda e: lam * e**-0.5 * (shift_u + e) ** -0.5  # noqa: E731
    right = lambda e: e**-0.5 * (shift_v + e) ** -0.5  # noqa: E731
    return left, right


def _require_above(theory):
    if not theory.above_threshold:
        raise BelowThreshold(
            f"lambda={theory.lam:g} does not exceed the weak-recovery threshold {theory.lambda_star:g}"
        )


def preprocess(inst: ProblemInstance, xi: CovarianceModel, sigma: CovarianceModel, theory: TheoryParams):
    """Dense ``A* = lam (lam(mu+b) I + Xi)^{-1/2} Xi^{-1/2} A Sigma^{-1/2} (lam(nu+c) I + Sigma)^{-1/2}``."""
    _require_above(theory)
    left, right = _scalings(theory)
    return sigma.apply_right(right, xi.apply(left, inst.A))


def preprocess_operator(inst, xi, sigma, theory) -> LinearOperator:
    """Matrix-free ``A*`` (never forms the pre-processed matrix)."""
    _require_above(theory)
    left, right = _scalings(theory)
    a = inst.A

    def matvec(x):
        return xi.apply(left, a @ sigma.apply(right, np.ravel(x)))

    def rmatvec(y):
        return sigma.apply(right, a.T @ xi.apply(left, np.ravel(y)))

    return LinearOperator(a.shape, matvec=matvec, rmatvec=rmatvec, dtype=np.float64)


def _rescaled(cov, func, x, target_sq):
    y = cov.apply(func, x)
    return math.sqrt(target_sq) * y / np.linalg.norm(y)


def optimal_spectral(inst, xi, sigma, theory, method: str = "auto") -> EstimateReport:
    """Pre-processed spectral estimator with its metrics."""
    _require_above(theory)
    a_star = preprocess(inst, xi, sigma, theory)
    pair = top_singular_pair(a_star, method=method)
    lam = theory.lam
    su = lam * (theory.mu_star + theory.b_star)
    sv = lam * (theory.nu_star + theory.c_star)
    mu_l, nu_l = lam * theory.mu_star, lam * theory.nu_star
    u_hat = _rescaled(xi, lambda e: e**0.5 * (su + e) ** -0.5 * (mu_l + e), pair.u1,
                      theory.eta_u**2 * inst.n)
    v_hat = _rescaled(sigma, lambda e: e**0.5 * (sv + e) ** -0.5 * (nu_l + e), pair.v1,
                      theory.eta_v**2 * inst.d)
    return evaluate(OPTIMAL, u_hat, v_hat, inst.u_star, inst.v_star,
                    sigma1_Astar=pair.sigma1, sigma2_Astar=pair.sigma2, iterations_used=pair.iterations)


def vanilla_svd(inst, method: str = "auto") -> EstimateReport:
    """Top singular vectors of the raw data."""
    pair = top_singular_pair(inst.A, method=method)
    return evaluate(VANILLA, math.sqrt(inst.n) * pair.u1, math.sqrt(inst.d) * pair.v1,
                    inst.u_star, inst.v_star, iterations_used=pair.iterations)


def whiten_svd(inst, xi, sigma, method: str = "auto") -> EstimateReport:
    """Top singular vectors of the whitened data, re-coloured."""
    pair = top_singular_pair(whitened_view(inst, xi, sigma), method=method)
    u_hat = _rescaled(xi, np.sqrt, pair.u1, inst.n)
    v_hat = _rescaled(sigma, np.sqrt, pair.v1, inst.d)
    return evaluate(WHITEN, u_hat, v_hat, inst.u_star, inst.v_star, iterations_used=pair.iterations)
