"""Deterministic high-dimensional limits for rank-1 denoising under
doubly heteroscedastic noise.

Conventions: ``delta = n/d``, ``alpha = 1/delta`` and ``gamma = lambda**2``.
``xi`` and ``sigma`` are the limiting spectral measures of the row and
column covariances.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from . import _kernels
from .errors import NoConvergence, NoCriticalPoint
from .spectra import SpectralMeasure, expect

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TheoryParams:
    lam: float
    delta: float
    lambda_star: float
    q_u_star: float
    q_v_star: float
    mu_star: float
    nu_star: float
    b_star: float
    c_star: float
    eta_u: float
    eta_v: float
    above_threshold: bool
    sigma2_star: Optional[float] = None

    @property
    def gamma(self) -> float:
        return self.lam**2


@dataclass(frozen=True)
class MmseLimits:
    """Limiting MMSEs for the whitened signals and the all-zero baselines."""

    mmse_matrix: float
    mmse_u: float
    mmse_v: float
    trivial_matrix: float
    trivial_u: float
    trivial_v: float


def weak_recovery_threshold(xi: SpectralMeasure, sigma: SpectralMeasure, delta: float) -> float:
    """SNR ``lambda*`` at which ``lambda**4 / delta * E[S^-2] E[X^-2] = 1``."""
    m = xi.moment(-2) * sigma.moment(-2)
    return (delta / m) ** 0.25


def _q_u_of_q_v(xi, a_snr, q_v):
    return expect(xi, lambda x: a_snr * q_v / (x * (x + a_snr * q_v)))


def _q_v_of_q_u(sigma, snr, q_u):
    return expect(sigma, lambda s: snr * q_u / (s * (s + snr * q_u)))


def fixed_point_residual(xi, sigma, delta, lam, q_u, q_v):
    """Max absolute residual of the two fixed-point equations."""
    snr = lam * lam
    r_u = q_u - _q_u_of_q_v(xi, snr / delta, q_v)
    r_v = q_v - _q_v_of_q_u(sigma, snr, q_u)
    return max(abs(r_u), abs(r_v))


def solve_fixed_point(
    xi: SpectralMeasure,
    sigma: SpectralMeasure,
    delta: float,
    lam: float,
    tol: float = 1e-12,
    max_iter: int = 100_000,
    q0: Optional[float] = None,
):
    """Largest solution ``(q_u*, q_v*)`` of the overlap fixed-point equations.

    Returns ``(0.0, 0.0)`` at or below the weak-recovery threshold. Above it,
    ``q_u`` is eliminated and the concave increasing map ``q_v -> f(q_v)``
    is iterated from ``q0`` (default: ``f(inf)``, an upper bound, so the
    iterates decrease monotonically onto the positive fixed point).
    """
    if not 0 < tol <= 1e-3:
        raise ValueError("tol must lie in (0, 1e-3]")
    snr = lam * lam
    a_snr = snr / delta
    slope0 = a_snr * snr * xi.moment(-2) * sigma.moment(-2)
    if lam <= 0 or slope0 <= 1.0:
        return 0.0, 0.0
    if q0 is None:
        q0 = _q_v_of_q_u(sigma, snr, xi.moment(-1))
    q_v, iters, ok = _kernels.fixed_point_qv(
        xi.values, xi.weights, sigma.values, sigma.weights, a_snr, snr, q0, tol, max_iter
    )
    if not ok:
        raise NoConvergence(f"fixed point not within tol={tol} after {max_iter} iterations (lambda={lam})")
    q_u = _q_u_of_q_v(xi, a_snr, q_v)
    return q_u, q_v


def derived_scalars(xi, sigma, delta, lam, q_u_star, q_v_star) -> TheoryParams:
    """Rescalings, Onsager limits and overlap predictions from a fixed point."""
    mu = lam * q_v_star / delta
    nu = lam * q_u_star
    b = expect(sigma, lambda s: lam / (lam * nu + s)) / delta
    c = expect(xi, lambda x: lam / (lam * mu + x))
    return TheoryParams(
        lam=lam,
        delta=delta,
        lambda_star=weak_recovery_threshold(xi, sigma, delta),
        q_u_star=q_u_star,
        q_v_star=q_v_star,
        mu_star=mu,
        nu_star=nu,
        b_star=b,
        c_star=c,
        eta_u=math.sqrt(lam * mu / (lam * mu + 1.0)),
        eta_v=math.sqrt(lam * nu / (lam * nu + 1.0)),
        above_threshold=q_u_star > 0 and q_v_star > 0,
    )


def compute_theory(xi, sigma, delta, lam, *, tol=1e-12, edge=True) -> TheoryParams:
    """Fixed point, derived scalars and (above threshold) the bulk edge."""
    q_u, q_v = solve_fixed_point(xi, sigma, delta, lam, tol=tol)
    params = derived_scalars(xi, sigma, delta, lam, q_u, q_v)
    if edge and params.above_threshold:
        try:
            s2 = bulk_edge(xi, sigma, delta, params)
        except NoCriticalPoint as exc:
            log.warning("bulk edge unavailable at lambda=%g: %s", lam, exc)
        else:
            if s2 >= 1.0:
                log.warning("sigma2* = %.6g >= 1 at lambda=%g; spectral gap not guaranteed", s2, lam)
            params = replace(params, sigma2_star=s2)
    return params


def mmse_limits(xi, sigma, q_u_star, q_v_star) -> MmseLimits:
    ex = xi.moment(-1)
    es = sigma.moment(-1)
    return MmseLimits(
        mmse_matrix=ex * es - q_u_star * q_v_star,
        mmse_u=ex**2 - q_u_star**2,
        mmse_v=es**2 - q_v_star**2,
        trivial_matrix=ex * es,
        trivial_u=ex**2,
        trivial_v=es**2,
    )


def gaussian_channel_free_energy(measure: SpectralMeasure, snr: float) -> float:
    """Limiting free energy of ``y = sqrt(snr) x + M^{1/2} z`` with Gaussian ``x``."""
    return 0.5 * expect(measure, lambda m: snr / m - np.log1p(snr / m))


def rs_potential(xi, sigma, delta, gamma, q_u, q_v) -> float:
    """Replica-symmetric potential ``F(q_u, q_v)``."""
    alpha = 1.0 / delta
    return (
        gaussian_channel_free_energy(xi, alpha * gamma * q_v)
        + alpha * gaussian_channel_free_energy(sigma, gamma * q_u)
        - 0.5 * alpha * gamma * q_u * q_v
    )


# --------------------------------------------------------------------------
# Right edge of the bulk of the pre-processed matrix
# --------------------------------------------------------------------------


def edge_measures(xi, sigma, theory: TheoryParams):
    """Spectral laws of the squared row/column scalings of the noise in ``A*``."""
    lam = theory.lam
    x_star = xi.map(lambda x: lam / (lam * (theory.mu_star + theory.b_star) + x), "xi*")
    s_star = sigma.map(lambda s: lam / (lam * (theory.nu_star + theory.c_star) + s), "sigma*")
    return x_star, s_star


def edge_curve(alphas, x_star, s_star, delta):
    """``(beta, psi, psi')`` of the bulk-edge functional on ``alphas``."""
    return _kernels.edge_curve(alphas, x_star.values, x_star.weights, s_star.values, s_star.weights, delta)


def bulk_edge(xi, sigma, delta, theory: TheoryParams, n_grid: int = 2000, span: float = 100.0) -> float:
    """Limit ``sigma2*`` of the second singular value of ``A*``.

    Scans ``psi'`` on a log grid over ``(sup X*, span * sup X*]``, takes the
    largest sign change and refines it with Brent's method; returns
    ``sqrt(psi(alpha_crit))``.
    """
    if not theory.above_threshold:
        raise ValueError("bulk edge is defined above the threshold only")
    x_star, s_star = edge_measures(xi, sigma, theory)
    a0 = x_star.sup
    grid = a0 * np.logspace(math.log10(1.0 + 1e-6), math.log10(span), n_grid)
    _, _, dpsi = edge_curve(grid, x_star, s_star, delta)
    flips = np.flatnonzero(np.sign(dpsi[:-1]) != np.sign(dpsi[1:]))
    if flips.size == 0:
        raise NoCriticalPoint(f"psi' has no sign change on (sup X*, {grid[-1]:.6g}]", alpha_max=grid[-1])
    k = flips[-1]

    def dpsi_at(a):
        return edge_curve(a, x_star, s_star, delta)[2][0]

    a_crit = brentq(dpsi_at, grid[k], grid[k + 1], xtol=1e-14 * grid[k + 1], maxiter=200)
    _, psi, _ = edge_curve(a_crit, x_star, s_star, delta)
    return math.sqrt(psi[0])
