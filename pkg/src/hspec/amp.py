"""Bayes-AMP on ``Xi^{-1} A Sigma^{-1}`` with Gaussian-prior denoisers.

Denoisers are linear: ``g_t(u) = mu_t (mu_t^2 Xi^{-1} + sigma_t^2 I)^{-1} u`` and
``f_{t+1}(v) = nu_{t+1} (nu_{t+1}^2 Sigma^{-1} + tau_{t+1}^2 I)^{-1} v``, with
the scalar parameters taken from the deterministic state evolution rather
than estimated from the iterates. All trace terms use cached eigenvalues.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BelowThreshold, Diverged
from .estimators import BAYES_AMP, evaluate
from .model import STREAM_AMP_INIT, ProblemInstance, rng_stream
from .spectra import CovarianceModel, SpectralMeasure, expect, measure_of
from .theory import TheoryParams


@dataclass
class SeTrack:
    """State-evolution parameters.

    ``mu[t]``, ``sigma2[t]`` are indexed by ``t = 0..T``; ``nu[t]`` and
    ``tau2[t]`` hold ``nu_{t+1}`` and ``tau_{t+1}^2`` for ``t = 0..T-1``.
    """

    mu: np.ndarray
    sigma2: np.ndarray
    nu: np.ndarray
    tau2: np.ndarray


def se_recursion(xi: SpectralMeasure, sigma: SpectralMeasure, delta, lam, mu_0, steps) -> SeTrack:
    """Iterate the reduced state evolution for ``steps`` half-step pairs.

    Starts from ``(mu_0, sigma_0^2 = mu_0/lam)``, i.e. an initialiser
    consistent with the Bayes denoisers.
    """
    if mu_0 < 0:
        raise ValueError("mu_0 must be non-negative")
    mu = [float(mu_0)]
    sigma2 = [mu_0 / lam if lam > 0 else 0.0]
    nu, tau2 = [], []
    for _ in range(steps):
        m = lam * mu[-1]
        t2 = expect(xi, lambda x: m / (x * (x + m)))
        tau2.append(t2)
        nu.append(lam * t2)
        k = lam * nu[-1]
        s2 = expect(sigma, lambda s: k / (s * (s + k))) / delta
        sigma2.append(s2)
        mu.append(lam * s2)
    return SeTrack(np.array(mu), np.array(sigma2), np.array(nu), np.array(tau2))


@dataclass(frozen=True)
class OracleWarmStart:
    """``v~^0 = F (nu* Sigma^{-1} v* + tau* Sigma^{-1/2} w)`` with fresh Gaussian ``w``."""

    noise_seed: int = 0


@dataclass(frozen=True)
class FromVector:
    """User-supplied ``v~^0``; ``mu0`` seeds the state evolution (default ``mu*``)."""

    v0: np.ndarray
    mu0: Optional[float] = None


@dataclass
class AmpState:
    t: int
    u: np.ndarray
    v: np.ndarray
    tilde_u: np.ndarray
    tilde_v: np.ndarray
    b: float
    c: float
    se: SeTrack
    history: dict = field(default_factory=dict, repr=False)


def _denoiser(scale, var):
    """Eigenvalue map of ``scale (scale^2 M^{-1} + var I)^{-1}``."""
    if scale == 0.0:
        return lambda e: np.zeros_like(e)
    return lambda e: scale * e / (scale * scale + var * e)


def _onsager(cov: CovarianceModel, scale, var, n):
    """``(scale/n) tr((scale^2 M^{-1} + var I)^{-1} M^{-1})``."""
    if scale == 0.0:
        return 0.0
    return scale * cov.trace_fn(lambda e: 1.0 / (scale * scale + var * e)) / n


def _inv(e):
    return 1.0 / e


def run_bayes_amp(
    inst: ProblemInstance,
    xi: CovarianceModel,
    sigma: CovarianceModel,
    theory: TheoryParams,
    init,
    steps: int,
    measures=None,
) -> AmpState:
    """Run ``steps`` Bayes-AMP iterations and return the final state.

    ``measures`` (row, column) drive the state evolution; by default the exact
    ESDs of ``xi`` and ``sigma`` are used. ``history`` records per-step
    ``b``, ``c``, ``u_change = ||u^t - u^{t-1}||^2 / n``, ``corr_u`` (normalised
    correlation of ``Xi u^t`` with ``u*``), ``inner_u = <Xi u^t, u*>/n`` and
    ``mu_hat = (lam/n) <Sigma^{-1} v*, v~^t>``.
    """
    lam, n = inst.lam, inst.n
    if measures is None:
        measures = (measure_of(xi, xi.dim), measure_of(sigma, sigma.dim))
    a = inst.A

    if isinstance(init, OracleWarmStart):
        if not theory.above_threshold:
            raise BelowThreshold("oracle warm start needs the positive fixed point")
        nu_s = theory.nu_star
        w = rng_stream(init.noise_seed, STREAM_AMP_INIT).standard_normal(inst.d)
        raw = nu_s * sigma.apply(_inv, inst.v_star) + math.sqrt(nu_s / lam) * sigma.apply(lambda e: e**-0.5, w)
        tilde_v = sigma.apply(lambda e: lam * e / (lam * nu_s + e), raw)
        mu_0 = theory.mu_star
    else:
        tilde_v = np.asarray(init.v0, dtype=np.float64).copy()
        mu_0 = theory.mu_star if init.mu0 is None else init.mu0

    se = se_recursion(*measures, inst.delta, lam, mu_0, steps)
    tilde_u_prev = np.zeros(n)
    u_prev = None
    b = 0.0
    c = 0.0
    u = np.zeros(n)
    v = np.zeros(inst.d)
    hist = {"b": [], "c": [], "u_change": [], "corr_u": [], "inner_u": [], "mu_hat": []}
    bound = 1e8 * math.sqrt(n)
    norm_u_star = np.linalg.norm(inst.u_star)

    sinv_v_star = sigma.apply(_inv, inst.v_star)

    for t in range(steps):
        hist["mu_hat"].append(float(lam * np.dot(sinv_v_star, tilde_v) / n))
        u = xi.apply(_inv, a @ sigma.apply(_inv, tilde_v) - b * tilde_u_prev)
        if not np.all(np.isfinite(u)) or np.linalg.norm(u) > bound:
            raise Diverged(f"u^{t} diverged")
        mu_t, s2_t = se.mu[t], se.sigma2[t]
        tilde_u = xi.apply(_denoiser(mu_t, s2_t), u)
        c = _onsager(xi, mu_t, s2_t, n)

        v = sigma.apply(_inv, a.T @ xi.apply(_inv, tilde_u) - c * tilde_v)
        if not np.all(np.isfinite(v)) or np.linalg.norm(v) > bound:
            raise Diverged(f"v^{t + 1} diverged")
        nu_t, t2_t = se.nu[t], se.tau2[t]
        tilde_v = sigma.apply(_denoiser(nu_t, t2_t), v)
        b_next = _onsager(sigma, nu_t, t2_t, n)

        hist["b"].append(b)
        hist["c"].append(c)
        hist["u_change"].append(np.nan if u_prev is None else float(np.sum((u - u_prev) ** 2) / n))
        xu = xi.apply(lambda e: e, u)
        nxu = np.linalg.norm(xu)
        hist["inner_u"].append(float(np.dot(xu, inst.u_star) / n))
        hist["corr_u"].append(float(np.dot(xu, inst.u_star) / (nxu * norm_u_star)) if nxu > 0 else 0.0)

        u_prev = u
        tilde_u_prev = tilde_u
        b = b_next

    return AmpState(steps, u, v, tilde_u_prev, tilde_v, b, c, se, hist)


def amp_fixed_point_residual(state: AmpState, inst, xi, sigma, theory: TheoryParams) -> float:
    """Normalised residual of the AMP fixed-point equations.

    With ``G = lam (lam mu* Xi^{-1} + I)^{-1}``, ``F`` analogous, ``G^ = I + b* Xi^{-1} G``
    and ``F^ = I + c* Sigma^{-1} F``, returns the larger of
    ``||G^ u - Xi^{-1} A Sigma^{-1} F v||`` and the mirrored quantity, each
    divided by the larger norm of its two sides. An all-zero side pair (the
    trivial iterate) counts as residual 1.
    """
    lam = theory.lam
    mu, nu, b, c = theory.mu_star, theory.nu_star, theory.b_star, theory.c_star
    g = lambda e: lam * e / (lam * mu + e)  # noqa: E731
    f = lambda e: lam * e / (lam * nu + e)  # noqa: E731
    u, v, a = state.u, state.v, inst.A
    lhs_u = u + b * xi.apply(lambda e: g(e) / e, u)
    rhs_u = xi.apply(_inv, a @ sigma.apply(lambda e: f(e) / e, v))
    lhs_v = v + c * sigma.apply(lambda e: f(e) / e, v)
    rhs_v = sigma.apply(_inv, a.T @ xi.apply(lambda e: g(e) / e, u))
    return float(max(_rel(lhs_u, rhs_u), _rel(lhs_v, rhs_v)))


def _rel(lhs, rhs):
    scale = max(np.linalg.norm(lhs), np.linalg.norm(rhs))
    if scale == 0.0:
        return 1.0
    return np.linalg.norm(lhs - rhs) / scale


def amp_estimate(inst, xi, sigma, theory, steps=10, noise_seed=0, measures=None):
    """Bayes-AMP from the oracle warm start, reported like the spectral estimators.

    Uses ``u_hat ~ Xi u^t`` and ``v_hat ~ Sigma v^t``, scaled to norms
    ``eta_u sqrt(n)`` and ``eta_v sqrt(d)``.
    """
    state = run_bayes_amp(inst, xi, sigma, theory, OracleWarmStart(noise_seed), steps, measures)
    u_hat = xi.apply(lambda e: e, state.u)
    v_hat = sigma.apply(lambda e: e, state.v)
    u_hat *= theory.eta_u * math.sqrt(inst.n) / np.linalg.norm(u_hat)
    v_hat *= theory.eta_v * math.sqrt(inst.d) / np.linalg.norm(v_hat)
    return evaluate(BAYES_AMP, u_hat, v_hat, inst.u_star, inst.v_star, iterations_used=steps)
