import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse.linalg import aslinearoperator

from hspec.errors import BelowThreshold, NoConvergence
from hspec.estimators import (OPTIMAL, evaluate, optimal_spectral, preprocess, preprocess_operator,
                              top_singular_pair, vanilla_svd, whiten_svd)
from hspec.model import sample_instance
from hspec.spectra import SpectralMeasure, make_identity, make_toeplitz, measure_of
from hspec.theory import compute_theory, weak_recovery_threshold

ONE = SpectralMeasure.point_mass(1.0)


# -- top singular pair ----------------------------------------------------------


@pytest.mark.parametrize("method", ["dense", "power"])
def test_diag_padded(method):
    m = np.zeros((5, 4))
    m[0, 0], m[1, 1], m[2, 2] = 3.0, 2.0, 1.0
    p = top_singular_pair(m, method=method)
    assert p.sigma1 == pytest.approx(3.0, abs=1e-12)
    assert p.sigma2 == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize("method", ["dense", "power"])
def test_rank_one(method):
    u = np.array([2.0, 0.0, 0.0])
    v = np.array([0.0, 3.0])
    p = top_singular_pair(np.outer(u, v), method=method)
    assert p.sigma1 == pytest.approx(6.0, abs=1e-12)
    assert p.sigma2 == pytest.approx(0.0, abs=1e-7)


def _check_against_svd(m, method, tol):
    p = top_singular_pair(m, method=method, tol=tol)
    u, s, vt = np.linalg.svd(m)
    assert abs(p.sigma1 - s[0]) < 1e-8
    assert abs(p.sigma2 - s[1]) < 1e-8
    sign = np.sign(np.dot(p.u1, u[:, 0]))
    np.testing.assert_allclose(sign * p.u1, u[:, 0], atol=1e-8)
    np.testing.assert_allclose(sign * p.v1, vt[0], atol=1e-8)


@pytest.mark.parametrize("method", ["dense", "power"])
def test_random_50x30(method):
    m = np.random.default_rng(0).standard_normal((50, 30))
    _check_against_svd(m, method, 1e-13)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 100), d=st.integers(2, 60), seed=st.integers(0, 2**31))
def test_power_matches_dense_oracle(n, d, seed):
    rng = np.random.default_rng(seed)
    # planted spread-out spectrum so that power iteration converges in the cap
    k = min(n, d)
    u, _ = np.linalg.qr(rng.standard_normal((n, k)))
    v, _ = np.linalg.qr(rng.standard_normal((d, k)))
    s = np.sort(rng.uniform(0.1, 1.0, k))[::-1] * 0.8 ** np.arange(k)
    m = (u * s) @ v.T
    _check_against_svd(m, "power", 1e-14)
    _check_against_svd(m, "dense", 1e-14)


def test_linear_operator_uses_power():
    m = np.random.default_rng(3).standard_normal((40, 25))
    p = top_singular_pair(aslinearoperator(m))
    assert p.iterations > 1
    assert p.sigma1 == pytest.approx(np.linalg.norm(m, 2), rel=1e-10)


def test_pair_errors():
    m = np.random.default_rng(4).standard_normal((20, 10))
    with pytest.raises(ValueError):
        top_singular_pair(m, tol=1e-6)
    with pytest.raises(ValueError):
        top_singular_pair(m, method="lanczos")
    with pytest.raises(NoConvergence):
        top_singular_pair(m, method="power", max_iter=2)


# -- metrics --------------------------------------------------------------------


def test_evaluate_matches_dense_frobenius():
    rng = np.random.default_rng(5)
    n, d = 30, 20
    u, v = rng.standard_normal(n), rng.standard_normal(d)
    uh, vh = rng.standard_normal(n), rng.standard_normal(d)
    rep = evaluate("x", uh, vh, u, v)
    assert rep.mse_uu == pytest.approx(np.sum((np.outer(u, u) - np.outer(uh, uh)) ** 2) / n**2, rel=1e-12)
    assert rep.mse_vv == pytest.approx(np.sum((np.outer(v, v) - np.outer(vh, vh)) ** 2) / d**2, rel=1e-12)
    assert rep.mse_uv == pytest.approx(np.sum((np.outer(u, v) - np.outer(uh, vh)) ** 2) / (n * d), rel=1e-12)
    assert rep.overlap_u == pytest.approx(abs(u @ uh) / np.linalg.norm(u) / np.linalg.norm(uh))


def test_evaluate_sign_invariant():
    rng = np.random.default_rng(6)
    u, v, uh, vh = (rng.standard_normal(k) for k in (10, 8, 10, 8))
    a = evaluate("x", uh, vh, u, v)
    b = evaluate("x", -uh, -vh, u, v)
    for f in ("overlap_u", "overlap_v", "mse_uu", "mse_vv", "mse_uv"):
        assert getattr(a, f) == pytest.approx(getattr(b, f), rel=1e-14)
    assert np.dot(b.u_hat, u) >= 0


# -- estimators -------------------------------------------------------------------


@pytest.fixture(scope="module")
def identity_case():
    n = d = 2000
    xi, sg = make_identity(n), make_identity(d)
    th = compute_theory(ONE, ONE, 1.0, 2.0)
    inst = sample_instance(xi, sg, 2.0, seed=21)
    return inst, xi, sg, th


def test_preprocess_identity_is_scalar_multiple(identity_case):
    inst, xi, sg, th = identity_case
    lam = th.lam
    k = lam / math.sqrt((lam * (th.mu_star + th.b_star) + 1) * (lam * (th.nu_star + th.c_star) + 1))
    np.testing.assert_allclose(preprocess(inst, xi, sg, th), k * inst.A, rtol=1e-13)


def test_identity_overlap_and_agreement(identity_case):
    inst, xi, sg, th = identity_case
    opt = optimal_spectral(inst, xi, sg, th)
    van = vanilla_svd(inst)
    wh = whiten_svd(inst, xi, sg)
    assert abs(opt.overlap_u - math.sqrt(0.75)) < 0.05
    assert abs(opt.overlap_u - van.overlap_u) < 0.03
    assert abs(opt.overlap_u - wh.overlap_u) < 0.03
    # whiten with identity covariances is vanilla
    np.testing.assert_allclose(wh.u_hat, van.u_hat, atol=1e-10)
    assert wh.overlap_v == pytest.approx(van.overlap_v, abs=1e-12)


def test_optimal_scale_consistency(identity_case):
    inst, xi, sg, th = identity_case
    rep = optimal_spectral(inst, xi, sg, th)
    assert rep.estimator == OPTIMAL
    assert np.dot(rep.u_hat, rep.u_hat) == pytest.approx(th.eta_u**2 * inst.n, rel=1e-12)
    assert np.dot(rep.v_hat, rep.v_hat) == pytest.approx(th.eta_v**2 * inst.d, rel=1e-12)


@pytest.fixture(scope="module")
def toeplitz_case():
    n, d = 1200, 400
    xi, sg = make_identity(n), make_toeplitz(d, 0.9)
    ms = measure_of(sg, d)
    lam = 1.5 * weak_recovery_threshold(ONE, ms, 3.0)
    th = compute_theory(ONE, ms, 3.0, lam)
    return sample_instance(xi, sg, lam, seed=2), xi, sg, th


def test_operator_matches_dense(toeplitz_case):
    inst, xi, sg, th = toeplitz_case
    dense = preprocess(inst, xi, sg, th)
    op = preprocess_operator(inst, xi, sg, th)
    x = np.random.default_rng(0).standard_normal(inst.d)
    y = np.random.default_rng(1).standard_normal(inst.n)
    np.testing.assert_allclose(op.matvec(x), dense @ x, atol=1e-12)
    np.testing.assert_allclose(op.rmatvec(y), dense.T @ y, atol=1e-12)


def test_power_and_dense_estimates_agree(toeplitz_case):
    inst, xi, sg, th = toeplitz_case
    a = optimal_spectral(inst, xi, sg, th, method="dense")
    b = optimal_spectral(inst, xi, sg, th, method="power")
    assert a.sigma1_Astar == pytest.approx(b.sigma1_Astar, abs=1e-9)
    assert a.sigma2_Astar == pytest.approx(b.sigma2_Astar, abs=1e-7)
    assert a.overlap_u == pytest.approx(b.overlap_u, abs=1e-6)


def test_below_threshold_raises():
    th = compute_theory(ONE, ONE, 1.0, 0.9)
    inst = sample_instance(make_identity(50), make_identity(50), 0.9, seed=0)
    with pytest.raises(BelowThreshold):
        preprocess(inst, make_identity(50), make_identity(50), th)
    with pytest.raises(BelowThreshold):
        optimal_spectral(inst, make_identity(50), make_identity(50), th)
    with pytest.raises(BelowThreshold):
        preprocess_operator(inst, make_identity(50), make_identity(50), th)


def test_no_signal_baselines():
    n, d = 2000, 1000
    xi, sg = make_toeplitz(n, 0.5), make_identity(d)
    inst = sample_instance(xi, sg, 0.0, seed=13)
    assert vanilla_svd(inst).overlap_u < 0.1
    assert whiten_svd(inst, xi, sg).overlap_u < 0.1


def test_vanilla_strong_signal():
    inst = sample_instance(make_identity(1000), make_identity(500), 20.0, seed=1)
    rep = vanilla_svd(inst)
    assert rep.overlap_u > 0.99 and rep.overlap_v > 0.99


@pytest.mark.slow
def test_sigma2_concentration_and_gap_fig1a_d2000():
    n, d = 8000, 2000
    xi, sg = make_identity(n), make_toeplitz(d, 0.9)
    ms = measure_of(sg, d)
    lam = 1.05 * weak_recovery_threshold(ONE, ms, 4.0)
    th = compute_theory(ONE, ms, 4.0, lam)
    s1, s2 = [], []
    for seed in range(10):
        inst = sample_instance(xi, sg, lam, seed=seed)
        rep = optimal_spectral(inst, xi, sg, th)
        s1.append(rep.sigma1_Astar)
        s2.append(rep.sigma2_Astar)
    assert min(a - b for a, b in zip(s1, s2)) > 0
    assert np.std(s2, ddof=1) < 0.02
    assert abs(np.mean(s2) - th.sigma2_star) < 0.03
