import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from hspec.errors import DomainError, NotPositiveDefinite
from hspec.spectra import (SpectralMeasure, circulant_first_row, expect, make_circulant, make_custom,
                           make_identity, make_toeplitz, measure_of)


def _frob_ok(a, b, dim):
    return np.linalg.norm(a - b) <= 1e-8 * dim


# -- SpectralMeasure -------------------------------------------------------


def test_measure_sorted_and_readonly():
    m = SpectralMeasure([2.0, 0.5, 1.0], [0.2, 0.3, 0.5])
    assert list(m.values) == [0.5, 1.0, 2.0]
    assert list(m.weights) == [0.3, 0.5, 0.2]
    assert m.sup == 2.0 and m.inf == 0.5 and len(m) == 3
    with pytest.raises(ValueError):
        m.values[0] = 3.0


@pytest.mark.parametrize(
    "values, weights",
    [([1.0, -1.0], [0.5, 0.5]), ([0.0], [1.0]), ([1.0, np.inf], [0.5, 0.5]),
     ([1.0, 2.0], [0.5, 0.6]), ([1.0, 2.0], [1.0, 0.0]), ([], [])],
)
def test_measure_rejects_bad_atoms(values, weights):
    with pytest.raises(ValueError):
        SpectralMeasure(values, weights)


def test_expect_examples():
    assert expect(SpectralMeasure.point_mass(1.0), lambda x: 1 / x) == 1.0
    m = SpectralMeasure.uniform([0.5, 1.5])
    assert expect(m, lambda x: 1 / x) == pytest.approx(4 / 3, abs=1e-15)


def test_expect_flags_non_finite():
    m = SpectralMeasure.uniform([0.5, 1.5])
    with np.errstate(all="ignore"):
        with pytest.raises(DomainError):
            expect(m, lambda x: np.log(x - 1.0))
        with pytest.raises(DomainError):
            expect(m, lambda x: 1.0 / (x - 0.5))


@settings(max_examples=50, deadline=None)
@given(
    vals=st.lists(st.floats(0.05, 20.0), min_size=1, max_size=12),
    a=st.floats(-5, 5),
    b=st.floats(-5, 5),
)
def test_expect_linear(vals, a, b):
    m = SpectralMeasure.uniform(vals)
    f = lambda x: 1 / x  # noqa: E731
    g = lambda x: np.log(x)  # noqa: E731
    lhs = expect(m, lambda x: a * f(x) + b * g(x))
    rhs = a * expect(m, f) + b * expect(m, g)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_toeplitz_inverse_square_moment_matches_direct_sum():
    cov = make_toeplitz(500, 0.9)
    ev = np.linalg.eigvalsh(scipy.linalg.toeplitz(0.9 ** np.arange(500)))
    assert expect(measure_of(cov, 500), lambda x: x**-2.0) == pytest.approx(np.mean(ev**-2.0), rel=1e-10)


# -- covariance constructors ----------------------------------------------


def test_toeplitz_rho_zero_is_identity():
    cov = make_toeplitz(3, 0.0)
    np.testing.assert_array_equal(cov.eigvals, np.ones(3))
    np.testing.assert_array_equal(cov.matrix, np.eye(3))


def test_toeplitz_2x2_eigs():
    cov = make_toeplitz(2, 0.5)
    np.testing.assert_allclose(cov.eigvals, [0.5, 1.5], atol=1e-14)


def test_toeplitz_entries_and_trace():
    cov = make_toeplitz(50, 0.7)
    i, j = np.indices((50, 50))
    np.testing.assert_allclose(cov.matrix, 0.7 ** np.abs(i - j), atol=1e-13)
    assert np.trace(cov.matrix) / 50 == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("dim, rho", [(1, 0.5), (5, 1.0), (5, -0.1)])
def test_toeplitz_domain(dim, rho):
    with pytest.raises(ValueError):
        make_toeplitz(dim, rho)


def test_circulant_c_zero_is_identity():
    cov = make_circulant(8, 0.0, 1)
    np.testing.assert_allclose(cov.eigvals, np.ones(8), atol=1e-15)


def test_circulant_small_dft():
    cov = make_circulant(4, 0.1, 1)
    # DFT of (1, .1, 0, .1) = {1.2, 1.0, 0.8, 1.0}; the mean is already 1
    np.testing.assert_allclose(cov.eigvals, [0.8, 1.0, 1.0, 1.2], atol=1e-15)
    np.testing.assert_allclose(cov.matrix, scipy.linalg.circulant(circulant_first_row(4, 0.1, 1)), atol=1e-14)


def test_circulant_first_row_layout():
    row = circulant_first_row(10, 0.3, 2)
    np.testing.assert_array_equal(row, [1, 0.3, 0.3, 0, 0, 0, 0, 0, 0.3, 0.3])
    m = make_circulant(10, 0.3, 2).matrix
    # row i is row i-1 shifted right by one
    np.testing.assert_allclose(m[3], np.roll(row, 3), atol=1e-14)


def test_circulant_fig_parameters_not_positive_definite_at_d2000():
    # the published (c, ell) give two slightly negative DFT eigenvalues at d = 2000
    with pytest.raises(NotPositiveDefinite):
        make_circulant(2000, 0.0078, 300)
    assert make_circulant(2000, 0.0077, 300).eigvals[0] > 0
    assert make_circulant(1000, 0.0078, 300).eigvals[0] > 0


@pytest.mark.parametrize("dim, ell", [(10, 0), (10, 5)])
def test_circulant_domain(dim, ell):
    with pytest.raises(ValueError):
        make_circulant(dim, 0.1, ell)


@settings(max_examples=30, deadline=None)
@given(dim=st.integers(3, 64), data=st.data())
def test_circulant_dft_matches_dense(dim, data):
    ell = data.draw(st.integers(1, (dim - 1) // 2))
    c = data.draw(st.floats(0.0, 0.9 / (2 * ell)))
    cov = make_circulant(dim, c, ell)
    dense = scipy.linalg.circulant(circulant_first_row(dim, c, ell))
    ev = np.linalg.eigvalsh(dense)
    np.testing.assert_allclose(cov.eigvals, ev / ev.mean(), atol=1e-8)


def _all_kinds():
    rng = np.random.default_rng(0)
    g = rng.standard_normal((30, 30))
    return [
        make_identity(30),
        make_toeplitz(30, 0.8),
        make_circulant(30, 0.05, 4),
        make_circulant(31, 0.05, 4),
        make_custom(g @ g.T + 30 * np.eye(30)),
    ]


@pytest.mark.parametrize("cov", _all_kinds(), ids=lambda c: f"{c.kind}{c.dim}")
def test_covariance_invariants(cov):
    d = cov.dim
    q = cov.eigvecs
    assert _frob_ok(q @ q.T, np.eye(d), d)
    assert _frob_ok((q * cov.eigvals) @ q.T, cov.matrix, d)
    assert np.trace(cov.matrix) / d == pytest.approx(1.0, abs=1e-6)
    assert np.all(cov.eigvals > 0)
    half, mhalf = cov.power(0.5), cov.power(-0.5)
    assert _frob_ok(half @ half, cov.matrix, d)
    assert _frob_ok(mhalf @ half, np.eye(d), d)


@pytest.mark.parametrize("cov", _all_kinds(), ids=lambda c: f"{c.kind}{c.dim}")
def test_apply_matches_dense(cov):
    rng = np.random.default_rng(1)
    x = rng.standard_normal(cov.dim)
    blk = rng.standard_normal((cov.dim, 3))
    f = lambda e: e**-0.5 / (2.0 + e)  # noqa: E731
    dense = cov.function(f)
    np.testing.assert_allclose(cov.apply(f, x), dense @ x, atol=1e-12)
    np.testing.assert_allclose(cov.apply(f, blk), dense @ blk, atol=1e-12)
    np.testing.assert_allclose(cov.apply_right(f, blk.T), blk.T @ dense, atol=1e-12)
    assert cov.trace_fn(f) == pytest.approx(np.trace(dense), rel=1e-12)
    with pytest.raises(ValueError):
        cov.apply(f, np.ones(cov.dim + 1))


def test_custom_rejects_bad_input():
    with pytest.raises(ValueError):
        make_custom(np.ones((2, 3)))
    with pytest.raises(ValueError):
        make_custom([[1.0, 0.2], [0.0, 1.0]])
    with pytest.raises(NotPositiveDefinite):
        make_custom([[1.0, 2.0], [2.0, 1.0]])


# -- measure_of ------------------------------------------------------------


@pytest.mark.parametrize("res", [1, 7, 50])
def test_measure_identity_single_atom(res):
    m = measure_of(make_identity(50), res)
    assert len(m) == 1 and m.values[0] == 1.0 and m.weights[0] == 1.0


def test_measure_toeplitz_resolution():
    m = measure_of(make_toeplitz(400, 0.9), 300)
    assert len(m) == 300
    np.testing.assert_allclose(m.weights, 1 / 300)
    ev = np.linalg.eigvalsh(scipy.linalg.toeplitz(0.9 ** np.arange(300)))
    np.testing.assert_allclose(m.values, ev / ev.mean(), rtol=1e-12)


def test_measure_full_resolution_is_esd():
    cov = make_toeplitz(200, 0.9)
    m = measure_of(cov, 200)
    np.testing.assert_array_equal(m.values, cov.eigvals)


def test_measure_circulant_small():
    m = measure_of(make_circulant(4, 0.1, 1), 4)
    np.testing.assert_allclose(m.values, np.array([0.8, 1.0, 1.0, 1.2]), atol=1e-15)
    np.testing.assert_allclose(m.weights, 0.25)


def test_measure_circulant_downsampled_keeps_mean_one():
    m = measure_of(make_circulant(1000, 0.0078, 300), 250)
    assert len(m) == 250
    assert expect(m, lambda x: x) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("res", [0, 51])
def test_measure_resolution_range(res):
    with pytest.raises(ValueError):
        measure_of(make_toeplitz(50, 0.5), res)


def test_measure_map_pushforward():
    m = SpectralMeasure.uniform([1.0, 2.0, 4.0])
    p = m.map(lambda x: 1 / x)
    assert p.sup == 1.0 and p.inf == 0.25
    assert math.isclose(expect(p, lambda y: y), expect(m, lambda x: 1 / x))
