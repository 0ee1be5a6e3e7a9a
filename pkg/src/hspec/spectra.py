"""Covariance families and their limiting spectral measures.

A :class:`CovarianceModel` is a trace-normalised symmetric positive-definite
matrix with a cached eigendecomposition; spectral functions ``f(M) @ X`` are
applied through that decomposition (or through the FFT for circulants, and
trivially for the identity). A :class:`SpectralMeasure` is a discrete
probability measure on ``(0, inf)`` that stands in for the limiting
eigenvalue law; every theory formula is an expectation against one.

The support condition that excludes covariance outliers is assumed for the
families built here and is not checked at runtime.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import DomainError, NotPositiveDefinite

DEFAULT_RESOLUTION = 4000


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpectralMeasure:
    """Discrete probability measure with atoms ``values`` and masses ``weights``."""

    values: np.ndarray
    weights: np.ndarray
    label: str = ""

    def __post_init__(self):
        values = np.atleast_1d(np.asarray(self.values, dtype=np.float64))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        if values.shape != weights.shape or values.ndim != 1 or values.size == 0:
            raise ValueError("values and weights must be non-empty 1-d arrays of equal length")
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise ValueError("atoms must be finite and strictly positive")
        if np.any(weights <= 0) or abs(math.fsum(weights) - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to 1")
        order = np.argsort(values, kind="stable")
        object.__setattr__(self, "values", _frozen(values[order]))
        object.__setattr__(self, "weights", _frozen(weights[order]))

    @classmethod
    def uniform(cls, values, label=""):
        values = np.asarray(values, dtype=np.float64)
        return cls(values, np.full(values.size, 1.0 / values.size), label)

    @classmethod
    def point_mass(cls, value=1.0, label=""):
        return cls(np.array([value]), np.array([1.0]), label)

    @property
    def sup(self) -> float:
        return float(self.values[-1])

    @property
    def inf(self) -> float:
        return float(self.values[0])

    def __len__(self):
        return self.values.size

    def moment(self, p: float) -> float:
        """``E[X**p]``."""
        return expect(self, lambda x: x**p)

    def map(self, func: Callable[[np.ndarray], np.ndarray], label="") -> "SpectralMeasure":
        """Push-forward of the measure through a positive function."""
        return SpectralMeasure(func(self.values), self.weights, label or self.label)


def expect(measure: SpectralMeasure, f: Callable[[np.ndarray], np.ndarray]) -> float:
    """``sum_k weight_k * f(value_k)`` with compensated summation.

    ``f`` receives the whole array of atoms. Non-finite terms raise
    :class:`DomainError`.
    """
    terms = np.broadcast_to(np.asarray(f(measure.values), dtype=np.float64), measure.values.shape)
    prod = measure.weights * terms
    if not np.all(np.isfinite(prod)):
        raise DomainError(f"integrand is not finite on the support of {measure.label or 'measure'}")
    return math.fsum(prod)


class CovarianceModel:
    """Trace-normalised SPD covariance with a cached eigendecomposition.

    ``eigvals`` are ascending and ``eigvecs[:, k]`` is the matching unit
    eigenvector. ``matrix`` and ``eigvecs`` are materialised lazily for the
    identity and circulant kinds, which apply spectral functions without
    them.
    """

    def __init__(self, kind, dim, eigvals, params=None, *, matrix=None, eigvecs=None, symbol=None):
        self.kind = kind
        self.dim = int(dim)
        self.params = dict(params or {})
        self.eigvals = _frozen(eigvals)
        self._matrix = None if matrix is None else _frozen(matrix)
        self._eigvecs = None if eigvecs is None else _frozen(eigvecs)
        # circulant only: eigenvalues in DFT order
        self._symbol = None if symbol is None else _frozen(symbol)
        if self.eigvals.shape != (self.dim,):
            raise ValueError("eigvals must have length dim")
        if np.any(self.eigvals <= 0):
            raise NotPositiveDefinite(f"{kind} covariance has min eigenvalue {self.eigvals.min():.3g}")

    def __repr__(self):
        extra = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"CovarianceModel({self.kind}, dim={self.dim}{', ' + extra if extra else ''})"

    @property
    def is_identity(self) -> bool:
        return self.kind == "identity"

    @functools.cached_property
    def eigvecs(self) -> np.ndarray:
        if self._eigvecs is not None:
            return self._eigvecs
        if self.kind == "identity":
            return _frozen(np.eye(self.dim))
        if self.kind == "circulant":
            basis, freq_eigs = _real_fourier_basis(self._symbol)
            return _frozen(basis[:, np.argsort(freq_eigs, kind="stable")])
        raise AssertionError("eigenvectors missing for dense kind")

    @functools.cached_property
    def matrix(self) -> np.ndarray:
        if self._matrix is not None:
            return self._matrix
        return _frozen(self.function(lambda e: e))

    def function(self, func: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Dense ``f(M)``."""
        if self.kind == "identity":
            return np.eye(self.dim) * float(func(np.ones(1))[0])
        q = self.eigvecs
        return (q * func(self.eigvals)) @ q.T

    def power(self, p: float) -> np.ndarray:
        """Dense ``M**p``."""
        return self.function(lambda e: e**p)

    def apply(self, func: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> np.ndarray:
        """``f(M) @ x`` for a vector or a ``(dim, k)`` block."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != self.dim:
            raise ValueError(f"leading dimension {x.shape[0]} != {self.dim}")
        if self.kind == "identity":
            return float(func(np.ones(1))[0]) * x
        if self.kind == "circulant":
            # symmetric circulant => even symbol, so the half spectrum suffices;
            # irfft also returns a contiguous array (a strided .real view drops BLAS later)
            spec = func(self._symbol[: self.dim // 2 + 1])
            if x.ndim == 2:
                spec = spec[:, None]
            return np.fft.irfft(spec * np.fft.rfft(x, axis=0), n=self.dim, axis=0)
        q = self.eigvecs
        f = func(self.eigvals)
        if x.ndim == 2:
            f = f[:, None]
        return q @ (f * (q.T @ x))

    def apply_right(self, func, x):
        """``x @ f(M)`` for a ``(k, dim)`` block (``f(M)`` is symmetric)."""
        return self.apply(func, np.asarray(x).T).T

    def trace_fn(self, func) -> float:
        """``tr f(M)`` from the cached eigenvalues."""
        return float(np.sum(func(self.eigvals)))


def _real_fourier_basis(symbol):
    """Orthonormal real eigenbasis of a symmetric circulant with DFT eigenvalues ``symbol``."""
    n = symbol.size
    j = np.arange(n)
    cols, eigs = [np.full(n, 1.0 / math.sqrt(n))], [symbol[0]]
    for k in range(1, (n - 1) // 2 + 1):
        ang = 2.0 * math.pi * k * j / n
        cols.append(math.sqrt(2.0 / n) * np.cos(ang))
        cols.append(math.sqrt(2.0 / n) * np.sin(ang))
        eigs += [symbol[k], symbol[k]]
    if n % 2 == 0:
        cols.append((-1.0) ** j / math.sqrt(n))
        eigs.append(symbol[n // 2])
    return np.column_stack(cols), np.asarray(eigs)


def make_identity(dim: int) -> CovarianceModel:
    return CovarianceModel("identity", dim, np.ones(dim))


@functools.lru_cache(maxsize=8)
def make_toeplitz(dim: int, rho: float) -> CovarianceModel:
    """Covariance with entries ``rho**|i-j|``, trace-normalised."""
    if dim < 2:
        raise ValueError("dim must be at least 2")
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    if rho == 0.0:
        return CovarianceModel("toeplitz", dim, np.ones(dim), {"rho": 0.0}, matrix=np.eye(dim), eigvecs=np.eye(dim))
    m = scipy.linalg.toeplitz(rho ** np.arange(dim, dtype=np.float64))
    eigvals, eigvecs = np.linalg.eigh(m)
    # the trace is already dim; keep the normalisation explicit anyway
    scale = float(np.mean(eigvals))
    if eigvals[0] <= 0:  # pragma: no cover - impossible for |rho| < 1
        raise NotPositiveDefinite("Toeplitz covariance lost definiteness numerically")
    return CovarianceModel("toeplitz", dim, eigvals / scale, {"rho": rho}, matrix=m / scale, eigvecs=eigvecs)


def circulant_first_row(dim: int, c: float, ell: int) -> np.ndarray:
    row = np.zeros(dim)
    row[0] = 1.0
    if ell:
        row[1:ell + 1] = c
        row[dim - ell:] = c
    return row


@functools.lru_cache(maxsize=8)
def make_circulant(dim: int, c: float, ell: int) -> CovarianceModel:
    """Symmetric circulant with first row ``(1, c x ell, 0, ..., 0, c x ell)``.

    Eigenvalues are the DFT of the first row.
    """
    if ell < 1 or 2 * ell + 1 > dim:
        raise ValueError("need ell >= 1 and 2*ell + 1 <= dim")
    symbol = np.fft.fft(circulant_first_row(dim, c, ell)).real
    if symbol.min() <= 0:
        raise NotPositiveDefinite(
            f"circulant(dim={dim}, c={c}, ell={ell}) has min eigenvalue {symbol.min():.3g}"
        )
    scale = float(np.mean(symbol))
    symbol = symbol / scale
    return CovarianceModel("circulant", dim, np.sort(symbol), {"c": c, "ell": ell}, symbol=symbol)


def make_custom(matrix) -> CovarianceModel:
    """Wrap an arbitrary symmetric positive-definite matrix (trace-normalised)."""
    m = np.array(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("covariance must be square")
    if not np.allclose(m, m.T, atol=1e-12 * max(1.0, np.abs(m).max())):
        raise ValueError("covariance must be symmetric")
    m = 0.5 * (m + m.T)
    eigvals, eigvecs = np.linalg.eigh(m)
    if eigvals[0] <= 0:
        raise NotPositiveDefinite(f"custom covariance has min eigenvalue {eigvals[0]:.3g}")
    scale = float(np.mean(eigvals))
    return CovarianceModel("custom", m.shape[0], eigvals / scale, matrix=m / scale, eigvecs=eigvecs)


def measure_of(cov: CovarianceModel, resolution: int = DEFAULT_RESOLUTION) -> SpectralMeasure:
    """Empirical eigenvalue measure standing in for the limiting law of ``cov``.

    * identity: a single atom at 1;
    * Toeplitz: ESD of the same-``rho`` Toeplitz matrix of size ``resolution``;
    * circulant: ``resolution`` evenly spaced order statistics of the ESD of
      ``cov`` itself (the family has no size-free limit at fixed ``c, ell``);
    * custom: the full ESD of ``cov``.

    ``resolution == cov.dim`` always returns the exact ESD of ``cov``.
    """
    if resolution < 1 or resolution > cov.dim:
        raise ValueError(f"resolution must lie in [1, {cov.dim}]")
    label = repr(cov)
    if cov.kind == "identity":
        return SpectralMeasure.point_mass(1.0, label)
    if resolution == cov.dim or cov.kind == "custom":
        return SpectralMeasure.uniform(cov.eigvals, label)
    if cov.kind == "toeplitz":
        rho = cov.params["rho"]
        if resolution < 2 or rho == 0.0:
            return SpectralMeasure.point_mass(1.0, label)
        ev = np.linalg.eigvalsh(scipy.linalg.toeplitz(rho ** np.arange(resolution, dtype=np.float64)))
        return SpectralMeasure.uniform(ev / ev.mean(), f"{label}@{resolution}")
    idx = np.floor((np.arange(resolution) + 0.5) * cov.dim / resolution).astype(int)
    ev = cov.eigvals[idx]
    return SpectralMeasure.uniform(ev / ev.mean(), f"{label}@{resolution}")
