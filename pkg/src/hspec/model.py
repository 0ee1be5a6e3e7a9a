"""Seeded synthetic instances of ``A = (lambda/n) u v^T + Xi^{1/2} W Sigma^{1/2}``.

Randomness comes from numpy's counter-based Philox generator keyed by
``(seed, stream)``; the signal vectors and the noise use disjoint streams so
any one of them can be regenerated on its own.

Instance dump format (``save_instance``/``load_instance``): a 32-byte header
``b"HSPEC1\\0\\0"`` + ``n`` (uint64) + ``d`` (uint64) + ``lambda`` (float64),
followed by ``u*`` (n), ``v*`` (d) and ``A`` (n*d, row-major), all
little-endian float64.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .spectra import CovarianceModel

PRIORS = ("gaussian", "rademacher")

STREAM_U = 1
STREAM_V = 2
STREAM_NOISE = 3
STREAM_AMP_INIT = 4

_MAGIC = b"HSPEC1\x00\x00"
_HEADER = struct.Struct("<8sQQd")


def rng_stream(seed: int, stream: int) -> np.random.Generator:
    """Independent generator for ``(seed, stream)``."""
    key = np.array([int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def draw_prior(prior: str, size: int, rng: np.random.Generator) -> np.ndarray:
    if prior == "gaussian":
        return rng.standard_normal(size)
    if prior == "rademacher":
        return rng.choice(np.array([-1.0, 1.0]), size=size)
    raise ValueError(f"unknown prior {prior!r}; expected one of {PRIORS}")


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    n: int
    d: int
    lam: float
    u_star: np.ndarray
    v_star: np.ndarray
    A: np.ndarray
    seed: int
    prior: str = "gaussian"

    @property
    def delta(self) -> float:
        return self.n / self.d

    def noise(self) -> np.ndarray:
        """Regenerate the white noise ``W~`` (entries of variance ``1/n``)."""
        return sample_noise(self.n, self.d, self.seed)


def sample_noise(n: int, d: int, seed: int) -> np.ndarray:
    return rng_stream(seed, STREAM_NOISE).standard_normal((n, d)) / np.sqrt(n)


def sample_instance(
    xi: CovarianceModel,
    sigma: CovarianceModel,
    lam: float,
    prior: str = "gaussian",
    seed: int = 0,
) -> ProblemInstance:
    n, d = xi.dim, sigma.dim
    u = draw_prior(prior, n, rng_stream(seed, STREAM_U))
    v = draw_prior(prior, d, rng_stream(seed, STREAM_V))
    w = sample_noise(n, d, seed)
    noise = sigma.apply_right(np.sqrt, xi.apply(np.sqrt, w))
    a = noise + (lam / n) * np.outer(u, v)
    for arr in (u, v, a):
        arr.setflags(write=False)
    return ProblemInstance(n, d, float(lam), u, v, a, int(seed), prior)


def whitened_view(inst: ProblemInstance, xi: CovarianceModel, sigma: CovarianceModel) -> np.ndarray:
    """``Xi^{-1/2} A Sigma^{-1/2}``."""
    if (inst.n, inst.d) != (xi.dim, sigma.dim):
        raise ValueError("covariance dimensions do not match the instance")
    inv_sqrt = lambda e: e**-0.5  # noqa: E731
    return sigma.apply_right(inv_sqrt, xi.apply(inv_sqrt, inst.A))


def save_instance(inst: ProblemInstance, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, inst.n, inst.d, inst.lam))
        for arr in (inst.u_star, inst.v_star, inst.A):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_instance(path, seed: int = -1, prior: str = "unknown") -> ProblemInstance:
    """Read a dump written by :func:`save_instance` (seed/prior are not stored)."""
    with open(path, "rb") as fh:
        magic, n, d, lam = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not an instance dump")
        body = np.frombuffer(fh.read(), dtype="<f8")
    if body.size != n + d + n * d:
        raise ValueError(f"{path}: truncated payload")
    u, v, a = body[:n], body[n:n + d], body[n + d:].reshape(n, d)
    return ProblemInstance(int(n), int(d), float(lam), u.astype(np.float64), v.astype(np.float64),
                           a.astype(np.float64), seed, prior)
