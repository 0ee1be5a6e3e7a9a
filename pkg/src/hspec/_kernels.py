"""Scalar inner loops of the theory solvers.

Each kernel has a loop implementation compiled with numba and a vectorised
numpy twin with identical semantics. The public names dispatch on
``hspec._accel.USE_NUMBA``; both variants stay importable for testing and
benchmarking.

Measures are passed as parallel ``values``/``weights`` float64 arrays.
"""

import numpy as np

from ._accel import USE_NUMBA, njit

# --------------------------------------------------------------------------
# Fixed point of the q_v map with q_u eliminated
# --------------------------------------------------------------------------


def _fixed_point_qv_loop(xi_v, xi_w, sg_v, sg_w, a_snr, snr, q0, tol, max_iter):
    q = q0
    for it in range(1, max_iter + 1):
        qu = 0.0
        for i in range(xi_v.shape[0]):
            x = xi_v[i]
            qu += xi_w[i] * a_snr * q / (x * (x + a_snr * q))
        qv = 0.0
        for j in range(sg_v.shape[0]):
            s = sg_v[j]
            qv += sg_w[j] * snr * qu / (s * (s + snr * qu))
        if abs(qv - q) < tol:
            return qv, it, True
        q = qv
    return q, max_iter, False


def _fixed_point_qv_numpy(xi_v, xi_w, sg_v, sg_w, a_snr, snr, q0, tol, max_iter):
    q = q0
    for it in range(1, max_iter + 1):
        qu = np.dot(xi_w, a_snr * q / (xi_v * (xi_v + a_snr * q)))
        qv = np.dot(sg_w, snr * qu / (sg_v * (sg_v + snr * qu)))
        if abs(qv - q) < tol:
            return qv, it, True
        q = qv
    return q, max_iter, False


_fixed_point_qv_jit = njit(_fixed_point_qv_loop)


def fixed_point_qv(xi_v, xi_w, sg_v, sg_w, a_snr, snr, q0, tol, max_iter):
    """Iterate ``q_v <- f(q_v)`` from ``q0``.

    Returns ``(q_v, iterations, converged)``; convergence means two successive
    iterates differ by less than ``tol``.
    """
    impl = _fixed_point_qv_jit if USE_NUMBA else _fixed_point_qv_numpy
    return impl(
        np.ascontiguousarray(xi_v, dtype=np.float64),
        np.ascontiguousarray(xi_w, dtype=np.float64),
        np.ascontiguousarray(sg_v, dtype=np.float64),
        np.ascontiguousarray(sg_w, dtype=np.float64),
        float(a_snr), float(snr), float(q0), float(tol), int(max_iter),
    )


# --------------------------------------------------------------------------
# Bulk-edge functional psi(alpha) = alpha * beta(alpha) and its derivative
# --------------------------------------------------------------------------


def _edge_curve_loop(alphas, x_v, x_w, s_v, s_w, delta, rtol, max_bisect):
    m = alphas.shape[0]
    beta = np.empty(m)
    psi = np.empty(m)
    dpsi = np.empty(m)
    s_max = s_v[-1]
    s_mean = 0.0
    for j in range(s_v.shape[0]):
        s_mean += s_w[j] * s_v[j]
    for k in range(m):
        a = alphas[k]
        c = 0.0
        dc = 0.0
        for i in range(x_v.shape[0]):
            r = x_v[i] / (a - x_v[i])
            c += x_w[i] * r
            dc -= x_w[i] * r / (a - x_v[i])
        lo = c * s_max
        hi = lo + s_mean / delta
        for _ in range(max_bisect):
            mid = 0.5 * (lo + hi)
            h = 0.0
            for j in range(s_v.shape[0]):
                h += s_w[j] * s_v[j] / (mid - c * s_v[j])
            if h / delta > 1.0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= rtol * hi:
                break
        b = 0.5 * (lo + hi)
        e1 = 0.0
        e2 = 0.0
        for j in range(s_v.shape[0]):
            g = s_v[j] / (b - c * s_v[j])
            e1 += s_w[j] * g / (b - c * s_v[j])
            e2 += s_w[j] * g * g
        beta[k] = b
        psi[k] = a * b
        dpsi[k] = b + a * dc * e2 / e1
    return beta, psi, dpsi


def _edge_curve_numpy(alphas, x_v, x_w, s_v, s_w, delta, rtol, max_bisect):
    a = alphas[:, None]
    r = x_v[None, :] / (a - x_v[None, :])
    c = r @ x_w
    dc = -(r / (a - x_v[None, :])) @ x_w
    s_max = s_v[-1]
    lo = c * s_max
    hi = lo + np.dot(s_w, s_v) / delta
    active = np.ones(alphas.shape[0], dtype=bool)
    for _ in range(max_bisect):
        mid = 0.5 * (lo + hi)
        h = (s_v[None, :] / (mid[:, None] - c[:, None] * s_v[None, :])) @ s_w
        up = h / delta > 1.0
        lo = np.where(active & up, mid, lo)
        hi = np.where(active & ~up, mid, hi)
        active &= hi - lo > rtol * hi
        if not active.any():
            break
    b = 0.5 * (lo + hi)
    denom = b[:, None] - c[:, None] * s_v[None, :]
    g = s_v[None, :] / denom
    e1 = (g / denom) @ s_w
    e2 = (g * g) @ s_w
    return b, alphas * b, b + alphas * dc * e2 / e1


_edge_curve_jit = njit(_edge_curve_loop)


def edge_curve(alphas, x_v, x_w, s_v, s_w, delta, rtol=1e-14, max_bisect=200):
    """Evaluate ``beta``, ``psi`` and ``psi'`` on a grid of ``alpha`` values.

    ``x_*`` and ``s_*`` describe the transformed row/column measures; every
    alpha must exceed ``max(x_v)``. ``beta`` is found by bisection on
    ``(c(alpha) * max(s_v), c(alpha) * max(s_v) + E[S]/delta]``, where the
    defining equation is monotone.
    """
    alphas = np.ascontiguousarray(np.atleast_1d(alphas), dtype=np.float64)
    args = (
        np.ascontiguousarray(x_v, dtype=np.float64),
        np.ascontiguousarray(x_w, dtype=np.float64),
        np.ascontiguousarray(s_v, dtype=np.float64),
        np.ascontiguousarray(s_w, dtype=np.float64),
        float(delta), float(rtol), int(max_bisect),
    )
    if USE_NUMBA:
        return _edge_curve_jit(alphas, *args)
    # bound the (alphas x atoms) temporaries
    step = max(1, 2**22 // max(len(x_v), len(s_v)))
    parts = [_edge_curve_numpy(alphas[i:i + step], *args) for i in range(0, len(alphas), step)]
    return tuple(np.concatenate(p) for p in zip(*parts))
