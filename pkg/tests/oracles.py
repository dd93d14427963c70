"""Independent reference computations used by the tests."""
import math

import numpy as np


def kernel_value(kind, gamma, a, b):
    if kind == "linear":
        return sum(x * y for x, y in zip(a, b))
    return math.exp(-gamma * sum((x - y) ** 2 for x, y in zip(a, b)))


def brute_mmd2(Xs, Xt, kind, gamma, unbiased):
    """Double-loop kernel sums over Python lists."""
    Xs, Xt = np.asarray(Xs).tolist(), np.asarray(Xt).tolist()
    m, n = len(Xs), len(Xt)
    ss = tt = st = 0.0
    for i in range(m):
        for j in range(m):
            if not (unbiased and i == j):
                ss += kernel_value(kind, gamma, Xs[i], Xs[j])
    for i in range(n):
        for j in range(n):
            if not (unbiased and i == j):
                tt += kernel_value(kind, gamma, Xt[i], Xt[j])
    for i in range(m):
        for j in range(n):
            st += kernel_value(kind, gamma, Xs[i], Xt[j])
    if unbiased:
        return ss / (m * (m - 1)) + tt / (n * (n - 1)) - 2 * st / (m * n)
    return ss / m**2 + tt / n**2 - 2 * st / (m * n)


def grassmann_geodesic(U, V):
    """Geodesic from span(U) to span(V) via the Grassmann log map.

    Tangent ``(I - UU')V(U'V)^-1 = Y S Z'``; ``phi(t) = U Z cos(t atan S) + Y sin(t atan S)``.
    Needs ``U'V`` invertible (no angle of exactly pi/2).
    """
    M = U.T @ V
    tangent = (V - U @ M) @ np.linalg.inv(M)
    Y, S, Zt = np.linalg.svd(tangent, full_matrices=False)
    theta = np.arctan(S)
    UZ = U @ Zt.T

    def phi(ts):
        ts = np.asarray(ts)[:, None, None]
        return UZ[None] * np.cos(ts * theta) + Y[None] * np.sin(ts * theta)

    return phi


def quadrature_gfk(U, V, steps=100_000, chunk=20_000):
    """Trapezoid rule for int_0^1 phi phi' dt along the log-map geodesic."""
    phi = grassmann_geodesic(U, V)
    ts = np.linspace(0.0, 1.0, steps + 1)
    weights = np.full(ts.size, 1.0 / steps)
    weights[[0, -1]] *= 0.5
    d = U.shape[0]
    G = np.zeros((d, d))
    for lo in range(0, ts.size, chunk):
        P = phi(ts[lo:lo + chunk])
        G += np.einsum("t,tik,tjk->ij", weights[lo:lo + chunk], P, P)
    return G


def random_orthonormal(rng, d, k):
    q, _ = np.linalg.qr(rng.standard_normal((d, k)))
    return q


def two_class_blobs(rng, n=40, gap=2.0):
    """Classes separated along x0 by an empty slab of width ``gap``."""
    y = np.repeat([0, 1], n // 2)
    x0 = (gap / 2 + np.abs(rng.standard_normal(n))) * np.where(y == 1, 1.0, -1.0)
    X = np.column_stack([x0, rng.standard_normal(n)])
    return X, y
