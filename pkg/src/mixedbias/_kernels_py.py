"""Pure-Python kernels, used when the compiled core is unavailable.

Means are formed with :func:`math.fsum`, which is exactly rounded and so
independent of row order. The coordinate-descent loop replays the compiled
kernel's floating-point operations one for one.
"""
import math

import numpy as np


def compensated_mean(x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape[0] == 0:
        raise ValueError("mean of an empty vector")
    return math.fsum(x.tolist()) / x.shape[0]


def compensated_colmeans(X):
    X = np.ascontiguousarray(X, dtype=np.float64)
    n, p = X.shape
    if n == 0:
        raise ValueError("mean over zero rows")
    cols = X.T.tolist()
    return np.array([math.fsum(col) / n for col in cols], dtype=np.float64)


def weighted_gram_mean(Phi, w):
    """Mean of w_i * phi_i phi_i^T over rows, returned exactly symmetric."""
    Phi = np.ascontiguousarray(Phi, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    n, p = Phi.shape
    if n == 0:
        raise ValueError("mean over zero rows")
    if w.shape[0] != n:
        raise ValueError("weight length does not match row count")
    G = np.empty((p, p), dtype=np.float64)
    for j in range(p):
        block = (w * Phi[:, j])[:, None] * Phi[:, j:]
        for offset, col in enumerate(block.T.tolist()):
            k = j + offset
            G[j, k] = G[k, j] = math.fsum(col) / n
    return G


def lasso_cd(G, M, lam, tol, max_iter):
    """Cyclic coordinate descent for 0.5 b'Gb - M'b + lam*|b|_1.

    Returns (beta, sweeps, last_max_update).
    """
    Gl = np.asarray(G, dtype=np.float64).tolist()
    Ml = np.asarray(M, dtype=np.float64).tolist()
    lam = float(lam)
    p = len(Ml)
    b = [0.0] * p
    it = 0
    max_delta = 0.0
    while it < max_iter:
        it += 1
        max_delta = 0.0
        for j in range(p):
            row = Gl[j]
            r = Ml[j]
            for k in range(p):
                if k != j:
                    r = r - row[k] * b[k]
            if r > lam:
                new = (r - lam) / row[j]
            elif r < -lam:
                new = (r + lam) / row[j]
            else:
                new = 0.0
            delta = abs(new - b[j])
            if delta > max_delta:
                max_delta = delta
            b[j] = new
        if max_delta <= tol:
            break
    return np.array(b, dtype=np.float64), it, max_delta
