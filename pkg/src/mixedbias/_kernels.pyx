# cython: language_level=3
"""Compiled accumulation and coordinate-descent kernels.

Sums use Neumaier's variant of compensated summation, accumulated in row
order. Must not be built with -ffast-math: reassociation destroys the
compensation term.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


cdef inline void _neumaier(double* s, double* c, double x) noexcept nogil:
    cdef double t = s[0] + x
    if fabs(s[0]) >= fabs(x):
        c[0] += (s[0] - t) + x
    else:
        c[0] += (x - t) + s[0]
    s[0] = t


def compensated_mean(const double[::1] x):
    cdef Py_ssize_t n = x.shape[0], i
    cdef double s = 0.0, c = 0.0
    if n == 0:
        raise ValueError("mean of an empty vector")
    with nogil:
        for i in range(n):
            _neumaier(&s, &c, x[i])
    return (s + c) / n


def compensated_colmeans(const double[:, ::1] X):
    cdef Py_ssize_t n = X.shape[0], p = X.shape[1], i, j
    if n == 0:
        raise ValueError("mean over zero rows")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] s = np.zeros(p)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] c = np.zeros(p)
    cdef double[::1] sv = s, cv = c
    with nogil:
        for i in range(n):
            for j in range(p):
                _neumaier(&sv[j], &cv[j], X[i, j])
    return (s + c) / n


def weighted_gram_mean(const double[:, ::1] Phi, const double[::1] w):
    """Mean of w_i * phi_i phi_i^T over rows, returned exactly symmetric."""
    cdef Py_ssize_t n = Phi.shape[0], p = Phi.shape[1], i, j, k
    if n == 0:
        raise ValueError("mean over zero rows")
    if w.shape[0] != n:
        raise ValueError("weight length does not match row count")
    cdef cnp.ndarray[cnp.float64_t, ndim=2] s = np.zeros((p, p))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] c = np.zeros((p, p))
    cdef double[:, ::1] sv = s, cv = c
    cdef double wij
    with nogil:
        for i in range(n):
            for j in range(p):
                wij = w[i] * Phi[i, j]
                for k in range(j, p):
                    _neumaier(&sv[j, k], &cv[j, k], wij * Phi[i, k])
    G = (s + c) / n
    upper = np.triu(G)
    return upper + np.triu(G, 1).T


def lasso_cd(const double[:, ::1] G, const double[::1] M, double lam,
             double tol, Py_ssize_t max_iter):
    """Cyclic coordinate descent for 0.5 b'Gb - M'b + lam*|b|_1.

    Returns (beta, sweeps, last_max_update).
    """
    cdef Py_ssize_t p = G.shape[0], j, k, it
    cdef cnp.ndarray[cnp.float64_t, ndim=1] beta = np.zeros(p)
    cdef double[::1] b = beta
    cdef double r, new, delta, max_delta = 0.0
    it = 0
    with nogil:
        while it < max_iter:
            it += 1
            max_delta = 0.0
            for j in range(p):
                r = M[j]
                for k in range(p):
                    if k != j:
                        r = r - G[j, k] * b[k]
                if r > lam:
                    new = (r - lam) / G[j, j]
                elif r < -lam:
                    new = (r + lam) / G[j, j]
                else:
                    new = 0.0
                delta = fabs(new - b[j])
                if delta > max_delta:
                    max_delta = delta
                b[j] = new
            if max_delta <= tol:
                break
    return beta, it, max_delta
