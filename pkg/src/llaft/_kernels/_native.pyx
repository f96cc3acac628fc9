# cython: boundscheck=False, wraparound=False, cdivision=True
"""Native kernels: censored log-logistic AFT log-likelihood and the
exhaustive segmented least-squares knot search. Semantics match
`llaft._kernels.pure` (same iteration order, same tie-breaking)."""

from libc.math cimport exp, log, INFINITY, fabs

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "native"

DEF MAXK = 5
DEF MAXD = 7   # k + 2


cdef inline double _softplus(double z) nogil:
    if z > 0.0:
        return z + log(1.0 + exp(-z))
    return log(1.0 + exp(z))


def log_likelihood_sum(cnp.ndarray[double, ndim=1] y,
                       cnp.ndarray[double, ndim=1] event,
                       cnp.ndarray[double, ndim=2] X,
                       cnp.ndarray[double, ndim=1] beta,
                       double log_b):
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t p = X.shape[1]
    cdef double b = exp(log_b)
    cdef double total = 0.0, r = 0.0
    cdef double xb, z, d
    cdef Py_ssize_t i, j
    for i in range(n):
        xb = 0.0
        for j in range(p):
            xb += X[i, j] * beta[j]
        z = (y[i] - xb) / b
        d = event[i]
        r += d
        total += d * z - (1.0 + d) * _softplus(z)
    return total - r * log_b


cdef bint _solve_sym(double[MAXD][MAXD] M, double* rhs, double* out, int d) nogil:
    # Gaussian elimination with partial pivoting on a d x d system.
    cdef double a[MAXD][MAXD]
    cdef double v[MAXD]
    cdef int i, j, k, piv
    cdef double best, factor, tmp
    for i in range(d):
        v[i] = rhs[i]
        for j in range(d):
            a[i][j] = M[i][j]
    for k in range(d):
        piv = k
        best = fabs(a[k][k])
        for i in range(k + 1, d):
            if fabs(a[i][k]) > best:
                best = fabs(a[i][k])
                piv = i
        if best == 0.0:
            return False
        if piv != k:
            for j in range(d):
                tmp = a[k][j]; a[k][j] = a[piv][j]; a[piv][j] = tmp
            tmp = v[k]; v[k] = v[piv]; v[piv] = tmp
        for i in range(k + 1, d):
            factor = a[i][k] / a[k][k]
            if factor != 0.0:
                for j in range(k, d):
                    a[i][j] -= factor * a[k][j]
                v[i] -= factor * v[k]
    for i in range(d - 1, -1, -1):
        tmp = v[i]
        for j in range(i + 1, d):
            tmp -= a[i][j] * out[j]
        out[i] = tmp / a[i][i]
    return True


def best_segmented_fit(cnp.ndarray[double, ndim=1] x,
                       cnp.ndarray[double, ndim=1] y,
                       cnp.ndarray[double, ndim=1] cand,
                       int k):
    """Exhaustive LS search over increasing k-tuples of knots from `cand`."""
    if k > MAXK:
        raise ValueError(f"at most {MAXK} knots supported, got {k}")
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = cand.shape[0]
    cdef double sx = 0.0, sxx = 0.0, sy = 0.0, sxy = 0.0, syy = 0.0
    cdef Py_ssize_t i, j
    for i in range(n):
        sx += x[i]
        sxx += x[i] * x[i]
        sy += y[i]
        sxy += x[i] * y[i]
        syy += y[i] * y[i]

    cdef double M[MAXD][MAXD]
    cdef double rhs[MAXD]
    cdef double sol[MAXD]
    cdef int d = k + 2

    if k == 0:
        M[0][0] = n; M[0][1] = sx
        M[1][0] = sx; M[1][1] = sxx
        rhs[0] = sy; rhs[1] = sxy
        if not _solve_sym(M, rhs, sol, 2):
            raise np.linalg.LinAlgError("singular normal equations")
        return syy - sol[0] * rhs[0] - sol[1] * rhs[1], np.empty(0)

    # Suffix sums over grid points strictly above each candidate knot.
    idx_np = np.searchsorted(x, cand, side="right")
    cdef cnp.ndarray[double, ndim=1] S0 = np.empty(m)
    cdef cnp.ndarray[double, ndim=1] S1 = np.empty(m)
    cdef cnp.ndarray[double, ndim=1] S2 = np.empty(m)
    cdef cnp.ndarray[double, ndim=1] T0 = np.empty(m)
    cdef cnp.ndarray[double, ndim=1] T1 = np.empty(m)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] idx = idx_np.astype(np.intp)
    cdef double a0 = 0.0, a1 = 0.0, a2 = 0.0, b0 = 0.0, b1 = 0.0
    cdef Py_ssize_t pos = n
    for j in range(m - 1, -1, -1):
        while pos > idx[j]:
            pos -= 1
            a0 += 1.0
            a1 += x[pos]
            a2 += x[pos] * x[pos]
            b0 += y[pos]
            b1 += x[pos] * y[pos]
        S0[j] = a0; S1[j] = a1; S2[j] = a2; T0[j] = b0; T1[j] = b1

    cdef int jidx[MAXK]
    cdef double knot[MAXK]
    cdef int best_idx[MAXK]
    cdef double best_sse = INFINITY
    cdef double sse, av, bv
    cdef int ii, ll, t
    cdef bint ok, carried

    for ii in range(k):
        jidx[ii] = ii
    while True:
        for ii in range(k):
            knot[ii] = cand[jidx[ii]]
        M[0][0] = n; M[0][1] = sx; M[1][1] = sxx
        rhs[0] = sy; rhs[1] = sxy
        for ii in range(k):
            av = knot[ii]
            t = jidx[ii]
            M[0][2 + ii] = S1[t] - av * S0[t]
            M[1][2 + ii] = S2[t] - av * S1[t]
            rhs[2 + ii] = T1[t] - av * T0[t]
            for ll in range(ii, k):
                bv = knot[ll]
                t = jidx[ll]
                M[2 + ii][2 + ll] = S2[t] - (av + bv) * S1[t] + av * bv * S0[t]
        for ii in range(d):
            for ll in range(ii):
                M[ii][ll] = M[ll][ii]
        ok = _solve_sym(M, rhs, sol, d)
        if ok:
            sse = syy
            for ii in range(d):
                sse -= sol[ii] * rhs[ii]
            if sse < best_sse:
                best_sse = sse
                for ii in range(k):
                    best_idx[ii] = jidx[ii]
        # next combination (odometer)
        carried = True
        for ii in range(k - 1, -1, -1):
            if jidx[ii] < m - (k - ii):
                jidx[ii] += 1
                for ll in range(ii + 1, k):
                    jidx[ll] = jidx[ll - 1] + 1
                carried = False
                break
        if carried:
            break

    out = np.empty(k)
    for ii in range(k):
        out[ii] = cand[best_idx[ii]]
    return best_sse, out
