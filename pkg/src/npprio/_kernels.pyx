# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot loops; see ``_purepy`` for the reference code."""

import numpy as np
cimport numpy as cnp
from libc.math cimport pow, frexp, ldexp

cnp.import_array()


def scaled_marginal(double r, double c1, double c2, double f0, Py_ssize_t n_max):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ft_arr = np.zeros(n_max + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dl_arr = np.zeros(n_max + 1)
    cdef double[::1] ft = ft_arr
    cdef double[::1] dl = dl_arr
    cdef Py_ssize_t n, k
    cdef double s
    ft[0] = f0
    for n in range(1, n_max + 1):
        dl[n - 1] = r * ft[n - 1]
        s = 0.0
        for k in range(n):
            s += ft[k] * dl[n - 1 - k]
        ft[n] = c2 * (ft[n - 1] + s)
        dl[n - 1] = r * ft[n - 1] - c1 * ft[n]
    return ft_arr


def lambda_series(double sgn, double inv_d, double lam, double f0, Py_ssize_t n_max):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] f_arr = np.zeros(n_max + 1)
    cdef double[::1] f = f_arr
    cdef Py_ssize_t n, k
    cdef double s
    f[0] = f0
    for n in range(1, n_max + 1):
        s = lam * f[n - 1]
        for k in range(1, n):
            s += f[k] * f[n - k]
        f[n] = sgn * inv_d * s
    return f_arr


def convolution_chain(phi0, lam, Py_ssize_t m_max):
    # numpy's convolve runs a vectorised dot; a plain compiled loop without
    # reassociation was several times slower, so this kernel stays in numpy
    cdef Py_ssize_t n1 = phi0.shape[0]
    cdef Py_ssize_t k
    out = np.empty((n1, m_max + 1))
    out[:, 0] = phi0
    phi = phi0
    for k in range(1, m_max + 1):
        phi = np.convolve(phi, lam)[:n1]
        out[:, k] = phi
    return out


cdef void _scaled_power(double x, long n, double* mant, int* expo) noexcept nogil:
    cdef double m = 0.5, bm
    cdef int e = 1, be, ee
    bm = frexp(x, &be)
    while n:
        if n & 1:
            m = frexp(m * bm, &ee)
            e += be + ee
        bm = frexp(bm * bm, &ee)
        be = 2 * be + ee
        n >>= 1
    mant[0] = m
    expo[0] = e


def binomial_cdf_table(double x, Py_ssize_t k_max, Py_ssize_t m_max, bint forward):
    cdef Py_ssize_t rows = k_max + 1
    cdef Py_ssize_t cols = m_max + 1
    cdef cnp.ndarray[cnp.float64_t, ndim=2] p_arr = np.zeros((rows, cols))
    cdef double[:, ::1] p = p_arr
    cdef Py_ssize_t mc, l, lmax
    cdef double d, q, y, acc, dm
    cdef int e, ee, de
    # each column is independent: walk l for fixed M
    if forward:
        q = 1.0 / x - 1.0
        for mc in range(cols):
            d = pow(x, <double>mc)
            e = 0
            if d < 1e-280:
                _scaled_power(x, mc, &d, &e)
            d = frexp(d, &ee)
            e += ee
            acc = ldexp(d, e)
            p[0, mc] = acc
            lmax = mc if mc < k_max else k_max
            for l in range(1, lmax + 1):
                d = d * (((mc + 1.0) / l - 1.0) * q)
                d = frexp(d, &ee)
                e += ee
                acc += ldexp(d, e)
                p[l, mc] = acc
            for l in range(lmax + 1, rows):
                p[l, mc] = acc
    else:
        y = 1.0 - x
        q = x / y
        for mc in range(cols):
            dm = pow(y, <double>mc)
            if dm < 1e-280:
                _scaled_power(y, mc, &d, &e)
            else:
                d = frexp(dm, &e)
            # walk down from l = M; store densities for l <= k_max
            for l in range(mc, -1, -1):
                if l < mc:
                    d = d * ((l + 1.0) / (mc - l) * q)
                    d = frexp(d, &ee)
                    e += ee
                if l <= k_max:
                    p[l, mc] = ldexp(d, e)
            acc = 0.0
            for l in range(rows):
                acc += p[l, mc]
                p[l, mc] = acc
    for mc in range(cols):
        for l in range(mc, rows):
            p[l, mc] = 1.0
    return p_arr


def simulate_chunk(cnp.int64_t[::1] state, double[::1] expo, double[::1] unif,
                   double lam, double lam_hi, double mu, long n_servers, long cap,
                   double[:, ::1] occ, double[::1] acc, bint record):
    cdef long busy = state[0], n = state[1], m = state[2]
    cdef double t_all = 0.0, t_busy = 0.0, t_over = 0.0
    cdef double rate, dt, v
    cdef Py_ssize_t i, count = expo.shape[0]
    with nogil:
        for i in range(count):
            rate = lam + busy * mu
            dt = expo[i] / rate
            t_all += dt
            if busy == n_servers:
                t_busy += dt
                if record:
                    if n <= cap and m <= cap:
                        occ[n, m] += dt
                    else:
                        t_over += dt
            v = unif[i] * rate
            if v < lam_hi:
                if busy < n_servers:
                    busy += 1
                else:
                    m += 1
            elif v < lam:
                if busy < n_servers:
                    busy += 1
                else:
                    n += 1
            else:
                if m > 0:
                    m -= 1
                elif n > 0:
                    n -= 1
                else:
                    busy -= 1
    state[0] = busy
    state[1] = n
    state[2] = m
    if record:
        acc[0] += t_all
        acc[1] += t_busy
        acc[2] += t_over
