"""Reference implementations of the hot loops, in numpy and plain Python.

Each function mirrors one in ``_kernels.pyx`` with the same signature and the
same order of floating-point operations wherever a loop is sequential.
Inner products use ``numpy.dot`` here, so results can differ from the compiled
path in the last few bits.
"""

import math

import numpy as np


def scaled_marginal(r, c1, c2, f0, n_max):
    ft = np.zeros(n_max + 1)
    dl = np.zeros(n_max + 1)
    ft[0] = f0
    for n in range(1, n_max + 1):
        # ft[n] is still zero here, so delta[n-1] reduces to r*ft[n-1]
        dl[n - 1] = r * ft[n - 1]
        ft[n] = c2 * (ft[n - 1] + np.dot(ft[:n], dl[n - 1::-1]))
        dl[n - 1] = r * ft[n - 1] - c1 * ft[n]
    return ft


def lambda_series(sgn, inv_d, lam, f0, n_max):
    f = np.zeros(n_max + 1)
    f[0] = f0
    for n in range(1, n_max + 1):
        s = lam * f[n - 1]
        if n > 1:
            s += np.dot(f[1:n], f[n - 1:0:-1])
        f[n] = sgn * inv_d * s
    return f


def convolution_chain(phi0, lam, m_max):
    n1 = phi0.shape[0]
    out = np.empty((n1, m_max + 1))
    out[:, 0] = phi0
    phi = phi0
    for k in range(1, m_max + 1):
        phi = np.convolve(phi, lam)[:n1]
        out[:, k] = phi
    return out


def binomial_cdf_table(x, k_max, m_max, forward):
    """P[k, M] = sum_{l<=k} C(M,l) x^(M-l) (1-x)^l, with P = 1 for M <= k."""
    rows = k_max + 1
    cols = m_max + 1
    dens = np.zeros((rows, cols))
    mcol = np.arange(cols, dtype=np.float64)
    if forward:
        # start from x^M, walk up in l
        d = np.power(x, mcol)
        e = np.zeros(cols, dtype=np.int64)
        low = d < 1e-280
        for j in np.nonzero(low)[0]:
            d[j], e[j] = _scaled_power(x, j)
        d, ee = np.frexp(d)
        e += ee
        dens[0] = np.ldexp(d, e)
        q = 1.0 / x - 1.0
        for l in range(1, min(k_max, m_max) + 1):
            d = d * (((mcol + 1.0) / l - 1.0) * q)
            d, ee = np.frexp(d)
            e += ee
            dens[l] = np.where(mcol >= l, np.ldexp(d, e), 0.0)
    else:
        # start from (1-x)^M at l = M, walk down in l
        y = 1.0 - x
        q = x / y
        d = np.zeros(cols)
        e = np.zeros(cols, dtype=np.int64)
        for l in range(m_max, -1, -1):
            dm, de = _scaled_power(y, l) if y ** l < 1e-280 else math.frexp(y ** l)
            if l < m_max:
                sl = slice(l + 1, cols)
                d[sl] = d[sl] * ((l + 1.0) / (mcol[sl] - l) * q)
                d[sl], ee = np.frexp(d[sl])
                e[sl] += ee
            d[l] = dm
            e[l] = de
            if l <= k_max:
                dens[l, l:] = np.ldexp(d[l:], e[l:])
    p = np.cumsum(dens, axis=0)
    k = np.arange(rows)[:, None]
    p[k >= mcol[None, :]] = 1.0
    return p


def _scaled_power(x, n):
    # x**n as (mantissa, exponent) without underflow
    m, e = 0.5, 1
    bm, be = math.frexp(x)
    while n:
        if n & 1:
            m, ee = math.frexp(m * bm)
            e += be + ee
        bm, ee = math.frexp(bm * bm)
        be = 2 * be + ee
        n >>= 1
    return m, e


def simulate_chunk(state, expo, unif, lam, lam_hi, mu, n_servers, cap, occ, acc, record):
    busy, n, m = int(state[0]), int(state[1]), int(state[2])
    t_all = 0.0
    t_busy = 0.0
    t_over = 0.0
    for dt_raw, u in zip(expo.tolist(), unif.tolist()):
        rate = lam + busy * mu
        dt = dt_raw / rate
        t_all += dt
        if busy == n_servers:
            t_busy += dt
            if record:
                if n <= cap and m <= cap:
                    occ[n, m] += dt
                else:
                    t_over += dt
        v = u * rate
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
