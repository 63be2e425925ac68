"""Truncated Markov-chain oracle for the wait-conditional joint law.

Because the wait-conditional law does not depend on the number of servers,
a single-server chain suffices.  States are ``idle`` and (n, m) with
0 <= n, m <= K, where n and m count waiting low- and high-priority clients.
Arrivals that would leave the box are dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .model import ModelParams

K_CAP = 400


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class OracleResult:
    truncation: int
    values: np.ndarray
    tail_bound: float
    residual: float


def default_truncation(r: float, tail: float = 1e-14, cap: int = K_CAP) -> int:
    """Smallest K with r^K < tail, capped."""
    k = math.floor(math.log(tail) / math.log(r)) + 1
    return int(min(max(k, 1), cap))


def ctmc_oracle(params: ModelParams, truncation: int | None = None, tail: float = 1e-14) -> OracleResult:
    r, nu = params.r, params.nu
    k = default_truncation(r, tail) if truncation is None else int(truncation)
    if k < 1:
        raise ValueError("truncation must be >= 1")
    side = k + 1
    n_states = side * side + 1
    idle = side * side
    lam_lo = r * (1.0 - nu)
    lam_hi = r * nu

    n, m = np.divmod(np.arange(side * side), side)
    src, dst, rate = [], [], []

    def add(mask, target, q):
        if q == 0.0:
            return
        s = np.arange(side * side)[mask]
        src.append(s)
        dst.append(target[mask] if isinstance(target, np.ndarray) else np.full(s.size, target))
        rate.append(np.full(s.size, q))

    state = n * side + m
    add(n < k, state + side, lam_lo)
    add(m < k, state + 1, lam_hi)
    add(m > 0, state - 1, 1.0)
    add((m == 0) & (n > 0), state - side, 1.0)
    add((m == 0) & (n == 0), idle, 1.0)
    src.append(np.array([idle]))
    dst.append(np.array([0]))
    rate.append(np.array([r]))

    src = np.concatenate(src)
    dst = np.concatenate(dst)
    rate = np.concatenate(rate)
    q = sp.coo_matrix((rate, (src, dst)), shape=(n_states, n_states)).tocsr()
    out_rate = np.asarray(q.sum(axis=1)).ravel()
    gen = (q - sp.diags(out_rate)).T.tolil()
    # replace one balance equation by the normalisation
    gen[idle, :] = np.ones(n_states)
    rhs = np.zeros(n_states)
    rhs[idle] = 1.0
    gen = gen.tocsc()
    pi = spsolve(gen, rhs)
    if not np.all(np.isfinite(pi)):
        raise OracleError("stationary solve produced non-finite values")
    residual = float(np.abs(gen @ pi - rhs).max())
    if residual > 1e-9:
        raise OracleError(f"stationary solve is inaccurate: residual {residual:.3e}")
    busy = pi[:idle].reshape(side, side)
    busy = np.maximum(busy, 0.0)
    vals = busy / busy.sum()
    return OracleResult(k, vals, r ** (k + 1), residual)
