"""Event-driven simulation of the M/M/N queue with two non-preemptive classes.

The simulator tracks (busy servers, waiting low, waiting high).  When a
server frees up it takes a waiting high-priority client if there is one,
otherwise a low-priority one.  It accumulates the time spent in each (n, m)
while all servers are busy, which estimates the wait-conditional joint law.

Standard errors come from batch means: the post-warm-up events are split
into equal batches, each batch gives its own estimate, and the spread of
those estimates gives the error of their ratio-weighted mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import BACKEND, kernels
from .model import ModelParams, ParameterError

MIN_EVENTS = 100_000
CHUNK = 1 << 20


@dataclass(frozen=True, eq=False)
class MonteCarloResult:
    joint: np.ndarray
    stderr: np.ndarray
    aggregate: np.ndarray
    aggregate_stderr: np.ndarray
    busy_fraction: float
    overflow: float
    n_events: int
    warmup_events: int
    n_batches: int
    seed: int
    backend: str


def _default_cap(r: float) -> int:
    # cells beyond r^cap < 1e-9 are never going to be resolved anyway
    return int(min(127, max(8, math.ceil(math.log(1e-9) / math.log(r)))))


def monte_carlo(params: ModelParams, n_servers: int | None = None, n_events: int = 10_000_000,
                seed: int = 0, warmup_fraction: float = 0.1, n_batches: int = 50,
                cap: int | None = None, chunk: int = CHUNK) -> MonteCarloResult:
    """Simulate ``n_events`` transitions and estimate the wait-conditional law.

    The first ``warmup_fraction`` of events is discarded.  Cells with
    n or m above ``cap`` are lumped into ``overflow``.
    """
    n_servers = n_servers if n_servers is not None else params.n_servers
    if n_servers is None:
        raise ParameterError("monte_carlo needs a server count")
    n_servers = int(n_servers)
    if n_servers < 1:
        raise ParameterError("n_servers must be >= 1")
    if n_events < MIN_EVENTS:
        raise ParameterError(f"n_events must be >= {MIN_EVENTS}")
    if not 0.0 <= warmup_fraction < 1.0:
        raise ParameterError("warmup_fraction must be in [0, 1)")
    if n_batches < 2:
        raise ParameterError("need at least two batches")
    cap = _default_cap(params.r) if cap is None else int(cap)

    mu = params.mu
    lam = params.r * n_servers * mu
    lam_hi = params.nu * lam
    rng = np.random.default_rng(seed)
    state = np.zeros(3, dtype=np.int64)
    warm = int(n_events * warmup_fraction)
    per_batch = (n_events - warm) // n_batches

    def run(count, occ, acc, record):
        while count > 0:
            size = min(count, chunk)
            expo = rng.standard_exponential(size)
            unif = rng.random(size)
            kernels.simulate_chunk(state, expo, unif, lam, lam_hi, mu, n_servers, cap, occ, acc, record)
            count -= size

    scratch = np.zeros((cap + 1, cap + 1))
    run(warm, scratch, np.zeros(3), False)

    occ_b = np.zeros((n_batches, cap + 1, cap + 1))
    acc_b = np.zeros((n_batches, 3))
    for b in range(n_batches):
        run(per_batch, occ_b[b], acc_b[b], True)

    busy = acc_b[:, 1]
    total_busy = busy.sum()
    est = occ_b.sum(axis=0) / total_busy
    per = occ_b / busy[:, None, None]
    # ratio estimator error from batch means
    se = np.std(per, axis=0, ddof=1) / math.sqrt(n_batches)

    k_max = cap
    agg_b = np.zeros((n_batches, k_max + 1))
    for k in range(k_max + 1):
        n = np.arange(k + 1)
        agg_b[:, k] = per[:, n, k - n].sum(axis=1)
    agg = np.zeros(k_max + 1)
    for k in range(k_max + 1):
        n = np.arange(k + 1)
        agg[k] = est[n, k - n].sum()
    agg_se = np.std(agg_b, axis=0, ddof=1) / math.sqrt(n_batches)

    return MonteCarloResult(
        joint=est,
        stderr=se,
        aggregate=agg,
        aggregate_stderr=agg_se,
        busy_fraction=float(total_busy / acc_b[:, 0].sum()),
        overflow=float(acc_b[:, 2].sum() / total_busy),
        n_events=int(n_events),
        warmup_events=warm,
        n_batches=n_batches,
        seed=int(seed),
        backend=BACKEND,
    )
