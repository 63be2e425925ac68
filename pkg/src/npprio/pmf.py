"""Containers for computed probability mass functions."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .model import ModelParams

#: negative round-off of at most this magnitude is set to zero and counted
CLAMP_THRESHOLD = 1e-18


def clamp_roundoff(values: np.ndarray) -> tuple[np.ndarray, int, int]:
    """Zero out tiny negatives.

    Returns (values, n_clamped, n_negative) where ``n_negative`` counts entries
    more negative than the threshold, which are left in place.
    """
    values = np.array(values, dtype=np.float64)
    neg = values < 0.0
    small = neg & (values >= -CLAMP_THRESHOLD)
    values[small] = 0.0
    return values, int(small.sum()), int((neg & ~small).sum())


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class PmfVector:
    """Prefix f(0..n_max) of a one-dimensional law."""

    values: np.ndarray
    kind: str
    method: str
    params: ModelParams | None = None
    conditional: bool = True
    clamped: int = 0
    negative: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))

    @classmethod
    def build(cls, values, kind, method, params=None, **meta):
        values, n_clamped, n_neg = clamp_roundoff(values)
        return cls(values, kind, method, params, True, n_clamped, n_neg, meta)

    @property
    def n_max(self) -> int:
        return self.values.shape[0] - 1

    def __len__(self):
        return self.values.shape[0]

    def __getitem__(self, item):
        return self.values[item]

    def with_values(self, values, conditional=None):
        return replace(self, values=values,
                       conditional=self.conditional if conditional is None else conditional)


@dataclass(frozen=True, eq=False)
class JointPmf:
    """Matrix f(n, m); rows index the low-priority queue, columns the high."""

    values: np.ndarray
    method: str
    params: ModelParams | None = None
    conditional: bool = True
    clamped: int = 0
    negative: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))

    @classmethod
    def build(cls, values, method, params=None, **meta):
        values, n_clamped, n_neg = clamp_roundoff(values)
        return cls(values, method, params, True, n_clamped, n_neg, meta)

    @property
    def n_max(self) -> int:
        return self.values.shape[0] - 1

    @property
    def m_max(self) -> int:
        return self.values.shape[1] - 1

    @property
    def shape(self):
        return self.values.shape

    def __getitem__(self, item):
        return self.values[item]

    def with_values(self, values, conditional=None):
        return replace(self, values=values,
                       conditional=self.conditional if conditional is None else conditional)

    def antidiagonal_sums(self, k_max: int | None = None) -> np.ndarray:
        """sum_n f(n, k - n) for k = 0..k_max, using only entries inside the matrix.

        Sums are exact totals only for k <= min(n_max, m_max).
        """
        v = self.values
        if k_max is None:
            k_max = min(self.n_max, self.m_max)
        flipped = v[:, ::-1]
        offset = self.m_max
        return np.array([np.trace(flipped, offset=offset - k) for k in range(k_max + 1)])

    def xlo(self) -> np.ndarray:
        return self.values[:, 0].copy()

    def xhi(self) -> np.ndarray:
        return self.values[0, :].copy()
