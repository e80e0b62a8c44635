"""Kendall's tau-b with a two-sided p-value.

tau-b is computed in O(n log n) by Knight's method: sort by (x, y), count
tie groups, and count inversions of y with a merge sort.

p-values:

* ``exact`` (default for n <= 8 without ties): the permutation
  distribution of S = concordant - discordant, from the Mahonian
  (inversion-count) numbers;
* ``normal``: z = (|S| - c) / sqrt(Var S) with the tie-adjusted variance,
  where the continuity correction c is 1 without ties and 0 with ties.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from ..errors import DegenerateInputError, DomainError, InsufficientSamplesError, NonFiniteError

EXACT_MAX_N = 8


@dataclass(frozen=True)
class CalibrationResult:
    tau: float
    p_value: float
    n_tasks: int
    metric_name: str = ""
    direction: str = "negative"
    method: str = "normal"

    def to_dict(self) -> dict:
        return asdict(self)


def _merge_count(a: list) -> tuple[list, int]:
    """Sort ``a`` and return the number of strict inversions (i < j, a[i] > a[j])."""
    n = len(a)
    if n < 2:
        return a, 0
    mid = n // 2
    left, inv_l = _merge_count(a[:mid])
    right, inv_r = _merge_count(a[mid:])
    merged = []
    inv = inv_l + inv_r
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            merged.append(left[i])
            i += 1
        else:
            merged.append(right[j])
            inv += len(left) - i
            j += 1
    merged.extend(left[i:])
    merged.extend(right[j:])
    return merged, inv


def _tie_groups(values: Sequence) -> list[int]:
    _, counts = np.unique(np.asarray(values), return_counts=True)
    return [int(c) for c in counts if c > 1]


def _pairs(sizes: Iterable[int]) -> int:
    return sum(t * (t - 1) // 2 for t in sizes)


@dataclass(frozen=True)
class KendallCounts:
    n: int
    s: int  # concordant minus discordant
    n0: int
    ties_x: list
    ties_y: list

    @property
    def n1(self) -> int:
        return _pairs(self.ties_x)

    @property
    def n2(self) -> int:
        return _pairs(self.ties_y)

    @property
    def tau(self) -> float:
        return self.s / math.sqrt((self.n0 - self.n1) * (self.n0 - self.n2))


def kendall_counts(x: Sequence[float], y: Sequence[float]) -> KendallCounts:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    order = np.lexsort((y, x))
    xs, ys = x[order], y[order]
    _, swaps = _merge_count(ys.tolist())
    _, joint_counts = np.unique(np.column_stack([xs, ys]), axis=0, return_counts=True)
    joint = _pairs(int(c) for c in joint_counts if c > 1)
    ties_x, ties_y = _tie_groups(xs), _tie_groups(ys)
    n0 = n * (n - 1) // 2
    s = n0 - _pairs(ties_x) - _pairs(ties_y) + joint - 2 * swaps
    return KendallCounts(n, s, n0, ties_x, ties_y)


@lru_cache(maxsize=None)
def _mahonian(n: int) -> tuple[int, ...]:
    counts = [1]
    for m in range(2, n + 1):
        nxt = [0] * (len(counts) + m - 1)
        for i, c in enumerate(counts):
            for j in range(m):
                nxt[i + j] += c
        counts = nxt
    return tuple(counts)


def exact_p_value(n: int, s: int) -> float:
    """P(|S| >= |s|) under independence, no ties."""
    counts = _mahonian(n)
    n0 = n * (n - 1) // 2
    hit = sum(c for inv, c in enumerate(counts) if abs(n0 - 2 * inv) >= abs(s))
    return min(1.0, hit / math.factorial(n))


def normal_p_value(counts: KendallCounts) -> float:
    n = counts.n
    tx, ty = counts.ties_x, counts.ties_y
    v0 = n * (n - 1) * (2 * n + 5)
    vt = sum(t * (t - 1) * (2 * t + 5) for t in tx)
    vu = sum(u * (u - 1) * (2 * u + 5) for u in ty)
    var = (v0 - vt - vu) / 18.0
    if n > 2:
        var += sum(t * (t - 1) * (t - 2) for t in tx) * sum(u * (u - 1) * (u - 2) for u in ty) / (9.0 * n * (n - 1) * (n - 2))
    var += sum(t * (t - 1) for t in tx) * sum(u * (u - 1) for u in ty) / (2.0 * n * (n - 1))
    if var <= 0:
        return 1.0
    correction = 0 if (tx or ty) else 1
    z = max(abs(counts.s) - correction, 0) / math.sqrt(var)
    return min(1.0, math.erfc(z / math.sqrt(2.0)))


def kendall_tau(pairs, metric_name: str = "", method: str = "auto") -> CalibrationResult:
    """tau-b and two-sided p-value for ``(uncertainty, accuracy)`` pairs.

    ``method`` is ``"auto"``, ``"exact"`` or ``"normal"``; auto picks exact
    for ``n <= 8`` without ties.
    """
    arr = np.asarray(list(pairs), dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DomainError("pairs must be a sequence of (uncertainty, accuracy)")
    if arr.shape[0] < 2:
        raise InsufficientSamplesError("kendall_tau needs at least 2 pairs")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError("pairs contain non-finite values")
    x, y = arr[:, 0], arr[:, 1]
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateInputError("tau is undefined when one coordinate is constant")
    counts = kendall_counts(x, y)
    has_ties = bool(counts.ties_x or counts.ties_y)
    if method == "auto":
        method = "exact" if counts.n <= EXACT_MAX_N and not has_ties else "normal"
    if method == "exact":
        if has_ties:
            raise DomainError("exact p-values are only available without ties")
        p = exact_p_value(counts.n, counts.s)
    elif method == "normal":
        p = normal_p_value(counts)
    else:
        raise DomainError(f"unknown p-value method {method!r}")
    tau = max(-1.0, min(1.0, counts.tau))
    return CalibrationResult(tau, p, counts.n, metric_name, "negative", method)
