"""Transition tensors and the super-spacey random surfer.

The surfer follows the higher-order chain when the current column is
defined, falls back to a state drawn from its own history when it is not,
and teleports with probability ``1 - alpha``. Its stationary vector solves

    x = alpha * P x^2 + alpha * (1 - |P x^2|_1) * x + (1 - alpha) * v
"""

from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .tensor import SparseTensor, _row_ids, apply_squared

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TransitionTensor:
    """Column-normalized tensor plus the set of feasible (non-empty) columns.

    ``feasible_columns`` holds one row of m-1 indices per feasible column.
    """

    tensor: SparseTensor
    feasible_columns: np.ndarray

    @property
    def dim(self) -> int:
        return self.tensor.n

    @property
    def order(self) -> int:
        return self.tensor.order


@dataclass
class StationaryDistribution:
    x: np.ndarray
    residual: float
    iterations: int
    alpha: float
    v: np.ndarray
    converged: bool


def normalize(T: SparseTensor) -> TransitionTensor:
    """Divide every non-empty column of ``T`` by its sum."""
    n = T.n
    if T.nnz == 0:
        return TransitionTensor(T, np.zeros((0, T.order - 1), dtype=np.int64))
    col_ids = _row_ids(T.indices[:, 1:], (n,) * (T.order - 1))
    uniq, first, inv = np.unique(col_ids, return_index=True, return_inverse=True)
    inv = inv.reshape(-1)
    sums = np.bincount(inv, weights=T.values)
    P = SparseTensor.from_entries(T.indices, T.values / sums[inv], T.dims, T.symmetric)
    return TransitionTensor(P, np.ascontiguousarray(T.indices[first, 1:]))


def _check_alpha(alpha: float) -> None:
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def _check_probability(v, n: int, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (n,):
        raise ValueError(f"{name} must have length {n}")
    if np.any(v < 0) or not np.all(np.isfinite(v)) or abs(v.sum() - 1.0) > 1e-9:
        raise ValueError(f"{name} must be a probability vector")
    return v


def stationary_residual(P: TransitionTensor, x, alpha: float, v) -> float:
    y = apply_squared(P.tensor, x)
    return float(
        np.abs(alpha * y + alpha * (1.0 - y.sum()) * x + (1.0 - alpha) * v - x).sum()
    )


def solve_stationary(
    P: TransitionTensor,
    alpha: float = 0.8,
    v=None,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    x0=None,
    callback: Optional[Callable[[int, np.ndarray], None]] = None,
) -> StationaryDistribution:
    """Fixed-point iteration for the super-spacey stationary vector.

    Stops once successive iterates differ by at most ``tol`` in the 1-norm.
    ``callback(k, x_k)`` is invoked for the starting point and every iterate.
    A run that hits ``max_iter`` is returned with ``converged=False``.
    """
    _check_alpha(alpha)
    n = P.dim
    v = np.full(n, 1.0 / n) if v is None else _check_probability(v, n, "v")
    x = v.copy() if x0 is None else _check_probability(x0, n, "x0").copy()
    if callback is not None:
        callback(0, x)
    converged = False
    k = 0
    for k in range(1, max_iter + 1):
        y = apply_squared(P.tensor, x)
        x_new = alpha * y + alpha * (1.0 - y.sum()) * x + (1.0 - alpha) * v
        x_new /= x_new.sum()
        diff = np.abs(x_new - x).sum()
        x = x_new
        if callback is not None:
            callback(k, x)
        if diff <= tol:
            converged = True
            break
    if not converged:
        log.warning("stationary iteration stopped after %d steps without converging", k)
    res = stationary_residual(P, x, alpha, v)
    return StationaryDistribution(x, res, k, alpha, v, converged)


class _History:
    """Visit counts inflated by one per state; O(1) sampling."""

    def __init__(self, n: int, steps: int):
        self.n = n
        self.visits = np.empty(steps + 1, dtype=np.int64)
        self.t = 0

    def add(self, state: int) -> None:
        self.visits[self.t] = state
        self.t += 1

    def draw(self, u: float) -> int:
        r = int(u * (self.t + self.n))
        if r < self.n:
            return r
        return int(self.visits[r - self.n])


def simulate_super_spacey(
    P: TransitionTensor,
    alpha: float = 0.8,
    v=None,
    steps: int = 100_000,
    seed=None,
) -> np.ndarray:
    """Run the super-spacey random surfer and return its occupation vector.

    The returned vector is the history-smoothed frequency
    ``(1 + visits_i) / (t + n)`` after ``steps`` transitions.
    """
    if steps < 1:
        raise ValueError("steps must be positive")
    n = P.dim
    m = P.order
    v = np.full(n, 1.0 / n) if v is None else _check_probability(v, n, "v")
    rng = np.random.default_rng(seed)

    idx, val = P.tensor.indices, P.tensor.values
    col_ids = _row_ids(idx[:, 1:], (n,) * (m - 1))
    columns: dict[int, tuple[list[float], list[int]]] = {}
    # rows are sorted column by column, so each column is one contiguous run
    bounds = np.flatnonzero(np.diff(col_ids)) + 1
    for lo, hi in zip(np.r_[0, bounds], np.r_[bounds, len(col_ids)]):
        if hi > lo:
            cum = np.cumsum(val[lo:hi])
            cum /= cum[-1]
            columns[int(col_ids[lo])] = (cum.tolist(), idx[lo:hi, 0].tolist())
    v_cum = np.cumsum(v).tolist()
    strides = [n ** (m - 2 - r) for r in range(m - 1)]

    hist = _History(n, steps)
    state = min(bisect.bisect_right(v_cum, rng.random() * v_cum[-1]), n - 1)
    hist.add(state)
    n_draws = m + 1
    chunk = 65_536
    u = rng.random((0, n_draws))
    pos = chunk
    for _ in range(steps):
        if pos >= len(u):
            u = rng.random((chunk, n_draws)).tolist()
            pos = 0
        row = u[pos]
        pos += 1
        if row[0] >= alpha:
            nxt = min(bisect.bisect_right(v_cum, row[1] * v_cum[-1]), n - 1)
        else:
            key = state * strides[0]
            for r in range(1, m - 1):
                key += hist.draw(row[r]) * strides[r]
            col = columns.get(key)
            if col is None:
                nxt = hist.draw(row[m - 1])
            else:
                cum, targets = col
                nxt = targets[min(bisect.bisect_right(cum, row[m]), len(targets) - 1)]
        state = nxt
        hist.add(state)
    counts = np.bincount(hist.visits[: hist.t], minlength=n)
    return (1.0 + counts) / (hist.t + n)
