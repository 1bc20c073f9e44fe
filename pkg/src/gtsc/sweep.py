"""Biased conductance and the sweep cut over an eigenvector ordering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import ImplicitChain


@dataclass
class SweepResult:
    S: np.ndarray
    phi: float
    split_position: int
    profile: np.ndarray
    order: np.ndarray
    degenerate: bool = False


def _mask(n: int, S) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    mask[np.asarray(list(S) if not isinstance(S, np.ndarray) else S, dtype=np.int64)] = True
    return mask


CHAINS = ("px", "tilde")


def _check_chain(chain: str) -> None:
    if chain not in CHAINS:
        raise ValueError(f"chain must be one of {CHAINS}, got {chain!r}")


def _column_weights(C: ImplicitChain) -> np.ndarray:
    # 1/c_j; a column of P[x] with no mass is read as a self-loop
    return np.where(C.c > 0, 1.0 / np.where(C.c > 0, C.c, 1.0), 0.0)


def biased_conductance(C: ImplicitChain, S, p=None, chain: str = "tilde") -> float:
    """``max(Pr(X1 in S' | X0 in S), Pr(X1 in S | X0 in S'))`` for one chain step.

    ``X0`` is drawn from ``p`` (the chain's ``x`` by default) restricted to
    the starting side. With ``chain="tilde"`` the step follows ``P~``, whose
    rank-one part is summed in closed form. With ``chain="px"`` it follows
    ``P[x]`` with columns rescaled to sum to one, i.e. the walk conditioned on
    taking a tensor transition. A side carrying no ``p`` mass scores 1.
    """
    _check_chain(chain)
    n = C.n
    p = C.x if p is None else np.asarray(p, dtype=np.float64)
    inS = _mask(n, S)
    out = ~inS
    to_out = np.asarray(C.Px[out, :].sum(axis=0)).reshape(-1)
    to_in = np.asarray(C.Px[inS, :].sum(axis=0)).reshape(-1)
    pS, pO = p[inS].sum(), p[out].sum()
    if pS <= 0 or pO <= 0:
        return 1.0
    if chain == "tilde":
        # sum_{i in other} P~_ij = sum_{i in other} Px_ij + (1 - c_j) x(other)
        slack = 1.0 - C.c
        to_out = to_out + slack * C.x[out].sum()
        to_in = to_in + slack * C.x[inS].sum()
    else:
        w = _column_weights(C)
        to_out, to_in = to_out * w, to_in * w
    exit_S = (p[inS] @ to_out[inS]) / pS
    exit_O = (p[out] @ to_in[out]) / pO
    return float(max(exit_S, exit_O))


def sweep_profile(C: ImplicitChain, order: np.ndarray, p=None, chain: str = "tilde") -> np.ndarray:
    """Biased conductance of every prefix ``order[:k]``, k = 1..n-1.

    Each non-zero of ``P[x]`` contributes to a contiguous range of prefixes,
    so all n-1 values come from difference arrays and prefix sums in
    O(nnz + n).
    """
    _check_chain(chain)
    n = C.n
    p = C.x if p is None else np.asarray(p, dtype=np.float64)
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    coo = C.Px.tocoo()
    ri, rj = rank[coo.row], rank[coo.col]
    start = p if chain == "tilde" else p * _column_weights(C)
    flow = coo.data * start[coo.col]
    # prefix S_k = {rank < k}; flow j -> i crosses S -> S' for rj < k <= ri
    out_diff = np.zeros(n + 1)
    fwd = rj < ri
    np.add.at(out_diff, rj[fwd] + 1, flow[fwd])
    np.add.at(out_diff, ri[fwd] + 1, -flow[fwd])
    in_diff = np.zeros(n + 1)
    bwd = ri < rj
    np.add.at(in_diff, ri[bwd] + 1, flow[bwd])
    np.add.at(in_diff, rj[bwd] + 1, -flow[bwd])
    num_out = np.cumsum(out_diff)[1:n]
    num_in = np.cumsum(in_diff)[1:n]

    p_o = p[order]
    pS = np.cumsum(p_o)[:-1]
    pO = p_o.sum() - pS
    if chain == "tilde":
        x_o, s_o = C.x[order], (p * (1.0 - C.c))[order]
        xS, sS = np.cumsum(x_o)[:-1], np.cumsum(s_o)[:-1]
        xO, sO = x_o.sum() - xS, s_o.sum() - sS
        num_out = num_out + sS * xO
        num_in = num_in + sO * xS
    with np.errstate(divide="ignore", invalid="ignore"):
        exit_S = np.where(pS > 0, num_out / pS, 1.0)
        exit_O = np.where(pO > 0, num_in / pO, 1.0)
    phi = np.maximum(exit_S, exit_O)
    phi[(pS <= 0) | (pO <= 0)] = 1.0
    return phi


def sweep_cut(
    C: ImplicitChain, z, p=None, tie_tol: float = 1e-12, chain: str = "tilde"
) -> SweepResult:
    """Best prefix of the ascending ``z`` ordering under biased conductance.

    Ties within ``tie_tol`` go to the most balanced split.
    """
    z = np.asarray(z, dtype=np.float64)
    n = C.n
    if z.shape != (n,) or n < 2:
        raise ValueError("z must have one entry per state and n >= 2")
    order = np.argsort(z, kind="stable")
    phi = sweep_profile(C, order, p, chain)
    k = np.arange(1, n)
    best = phi.min()
    cand = np.flatnonzero(phi <= best + tie_tol)
    pick = cand[np.argmin(np.abs(k[cand] - n / 2.0))]
    split = int(k[pick])
    degenerate = bool(np.ptp(z) == 0.0)
    return SweepResult(np.sort(order[:split]), float(phi[pick]), split, phi, order, degenerate)
