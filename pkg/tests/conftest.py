"""Random instances and dense reference implementations shared by the tests."""

import itertools

import numpy as np
import pytest

from gtsc.tensor import SparseTensor, symmetrize_square


def random_tensor(rng, n, m=3, density=0.3, symmetric=True):
    """Random non-negative square tensor with roughly ``density * n**m`` entries."""
    nnz = max(1, int(density * n**m))
    idx = rng.integers(0, n, size=(nnz, m))
    val = rng.random(nnz) + 0.1
    T = SparseTensor.from_entries(idx, val, (n,) * m)
    return symmetrize_square(T) if symmetric else T


def dense_transition(D):
    """Column-normalize a dense tensor along its first mode; empty columns stay zero."""
    s = D.sum(axis=0, keepdims=True)
    return np.divide(D, s, out=np.zeros_like(D), where=s > 0)


def dense_squared(P, x):
    """``y_i = sum P[i, j, k, ...] x_j x_k ...`` by explicit loops."""
    n, m = P.shape[0], P.ndim
    y = np.zeros(n)
    for idx in itertools.product(range(n), repeat=m):
        w = P[idx]
        if w:
            y[idx[0]] += w * np.prod([x[j] for j in idx[1:]])
    return y


def dense_contract(P, x):
    """Contract modes 3..m of a dense tensor with ``x``."""
    A = P
    while A.ndim > 2:
        A = A @ x
    return A


def dense_chain(P, x):
    """``P~ = P[x] + x (e^T - e^T P[x])`` as an explicit matrix."""
    Px = dense_contract(P, x)
    return Px + np.outer(x, 1.0 - Px.sum(axis=0))


def dense_biased_conductance(Pt, S, p):
    """Exit probabilities of a dense column-stochastic chain, state by state."""
    n = Pt.shape[0]
    S = set(int(s) for s in S)
    Sc = [i for i in range(n) if i not in S]

    def exit_prob(A, B):
        num = sum(p[j] * sum(Pt[i, j] for i in B) for j in A)
        den = sum(p[j] for j in A)
        return num / den if den > 0 else 1.0

    return max(exit_prob(sorted(S), Sc), exit_prob(Sc, sorted(S)))


def normalized_columns(M):
    c = M.sum(axis=0)
    return M / np.where(c > 0, c, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
