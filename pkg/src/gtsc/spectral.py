"""The first-order chain ``P~ = P[x] + x (e^T - e^T P[x])`` and its second left eigenvector.

``P~`` is dense, so it is never formed: every product goes through the
sparse ``P[x]`` plus a rank-one correction.
"""

from __future__ import annotations

import logging
from math import sqrt
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import null_space

from .process import StationaryDistribution, TransitionTensor
from .tensor import contract_to_matrix

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ImplicitChain:
    Px: sp.csr_matrix
    x: np.ndarray
    c: np.ndarray
    PxT: sp.csr_matrix

    @classmethod
    def from_matrix(cls, Px, x) -> "ImplicitChain":
        Px = sp.csr_matrix(Px, dtype=np.float64)
        x = np.asarray(x, dtype=np.float64)
        c = np.asarray(Px.sum(axis=0)).reshape(-1)
        return cls(Px, x, c, Px.T.tocsr())

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def dense(self) -> np.ndarray:
        """Materialize ``P~``; only for tests and tiny problems."""
        return self.Px.toarray() + np.outer(self.x, 1.0 - self.c)


@dataclass
class EigenResult:
    z: np.ndarray
    lam: float
    residual: float
    iterations: int
    converged: bool
    complex_pair: bool = False
    stationary: np.ndarray | None = None


def build_chain(P: TransitionTensor, x) -> ImplicitChain:
    if isinstance(x, StationaryDistribution):
        x = x.x
    return ImplicitChain.from_matrix(contract_to_matrix(P.tensor, x), x)


def apply_chain(C: ImplicitChain, y) -> np.ndarray:
    """``P~ y`` in O(nnz(P[x]) + n)."""
    y = np.asarray(y, dtype=np.float64)
    return C.Px @ y + C.x * (y.sum() - C.c @ y)


def apply_chain_transpose(C: ImplicitChain, y) -> np.ndarray:
    """``P~^T y`` in O(nnz(P[x]) + n)."""
    y = np.asarray(y, dtype=np.float64)
    return C.PxT @ y + (C.x @ y) * (1.0 - C.c)


# below this size P~ is materialized once; each product is then one dense matvec
DENSE_MAX = 512
# below this size the deflated operator is diagonalized directly
DIRECT_MAX = 128


def _operators(C: ImplicitChain):
    """``(P~ y, P~^T y)`` callables plus the dense ``P~^T`` for small chains."""
    if C.n <= DENSE_MAX:
        DT = np.ascontiguousarray(C.dense().T)
        return DT.T.__matmul__, DT.__matmul__, DT
    return (lambda y: apply_chain(C, y)), (lambda y: apply_chain_transpose(C, y)), None


def _right_stationary(C: ImplicitChain, tol: float, max_iter: int, fwd=None) -> np.ndarray:
    # lazy steps (I + P~)/2 keep periodic chains from oscillating
    fwd = fwd or (lambda v: apply_chain(C, v))
    s = C.x.sum()
    y = C.x / s if s > 0 else np.full(C.n, 1.0 / C.n)
    for _ in range(max_iter):
        y_new = 0.5 * (y + fwd(y))
        y_new /= y_new.sum()
        if np.abs(y_new - y).sum() <= tol:
            return y_new
        y = y_new
    return y


def _oscillating(lams: list[float]) -> bool:
    d = np.diff(lams)
    d = d[np.abs(d) > 1e-14]
    if len(d) < 4:
        return False
    flips = np.count_nonzero(np.sign(d[1:]) != np.sign(d[:-1]))
    return flips >= 0.5 * (len(d) - 1)


def second_left_eigenvector(
    C: ImplicitChain,
    tol: float = 1e-8,
    max_iter: int = 2000,
    seed=None,
) -> EigenResult:
    """Left eigenvector of ``P~`` for its second-largest real eigenvalue.

    The stationary right vector ``y`` of ``P~`` is found first. Since
    ``e^T P~ = e^T``, the deflated operator ``B = P~ - y e^T`` maps the
    eigenvalue 1 to 0 and keeps the rest of the spectrum. Power iteration on
    the lazy form ``(I + B^T)/2`` then finds the left eigenvector; the shift
    keeps eigenvalues near -1 from dominating. If the residual stops
    shrinking while the Rayleigh quotient oscillates or stands still, a
    complex pair is suspected and the iteration switches to a
    two-dimensional subspace, keeping the larger real Ritz value. When both
    Ritz values are complex the result is flagged ``complex_pair``.
    """
    n = C.n
    if n < 2:
        raise ValueError("need at least two states")
    rng = np.random.default_rng(seed)
    fwd, bwd, DT = _operators(C)
    y = _right_stationary(C, tol=min(tol, 1e-10) * 1e-2, max_iter=max_iter, fwd=fwd)

    if n <= DIRECT_MAX:
        z, mu, complex_pair = _direct(DT, y)
        return _finish(z, mu, y, bwd, 0, None, complex_pair, tol)
    if DT is not None:
        M = 0.5 * (DT - y[None, :])
        M[np.diag_indices(n)] += 0.5
        lazy = M.__matmul__
    else:

        def lazy(w):
            # (I + B^T) w / 2 with B^T w = P~^T w - e (y.w)
            return 0.5 * (w + bwd(w) - (y @ w))

    def op(w):
        # B^T e = 0 would otherwise win over negative eigenvalues; y-orthogonal
        # vectors form an invariant subspace that excludes it
        v = lazy(w)
        return v - (y @ v)

    z = rng.standard_normal(n)
    z -= y @ z
    z /= np.linalg.norm(z)
    lams: list[float] = []
    converged = False
    complex_pair = False
    it = 0
    mu = 0.0
    window = 50
    checkpoint = np.inf
    while it < max_iter:
        it += 1
        w = op(z)
        mu = float(z @ w)
        r = w - mu * z
        res = 2.0 * sqrt(r @ r)
        lams.append(mu)
        nrm = sqrt(w @ w)
        if nrm == 0.0:
            break
        if res <= tol:
            converged = True
            break
        z = w / nrm
        if it % window == 0:
            stalled = res > 0.5 * checkpoint
            # a rotating pair either makes the Rayleigh quotient oscillate or
            # freezes both it and the residual
            frozen = res > 0.99 * checkpoint
            checkpoint = res
            if stalled and (frozen or _oscillating(lams[-window:])):
                break
    if not converged and it < max_iter:
        z, mu, converged, complex_pair, extra = _subspace_iteration(
            op, z, rng, tol, max_iter - it
        )
        it += extra
    return _finish(z, 2.0 * mu - 1.0, y, bwd, it, converged, complex_pair, tol)


def _direct(DT: np.ndarray, y: np.ndarray):
    """Largest real eigenpair of ``B^T`` on the y-orthogonal subspace.

    ``B^T`` maps that subspace into itself and carries every eigenvalue of
    ``P~`` there except the deflated 1, so its eigenvectors need no
    correction. ``complex_pair`` is set when a complex eigenvalue would
    dominate the lazy power iteration, matching the iterative path's flag.
    """
    Q = null_space(y[None, :])
    evals, evecs = np.linalg.eig(Q.T @ DT @ Q)
    scale = max(1.0, float(np.abs(evals).max()))
    real = np.abs(evals.imag) <= 1e-10 * scale
    i = int(np.argmax(np.where(real, evals.real, -np.inf)))
    lam = float(evals[i].real)
    complex_pair = bool(np.any(~real & (np.abs(1 + evals) > abs(1 + lam) + 1e-12)))
    return Q @ evecs[:, i].real, lam, complex_pair


def _finish(z, lam, y, bwd, it, converged, complex_pair, tol) -> EigenResult:
    # B^T-eigenvector differs from the P~ one by a multiple of e
    if abs(1.0 - lam) > 1e-8:
        z = z + (z @ y) / (lam - 1.0)
    nz = np.linalg.norm(z)
    if nz > 0:
        z = z / nz
    j = int(np.argmax(np.abs(z)))
    if z[j] < 0:
        z = -z
    r = bwd(z)
    lam_p = float(z @ r)
    residual = float(np.linalg.norm(r - lam_p * z))
    if converged is None:
        # direct solve: judged by its residual alone
        converged = residual <= tol
    if not converged:
        log.warning(
            "second eigenvector not converged after %d iterations (residual %.2e)", it, residual
        )
    return EigenResult(z, lam_p, residual, it, converged, complex_pair, y)


def _subspace_iteration(op, z, rng, tol, budget):
    n = z.shape[0]
    V = np.column_stack([z, rng.standard_normal(n)])
    V, _ = np.linalg.qr(V)
    best_vec, best_mu, cplx = V[:, 0], 0.0, False
    for k in range(1, budget + 1):
        W = np.column_stack([op(V[:, 0]), op(V[:, 1])])
        H = V.T @ W
        evals, evecs = np.linalg.eig(H)
        real = np.abs(evals.imag) <= 1e-10 * max(1.0, np.abs(evals).max())
        if real.any():
            i = int(np.argmax(np.where(real, evals.real, -np.inf)))
            s = evecs[:, i].real
            best_vec = V @ s
            best_vec /= np.linalg.norm(best_vec)
            best_mu = float(evals[i].real)
            cplx = False
            if np.linalg.norm(op(best_vec) - best_mu * best_vec) * 2.0 <= tol:
                return best_vec, best_mu, True, False, k
        else:
            cplx = True
            s = evecs[:, 0]
            best_vec = V @ s.real
            if np.linalg.norm(best_vec) == 0:
                best_vec = V[:, 0]
            best_vec = best_vec / np.linalg.norm(best_vec)
            best_mu = float(evals[0].real)
        V, _ = np.linalg.qr(W)
    if cplx:
        log.warning("dominant deflated eigenvalues form a complex pair; using its real part")
    return best_vec, best_mu, False, cplx, budget
