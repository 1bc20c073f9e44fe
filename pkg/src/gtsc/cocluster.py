"""Recursive two-way cuts of a symmetric tensor and cluster popularity scores."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .process import normalize, solve_stationary
from .spectral import build_chain, second_left_eigenvector
from .sweep import CHAINS, sweep_cut
from .tensor import SparseTensor, remove_empty_indices, subtensor

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


@dataclass(frozen=True)
class GtscParams:
    alpha: float = 0.8
    phi_star: float = 0.4
    max_size: int = 100
    min_size: int = 5
    tol_stationary: float = 1e-10
    tol_eig: float = 1e-8
    seed: int = 0
    max_iter_stationary: int = 10_000
    max_iter_eig: int = 2000
    cut_chain: str = "px"

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not 0 < self.phi_star < 1:
            raise ValueError("phi_star must lie in (0, 1)")
        if not self.min_size < self.max_size:
            raise ValueError("min_size must be smaller than max_size")
        if self.cut_chain not in CHAINS:
            raise ValueError(f"cut_chain must be one of {CHAINS}")


@dataclass
class ClusterNode:
    """One node of the bisection tree; ``indices`` are original tensor indices."""

    indices: np.ndarray
    path: tuple[int, ...] = ()
    split: Optional[np.ndarray] = None
    phi: Optional[float] = None
    forced: bool = False
    stationary_iterations: int = 0
    stationary_converged: bool = True
    eigen_iterations: int = 0
    eigen_converged: bool = True
    complex_pair: bool = False
    degenerate: bool = False
    empty: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    children: list["ClusterNode"] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def leaves(self):
        stack = [self]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                if len(node.indices):
                    yield node
            else:
                stack.extend(reversed(node.children))

    def walk(self):
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def to_dict(self) -> dict:
        d = {"size": int(len(self.indices)), "phi": self.phi}
        if self.split is not None:
            d.update(
                forced=self.forced,
                stationary_iterations=self.stationary_iterations,
                stationary_converged=self.stationary_converged,
                eigen_iterations=self.eigen_iterations,
                eigen_converged=self.eigen_converged,
            )
        d["children"] = [c.to_dict() for c in self.children]
        return d


@dataclass
class ClusterTree:
    root: ClusterNode
    n: int
    outliers: np.ndarray
    params: GtscParams

    def clusters(self) -> list[np.ndarray]:
        """Leaf index sets in depth-first order, then the outlier pool if any."""
        out = [leaf.indices for leaf in self.root.leaves()]
        if len(self.outliers):
            out.append(self.outliers)
        return out

    @property
    def labels(self) -> np.ndarray:
        labels = np.full(self.n, -1, dtype=np.int64)
        for cid, members in enumerate(self.clusters()):
            labels[members] = cid
        return labels

    def to_dict(self) -> dict:
        ids = {}
        for cid, leaf in enumerate(self.root.leaves()):
            ids[id(leaf)] = cid

        def encode(node):
            d = node.to_dict()
            d["children"] = [encode(c) for c in node.children]
            if node.is_leaf and id(node) in ids:
                d["cluster"] = ids[id(node)]
            return d

        return {
            "format_version": FORMAT_VERSION,
            "n": self.n,
            "n_clusters": len(self.clusters()),
            "outliers": {
                "size": int(len(self.outliers)),
                "cluster": len(ids) if len(self.outliers) else None,
            },
            "params": {k: getattr(self.params, k) for k in self.params.__dataclass_fields__},
            "root": encode(self.root),
        }


def _split_node(T: SparseTensor, node: ClusterNode, params: GtscParams) -> None:
    """Run one cut on ``T`` (already restricted to ``node``) and set the node's fields."""
    P = normalize(T)
    st = solve_stationary(
        P, params.alpha, tol=params.tol_stationary, max_iter=params.max_iter_stationary
    )
    chain = build_chain(P, st)
    seed = (params.seed, len(node.path), *node.path)
    eig = second_left_eigenvector(chain, params.tol_eig, params.max_iter_eig, seed=seed)
    cut = sweep_cut(chain, eig.z, chain=params.cut_chain)
    node.split = node.indices[cut.S]
    node.phi = cut.phi
    node.stationary_iterations = st.iterations
    node.stationary_converged = st.converged
    node.eigen_iterations = eig.iterations
    node.eigen_converged = eig.converged
    node.complex_pair = eig.complex_pair
    node.degenerate = cut.degenerate
    log.info(
        "node %s n=%d phi=%.4f stationary_iters=%d eigen_iters=%d",
        "".join(map(str, node.path)) or "root",
        len(node.indices),
        cut.phi,
        st.iterations,
        eig.iterations,
    )
    return cut


def _process(T: SparseTensor, node: ClusterNode, params: GtscParams):
    """Cut one node; return (child node, child tensor) pairs to recurse on."""
    T, mapping = remove_empty_indices(T)
    if len(mapping) and T.n < len(mapping):
        node.empty = node.indices[mapping < 0]
        node.indices = node.indices[mapping >= 0]
    n = T.n
    if n <= params.min_size or n < 2:
        return []
    cut = _split_node(T, node, params)
    if cut.degenerate:
        return []
    if not (n >= params.max_size or cut.phi <= params.phi_star):
        return []
    node.forced = cut.phi > params.phi_star
    inside = np.zeros(n, dtype=bool)
    inside[cut.S] = True
    out = []
    for b, side in enumerate((inside, ~inside)):
        sub = np.flatnonzero(side)
        child = ClusterNode(node.indices[sub], node.path + (b,))
        node.children.append(child)
        out.append((child, subtensor(T, sub)))
    return out


def gtsc(T: SparseTensor, params: GtscParams | None = None, threads: int = 1) -> ClusterTree:
    """Co-cluster a square symmetric tensor by recursive biased-conductance sweep cuts.

    Indices that stop participating in any entry (at the root or after a
    cut) are pooled into one outlier cluster so that the labels cover every
    index. Siblings are independent; ``threads > 1`` processes each level of
    the tree concurrently without changing the result.
    """
    params = params or GtscParams()
    if not T.is_square:
        raise ValueError("gtsc needs a square tensor; embed or symmetrize first")
    root = ClusterNode(np.arange(T.n))
    frontier = [(root, T)]
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        while frontier:
            if pool is None:
                results = [_process(t, node, params) for node, t in frontier]
            else:
                results = list(pool.map(lambda a: _process(a[1], a[0], params), frontier))
            frontier = [item for r in results for item in r]
    finally:
        if pool is not None:
            pool.shutdown()
    empties = [node.empty for node in root.walk() if len(node.empty)]
    outliers = np.sort(np.concatenate(empties)) if empties else np.zeros(0, dtype=np.int64)
    return ClusterTree(root, T.n, outliers, params)


def pagerank(M, alpha: float = 0.85, v=None, tol: float = 1e-12, max_iter: int = 100_000):
    """Stationary vector of ``alpha * colnorm(M) + (1 - alpha) v e^T``.

    Edge weight ``M[i, j]`` is read as a move from ``j`` to ``i``; a column
    with no weight jumps according to ``v``.
    """
    M = sp.csc_matrix(M, dtype=np.float64)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError("M must be square")
    if M.nnz and M.data.min() < 0:
        raise ValueError("M must be non-negative")
    v = np.full(n, 1.0 / n) if v is None else np.asarray(v, dtype=np.float64)
    colsum = np.asarray(M.sum(axis=0)).reshape(-1)
    dangling = colsum == 0
    inv = np.where(dangling, 0.0, 1.0 / np.where(dangling, 1.0, colsum))
    A = M @ sp.diags(inv)
    x = v.copy()
    for _ in range(max_iter):
        x_new = alpha * (A @ x) + (alpha * x[dangling].sum() + (1.0 - alpha)) * v
        x_new /= x_new.sum()
        if np.abs(x_new - x).sum() <= tol:
            return x_new
        x = x_new
    log.warning("pagerank did not reach tol %.1e", tol)
    return x


def interaction_matrix(T: SparseTensor, labels: np.ndarray, k: int) -> sp.csr_matrix:
    """Total tensor weight between cluster pairs over the first two modes."""
    a = labels[T.indices[:, 0]]
    b = labels[T.indices[:, 1]]
    M = sp.csr_matrix((T.values, (a, b)), shape=(k, k))
    M.sum_duplicates()
    return M


def popularity_scores(T: SparseTensor, tree: ClusterTree, pr_alpha: float = 0.99) -> np.ndarray:
    """PageRank of each cluster in the cluster interaction graph.

    Clusters with no interaction at all (zero row and column) score 0.
    """
    clusters = tree.clusters()
    k = len(clusters)
    if k == 1:
        return np.ones(1)
    M = interaction_matrix(T, tree.labels, k)
    touched = (np.asarray(M.sum(axis=0)).reshape(-1) + np.asarray(M.sum(axis=1)).reshape(-1)) > 0
    scores = np.zeros(k)
    live = np.flatnonzero(touched)
    if len(live):
        scores[live] = pagerank(M[live][:, live], pr_alpha)
    return scores
