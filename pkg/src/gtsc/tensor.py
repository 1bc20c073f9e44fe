"""Sparse non-negative tensors in coordinate form.

Entries are kept sorted by (mode-2, ..., mode-m, mode-1) so that each tensor
column, i.e. the fibre with every index but the first fixed, is a contiguous
run of rows.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence, TextIO

import numpy as np
import scipy.sparse as sp


class TensorFormatError(ValueError):
    """Raised when a coordinate file cannot be parsed."""


def _row_ids(idx: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    """Integer id per row such that equal rows get equal ids."""
    if idx.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    if math.prod(int(d) for d in dims) < 2**62:
        return np.ravel_multi_index(tuple(idx.T), tuple(dims)).astype(np.int64)
    _, inv = np.unique(idx, axis=0, return_inverse=True)
    return inv.reshape(-1).astype(np.int64)


def _column_order(idx: np.ndarray) -> np.ndarray:
    m = idx.shape[1]
    # np.lexsort: last key is the primary one
    keys = [idx[:, 0]] + [idx[:, r] for r in range(m - 1, 0, -1)]
    return np.lexsort(keys)


@dataclass(frozen=True, eq=False)
class SparseTensor:
    """An m-mode non-negative tensor stored as (index tuple, weight) rows.

    Build instances with :meth:`from_entries`, which accumulates duplicate
    tuples, drops zeros and validates bounds. The arrays are read-only.
    """

    dims: tuple[int, ...]
    indices: np.ndarray
    values: np.ndarray
    symmetric: bool = False

    @classmethod
    def from_entries(
        cls,
        indices,
        values,
        dims: Sequence[int],
        symmetric: bool = False,
    ) -> "SparseTensor":
        dims = tuple(int(d) for d in dims)
        if len(dims) < 2:
            raise ValueError("tensor order must be at least 2")
        if any(d < 0 for d in dims):
            raise ValueError(f"negative dimension in {dims}")
        m = len(dims)
        idx = np.asarray(indices, dtype=np.int64).reshape(-1, m)
        val = np.asarray(values, dtype=np.float64).reshape(-1)
        if idx.shape[0] != val.shape[0]:
            raise ValueError("indices and values differ in length")
        if np.any(val < 0) or not np.all(np.isfinite(val)):
            raise ValueError("weights must be finite and non-negative")
        if idx.size and (np.any(idx < 0) or np.any(idx >= np.asarray(dims))):
            raise ValueError("index out of range")
        if symmetric and len(set(dims)) > 1:
            raise ValueError("a symmetric tensor must be square")

        ids = _row_ids(idx, dims)
        uniq, first, inv = np.unique(ids, return_index=True, return_inverse=True)
        idx = idx[first]
        val = np.bincount(inv.reshape(-1), weights=val, minlength=len(uniq))
        keep = val > 0
        idx, val = idx[keep], val[keep]
        order = _column_order(idx)
        idx = np.ascontiguousarray(idx[order])
        val = np.ascontiguousarray(val[order])
        idx.flags.writeable = False
        val.flags.writeable = False
        return cls(dims, idx, val, bool(symmetric))

    @classmethod
    def empty(cls, dims: Sequence[int], symmetric: bool = False) -> "SparseTensor":
        return cls.from_entries(np.zeros((0, len(dims))), np.zeros(0), dims, symmetric)

    @property
    def order(self) -> int:
        return len(self.dims)

    @property
    def nnz(self) -> int:
        return int(self.values.shape[0])

    @property
    def is_square(self) -> bool:
        return len(set(self.dims)) == 1

    @property
    def n(self) -> int:
        """Common dimension of a square tensor."""
        if not self.is_square:
            raise ValueError(f"tensor with dims {self.dims} is not square")
        return self.dims[0]

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dims)
        np.add.at(out, tuple(self.indices.T), self.values)
        return out

    def entries(self) -> dict[tuple[int, ...], float]:
        return {tuple(int(i) for i in t): float(w) for t, w in zip(self.indices, self.values)}

    def is_permutation_symmetric(self, rtol: float = 1e-12) -> bool:
        """Check that every permutation of every stored tuple holds the same weight."""
        if not self.is_square:
            return False
        if self.nnz == 0:
            return True
        ids = _row_ids(self.indices, self.dims)
        order = np.argsort(ids)
        sorted_ids = ids[order]
        for perm in itertools.permutations(range(self.order)):
            pids = _row_ids(self.indices[:, perm], self.dims)
            pos = np.searchsorted(sorted_ids, pids)
            pos = np.minimum(pos, len(sorted_ids) - 1)
            if not np.array_equal(sorted_ids[pos], pids):
                return False
            if not np.allclose(self.values[order[pos]], self.values, rtol=rtol, atol=0):
                return False
        return True

    def subsample(self, fraction: float, rng: np.random.Generator) -> "SparseTensor":
        """Keep each non-zero independently with probability ``fraction``."""
        keep = rng.random(self.nnz) < fraction
        return SparseTensor.from_entries(self.indices[keep], self.values[keep], self.dims)


@dataclass(frozen=True)
class ModeClassMap:
    """Assignment of tensor modes to object classes.

    Modes sharing a class index the same set of objects (for example the
    sender and recipient modes of an email tensor).
    """

    classes: tuple[Hashable, ...]
    class_sizes: dict = field(default_factory=dict)

    @classmethod
    def parse(cls, text: str) -> "ModeClassMap":
        names = tuple(s.strip() for s in text.split(","))
        if len(names) < 2 or any(not s for s in names):
            raise ValueError(f"malformed mode class map {text!r}")
        return cls(names)

    def class_order(self) -> list:
        return list(dict.fromkeys(self.classes))

    def resolve(self, dims: Sequence[int]) -> dict:
        """Class sizes checked against the mode dimensions."""
        if len(dims) != len(self.classes):
            raise ValueError(
                f"class map has {len(self.classes)} modes, tensor has {len(dims)}"
            )
        sizes = dict(self.class_sizes)
        for c, d in zip(self.classes, dims):
            if sizes.setdefault(c, int(d)) != int(d):
                raise ValueError(f"class {c!r} has size {sizes[c]} but a mode of size {d}")
        return sizes

    def offsets(self, dims: Sequence[int]) -> dict:
        sizes = self.resolve(dims)
        out, acc = {}, 0
        for c in self.class_order():
            out[c] = acc
            acc += sizes[c]
        return out

    def total_size(self, dims: Sequence[int]) -> int:
        return sum(self.resolve(dims).values())


def load_coordinate(stream: Iterable[str], one_based: bool = False) -> SparseTensor:
    """Parse the coordinate text format.

    The first non-comment line is ``m d1 ... dm``; each following line is
    ``i1 ... im w``. ``#`` starts a comment. Repeated tuples are summed.
    """
    header = None
    rows: list[list[int]] = []
    weights: list[float] = []
    shift = 1 if one_based else 0
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if header is None:
            try:
                header = [int(p) for p in parts]
            except ValueError:
                raise TensorFormatError(f"line {lineno}: bad header {line!r}") from None
            if len(header) < 3 or header[0] != len(header) - 1 or header[0] < 2:
                raise TensorFormatError(f"line {lineno}: header must read 'm d1 ... dm'")
            m, dims = header[0], header[1:]
            continue
        if len(parts) != m + 1:
            raise TensorFormatError(f"line {lineno}: expected {m} indices and a weight")
        try:
            tup = [int(p) - shift for p in parts[:m]]
            w = float(parts[m])
        except ValueError:
            raise TensorFormatError(f"line {lineno}: cannot parse {line!r}") from None
        if not (w >= 0) or math.isinf(w):
            raise TensorFormatError(f"line {lineno}: weight {parts[m]} is not non-negative")
        for r, (i, d) in enumerate(zip(tup, dims)):
            if not 0 <= i < d:
                raise TensorFormatError(
                    f"line {lineno}: index {i + shift} out of range for mode {r + 1} (size {d})"
                )
        rows.append(tup)
        weights.append(w)
    if header is None:
        raise TensorFormatError("missing header line")
    return SparseTensor.from_entries(np.array(rows, dtype=np.int64).reshape(-1, m), weights, dims)


def write_coordinate(T: SparseTensor, stream: TextIO, one_based: bool = False) -> None:
    shift = 1 if one_based else 0
    stream.write(" ".join(str(v) for v in (T.order, *T.dims)) + "\n")
    for t, w in zip(T.indices, T.values):
        stream.write(" ".join(str(int(i) + shift) for i in t) + f" {float(w)!r}\n")


def _distinct_permutations(idx: np.ndarray, val: np.ndarray, dims):
    """Copy every row to each of its distinct index permutations."""
    m = idx.shape[1]
    perms = list(itertools.permutations(range(m)))
    n_rows = idx.shape[0]
    all_idx = np.concatenate([idx[:, p] for p in perms]) if n_rows else idx
    src = np.tile(np.arange(n_rows), len(perms))
    ids = _row_ids(all_idx, dims)
    order = np.lexsort((ids, src))
    s_src, s_ids = src[order], ids[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = (s_src[1:] != s_src[:-1]) | (s_ids[1:] != s_ids[:-1])
    keep = order[first]
    return all_idx[keep], val[src[keep]]


def symmetrize_square(T: SparseTensor) -> SparseTensor:
    """Add each entry's weight at every distinct permutation of its index tuple."""
    if not T.is_square:
        raise ValueError(f"symmetrize_square needs a square tensor, got dims {T.dims}")
    idx, val = _distinct_permutations(T.indices, T.values, T.dims)
    return SparseTensor.from_entries(idx, val, T.dims, symmetric=True)


def embed_rectangular(U: SparseTensor, classes: ModeClassMap) -> SparseTensor:
    """Place a rectangular tensor in a square symmetric one.

    Each mode's indices are shifted by the offset of its class; the result
    is then symmetrized over distinct permutations.
    """
    offsets = classes.offsets(U.dims)
    N = classes.total_size(U.dims)
    shift = np.array([offsets[c] for c in classes.classes], dtype=np.int64)
    dims = (N,) * U.order
    idx, val = _distinct_permutations(U.indices + shift, U.values, dims)
    return SparseTensor.from_entries(idx, val, dims, symmetric=True)


def remove_empty_indices(T: SparseTensor) -> tuple[SparseTensor, np.ndarray]:
    """Drop indices that appear in no entry.

    Returns the relabelled tensor and an old-to-new index map of length
    ``T.n`` holding -1 for removed indices.
    """
    n = T.n
    used = np.zeros(n, dtype=bool)
    used[T.indices.reshape(-1)] = True
    mapping = np.full(n, -1, dtype=np.int64)
    mapping[used] = np.arange(int(used.sum()))
    n_new = int(used.sum())
    if n_new == n:
        return T, mapping
    return (
        SparseTensor.from_entries(mapping[T.indices], T.values, (n_new,) * T.order, T.symmetric),
        mapping,
    )


def subtensor(T: SparseTensor, S) -> SparseTensor:
    """Entries with every index in ``S``, relabelled by the sorted order of ``S``."""
    S = np.unique(np.asarray(list(S) if not isinstance(S, np.ndarray) else S, dtype=np.int64))
    n = T.n
    mapping = np.full(n, -1, dtype=np.int64)
    mapping[S] = np.arange(len(S))
    new_idx = mapping[T.indices]
    keep = np.all(new_idx >= 0, axis=1)
    return SparseTensor.from_entries(
        new_idx[keep], T.values[keep], (len(S),) * T.order, T.symmetric
    )


def _check_vector(T: SparseTensor, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or not T.is_square or x.shape[0] != T.dims[0]:
        raise ValueError(f"vector of length {x.shape} does not match tensor dims {T.dims}")
    return x


def apply_squared(T: SparseTensor, x) -> np.ndarray:
    """``y_i = sum of T[i, j, k, ...] * x_j * x_k * ...`` over all non-zeros."""
    x = _check_vector(T, x)
    w = T.values * np.prod(x[T.indices[:, 1:]], axis=1)
    return np.bincount(T.indices[:, 0], weights=w, minlength=T.dims[0])


def contract_to_matrix(T: SparseTensor, x) -> sp.csr_matrix:
    """``A_ij = sum of T[i, j, k, ...] * x_k * ...`` (modes 3..m contracted with x)."""
    x = _check_vector(T, x)
    n = T.dims[0]
    w = T.values * np.prod(x[T.indices[:, 2:]], axis=1)
    A = sp.csr_matrix((w, (T.indices[:, 0], T.indices[:, 1])), shape=(n, n))
    A.sum_duplicates()
    A.eliminate_zeros()
    return A


def flatten(T: SparseTensor) -> sp.csr_matrix:
    """Sum out modes 3..m: ``M_ij = sum of T[i, j, ...]``."""
    if T.order < 3:
        raise ValueError("flatten needs a tensor of order at least 3")
    M = sp.csr_matrix(
        (T.values, (T.indices[:, 0], T.indices[:, 1])), shape=(T.dims[0], T.dims[1])
    )
    M.sum_duplicates()
    return M
