"""Planted-cluster tensors with skewed group weights."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .tensor import SparseTensor


@dataclass(frozen=True)
class SynthSpec:
    sigma: float = 4.0
    n_groups: int = 20
    size_mean: float = 20.0
    size_var: float = 5.0
    size_min: int = 4
    t_within: int = 10_000
    t_across: Optional[int] = None
    seed: int = 0
    rectangular: bool = False

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.n_groups < 2 or self.size_min < 1:
            raise ValueError("need at least two groups of positive size")

    @property
    def across(self) -> int:
        if self.t_across is not None:
            return self.t_across
        return 3000 if self.rectangular else 1000


@dataclass
class PlantedTensor:
    tensor: SparseTensor
    labels: list[np.ndarray]
    weights: np.ndarray

    @property
    def flat_labels(self) -> np.ndarray:
        """Group of every index, modes concatenated in order."""
        return np.concatenate(self.labels)


def group_weights(sigma: float, n_groups: int = 20) -> np.ndarray:
    """Gaussian bump over group numbers 1..n_groups centred on the middle pair."""
    g = np.arange(1, n_groups + 1)
    centre = (n_groups + 1) / 2.0
    return np.exp(-((g - centre) ** 2) / (2 * sigma**2)) / (sigma * np.sqrt(2 * np.pi))


def group_sizes(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    raw = rng.normal(spec.size_mean, np.sqrt(spec.size_var), spec.n_groups)
    return np.maximum(np.rint(raw).astype(np.int64), spec.size_min)


def _members(sizes: np.ndarray):
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    labels = np.repeat(np.arange(len(sizes)), sizes)
    return starts, labels


def _uniform_in(rng, starts, sizes, groups):
    return starts[groups] + np.floor(rng.random(len(groups)) * sizes[groups]).astype(np.int64)


def _uniform_outside(rng, labels, groups):
    """One index per entry, uniform over indices not in ``groups[t]``."""
    n = len(labels)
    out = np.empty(len(groups), dtype=np.int64)
    todo = np.arange(len(groups))
    while len(todo):
        cand = rng.integers(0, n, len(todo))
        ok = labels[cand] != groups[todo]
        out[todo[ok]] = cand[ok]
        todo = todo[~ok]
    return out


def _weighted_index(rng, w, labels, size):
    p = w[labels]
    return rng.choice(len(labels), size=size, p=p / p.sum())


def gen_square(spec: SynthSpec) -> PlantedTensor:
    """Square 3-mode tensor with ``t_within`` in-group and ``t_across`` cross-group triples.

    In-group triples draw a group uniformly and three of its indices
    uniformly, with weight ``w_g``. Cross-group triples draw the first index
    with probability proportional to its group's weight and the other two
    uniformly from outside that group, with the mean of the three group
    weights as value. Repeated triples add up.
    """
    if spec.rectangular:
        raise ValueError("use gen_rectangular for rectangular specs")
    rng = np.random.default_rng(spec.seed)
    sizes = group_sizes(spec, rng)
    w = group_weights(spec.sigma, spec.n_groups)
    starts, labels = _members(sizes)
    n = int(sizes.sum())

    g = rng.integers(0, spec.n_groups, spec.t_within)
    within = np.column_stack([_uniform_in(rng, starts, sizes, g) for _ in range(3)])
    within_val = w[g]

    t_a = spec.across
    i = _weighted_index(rng, w, labels, t_a)
    gi = labels[i]
    j = _uniform_outside(rng, labels, gi)
    k = _uniform_outside(rng, labels, gi)
    across = np.column_stack([i, j, k])
    across_val = (w[gi] + w[labels[j]] + w[labels[k]]) / 3.0

    T = SparseTensor.from_entries(
        np.vstack([within, across]), np.concatenate([within_val, across_val]), (n, n, n)
    )
    return PlantedTensor(T, [labels], w)


def gen_rectangular(spec: SynthSpec) -> PlantedTensor:
    """Rectangular 3-mode tensor; each group owns one subgroup in every mode.

    Cross-group triples pick an anchor mode uniformly, its index with
    probability proportional to the group weight, and the other two indices
    uniformly from other groups of their modes.
    """
    if not spec.rectangular:
        raise ValueError("use gen_square for square specs")
    rng = np.random.default_rng(spec.seed)
    sizes = [group_sizes(spec, rng) for _ in range(3)]
    w = group_weights(spec.sigma, spec.n_groups)
    members = [_members(s) for s in sizes]
    dims = tuple(int(s.sum()) for s in sizes)

    g = rng.integers(0, spec.n_groups, spec.t_within)
    within = np.column_stack(
        [_uniform_in(rng, members[r][0], sizes[r], g) for r in range(3)]
    )
    within_val = w[g]

    t_a = spec.across
    anchor_mode = rng.integers(0, 3, t_a)
    across = np.empty((t_a, 3), dtype=np.int64)
    groups = np.empty((t_a, 3), dtype=np.int64)
    for r in range(3):
        sel = np.flatnonzero(anchor_mode == r)
        labels_r = members[r][1]
        anchor = _weighted_index(rng, w, labels_r, len(sel))
        across[sel, r] = anchor
        ga = labels_r[anchor]
        for q in range(3):
            if q == r:
                continue
            across[sel, q] = _uniform_outside(rng, members[q][1], ga)
    for r in range(3):
        groups[:, r] = members[r][1][across[:, r]]
    across_val = w[groups].mean(axis=1)

    T = SparseTensor.from_entries(
        np.vstack([within, across]), np.concatenate([within_val, across_val]), dims
    )
    return PlantedTensor(T, [m[1] for m in members], w)


def generate(spec: SynthSpec) -> PlantedTensor:
    return gen_rectangular(spec) if spec.rectangular else gen_square(spec)
