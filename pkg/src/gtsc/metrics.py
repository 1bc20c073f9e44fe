"""Agreement between two flat clusterings: ARI, NMI and pair-counting F1."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray

    @classmethod
    def from_labels(cls, pred, truth) -> "ContingencyTable":
        pred = np.asarray(pred)
        truth = np.asarray(truth)
        if pred.shape != truth.shape or pred.ndim != 1:
            raise ValueError("label vectors must be 1-d and of equal length")
        if len(pred) < 2:
            raise ValueError("need at least two labelled items")
        _, p = np.unique(pred, return_inverse=True)
        _, t = np.unique(truth, return_inverse=True)
        counts = np.zeros((p.max() + 1, t.max() + 1), dtype=np.int64)
        np.add.at(counts, (p.reshape(-1), t.reshape(-1)), 1)
        return cls(counts)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def rows(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def cols(self) -> np.ndarray:
        return self.counts.sum(axis=0)


def _pairs(a):
    a = np.asarray(a, dtype=np.float64)
    return float((a * (a - 1) / 2).sum())


def ari(pred, truth) -> float:
    """Adjusted Rand index under the permutation model."""
    ct = ContingencyTable.from_labels(pred, truth)
    index = _pairs(ct.counts)
    a, b = _pairs(ct.rows), _pairs(ct.cols)
    total = ct.n * (ct.n - 1) / 2
    expected = a * b / total
    top = (a + b) / 2
    if top == expected:
        return 1.0
    return (index - expected) / (top - expected)


def _entropy(counts) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(pred, truth) -> float:
    """Mutual information normalized by the mean of the two entropies."""
    ct = ContingencyTable.from_labels(pred, truth)
    n = ct.n
    hp, ht = _entropy(ct.rows), _entropy(ct.cols)
    if hp == 0 and ht == 0:
        return 1.0
    nz = ct.counts > 0
    pij = ct.counts[nz] / n
    outer = np.outer(ct.rows, ct.cols)[nz] / n**2
    mi = float((pij * np.log(pij / outer)).sum())
    return float(np.clip(2 * mi / (hp + ht), 0.0, 1.0))


def f1_pairs(pred, truth) -> float:
    """Harmonic mean of pair precision and recall over same-cluster pairs."""
    ct = ContingencyTable.from_labels(pred, truth)
    tp = _pairs(ct.counts)
    pred_pairs, true_pairs = _pairs(ct.rows), _pairs(ct.cols)
    if pred_pairs == 0 and true_pairs == 0:
        return 1.0
    if tp == 0:
        return 0.0
    precision, recall = tp / pred_pairs, tp / true_pairs
    return 2 * precision * recall / (precision + recall)


def scores(pred, truth) -> dict[str, float]:
    return {"ari": ari(pred, truth), "nmi": nmi(pred, truth), "f1": f1_pairs(pred, truth)}
