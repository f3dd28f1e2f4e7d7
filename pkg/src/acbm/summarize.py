"""Posterior summaries: Dahl's least-squares partition estimates, tied row
partitions, and posterior-mean accuracies/weights at the selected state.
"""

from __future__ import annotations

import numpy as np

from .core import (
    ChainTrace,
    ColumnPartition,
    FitSummary,
    Hyperparams,
    ResponseMatrix,
    RowPartition,
    canonicalize,
)
from .errors import EmptyTrace, NoMatchingState


class CoclusteringMatrix:
    """Pairwise co-assignment frequencies across kept states: entry (i, j)
    is the fraction of states placing items i and j in the same cluster."""

    def __init__(self, pi: np.ndarray):
        pi = np.asarray(pi, dtype=np.float64)
        if pi.ndim != 2 or pi.shape[0] != pi.shape[1]:
            raise ValueError(f"co-clustering matrix must be square, got {pi.shape}")
        self.pi = pi

    @classmethod
    def from_assignments(cls, assignments) -> "CoclusteringMatrix":
        """assignments: (M, n) array of integer labels."""
        A = np.asarray(assignments)
        if A.size == 0:
            raise EmptyTrace("no states to average")
        M, n = A.shape
        acc = np.zeros((n, n), dtype=np.float64)
        for m in range(M):
            lab = A[m]
            acc += lab[:, None] == lab[None, :]
        return cls(acc / M)

    @property
    def n_items(self):
        return self.pi.shape[0]


def _dahl_losses(assignments, pi: np.ndarray) -> np.ndarray:
    """Squared loss sum_{i,j} (delta_{ij}(state) - pi_{ij})^2 per state.

    Expanded as sum pi^2 + sum delta (1 - 2 pi); delta terms accumulate
    blockwise so each state costs O(sum_k |block_k|^2) instead of n^2.
    """
    A = np.asarray(assignments)
    M = A.shape[0]
    B = 1.0 - 2.0 * pi
    const = float((pi * pi).sum())
    losses = np.empty(M)
    for m in range(M):
        lab = A[m]
        tot = 0.0
        for k in np.unique(lab):
            idx = np.flatnonzero(lab == k)
            tot += B[np.ix_(idx, idx)].sum()
        losses[m] = const + tot
    return losses


def column_coclustering(trace: ChainTrace) -> CoclusteringMatrix:
    if len(trace) == 0:
        raise EmptyTrace("trace has no kept states")
    return CoclusteringMatrix.from_assignments(trace.col)


def dahl_column_estimate(trace: ChainTrace) -> tuple[ColumnPartition, int]:
    """Kept state minimizing the squared loss to the column co-clustering
    matrix; ties break to the smallest iteration index."""
    if len(trace) == 0:
        raise EmptyTrace("trace has no kept states")
    pi = column_coclustering(trace).pi
    losses = _dahl_losses(trace.col, pi)
    sel = int(np.argmin(losses))
    return ColumnPartition(trace.col[sel]), sel


def _row_labels_for_columns(trace: ChainTrace, state_idx: int) -> np.ndarray:
    """(D, n) row labels per column at one kept state (columns in the same
    cluster share labels)."""
    col = trace.col[state_idx]
    return trace.row[state_idx, col, :]


def dahl_row_estimate(
    trace: ChainTrace, col_est: ColumnPartition
) -> tuple[dict[int, RowPartition], int]:
    """Among kept states whose column partition equals col_est, pick the one
    minimizing the summed Dahl loss of the per-column row partitions.

    Returns ({cluster id -> RowPartition}, selected kept-state index).
    """
    if len(trace) == 0:
        raise EmptyTrace("trace has no kept states")
    target = canonicalize(col_est.assignment)
    match = np.flatnonzero((trace.col == target).all(axis=1))
    if len(match) == 0:
        raise NoMatchingState("no kept state has the requested column partition")

    sizes = col_est.cluster_sizes()
    # all columns of one cluster share a row partition in every matching
    # state, so compute one co-clustering matrix per cluster and weight its
    # loss by the cluster size
    total = np.zeros(len(match))
    for c in range(col_est.n_clusters):
        labs = trace.row[match, c, :]
        pi = CoclusteringMatrix.from_assignments(labs).pi
        total += int(sizes[c]) * _dahl_losses(labs, pi)
    sel = int(match[np.argmin(total)])

    out = {}
    for c in range(col_est.n_clusters):
        out[c] = RowPartition(trace.row[sel, c, :], int(sizes[c]))
    return out, sel


def posterior_accuracy(
    X: ResponseMatrix,
    col_est: ColumnPartition,
    row_est: dict[int, RowPartition],
    h: Hyperparams,
    col_iteration: int = 0,
    row_iteration: int = 0,
) -> FitSummary:
    """Posterior-mean accuracies and weights at the Dahl configuration:
    theta = (a0+S)/(a0+b0+S+F) per block, w_k = (m_k+alpha)/(n+K alpha),
    plus the entry-wise accuracy matrix theta_{i,j}."""
    n, D = X.n_examinees, X.n_questions
    col = canonicalize(col_est.assignment)
    acc = np.empty((n, D), dtype=np.float64)
    clusters = []
    row_assign = {}
    for c in range(col_est.n_clusters):
        cols = np.flatnonzero(col == c)
        size = len(cols)
        ra = row_est[c].assignment
        K = row_est[c].n_blocks
        row_assign[c] = ra
        rs = X.entries[:, cols].sum(axis=1).astype(np.int64)
        S = np.bincount(ra, weights=rs, minlength=K)
        m = np.bincount(ra, minlength=K)
        F = m * size - S
        theta = (h.a0 + S) / (h.a0 + h.b0 + S + F)
        w = (m + h.alpha_row) / (n + K * h.alpha_row)
        acc[:, cols] = theta[ra][:, None]
        clusters.append(
            {
                "columns": cols.tolist(),
                "size": size,
                "K": K,
                "theta": theta.tolist(),
                "w": w.tolist(),
            }
        )
    return FitSummary(
        col_assign=col,
        row_assign=row_assign,
        clusters=clusters,
        accuracy_matrix=acc,
        col_iteration=col_iteration,
        row_iteration=row_iteration,
    )


def summarize_trace(trace: ChainTrace, X: ResponseMatrix, h: Hyperparams) -> FitSummary:
    """Full summary pipeline: Dahl column estimate, tied row estimates, then
    posterior means at the selected configuration."""
    col_est, ci = dahl_column_estimate(trace)
    row_est, ri = dahl_row_estimate(trace, col_est)
    return posterior_accuracy(X, col_est, row_est, h, col_iteration=ci, row_iteration=ri)
