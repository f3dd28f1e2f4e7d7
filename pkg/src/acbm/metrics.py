"""Evaluation criteria for the simulation studies: column-wise Rand index,
component-count / weight / accuracy errors with their penalty conventions,
averaged row-wise Rand index, and the mean absolute accuracy deviation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import FitSummary, canonicalize, kmax_bound
from .errors import DesignInvariantViolation, LengthMismatch, SingleItem

_EXHAUSTIVE_LIMIT = 8


@dataclass
class GroundTruth:
    """True generating configuration: column partition, per-cluster mixture
    parameters (ACBM designs only), per-cluster true row labels, and the
    entry-wise true accuracy matrix."""

    col_assign: np.ndarray
    row_assign: dict            # cluster id -> length-n true row labels
    accuracy_matrix: np.ndarray  # (n, D) true accuracies
    clusters: list = field(default_factory=list)  # per-cluster {K, w, theta}
    kind: str = "acbm"

    def __post_init__(self):
        self.col_assign = canonicalize(self.col_assign)
        self.row_assign = {
            int(c): canonicalize(a) for c, a in self.row_assign.items()
        }
        self.accuracy_matrix = np.asarray(self.accuracy_matrix, dtype=np.float64)
        sizes = np.bincount(self.col_assign)
        for c, cl in enumerate(self.clusters):
            w = np.asarray(cl["w"], dtype=np.float64)
            th = np.asarray(cl["theta"], dtype=np.float64)
            K = int(cl["K"])
            if not (len(w) == len(th) == K):
                raise DesignInvariantViolation(f"cluster {c}: K, w, theta lengths differ")
            if abs(w.sum() - 1.0) > 1e-9 or (w <= 0).any():
                raise DesignInvariantViolation(f"cluster {c}: weights must be positive and sum to 1")
            if (th <= 0).any() or (th >= 1).any():
                raise DesignInvariantViolation(f"cluster {c}: accuracies must lie in (0,1)")
            if len(np.unique(th)) != K:
                raise DesignInvariantViolation(f"cluster {c}: accuracies must be distinct")
            if self.kind == "acbm" and K > kmax_bound(int(sizes[c])):
                raise DesignInvariantViolation(
                    f"cluster {c}: K={K} exceeds the bound for size {int(sizes[c])}"
                )

    def n_clusters(self) -> int:
        return int(self.col_assign.max()) + 1

    def cluster_of(self, d: int) -> int:
        return int(self.col_assign[d])

    def row_labels_for_column(self, d: int) -> np.ndarray:
        return self.row_assign[self.cluster_of(d)]

    def save(self, path, accuracy_matrix_path=None):
        if accuracy_matrix_path is not None:
            np.savetxt(accuracy_matrix_path, self.accuracy_matrix, delimiter=",", fmt="%.10g")
        d = {
            "kind": self.kind,
            "col_partition": self.col_assign.tolist(),
            "row_partitions": {str(c): a.tolist() for c, a in self.row_assign.items()},
            "clusters": self.clusters,
            "accuracy_matrix_path": (
                str(accuracy_matrix_path) if accuracy_matrix_path is not None else None
            ),
        }
        if accuracy_matrix_path is None:
            d["accuracy_matrix"] = self.accuracy_matrix.tolist()
        with open(path, "w") as fh:
            json.dump(d, fh)

    @classmethod
    def load(cls, path) -> "GroundTruth":
        import os

        with open(path) as fh:
            d = json.load(fh)
        if d.get("accuracy_matrix_path"):
            amp = d["accuracy_matrix_path"]
            if not os.path.isabs(amp):
                amp = os.path.join(os.path.dirname(os.path.abspath(path)), amp)
            acc = np.loadtxt(amp, delimiter=",", ndmin=2)
        else:
            acc = np.asarray(d["accuracy_matrix"], dtype=np.float64)
        return cls(
            col_assign=np.asarray(d["col_partition"], dtype=np.int64),
            row_assign={int(c): np.asarray(a) for c, a in d["row_partitions"].items()},
            accuracy_matrix=acc,
            clusters=d.get("clusters", []),
            kind=d.get("kind", "acbm"),
        )


# ---------------------------------------------------------------------------
# primitives


def rand_index(p, q) -> float:
    """Fraction of unordered item pairs on which the two partitions agree
    (both together or both apart)."""
    p = np.asarray(p)
    q = np.asarray(q)
    if len(p) != len(q):
        raise LengthMismatch(f"partition lengths differ: {len(p)} vs {len(q)}")
    n = len(p)
    if n < 2:
        raise SingleItem("Rand index needs at least 2 items")
    same_p = p[:, None] == p[None, :]
    same_q = q[:, None] == q[None, :]
    iu = np.triu_indices(n, k=1)
    return float((same_p[iu] == same_q[iu]).mean())


def _min_injection(est, truth, squared: bool) -> float:
    """min over injections sigma of the truth into the estimate of
    sum_i d(est[sigma(i)], truth[i]); the estimate is zero-padded when
    shorter. Exhaustive for small sizes, rectangular assignment above."""
    est = np.asarray(est, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if len(est) < len(truth):
        est = np.concatenate([est, np.zeros(len(truth) - len(est))])
    if max(len(est), len(truth)) <= _EXHAUSTIVE_LIMIT:
        best = np.inf
        for perm in permutations(range(len(est)), len(truth)):
            diffs = est[list(perm)] - truth
            tot = float((diffs**2).sum() if squared else np.abs(diffs).sum())
            if tot < best:
                best = tot
        return best
    cost = np.abs(truth[:, None] - est[None, :])
    if squared:
        cost = cost**2
    ri, ci = linear_sum_assignment(cost)
    return float(cost[ri, ci].sum())


def _fit_col(fit) -> np.ndarray:
    if isinstance(fit, FitSummary):
        return canonicalize(fit.col_assign)
    return canonicalize(getattr(fit, "assignment", fit))


# ---------------------------------------------------------------------------
# criteria


def cwri(fit, truth: GroundTruth) -> float:
    """Column-wise Rand index between the fitted and true column partitions."""
    return rand_index(_fit_col(fit), truth.col_assign)


def adk(fit: FitSummary, truth: GroundTruth) -> float:
    """Averaged absolute difference between fitted and true per-column
    row-block counts: (1/D) sum_d | K_hat(d) - K_0(c(d)) |."""
    col = _fit_col(fit)
    D = len(col)
    tot = 0.0
    for d in range(D):
        k_hat = int(np.asarray(fit.row_assign[int(col[d])]).max()) + 1
        k0 = int(truth.clusters[truth.cluster_of(d)]["K"])
        tot += abs(k_hat - k0)
    return tot / D


def adw(fit: FitSummary, truth: GroundTruth) -> float:
    """Averaged absolute weight error with the column-mismatch penalty:
    2 exactly unless the column partition is recovered, else the per-cluster
    minimum-injection L1 weight error averaged over true clusters."""
    col = _fit_col(fit)
    if rand_index(col, truth.col_assign) != 1.0:
        return 2.0
    fit_sets = {frozenset(map(int, cl["columns"])): cl for cl in fit.clusters}
    tot = 0.0
    for c0, cl in enumerate(truth.clusters):
        members = frozenset(np.flatnonzero(truth.col_assign == c0).tolist())
        w_hat = fit_sets[members]["w"]
        k0 = int(cl["K"])
        tot += _min_injection(w_hat, cl["w"], squared=False) / k0
    return tot / truth.n_clusters()


def adp(fit: FitSummary, truth: GroundTruth) -> float:
    """Averaged L2 accuracy error: per true cluster, penalty 1 when the
    cluster is absent from the fit or underestimates K, else the rms
    minimum-injection error; averaged over true clusters."""
    col = _fit_col(fit)
    fit_sets = {frozenset(map(int, cl["columns"])): cl for cl in fit.clusters}
    tot = 0.0
    for c0, cl in enumerate(truth.clusters):
        members = frozenset(np.flatnonzero(truth.col_assign == c0).tolist())
        hit = fit_sets.get(members)
        k0 = int(cl["K"])
        if hit is None or int(hit["K"]) < k0:
            tot += 1.0
            continue
        sq = _min_injection(hit["theta"], cl["theta"], squared=True)
        tot += float(np.sqrt(sq / k0))
    return tot / truth.n_clusters()


def arwri(fit: FitSummary, truth: GroundTruth) -> float:
    """Averaged row-wise Rand index: (1/D) sum_d RI(fitted row partition of
    column d, true row labels of d's true cluster)."""
    col = _fit_col(fit)
    D = len(col)
    tot = 0.0
    for d in range(D):
        tot += rand_index(fit.row_assign[int(col[d])], truth.row_labels_for_column(d))
    return tot / D


def d1(theta_hat, theta_true) -> float:
    """Mean absolute entry-wise deviation between accuracy matrices."""
    A = np.asarray(theta_hat, dtype=np.float64)
    B = np.asarray(theta_true, dtype=np.float64)
    if A.shape != B.shape:
        raise LengthMismatch(f"accuracy matrices differ in shape: {A.shape} vs {B.shape}")
    return float(np.abs(A - B).mean())


def replication_summary(values) -> tuple[float, float]:
    """(median, standard deviation) across replication values."""
    v = np.asarray(values, dtype=np.float64)
    return float(np.median(v)), float(v.std(ddof=1)) if len(v) > 1 else 0.0
