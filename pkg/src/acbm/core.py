"""Domain types: response matrices, partitions, sufficient statistics, traces.

Partitions are kept in canonical form: cluster/block ids numbered by order
of first appearance, so two partitions are set-equal iff their label vectors
are entry-wise equal.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyMatrix,
    NonBinaryEntry,
    PartitionShapeMismatch,
    RaggedRows,
)


def kmax_bound(cluster_size: int) -> int:
    """Identifiability cap on the number of examinee mixture components
    for a question cluster of the given size: floor((size + 1) / 2)."""
    if cluster_size < 1:
        raise ValueError(f"cluster_size must be >= 1, got {cluster_size}")
    return (cluster_size + 1) // 2


def canonicalize(assignment) -> np.ndarray:
    """Relabel cluster ids by order of first appearance."""
    assignment = np.asarray(assignment)
    mapping = {}
    out = np.empty(len(assignment), dtype=np.int64)
    for i, lab in enumerate(assignment):
        lab = int(lab)
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return out


def blocks_of(assignment) -> dict[int, list[int]]:
    """Map cluster id -> sorted member indices."""
    out: dict[int, list[int]] = {}
    for i, lab in enumerate(np.asarray(assignment)):
        out.setdefault(int(lab), []).append(i)
    return out


@dataclass(frozen=True)
class Hyperparams:
    """Model hyperparameters. a0/b0 are the Beta shapes on accuracies,
    gamma_* the Poisson rates of the component-count priors and alpha_*
    the Dirichlet concentrations, at the examinee (row) and question
    (column) levels."""

    a0: float = 0.01
    b0: float = 0.01
    gamma_row: float = 1.0
    alpha_row: float = 1.0
    gamma_col: float = 1.0
    alpha_col: float = 1.0

    def __post_init__(self):
        for name in ("a0", "b0", "gamma_row", "alpha_row", "gamma_col", "alpha_col"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be strictly positive and finite, got {v}")


class ResponseMatrix:
    """An n x D matrix of 0/1 responses: rows are examinees, columns are
    questions. Entries are stored as uint8; no missing values allowed."""

    def __init__(self, entries, question_labels=None, examinee_labels=None):
        entries = np.asarray(entries)
        if entries.ndim != 2 or entries.size == 0:
            raise EmptyMatrix(f"expected a nonempty 2-d table, got shape {entries.shape}")
        bad = (entries != 0) & (entries != 1)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise NonBinaryEntry(int(i), int(j), entries[i, j])
        self.entries = entries.astype(np.uint8)
        self.n_examinees, self.n_questions = self.entries.shape
        if question_labels is not None and len(question_labels) != self.n_questions:
            raise PartitionShapeMismatch(
                f"{len(question_labels)} question labels for {self.n_questions} questions"
            )
        if examinee_labels is not None and len(examinee_labels) != self.n_examinees:
            raise PartitionShapeMismatch(
                f"{len(examinee_labels)} examinee labels for {self.n_examinees} examinees"
            )
        self.question_labels = list(question_labels) if question_labels is not None else None
        self.examinee_labels = list(examinee_labels) if examinee_labels is not None else None

    @property
    def shape(self):
        return self.entries.shape

    def __repr__(self):
        return f"ResponseMatrix(n={self.n_examinees}, D={self.n_questions})"


def validate_matrix(raw, question_labels=None, examinee_labels=None) -> ResponseMatrix:
    """Validate a rectangular table of 0/1 values into a ResponseMatrix."""
    if isinstance(raw, np.ndarray):
        return ResponseMatrix(raw, question_labels, examinee_labels)
    rows = list(raw)
    if not rows:
        raise EmptyMatrix("no rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise RaggedRows(f"row lengths differ: {sorted(widths)}")
    if widths == {0}:
        raise EmptyMatrix("rows are empty")
    arr = np.empty((len(rows), widths.pop()), dtype=np.int64)
    for i, r in enumerate(rows):
        for j, v in enumerate(r):
            try:
                iv = int(v)
            except (TypeError, ValueError):
                raise NonBinaryEntry(i, j, v) from None
            if iv not in (0, 1) or (isinstance(v, float) and v != iv):
                raise NonBinaryEntry(i, j, v)
            arr[i, j] = iv
    return ResponseMatrix(arr, question_labels, examinee_labels)


class ColumnPartition:
    """Partition of question indices 0..D-1, canonical labels."""

    def __init__(self, assignment):
        self.assignment = canonicalize(assignment)
        self.n_clusters = int(self.assignment.max()) + 1 if len(self.assignment) else 0
        if len(self.assignment) == 0:
            raise EmptyMatrix("empty column partition")

    @property
    def clusters(self) -> dict[int, list[int]]:
        return blocks_of(self.assignment)

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.n_clusters)

    def __len__(self):
        return self.n_clusters

    def __eq__(self, other):
        if isinstance(other, ColumnPartition):
            other = other.assignment
        return np.array_equal(self.assignment, canonicalize(other))

    def __repr__(self):
        return f"ColumnPartition({self.assignment.tolist()})"


class RowPartition:
    """Partition of examinees under one question cluster; the number of
    blocks must respect the identifiability cap for the cluster size."""

    def __init__(self, assignment, cluster_size: int):
        self.assignment = canonicalize(assignment)
        self.n_blocks = int(self.assignment.max()) + 1
        self.cluster_size = int(cluster_size)
        if self.n_blocks > kmax_bound(self.cluster_size):
            raise PartitionShapeMismatch(
                f"{self.n_blocks} blocks exceed the bound "
                f"{kmax_bound(self.cluster_size)} for cluster size {self.cluster_size}"
            )

    @property
    def blocks(self) -> dict[int, list[int]]:
        return blocks_of(self.assignment)

    def block_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.n_blocks)

    def __eq__(self, other):
        if isinstance(other, RowPartition):
            other = other.assignment
        return np.array_equal(self.assignment, canonicalize(other))

    def __repr__(self):
        return f"RowPartition(K={self.n_blocks}, |c|={self.cluster_size})"


@dataclass(frozen=True)
class BlockSuffStats:
    """Cached counts for one (cluster, block): S ones, F zeros, m members."""

    S: int
    F: int
    m: int

    def __post_init__(self):
        if self.S < 0 or self.F < 0 or self.m < 0:
            raise PartitionShapeMismatch(f"negative suffstats: {self}")


class ModelState:
    """One configuration of the two-level partition plus cached suffstats.

    col_assign is canonical; row_assign[c] is the canonical examinee
    partition under column cluster c; S[c][k] / m[c][k] cache the success
    count and member count of block k.
    """

    def __init__(self, col_assign, row_assign: dict, S: dict, m: dict, log_joint=None):
        self.col_assign = np.asarray(col_assign, dtype=np.int64)
        self.row_assign = {int(c): np.asarray(a, dtype=np.int64) for c, a in row_assign.items()}
        self.S = {int(c): np.asarray(v, dtype=np.int64) for c, v in S.items()}
        self.m = {int(c): np.asarray(v, dtype=np.int64) for c, v in m.items()}
        self.log_joint = log_joint

    @classmethod
    def from_partitions(cls, X: ResponseMatrix, col_assign, row_assign: dict) -> "ModelState":
        """Build a state from partitions, computing suffstats from scratch."""
        col_assign = canonicalize(col_assign)
        if len(col_assign) != X.n_questions:
            raise PartitionShapeMismatch(
                f"column partition over {len(col_assign)} items for D={X.n_questions}"
            )
        n_clusters = int(col_assign.max()) + 1
        sizes = np.bincount(col_assign, minlength=n_clusters)
        rows, S, m = {}, {}, {}
        for c in range(n_clusters):
            if c not in row_assign:
                raise PartitionShapeMismatch(f"no row partition for cluster {c}")
            ra = canonicalize(row_assign[c])
            if len(ra) != X.n_examinees:
                raise PartitionShapeMismatch(
                    f"row partition over {len(ra)} examinees for n={X.n_examinees}"
                )
            K = int(ra.max()) + 1
            if K > kmax_bound(int(sizes[c])):
                raise PartitionShapeMismatch(
                    f"cluster {c}: {K} blocks > bound {kmax_bound(int(sizes[c]))} "
                    f"for size {int(sizes[c])}"
                )
            cols = np.flatnonzero(col_assign == c)
            rs = X.entries[:, cols].sum(axis=1).astype(np.int64)  # per-examinee ones
            S[c] = np.bincount(ra, weights=rs, minlength=K).astype(np.int64)
            m[c] = np.bincount(ra, minlength=K).astype(np.int64)
            rows[c] = ra
        return cls(col_assign, rows, S, m)

    @property
    def n_clusters(self) -> int:
        return int(self.col_assign.max()) + 1

    def cluster_size(self, c: int) -> int:
        return int((self.col_assign == c).sum())

    def suffstats(self, c: int, k: int) -> BlockSuffStats:
        m = int(self.m[c][k])
        S = int(self.S[c][k])
        return BlockSuffStats(S=S, F=m * self.cluster_size(c) - S, m=m)

    def copy(self) -> "ModelState":
        return ModelState(
            self.col_assign.copy(),
            {c: a.copy() for c, a in self.row_assign.items()},
            {c: v.copy() for c, v in self.S.items()},
            {c: v.copy() for c, v in self.m.items()},
            self.log_joint,
        )


def recompute_suffstats(X: ResponseMatrix, state: ModelState) -> ModelState:
    """Recompute all block suffstats from scratch and return a state whose
    caches are guaranteed consistent with X and the partitions."""
    return ModelState.from_partitions(X, state.col_assign, state.row_assign)


class ChainTrace:
    """Post-burn-in states of one chain, in compact array form.

    col[m] is the canonical column assignment of kept state m; row[m][c]
    holds the canonical row labels of cluster c (slots past the cluster
    count are -1); log_joint[m] the log unnormalized posterior.
    """

    def __init__(self, col, row, log_joint, meta: dict):
        self.col = np.asarray(col)
        self.row = np.asarray(row)
        self.log_joint = np.asarray(log_joint, dtype=np.float64)
        self.meta = dict(meta)
        if not (len(self.col) == len(self.row) == len(self.log_joint)):
            raise PartitionShapeMismatch("trace arrays have differing lengths")

    def __len__(self):
        return len(self.col)

    @property
    def n_questions(self):
        return self.col.shape[1]

    @property
    def n_examinees(self):
        return self.row.shape[2]

    def n_clusters(self, i: int) -> int:
        return int(self.col[i].max()) + 1

    def row_assignments(self, i: int) -> dict[int, np.ndarray]:
        return {c: self.row[i, c].astype(np.int64) for c in range(self.n_clusters(i))}

    def state(self, i: int, X: ResponseMatrix | None = None) -> ModelState:
        rows = self.row_assignments(i)
        if X is not None:
            st = ModelState.from_partitions(X, self.col[i], rows)
            st.log_joint = float(self.log_joint[i])
            return st
        empt = {c: np.zeros(0, dtype=np.int64) for c in rows}
        return ModelState(self.col[i], rows, empt, empt, float(self.log_joint[i]))

    def save_ndjson(self, path):
        """One JSON record per kept state, plus a leading metadata record."""
        with open(path, "w") as fh:
            fh.write(json.dumps({"meta": self.meta}) + "\n")
            for i in range(len(self)):
                rec = {
                    "iter": int(self.meta.get("burn_in", 0) + i * self.meta.get("thinning", 1)),
                    "col_assign": self.col[i].tolist(),
                    "row_assign": {
                        str(c): a.tolist() for c, a in self.row_assignments(i).items()
                    },
                    "log_joint": float(self.log_joint[i]),
                }
                fh.write(json.dumps(rec) + "\n")

    @classmethod
    def load_ndjson(cls, path) -> "ChainTrace":
        with open(path) as fh:
            header = json.loads(fh.readline())
            meta = header["meta"]
            cols, rows, logjs = [], [], []
            for line in fh:
                rec = json.loads(line)
                cols.append(rec["col_assign"])
                rows.append(rec["row_assign"])
                logjs.append(rec["log_joint"])
        if not cols:
            col = np.zeros((0, 0), dtype=np.int32)
            row = np.zeros((0, 0, 0), dtype=np.int8)
            return cls(col, row, np.zeros(0), meta)
        D = len(cols[0])
        n = len(next(iter(rows[0].values())))
        row_arr = np.full((len(cols), D, n), -1, dtype=np.int8)
        for i, rdict in enumerate(rows):
            for c, labs in rdict.items():
                row_arr[i, int(c)] = labs
        return cls(np.asarray(cols, dtype=np.int32), row_arr, np.asarray(logjs), meta)


@dataclass
class FitSummary:
    """Posterior summary at the Dahl configuration: partitions, per-block
    accuracies/weights and the entry-wise accuracy matrix."""

    col_assign: np.ndarray
    row_assign: dict  # cluster id -> canonical row labels (shared by its columns)
    clusters: list = field(default_factory=list)  # per-cluster dicts
    accuracy_matrix: np.ndarray | None = None
    col_iteration: int = 0
    row_iteration: int = 0

    def to_json_dict(self, accuracy_matrix_path=None) -> dict:
        return {
            "col_partition": np.asarray(self.col_assign).tolist(),
            "row_partitions": {str(c): np.asarray(a).tolist() for c, a in self.row_assign.items()},
            "clusters": [
                {
                    "columns": list(map(int, cl["columns"])),
                    "size": int(cl["size"]),
                    "K": int(cl["K"]),
                    "theta": [float(t) for t in cl["theta"]],
                    "w": [float(w) for w in cl["w"]],
                }
                for cl in self.clusters
            ],
            "col_iteration": int(self.col_iteration),
            "row_iteration": int(self.row_iteration),
            "accuracy_matrix_path": accuracy_matrix_path,
        }

    def save(self, path, accuracy_matrix_path=None):
        if accuracy_matrix_path is not None and self.accuracy_matrix is not None:
            np.savetxt(accuracy_matrix_path, self.accuracy_matrix, delimiter=",", fmt="%.10g")
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(str(accuracy_matrix_path)), fh, indent=1)

    @classmethod
    def load(cls, path) -> "FitSummary":
        import os

        with open(path) as fh:
            d = json.load(fh)
        acc = None
        amp = d.get("accuracy_matrix_path")
        if amp and amp != "None":
            if not os.path.isabs(amp):
                amp = os.path.join(os.path.dirname(os.path.abspath(path)), amp)
            if os.path.exists(amp):
                acc = np.loadtxt(amp, delimiter=",", ndmin=2)
        return cls(
            col_assign=np.asarray(d["col_partition"], dtype=np.int64),
            row_assign={int(c): np.asarray(a, dtype=np.int64) for c, a in d["row_partitions"].items()},
            clusters=d["clusters"],
            accuracy_matrix=acc,
            col_iteration=d.get("col_iteration", 0),
            row_iteration=d.get("row_iteration", 0),
        )


# ---------------------------------------------------------------------------
# CSV / JSON file formats


def read_matrix_csv(path) -> ResponseMatrix:
    """Read a response matrix: comma-separated 0/1 entries, one examinee per
    row; an optional first header row of question labels is detected by the
    presence of any non-{0,1} token."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise EmptyMatrix(f"{path} is empty")
    labels = None
    first = [tok.strip() for tok in rows[0]]
    if any(tok not in ("0", "1") for tok in first):
        labels = first
        rows = rows[1:]
        if not rows:
            raise EmptyMatrix(f"{path} has a header but no data rows")
    table = [[tok.strip() for tok in r] for r in rows]
    return validate_matrix(table, question_labels=labels)


def write_matrix_csv(path, X: ResponseMatrix):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if X.question_labels is not None:
            w.writerow(X.question_labels)
        for row in X.entries:
            w.writerow(row.tolist())


def read_partition_json(path) -> np.ndarray:
    with open(path) as fh:
        data = json.load(fh)
    return canonicalize(np.asarray(data, dtype=np.int64))


def write_partition_json(path, assignment):
    with open(path, "w") as fh:
        json.dump(np.asarray(assignment).tolist(), fh)
