"""Synthetic cohort generators for the four simulation designs, returning
both the response matrix and the generating ground truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import ResponseMatrix, kmax_bound
from .errors import DesignInvariantViolation
from .metrics import GroundTruth


@dataclass(frozen=True)
class AcbmDesign:
    """Mixture design: one (size, weights, accuracies) triple per question
    cluster. Weights must sum to 1, accuracies be distinct in (0,1), and the
    component count respect the identifiability cap for the cluster size."""

    clusters: tuple  # of (size, weights tuple, thetas tuple)
    n_examinees: int
    seed: int = 0

    def __post_init__(self):
        if self.n_examinees < 1:
            raise DesignInvariantViolation("n_examinees must be >= 1")
        if not self.clusters:
            raise DesignInvariantViolation("design needs at least one cluster")
        for idx, (size, w, th) in enumerate(self.clusters):
            w = np.asarray(w, dtype=np.float64)
            th = np.asarray(th, dtype=np.float64)
            if size < 1:
                raise DesignInvariantViolation(f"cluster {idx}: size must be >= 1")
            if len(w) != len(th):
                raise DesignInvariantViolation(f"cluster {idx}: weights/accuracies lengths differ")
            if abs(w.sum() - 1.0) > 1e-9 or (w <= 0).any():
                raise DesignInvariantViolation(
                    f"cluster {idx}: weights must be positive and sum to 1"
                )
            if (th < 0).any() or (th > 1).any():
                raise DesignInvariantViolation(f"cluster {idx}: accuracies must lie in [0,1]")
            if len(np.unique(th)) != len(th):
                raise DesignInvariantViolation(f"cluster {idx}: accuracies must be distinct")
            if len(w) > kmax_bound(int(size)):
                raise DesignInvariantViolation(
                    f"cluster {idx}: {len(w)} components exceed the bound for size {size}"
                )

    @property
    def n_questions(self) -> int:
        return sum(size for size, _, _ in self.clusters)


@dataclass(frozen=True)
class RaschDesign:
    """Item difficulties psi per column and the discrete ability support
    each examinee's xi is drawn from, both in logit units."""

    psi: tuple
    xi_support: tuple
    n_examinees: int
    seed: int = 0

    def __post_init__(self):
        if self.n_examinees < 1:
            raise DesignInvariantViolation("n_examinees must be >= 1")
        if not all(np.isfinite(self.psi)) or not all(np.isfinite(self.xi_support)):
            raise DesignInvariantViolation("psi and xi_support must be finite")

    @property
    def n_questions(self) -> int:
        return len(self.psi)


def _logistic(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def generate_acbm(design: AcbmDesign) -> tuple[ResponseMatrix, GroundTruth]:
    """Draw each examinee's component per cluster from the weights, then each
    entry Bernoulli(theta of the component); component draws are independent
    across clusters."""
    rng = np.random.default_rng(design.seed)
    n = design.n_examinees
    D = design.n_questions
    X = np.empty((n, D), dtype=np.uint8)
    acc = np.empty((n, D), dtype=np.float64)
    col_assign = np.empty(D, dtype=np.int64)
    row_assign = {}
    clusters = []
    j = 0
    for c, (size, w, th) in enumerate(design.clusters):
        w = np.asarray(w, dtype=np.float64)
        th = np.asarray(th, dtype=np.float64)
        cols = np.arange(j, j + size)
        j += size
        col_assign[cols] = c
        z = rng.choice(len(w), size=n, p=w)
        theta_i = th[z]
        X[:, cols] = (rng.random((n, size)) < theta_i[:, None]).astype(np.uint8)
        acc[:, cols] = theta_i[:, None]
        row_assign[c] = z
        clusters.append({"K": len(w), "w": w.tolist(), "theta": th.tolist()})
    # clip degenerate 0/1 design accuracies into the open interval for the
    # GroundTruth invariant (generation itself uses the exact values)
    safe = [
        {
            "K": cl["K"],
            "w": cl["w"],
            "theta": [min(max(t, 1e-12), 1 - 1e-12) for t in cl["theta"]],
        }
        for cl in clusters
    ]
    truth = GroundTruth(
        col_assign=col_assign,
        row_assign=row_assign,
        accuracy_matrix=acc,
        clusters=safe,
        kind="acbm",
    )
    return ResponseMatrix(X), truth


def generate_rasch(design: RaschDesign) -> tuple[ResponseMatrix, GroundTruth]:
    """xi_i uniform over the support, theta_{i,j} = logistic(xi_i - psi_j),
    entries independent Bernoulli(theta). The truth's column partition groups
    equal psi and its row labels group equal xi."""
    rng = np.random.default_rng(design.seed)
    n = design.n_examinees
    psi = np.asarray(design.psi, dtype=np.float64)
    support = np.asarray(design.xi_support, dtype=np.float64)
    zi = rng.integers(0, len(support), size=n)
    xi = support[zi]
    theta = _logistic(xi[:, None] - psi[None, :])
    X = (rng.random((n, len(psi))) < theta).astype(np.uint8)

    # canonical column clusters by distinct psi (order of first appearance)
    col_assign = np.empty(len(psi), dtype=np.int64)
    seen = {}
    for d, p in enumerate(psi):
        col_assign[d] = seen.setdefault(float(p), len(seen))
    labels = zi.astype(np.int64)
    row_assign = {c: labels for c in range(len(seen))}
    truth = GroundTruth(
        col_assign=col_assign,
        row_assign=row_assign,
        accuracy_matrix=theta,
        clusters=[],
        kind="rasch",
    )
    return ResponseMatrix(X), truth


# ---------------------------------------------------------------------------
# built-in designs. DGP1/DGP2 numeric mixture settings are fixed defaults
# (well separated components satisfying every stated constraint); DGP3/DGP4
# use psi = -0.5 on the first half of columns and +0.5 on the second, with
# abilities uniform on {-2, 0, 2}.

_MIX_SPECS = (
    ((0.2, 0.5, 0.8), (1 / 3, 1 / 3, 1 / 3)),
    ((0.3, 0.9), (0.5, 0.5)),
    ((0.15, 0.55, 0.95), (0.4, 0.3, 0.3)),
    ((0.4,), (1.0,)),
    ((0.7,), (1.0,)),
)


def _acbm_design(sizes, n, seed):
    clusters = tuple(
        (size, w, th) for size, (th, w) in zip(sizes, _MIX_SPECS)
    )
    return AcbmDesign(clusters=clusters, n_examinees=n, seed=seed)


def dgp1_design(n: int, seed: int = 0) -> AcbmDesign:
    """20 questions in 5 clusters: 3 large (6/6/6) plus 2 singletons."""
    return _acbm_design((6, 6, 6, 1, 1), n, seed)


def dgp2_design(n: int, seed: int = 0) -> AcbmDesign:
    """60 questions in 5 clusters: 3 large (20/20/18) plus 2 singletons."""
    return _acbm_design((20, 20, 18, 1, 1), n, seed)


def dgp3_design(n: int, seed: int = 0) -> RaschDesign:
    """20 questions, 2 difficulty groups at -0.5/+0.5, abilities on {-2,0,2}."""
    return RaschDesign(psi=(-0.5,) * 10 + (0.5,) * 10, xi_support=(-2.0, 0.0, 2.0),
                       n_examinees=n, seed=seed)


def dgp4_design(n: int, seed: int = 0) -> RaschDesign:
    """60 questions, 2 difficulty groups at -0.5/+0.5, abilities on {-2,0,2}."""
    return RaschDesign(psi=(-0.5,) * 30 + (0.5,) * 30, xi_support=(-2.0, 0.0, 2.0),
                       n_examinees=n, seed=seed)


BUILTIN_DESIGNS = {
    "dgp1": dgp1_design,
    "dgp2": dgp2_design,
    "dgp3": dgp3_design,
    "dgp4": dgp4_design,
}


def generate(design) -> tuple[ResponseMatrix, GroundTruth]:
    if isinstance(design, AcbmDesign):
        return generate_acbm(design)
    if isinstance(design, RaschDesign):
        return generate_rasch(design)
    raise TypeError(f"unknown design type {type(design).__name__}")


def design_from_json(path, n: int | None = None, seed: int = 0):
    """Load a design from JSON: either {"kind": "acbm", "clusters": [[size,
    [w...], [theta...]], ...]} or {"kind": "rasch", "psi": [...],
    "xi_support": [...]}; n/seed override any values in the file."""
    with open(path) as fh:
        d = json.load(fh)
    kind = d.get("kind", "acbm")
    n = int(d["n_examinees"]) if n is None else int(n)
    if kind == "acbm":
        clusters = tuple(
            (int(size), tuple(map(float, w)), tuple(map(float, th)))
            for size, w, th in d["clusters"]
        )
        return AcbmDesign(clusters=clusters, n_examinees=n, seed=seed)
    if kind == "rasch":
        return RaschDesign(
            psi=tuple(map(float, d["psi"])),
            xi_support=tuple(map(float, d["xi_support"])),
            n_examinees=n,
            seed=seed,
        )
    raise DesignInvariantViolation(f"unknown design kind {kind!r}")
