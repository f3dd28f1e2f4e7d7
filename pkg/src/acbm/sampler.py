"""Collapsed Gibbs sampler over the two-level partition structure.

Each outer iteration runs one column (question) sweep, then n_rep row
(examinee) sweeps over every current cluster. Mixture weights and accuracies
are integrated out via Beta-Binomial conjugacy; the identifiability cap
K <= floor((|c|+1)/2) is enforced as an exact zero-mass constraint in the
column full conditionals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import _kernel_py, priors
from .backend import backend_name, get_backend
from .core import (
    ChainTrace,
    Hyperparams,
    ModelState,
    ResponseMatrix,
    canonicalize,
    kmax_bound,
)

_INIT_CODES = {"singletons": 0, "one-cluster": 1, "random": 2}


@dataclass(frozen=True)
class SamplerConfig:
    n_iter: int = 200
    n_rep: int = 400
    burn_in: int | None = None  # default n_iter // 2
    seed: int = 0
    thinning: int = 1
    init_mode: str = "singletons"

    def __post_init__(self):
        if self.n_iter < 1:
            raise ValueError("n_iter must be >= 1")
        if self.n_rep < 1:
            raise ValueError("n_rep must be >= 1")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if self.resolved_burn_in() >= self.n_iter:
            raise ValueError("burn_in must be < n_iter")
        if self.init_mode not in _INIT_CODES:
            raise ValueError(f"init_mode must be one of {sorted(_INIT_CODES)}")

    def resolved_burn_in(self) -> int:
        return self.n_iter // 2 if self.burn_in is None else self.burn_in

    def n_kept(self) -> int:
        return len(range(self.resolved_burn_in(), self.n_iter, self.thinning))


@dataclass
class KernelTables:
    """Precomputed lookup tables consumed by both kernel backends."""

    n: int
    D: int
    XT: np.ndarray        # (D, n) uint8, column-major view of X
    colsum: np.ndarray    # (D,) int64
    base: np.ndarray      # (D,) float64 singleton-column marginals
    lg_a: np.ndarray      # lgamma(a0 + m), m = 0..n*D
    lg_b: np.ndarray
    lg_ab: np.ndarray
    lgr_row: np.ndarray   # log rising factorial alpha_row^{(m)}, m = 0..n
    lgr_col: np.ndarray
    lsz_row: np.ndarray   # log(m + alpha_row)
    lsz_col: np.ndarray
    log_alpha_row: float
    log_alpha_col: float
    logVcol: np.ndarray   # (D+2,) log V_D(t) of the unbounded column MFM
    logVrow: np.ndarray   # (D+1, kmax_bound(D)+2) truncated row tables by cluster size


def build_tables(X: ResponseMatrix, h: Hyperparams) -> KernelTables:
    n, D = X.n_examinees, X.n_questions
    if kmax_bound(D) > 127:
        raise ValueError("D too large for the int8 block-label encoding")
    XT = np.ascontiguousarray(X.entries.T)
    colsum = XT.sum(axis=1).astype(np.int64)
    grid = np.arange(n * D + 1, dtype=np.float64)
    lg_a = gammaln(h.a0 + grid)
    lg_b = gammaln(h.b0 + grid)
    lg_ab = gammaln(h.a0 + h.b0 + grid)
    base = (
        lg_a[colsum] + lg_b[n - colsum] + lg_ab[0] - lg_a[0] - lg_b[0] - lg_ab[n]
    )
    mr = np.arange(n + 1, dtype=np.float64)
    mc = np.arange(D + 1, dtype=np.float64)
    lgr_row = gammaln(h.alpha_row + mr) - gammaln(h.alpha_row)
    lgr_col = gammaln(h.alpha_col + mc) - gammaln(h.alpha_col)
    lsz_row = np.log(mr + h.alpha_row)
    lsz_col = np.log(mc + h.alpha_col)

    col_coeffs = priors.build_mfm_coefficients(D, h.gamma_col, h.alpha_col, k_max=None)
    logVcol = np.full(D + 2, priors.NEG_INF)
    for t in range(1, D + 1):
        logVcol[t] = col_coeffs.log_v_at(t)

    kmax_D = kmax_bound(D)
    logVrow = np.full((D + 1, kmax_D + 2), priors.NEG_INF)
    for s in range(1, D + 1):
        coeffs = priors.build_mfm_coefficients(n, h.gamma_row, h.alpha_row, k_max=kmax_bound(s))
        for t in range(1, min(kmax_bound(s), n) + 1):
            logVrow[s, t] = coeffs.log_v_at(t)

    return KernelTables(
        n=n, D=D, XT=XT, colsum=colsum, base=base,
        lg_a=lg_a, lg_b=lg_b, lg_ab=lg_ab,
        lgr_row=lgr_row, lgr_col=lgr_col, lsz_row=lsz_row, lsz_col=lsz_col,
        log_alpha_row=math.log(h.alpha_row), log_alpha_col=math.log(h.alpha_col),
        logVcol=logVcol, logVrow=logVrow,
    )


def precompute_column_base_logliks(X: ResponseMatrix, h: Hyperparams) -> np.ndarray:
    """Per-column log marginal likelihood as a fresh singleton cluster
    (single accuracy shared by all examinees)."""
    n = X.n_examinees
    s = X.entries.sum(axis=0).astype(np.int64)
    return np.array(
        [priors.log_beta_binomial_marginal(int(sj), n - int(sj), h.a0, h.b0) for sj in s]
    )


def run_chain(
    X: ResponseMatrix,
    h: Hyperparams,
    config: SamplerConfig,
    backend: str | None = None,
) -> ChainTrace:
    """Run one chain and return the post-burn-in trace.

    Deterministic given (X, h, config, seed); the same trace is produced by
    either kernel backend.
    """
    tb = build_tables(X, h)
    burn_in = config.resolved_burn_in()
    M = config.n_kept()
    col_out = np.zeros((M, X.n_questions), dtype=np.int32)
    row_out = np.full((M, X.n_questions, X.n_examinees), -1, dtype=np.int8)
    logj_out = np.zeros(M, dtype=np.float64)
    kern = get_backend(backend)
    nrec = kern.run_chain_kernel(
        tb, config.n_iter, config.n_rep, burn_in, config.thinning,
        config.seed, _INIT_CODES[config.init_mode],
        col_out, row_out, logj_out,
    )
    if nrec != M:
        raise RuntimeError(f"kernel recorded {nrec} states, expected {M}")
    meta = {
        "n_iter": config.n_iter,
        "n_rep": config.n_rep,
        "burn_in": burn_in,
        "thinning": config.thinning,
        "seed": config.seed,
        "init_mode": config.init_mode,
        "rng": "splitmix64",
        "backend": backend_name(kern),
        "n": X.n_examinees,
        "D": X.n_questions,
    }
    return ChainTrace(col_out, row_out, logj_out, meta)


# ---------------------------------------------------------------------------
# Library-level single-sweep operations (always on the Python kernel, which
# exposes individual moves; used for conditional-distribution tests and as
# the reference semantics of the compiled kernel).


def _state_to_kernel(X: ResponseMatrix, state: ModelState, tb: KernelTables):
    pt = _kernel_py._Tables(tb)
    ks = _kernel_py.KernelState(tb.n, tb.D, (tb.D + 1) // 2)
    col = canonicalize(state.col_assign)
    t = int(col.max()) + 1
    ks.t = t
    for j in range(tb.D):
        ks.col_assign[j] = int(col[j])
    sizes = np.bincount(col, minlength=t)
    for c in range(t):
        ks.csize[c] = int(sizes[c])
        ra = canonicalize(state.row_assign[c])
        K = int(ra.max()) + 1
        if K > kmax_bound(int(sizes[c])):
            raise ValueError(f"cluster {c} violates the block-count bound")
        ks.nblocks[c] = K
        cols = np.flatnonzero(col == c)
        rs = X.entries[:, cols].sum(axis=1).astype(np.int64)
        bs = np.bincount(ra, minlength=K)
        Sb = np.bincount(ra, weights=rs, minlength=K).astype(np.int64)
        for i in range(tb.n):
            ks.row_assign[c][i] = int(ra[i])
            ks.rowsum[c][i] = int(rs[i])
        for k in range(K):
            ks.bsize[c][k] = int(bs[k])
            ks.Sblk[c][k] = int(Sb[k])
    return pt, ks


def _kernel_to_state(X: ResponseMatrix, ks) -> ModelState:
    col = canonicalize([ks.col_assign[j] for j in range(ks.D)])
    order = _kernel_py._canonical_cluster_order(ks)
    rows = {}
    for rank, c in enumerate(order):
        rows[rank] = canonicalize(ks.row_assign[c][: ks.n])
    return ModelState.from_partitions(X, col, rows)


def make_rng(seed: int):
    return _kernel_py.SplitMix64(seed)


def gibbs_update_columns(state, X, h, rng) -> ModelState:
    """One full column sweep (j = 0..D-1) of the collapsed Gibbs sampler."""
    tb = build_tables(X, h)
    pt, ks = _state_to_kernel(X, state, tb)
    _kernel_py.column_sweep(ks, pt, rng)
    return _kernel_to_state(X, ks)


def gibbs_update_rows(state, cluster_id, X, h, rng) -> ModelState:
    """One row sweep (i = 0..n-1) under the given column cluster."""
    tb = build_tables(X, h)
    pt, ks = _state_to_kernel(X, state, tb)
    _kernel_py.row_sweep_cluster(ks, int(cluster_id), pt, rng)
    return _kernel_to_state(X, ks)


def log_joint(state: ModelState, X: ResponseMatrix, h: Hyperparams) -> float:
    """Log unnormalized posterior of one configuration, mixtures collapsed:
    column EPPF + per-cluster (row EPPF + Beta-Binomial block marginals)."""
    col = canonicalize(state.col_assign)
    D = len(col)
    n = X.n_examinees
    col_coeffs = priors.build_mfm_coefficients(D, h.gamma_col, h.alpha_col, k_max=None)
    out = priors.log_partition_prior(col, col_coeffs)
    sizes = np.bincount(col)
    for c in range(int(col.max()) + 1):
        size = int(sizes[c])
        ra = canonicalize(state.row_assign[c])
        coeffs = priors.build_mfm_coefficients(n, h.gamma_row, h.alpha_row, k_max=kmax_bound(size))
        out += priors.log_partition_prior(ra, coeffs)
        cols = np.flatnonzero(col == c)
        rs = X.entries[:, cols].sum(axis=1).astype(np.int64)
        K = int(ra.max()) + 1
        S = np.bincount(ra, weights=rs, minlength=K).astype(np.int64)
        m = np.bincount(ra, minlength=K)
        for k in range(K):
            out += priors.log_beta_binomial_marginal(
                int(S[k]), int(m[k]) * size - int(S[k]), h.a0, h.b0
            )
    return out
