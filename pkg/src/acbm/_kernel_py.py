"""Pure-Python Gibbs kernel.

This is the fallback twin of the compiled kernel in ``_kernel.pyx``: both
implement the identical sweep logic over the identical splitmix64 stream, so
a chain run on either backend produces bit-identical traces. Keep the two in
sync move for move; any divergence in arithmetic order or RNG consumption
breaks the equality contract tested in tests/test_backends.py.

State layout (struct-of-arrays, all slots preallocated):
  t                  number of active column clusters (slots 0..t-1)
  col_assign[j]      cluster slot of column j (-1 while detached)
  csize[c]           number of columns in cluster c
  nblocks[c]         number of row blocks of cluster c
  row_assign[c][i]   block of examinee i under cluster c
  bsize[c][k]        members of block k
  Sblk[c][k]         total ones of block k (over the cluster's columns)
  rowsum[c][i]       ones of examinee i across the cluster's columns
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_INV53 = 1.1102230246251565e-16  # 2**-53


class SplitMix64:
    """Counter-based 64-bit generator; trivially splittable by seed offset."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return (z ^ (z >> 31)) & _MASK

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * _INV53


class KernelState:
    __slots__ = (
        "n", "D", "kmax", "t", "col_assign", "csize", "nblocks",
        "row_assign", "bsize", "Sblk", "rowsum",
    )

    def __init__(self, n, D, kmax):
        self.n = n
        self.D = D
        self.kmax = kmax  # global cap = kmax_bound(D)
        self.t = 0
        self.col_assign = [-1] * D
        self.csize = [0] * D
        self.nblocks = [0] * D
        self.row_assign = [[0] * n for _ in range(D)]
        self.bsize = [[0] * (kmax + 1) for _ in range(D)]
        self.Sblk = [[0] * (kmax + 1) for _ in range(D)]
        self.rowsum = [[0] * n for _ in range(D)]


class _Tables:
    """Python-list view of the precomputed numpy tables (list indexing is
    faster than numpy scalar indexing in the interpreter)."""

    __slots__ = (
        "n", "D", "kb", "XT", "base", "colsum", "la", "lb", "lab",
        "lgr_row", "lgr_col", "lsz_row", "lsz_col",
        "log_alpha_row", "log_alpha_col", "logVcol", "logVrow",
    )

    def __init__(self, tb):
        self.n = tb.n
        self.D = tb.D
        self.kb = [(s + 1) // 2 for s in range(tb.D + 1)]
        self.XT = [list(map(int, row)) for row in tb.XT]
        self.base = tb.base.tolist()
        self.colsum = tb.colsum.tolist()
        self.la = tb.lg_a.tolist()
        self.lb = tb.lg_b.tolist()
        self.lab = tb.lg_ab.tolist()
        self.lgr_row = tb.lgr_row.tolist()
        self.lgr_col = tb.lgr_col.tolist()
        self.lsz_row = tb.lsz_row.tolist()
        self.lsz_col = tb.lsz_col.tolist()
        self.log_alpha_row = tb.log_alpha_row
        self.log_alpha_col = tb.log_alpha_col
        self.logVcol = tb.logVcol.tolist()
        self.logVrow = [row.tolist() for row in tb.logVrow]


def _sample_categorical(wbuf, ncand, rng) -> int:
    mx = wbuf[0]
    for k in range(1, ncand):
        if wbuf[k] > mx:
            mx = wbuf[k]
    tot = 0.0
    for k in range(ncand):
        p = math.exp(wbuf[k] - mx)
        wbuf[k] = p
        tot += p
    u = rng.uniform() * tot
    acc = 0.0
    for k in range(ncand - 1):
        acc += wbuf[k]
        if u < acc:
            return k
    return ncand - 1


def make_state(tb: _Tables, init_mode: int, rng: SplitMix64) -> KernelState:
    n, D = tb.n, tb.D
    ks = KernelState(n, D, tb.kb[D])
    if init_mode == 0:  # all singletons
        labels = list(range(D))
    elif init_mode == 1:  # one cluster
        labels = [0] * D
    elif init_mode == 2:  # random labels, compacted
        raw = [int(rng.uniform() * D) for _ in range(D)]
        seen = {}
        labels = []
        for lab in raw:
            if lab not in seen:
                seen[lab] = len(seen)
            labels.append(seen[lab])
    else:
        raise ValueError(f"unknown init mode {init_mode}")
    t = max(labels) + 1
    ks.t = t
    for j in range(D):
        ks.col_assign[j] = labels[j]
    for c in range(t):
        cols = [j for j in range(D) if labels[j] == c]
        ks.csize[c] = len(cols)
        ks.nblocks[c] = 1
        ks.bsize[c][0] = n
        total = 0
        rs = ks.rowsum[c]
        for i in range(n):
            rs[i] = 0
        for j in cols:
            xj = tb.XT[j]
            total += tb.colsum[j]
            for i in range(n):
                rs[i] += xj[i]
        ks.Sblk[c][0] = total
        ra = ks.row_assign[c]
        for i in range(n):
            ra[i] = 0
    return ks


def _delete_cluster(ks: KernelState, c: int):
    last = ks.t - 1
    if c != last:
        ks.csize[c] = ks.csize[last]
        ks.nblocks[c] = ks.nblocks[last]
        ks.row_assign[c], ks.row_assign[last] = ks.row_assign[last], ks.row_assign[c]
        ks.rowsum[c], ks.rowsum[last] = ks.rowsum[last], ks.rowsum[c]
        ks.bsize[c], ks.bsize[last] = ks.bsize[last], ks.bsize[c]
        ks.Sblk[c], ks.Sblk[last] = ks.Sblk[last], ks.Sblk[c]
        ca = ks.col_assign
        for j in range(ks.D):
            if ca[j] == last:
                ca[j] = c
    ks.t = last


def column_move(ks: KernelState, j: int, tb: _Tables, rng: SplitMix64):
    c0 = ks.col_assign[j]
    xj = tb.XT[j]
    n = ks.n
    if ks.csize[c0] == 1:
        if ks.t == 1:
            return  # only candidate is a fresh singleton: stay
        _delete_cluster(ks, c0)
        ks.col_assign[j] = -1
    else:
        # removing j must leave the cluster's block count feasible
        if ks.nblocks[c0] > tb.kb[ks.csize[c0] - 1]:
            return
        ks.csize[c0] -= 1
        ra = ks.row_assign[c0]
        rs = ks.rowsum[c0]
        Sb = ks.Sblk[c0]
        for i in range(n):
            if xj[i]:
                rs[i] -= 1
                Sb[ra[i]] -= 1
        ks.col_assign[j] = -1

    t = ks.t
    la, lb, lab = tb.la, tb.lb, tb.lab
    wbuf = [0.0] * (t + 1)
    sjk = [0] * (ks.kmax + 1)
    for c in range(t):
        cs = ks.csize[c]
        nb = ks.nblocks[c]
        ra = ks.row_assign[c]
        for k in range(nb):
            sjk[k] = 0
        for i in range(n):
            if xj[i]:
                sjk[ra[i]] += 1
        # size-dependent truncation: adding j changes the cluster's row-level
        # prior mass by V^{kb(cs+1)}(nb) / V^{kb(cs)}(nb)
        w = tb.lsz_col[cs] + tb.logVrow[cs + 1][nb] - tb.logVrow[cs][nb]
        bs = ks.bsize[c]
        Sb = ks.Sblk[c]
        for k in range(nb):
            m = bs[k]
            S = Sb[k]
            F = m * cs - S
            s = sjk[k]
            w += la[S + s] + lb[F + m - s] + lab[S + F] - la[S] - lb[F] - lab[S + F + m]
        wbuf[c] = w
    wbuf[t] = tb.log_alpha_col + tb.logVcol[t + 1] - tb.logVcol[t] + tb.base[j]

    idx = _sample_categorical(wbuf, t + 1, rng)
    if idx == t:
        ks.csize[t] = 1
        ks.nblocks[t] = 1
        ks.bsize[t][0] = n
        ks.Sblk[t][0] = tb.colsum[j]
        ra = ks.row_assign[t]
        rs = ks.rowsum[t]
        for i in range(n):
            ra[i] = 0
            rs[i] = xj[i]
        ks.col_assign[j] = t
        ks.t = t + 1
    else:
        ks.csize[idx] += 1
        ra = ks.row_assign[idx]
        rs = ks.rowsum[idx]
        Sb = ks.Sblk[idx]
        for i in range(n):
            if xj[i]:
                rs[i] += 1
                Sb[ra[i]] += 1
        ks.col_assign[j] = idx


def column_sweep(ks: KernelState, tb: _Tables, rng: SplitMix64):
    for j in range(ks.D):
        column_move(ks, j, tb, rng)


def row_move(ks: KernelState, c: int, i: int, tb: _Tables, rng: SplitMix64):
    cs = ks.csize[c]
    km = tb.kb[cs]
    ra = ks.row_assign[c]
    bs = ks.bsize[c]
    Sb = ks.Sblk[c]
    k0 = ra[i]
    if bs[k0] == 1 and ks.nblocks[c] == 1:
        return  # removal would leave no block: stay
    s = ks.rowsum[c][i]
    f = cs - s
    bs[k0] -= 1
    Sb[k0] -= s
    if bs[k0] == 0:
        last = ks.nblocks[c] - 1
        if k0 != last:
            bs[k0] = bs[last]
            Sb[k0] = Sb[last]
            for ii in range(ks.n):
                if ra[ii] == last:
                    ra[ii] = k0
        ks.nblocks[c] = last

    nb = ks.nblocks[c]
    la, lb, lab = tb.la, tb.lb, tb.lab
    lsz = tb.lsz_row
    wbuf = [0.0] * (nb + 1)
    for k in range(nb):
        m = bs[k]
        S = Sb[k]
        F = m * cs - S
        wbuf[k] = lsz[m] + la[S + s] + lb[F + f] + lab[S + F] - la[S] - lb[F] - lab[S + F + cs]
    ncand = nb
    if nb < km:
        lv = tb.logVrow[cs]
        wbuf[nb] = (
            tb.log_alpha_row + lv[nb + 1] - lv[nb]
            + la[s] + lb[f] + lab[0] - la[0] - lb[0] - lab[cs]
        )
        ncand += 1

    idx = _sample_categorical(wbuf, ncand, rng)
    if idx == nb:
        ra[i] = nb
        bs[nb] = 1
        Sb[nb] = s
        ks.nblocks[c] = nb + 1
    else:
        ra[i] = idx
        bs[idx] += 1
        Sb[idx] += s


def row_sweep_cluster(ks: KernelState, c: int, tb: _Tables, rng: SplitMix64):
    if tb.kb[ks.csize[c]] == 1:
        return  # bound forces a single block: nothing can move
    for i in range(ks.n):
        row_move(ks, c, i, tb, rng)


def _canonical_cluster_order(ks: KernelState) -> list[int]:
    """Cluster slots ordered by first appearance along the column axis."""
    order = []
    seen = [False] * ks.t
    for j in range(ks.D):
        c = ks.col_assign[j]
        if not seen[c]:
            seen[c] = True
            order.append(c)
    return order


def log_joint_state(ks: KernelState, tb: _Tables) -> float:
    la, lb, lab = tb.la, tb.lb, tb.lab
    lj = tb.logVcol[ks.t]
    for c in range(ks.t):
        cs = ks.csize[c]
        nb = ks.nblocks[c]
        lj += tb.lgr_col[cs] + tb.logVrow[cs][nb]
        bs = ks.bsize[c]
        Sb = ks.Sblk[c]
        for k in range(nb):
            m = bs[k]
            S = Sb[k]
            F = m * cs - S
            lj += tb.lgr_row[m]
            lj += la[S] + lb[F] + lab[0] - la[0] - lb[0] - lab[S + F]
    return lj


def record_state(ks: KernelState, tb: _Tables, col_out, row_out, rec):
    order = _canonical_cluster_order(ks)
    new_id = [0] * ks.t
    for rank, c in enumerate(order):
        new_id[c] = rank
    for j in range(ks.D):
        col_out[rec, j] = new_id[ks.col_assign[j]]
    row_out[rec, ks.t:, :] = -1
    bmap = [0] * (ks.kmax + 1)
    for c in range(ks.t):
        ra = ks.row_assign[c]
        nb = ks.nblocks[c]
        for k in range(nb):
            bmap[k] = -1
        nxt = 0
        out = row_out[rec, new_id[c]]
        for i in range(ks.n):
            k = ra[i]
            if bmap[k] < 0:
                bmap[k] = nxt
                nxt += 1
            out[i] = bmap[k]


def run_chain_kernel(tables, n_iter, n_rep, burn_in, thinning, seed, init_mode,
                     col_out, row_out, logj_out) -> int:
    """Run one chain, filling the preallocated trace buffers.

    Returns the number of recorded states.
    """
    tb = _Tables(tables)
    rng = SplitMix64(seed)
    ks = make_state(tb, init_mode, rng)
    rec = 0
    for it in range(n_iter):
        column_sweep(ks, tb, rng)
        order = _canonical_cluster_order(ks)
        for _ in range(n_rep):
            for c in order:
                row_sweep_cluster(ks, c, tb, rng)
        if it >= burn_in and (it - burn_in) % thinning == 0:
            record_state(ks, tb, col_out, row_out, rec)
            logj_out[rec] = log_joint_state(ks, tb)
            rec += 1
    return rec
