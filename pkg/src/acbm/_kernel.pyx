# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Gibbs kernel.

Move-for-move identical to the pure-Python twin in ``_kernel_py.py``: same
sweep order, same arithmetic order, same splitmix64 stream, so either backend
yields bit-identical traces. Keep both files in sync.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log

ctypedef unsigned long long u64


cdef inline u64 _sm64_next(u64 *state) nogil:
    cdef u64 z
    state[0] = state[0] + <u64>0x9E3779B97F4A7C15
    z = state[0]
    z = (z ^ (z >> 30)) * <u64>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <u64>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline double _sm64_uniform(u64 *state) nogil:
    return <double>(_sm64_next(state) >> 11) * 1.1102230246251565e-16


cdef inline int _sample_categorical(double *wbuf, int ncand, u64 *state) nogil:
    cdef double mx = wbuf[0]
    cdef double tot = 0.0, p, u, acc
    cdef int k
    for k in range(1, ncand):
        if wbuf[k] > mx:
            mx = wbuf[k]
    for k in range(ncand):
        p = exp(wbuf[k] - mx)
        wbuf[k] = p
        tot += p
    u = _sm64_uniform(state) * tot
    acc = 0.0
    for k in range(ncand - 1):
        acc += wbuf[k]
        if u < acc:
            return k
    return ncand - 1


def run_chain_kernel(tables, int n_iter, int n_rep, int burn_in, int thinning,
                     unsigned long long seed, int init_mode,
                     cnp.int32_t[:, ::1] col_out,
                     cnp.int8_t[:, :, ::1] row_out,
                     cnp.float64_t[::1] logj_out):
    """Run one chain, filling the preallocated trace buffers.

    Returns the number of recorded states.
    """
    cdef int n = tables.n
    cdef int D = tables.D
    cdef cnp.uint8_t[:, ::1] XT = tables.XT
    cdef cnp.int64_t[::1] colsum = np.ascontiguousarray(tables.colsum, dtype=np.int64)
    cdef double[::1] base = np.ascontiguousarray(tables.base, dtype=np.float64)
    cdef double[::1] la = np.ascontiguousarray(tables.lg_a, dtype=np.float64)
    cdef double[::1] lb = np.ascontiguousarray(tables.lg_b, dtype=np.float64)
    cdef double[::1] lab = np.ascontiguousarray(tables.lg_ab, dtype=np.float64)
    cdef double[::1] lgr_row = np.ascontiguousarray(tables.lgr_row, dtype=np.float64)
    cdef double[::1] lgr_col = np.ascontiguousarray(tables.lgr_col, dtype=np.float64)
    cdef double[::1] lsz_row = np.ascontiguousarray(tables.lsz_row, dtype=np.float64)
    cdef double[::1] lsz_col = np.ascontiguousarray(tables.lsz_col, dtype=np.float64)
    cdef double log_alpha_row = tables.log_alpha_row
    cdef double log_alpha_col = tables.log_alpha_col
    cdef double[::1] logVcol = np.ascontiguousarray(tables.logVcol, dtype=np.float64)
    cdef double[:, ::1] logVrow = np.ascontiguousarray(tables.logVrow, dtype=np.float64)

    cdef int kmax = (D + 1) // 2
    cdef int KW = kmax + 1

    # state (slot-indexed, slots 0..t-1 active)
    col_assign_arr = np.full(D, -1, dtype=np.int32)
    csize_arr = np.zeros(D, dtype=np.int32)
    nblocks_arr = np.zeros(D, dtype=np.int32)
    row_assign_arr = np.zeros((D, n), dtype=np.int32)
    bsize_arr = np.zeros((D, KW), dtype=np.int64)
    Sblk_arr = np.zeros((D, KW), dtype=np.int64)
    rowsum_arr = np.zeros((D, n), dtype=np.int32)
    kb_arr = np.array([(s + 1) // 2 for s in range(D + 1)], dtype=np.int32)
    wbuf_arr = np.zeros(D + 2, dtype=np.float64)
    sjk_arr = np.zeros(KW, dtype=np.int64)
    order_arr = np.zeros(D, dtype=np.int32)
    seen_arr = np.zeros(D, dtype=np.int32)
    newid_arr = np.zeros(D, dtype=np.int32)
    bmap_arr = np.zeros(KW, dtype=np.int32)
    tmp_row = np.zeros(n, dtype=np.int32)
    tmp_blk = np.zeros(KW, dtype=np.int64)

    cdef cnp.int32_t[::1] col_assign = col_assign_arr
    cdef cnp.int32_t[::1] csize = csize_arr
    cdef cnp.int32_t[::1] nblocks = nblocks_arr
    cdef cnp.int32_t[:, ::1] row_assign = row_assign_arr
    cdef cnp.int64_t[:, ::1] bsize = bsize_arr
    cdef cnp.int64_t[:, ::1] Sblk = Sblk_arr
    cdef cnp.int32_t[:, ::1] rowsum = rowsum_arr
    cdef cnp.int32_t[::1] kb = kb_arr
    cdef double[::1] wbuf = wbuf_arr
    cdef cnp.int64_t[::1] sjk = sjk_arr
    cdef cnp.int32_t[::1] order = order_arr
    cdef cnp.int32_t[::1] seen = seen_arr
    cdef cnp.int32_t[::1] newid = newid_arr
    cdef cnp.int32_t[::1] bmap = bmap_arr
    cdef cnp.int32_t[::1] trow = tmp_row
    cdef cnp.int64_t[::1] tblk = tmp_blk

    cdef u64 state = seed
    cdef int t = 0
    cdef int i, j, c, k, it, rep, rec, cs, nb, km, k0, last, idx, ncand
    cdef int c0, rank, nxt, oi, oi2, n_order
    cdef long long m, S, F, s, f, total
    cdef double w, lj

    # --- init -------------------------------------------------------------
    cdef int lab_j
    if init_mode == 0:
        t = D
        for j in range(D):
            col_assign[j] = j
    elif init_mode == 1:
        t = 1
        for j in range(D):
            col_assign[j] = 0
    elif init_mode == 2:
        nxt = 0
        for j in range(D):
            newid[j] = -1
        for j in range(D):
            lab_j = <int>(_sm64_uniform(&state) * D)
            if newid[lab_j] < 0:
                newid[lab_j] = nxt
                nxt += 1
            col_assign[j] = newid[lab_j]
        t = nxt
    else:
        raise ValueError(f"unknown init mode {init_mode}")

    for c in range(t):
        csize[c] = 0
        nblocks[c] = 1
        for i in range(n):
            rowsum[c, i] = 0
            row_assign[c, i] = 0
    for j in range(D):
        c = col_assign[j]
        csize[c] += 1
        for i in range(n):
            rowsum[c, i] += XT[j, i]
    for c in range(t):
        total = 0
        for i in range(n):
            total += rowsum[c, i]
        bsize[c, 0] = n
        Sblk[c, 0] = total

    # --- main loop ---------------------------------------------------------
    rec = 0
    for it in range(n_iter):
        # column sweep
        for j in range(D):
            c0 = col_assign[j]
            if csize[c0] == 1:
                if t == 1:
                    continue
                # delete singleton cluster c0 (swap slot t-1 into c0)
                last = t - 1
                if c0 != last:
                    csize[c0] = csize[last]
                    nblocks[c0] = nblocks[last]
                    for i in range(n):
                        row_assign[c0, i] = row_assign[last, i]
                        rowsum[c0, i] = rowsum[last, i]
                    for k in range(KW):
                        bsize[c0, k] = bsize[last, k]
                        Sblk[c0, k] = Sblk[last, k]
                    for oi in range(D):
                        if col_assign[oi] == last:
                            col_assign[oi] = c0
                t = last
                col_assign[j] = -1
            else:
                if nblocks[c0] > kb[csize[c0] - 1]:
                    continue
                csize[c0] -= 1
                for i in range(n):
                    if XT[j, i]:
                        rowsum[c0, i] -= 1
                        Sblk[c0, row_assign[c0, i]] -= 1
                col_assign[j] = -1

            for c in range(t):
                cs = csize[c]
                nb = nblocks[c]
                for k in range(nb):
                    sjk[k] = 0
                for i in range(n):
                    if XT[j, i]:
                        sjk[row_assign[c, i]] += 1
                # size-dependent truncation: adding j changes the cluster's
                # row-level prior mass by V^{kb(cs+1)}(nb) / V^{kb(cs)}(nb)
                w = lsz_col[cs] + logVrow[cs + 1, nb] - logVrow[cs, nb]
                for k in range(nb):
                    m = bsize[c, k]
                    S = Sblk[c, k]
                    F = m * cs - S
                    s = sjk[k]
                    w += la[S + s] + lb[F + m - s] + lab[S + F] - la[S] - lb[F] - lab[S + F + m]
                wbuf[c] = w
            wbuf[t] = log_alpha_col + logVcol[t + 1] - logVcol[t] + base[j]

            idx = _sample_categorical(&wbuf[0], t + 1, &state)
            if idx == t:
                csize[t] = 1
                nblocks[t] = 1
                bsize[t, 0] = n
                Sblk[t, 0] = colsum[j]
                for i in range(n):
                    row_assign[t, i] = 0
                    rowsum[t, i] = XT[j, i]
                col_assign[j] = t
                t += 1
            else:
                csize[idx] += 1
                for i in range(n):
                    if XT[j, i]:
                        rowsum[idx, i] += 1
                        Sblk[idx, row_assign[idx, i]] += 1
                col_assign[j] = idx

        # canonical cluster order for the row sweeps
        n_order = 0
        for c in range(t):
            seen[c] = 0
        for j in range(D):
            c = col_assign[j]
            if not seen[c]:
                seen[c] = 1
                order[n_order] = c
                n_order += 1

        # row sweeps
        for rep in range(n_rep):
            for oi in range(n_order):
                c = order[oi]
                cs = csize[c]
                km = kb[cs]
                if km == 1:
                    continue
                for i in range(n):
                    k0 = row_assign[c, i]
                    if bsize[c, k0] == 1 and nblocks[c] == 1:
                        continue
                    s = rowsum[c, i]
                    f = cs - s
                    bsize[c, k0] -= 1
                    Sblk[c, k0] -= s
                    if bsize[c, k0] == 0:
                        last = nblocks[c] - 1
                        if k0 != last:
                            bsize[c, k0] = bsize[c, last]
                            Sblk[c, k0] = Sblk[c, last]
                            for oi2 in range(n):
                                if row_assign[c, oi2] == last:
                                    row_assign[c, oi2] = k0
                        nblocks[c] = last

                    nb = nblocks[c]
                    for k in range(nb):
                        m = bsize[c, k]
                        S = Sblk[c, k]
                        F = m * cs - S
                        wbuf[k] = lsz_row[m] + la[S + s] + lb[F + f] + lab[S + F] - la[S] - lb[F] - lab[S + F + cs]
                    ncand = nb
                    if nb < km:
                        wbuf[nb] = (
                            log_alpha_row + logVrow[cs, nb + 1] - logVrow[cs, nb]
                            + la[s] + lb[f] + lab[0] - la[0] - lb[0] - lab[cs]
                        )
                        ncand += 1

                    idx = _sample_categorical(&wbuf[0], ncand, &state)
                    if idx == nb:
                        row_assign[c, i] = nb
                        bsize[c, nb] = 1
                        Sblk[c, nb] = s
                        nblocks[c] = nb + 1
                    else:
                        row_assign[c, i] = idx
                        bsize[c, idx] += 1
                        Sblk[c, idx] += s

        # record
        if it >= burn_in and (it - burn_in) % thinning == 0:
            n_order = 0
            for c in range(t):
                seen[c] = 0
            for j in range(D):
                c = col_assign[j]
                if not seen[c]:
                    seen[c] = 1
                    newid[c] = n_order
                    n_order += 1
            for j in range(D):
                col_out[rec, j] = newid[col_assign[j]]
            for c in range(t, D):
                for i in range(n):
                    row_out[rec, c, i] = -1
            for c in range(t):
                nb = nblocks[c]
                for k in range(nb):
                    bmap[k] = -1
                nxt = 0
                for i in range(n):
                    k = row_assign[c, i]
                    if bmap[k] < 0:
                        bmap[k] = nxt
                        nxt += 1
                    row_out[rec, newid[c], i] = bmap[k]

            # log joint
            lj = logVcol[t]
            for c in range(t):
                cs = csize[c]
                nb = nblocks[c]
                lj += lgr_col[cs] + logVrow[cs, nb]
                for k in range(nb):
                    m = bsize[c, k]
                    S = Sblk[c, k]
                    F = m * cs - S
                    lj += lgr_row[m]
                    lj += la[S] + lb[F] + lab[0] - la[0] - lb[0] - lab[S + F]
            logj_out[rec] = lj
            rec += 1

    return rec
