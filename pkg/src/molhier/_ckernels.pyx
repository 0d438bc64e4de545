# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; see ``_pykernels`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()


def match_embeddings(object order_o, object con_ptr_o, object con_atom_o, object con_bond_o,
                     object cand_o, object adj_ptr_o, object adj_idx_o, object molbond_o,
                     object bond_ok_o, long anchor, long limit):
    cdef long[::1] order = np.ascontiguousarray(order_o, dtype=np.int64)
    cdef long[::1] con_ptr = np.ascontiguousarray(con_ptr_o, dtype=np.int64)
    cdef long[::1] con_atom = np.ascontiguousarray(con_atom_o, dtype=np.int64)
    cdef long[::1] con_bond = np.ascontiguousarray(con_bond_o, dtype=np.int64)
    cdef unsigned char[:, ::1] cand = np.ascontiguousarray(cand_o, dtype=np.uint8)
    cdef long[::1] adj_ptr = np.ascontiguousarray(adj_ptr_o, dtype=np.int64)
    cdef long[::1] adj_idx = np.ascontiguousarray(adj_idx_o, dtype=np.int64)
    cdef long[:, ::1] molbond = np.ascontiguousarray(molbond_o, dtype=np.int64)
    cdef unsigned char[:, ::1] bond_ok = np.ascontiguousarray(bond_ok_o, dtype=np.uint8)

    cdef Py_ssize_t n_pat = order.shape[0]
    cdef Py_ssize_t n_mol = cand.shape[1]
    out = []
    if n_pat == 0 or n_mol == 0:
        return out

    cdef long[::1] mapping = np.full(n_pat, -1, dtype=np.int64)
    cdef unsigned char[::1] used = np.zeros(n_mol, dtype=np.uint8)
    # cursor[k]: next candidate slot to try at depth k; lo/hi: candidate range.
    cdef long[::1] cursor = np.zeros(n_pat, dtype=np.int64)
    cdef long[::1] hi = np.zeros(n_pat, dtype=np.int64)
    cdef unsigned char[::1] via_adj = np.zeros(n_pat, dtype=np.uint8)
    cdef Py_ssize_t k = 0, j
    cdef long p, c, slot, mb, anchor_atom, lo
    cdef bint ok
    cdef long found = 0

    # initialise depth 0
    if con_ptr[0] < con_ptr[1]:
        return out
    if anchor >= 0:
        cursor[0] = anchor
        hi[0] = anchor + 1
    else:
        cursor[0] = 0
        hi[0] = n_mol
    via_adj[0] = 0

    while k >= 0:
        p = order[k]
        if mapping[p] >= 0:
            used[mapping[p]] = 0
            mapping[p] = -1
        ok = False
        while cursor[k] < hi[k]:
            slot = cursor[k]
            cursor[k] += 1
            if via_adj[k]:
                c = adj_idx[slot]
            else:
                c = slot
            if not cand[p, c] or used[c]:
                continue
            ok = True
            for j in range(con_ptr[k], con_ptr[k + 1]):
                mb = molbond[c, mapping[con_atom[j]]]
                if mb < 0 or not bond_ok[con_bond[j], mb]:
                    ok = False
                    break
            if ok:
                mapping[p] = c
                used[c] = 1
                break
        if not ok:
            k -= 1
            continue
        if k == n_pat - 1:
            out.append(tuple([mapping[i] for i in range(n_pat)]))
            found += 1
            if limit > 0 and found >= limit:
                return out
            continue
        k += 1
        lo = con_ptr[k]
        if lo < con_ptr[k + 1]:
            anchor_atom = mapping[con_atom[lo]]
            cursor[k] = adj_ptr[anchor_atom]
            hi[k] = adj_ptr[anchor_atom + 1]
            via_adj[k] = 1
        else:
            cursor[k] = 0
            hi[k] = n_mol
            via_adj[k] = 0
    return out


cdef double _off_diagonal(double[:, ::1] a, Py_ssize_t n):
    cdef double total = 0.0, x
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(i + 1, n):
            x = a[i, j]
            total += x * x
    return total


def jacobi_eigh(object matrix, double rel_tol=1e-15, long max_sweeps=100):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a_arr = np.array(matrix, dtype=np.float64, copy=True, order="C")
    cdef double[:, ::1] a = a_arr
    cdef Py_ssize_t n = a.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] v_arr = np.eye(n)
    cdef double[:, ::1] v = v_arr
    cdef double scale = 0.0, threshold, x
    cdef double apq, app, aqq, theta, t, c, s, xp, xq
    cdef Py_ssize_t i, j, p, q, kk
    cdef long sweeps = 0
    cdef bint converged
    for i in range(n):
        for j in range(n):
            x = a[i, j]
            scale += x * x
    threshold = rel_tol * rel_tol * (scale if scale > 1e-300 else 1e-300)
    converged = _off_diagonal(a, n) <= threshold
    while not converged and sweeps < max_sweeps:
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                theta = (aqq - app) / (2.0 * apq)
                t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for kk in range(n):
                    xp = a[kk, p]
                    xq = a[kk, q]
                    a[kk, p] = c * xp - s * xq
                    a[kk, q] = s * xp + c * xq
                for kk in range(n):
                    a[p, kk] = a[kk, p]
                    a[q, kk] = a[kk, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for kk in range(n):
                    xp = v[kk, p]
                    xq = v[kk, q]
                    v[kk, p] = c * xp - s * xq
                    v[kk, q] = s * xp + c * xq
        converged = _off_diagonal(a, n) <= threshold
    return np.diagonal(a_arr).copy(), v_arr, sweeps, bool(converged)


def gin_aggregate(object h_o, double eps, object indptr_o, object indices_o, object etype_o,
                  object edge_table_o):
    cdef double[:, ::1] h = np.ascontiguousarray(h_o, dtype=np.float64)
    cdef long[::1] indptr = np.ascontiguousarray(indptr_o, dtype=np.int64)
    cdef long[::1] indices = np.ascontiguousarray(indices_o, dtype=np.int64)
    cdef long[::1] etype = np.ascontiguousarray(etype_o, dtype=np.int64)
    cdef double[:, ::1] table = np.ascontiguousarray(edge_table_o, dtype=np.float64)
    cdef Py_ssize_t n = h.shape[0], d = h.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out_arr = np.empty((n, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double scale = 1.0 + eps
    cdef Py_ssize_t u, j, f
    cdef long v, t
    for u in range(n):
        for f in range(d):
            out[u, f] = scale * h[u, f]
        for j in range(indptr[u], indptr[u + 1]):
            v = indices[j]
            t = etype[j]
            for f in range(d):
                out[u, f] = out[u, f] + (h[v, f] + table[t, f])
    return out_arr
