"""Pure-Python/numpy reference kernels.

Each function mirrors its counterpart in ``_ckernels.pyx`` operation for
operation, so both backends give bitwise-identical floating point results.
"""

from __future__ import annotations

import math

import numpy as np


def match_embeddings(order, con_ptr, con_atom, con_bond, cand, adj_ptr, adj_idx,
                     molbond, bond_ok, anchor, limit):
    """Enumerate injective pattern->molecule atom maps by backtracking.

    ``order`` lists pattern atoms in search order; the constraints of the atom
    at position ``k`` are ``con_atom/con_bond[con_ptr[k]:con_ptr[k+1]]``, each
    naming an earlier pattern atom and the pattern bond joining them.
    Returns mappings indexed by pattern atom, in depth-first discovery order.
    """
    n_pat = len(order)
    n_mol = cand.shape[1]
    mapping = [-1] * n_pat
    used = [False] * n_mol
    out: list[tuple[int, ...]] = []
    if n_pat == 0:
        return out

    def candidates(k):
        lo, hi = con_ptr[k], con_ptr[k + 1]
        if lo < hi:
            anchor_atom = mapping[con_atom[lo]]
            return adj_idx[adj_ptr[anchor_atom]:adj_ptr[anchor_atom + 1]]
        if k == 0 and anchor >= 0:
            return (anchor,)
        return range(n_mol)

    def feasible(k, c):
        p = order[k]
        if not cand[p, c] or used[c]:
            return False
        for j in range(con_ptr[k], con_ptr[k + 1]):
            mb = molbond[c, mapping[con_atom[j]]]
            if mb < 0 or not bond_ok[con_bond[j], mb]:
                return False
        return True

    def search(k):
        if k == n_pat:
            out.append(tuple(mapping))
            return limit > 0 and len(out) >= limit
        p = order[k]
        for c in candidates(k):
            c = int(c)
            if k == 0 and anchor >= 0 and c != anchor:
                continue
            if not feasible(k, c):
                continue
            mapping[p] = c
            used[c] = True
            stop = search(k + 1)
            used[c] = False
            mapping[p] = -1
            if stop:
                return True
        return False

    search(0)
    return out


def _off_diagonal(a):
    n = a.shape[0]
    total = 0.0
    for i in range(n):
        row = a[i]
        for j in range(i + 1, n):
            x = float(row[j])
            total += x * x
    return total


def jacobi_eigh(matrix, rel_tol=1e-15, max_sweeps=100):
    """Cyclic Jacobi eigen-decomposition of a real symmetric matrix.

    Returns ``(eigenvalues, eigenvectors, sweeps, converged)`` with
    eigenvectors in columns, eigenvalues unsorted.
    """
    a = np.array(matrix, dtype=np.float64, copy=True)
    n = a.shape[0]
    v = np.eye(n)
    scale = 0.0
    for i in range(n):
        for j in range(n):
            x = float(a[i, j])
            scale += x * x
    threshold = rel_tol * rel_tol * max(scale, 1e-300)
    sweeps = 0
    converged = _off_diagonal(a) <= threshold
    while not converged and sweeps < max_sweeps:
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = float(a[p, q])
                if apq == 0.0:
                    continue
                app = float(a[p, p])
                aqq = float(a[q, q])
                theta = (aqq - app) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                a[p, :] = a[:, p]
                a[q, :] = a[:, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
        converged = _off_diagonal(a) <= threshold
    return np.diagonal(a).copy(), v, sweeps, converged


def gin_aggregate(h, eps, indptr, indices, etype, edge_table):
    """``out[u] = (1+eps)*h[u] + sum_v (h[v] + edge_table[type(u,v)])``.

    Neighbors are summed in CSR order (ascending neighbor index).
    """
    out = (1.0 + eps) * h
    deg = np.diff(indptr)
    if deg.size == 0:
        return out
    nodes = np.arange(h.shape[0])
    for r in range(int(deg.max(initial=0))):
        rows = nodes[deg > r]
        j = indptr[rows] + r
        out[rows] += h[indices[j]] + edge_table[etype[j]]
    return out
