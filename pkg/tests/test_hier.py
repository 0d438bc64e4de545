import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from molhier import parse_smiles
from molhier.brics import Motif, fragment
from molhier.hier import (
    GRAPH,
    MOTIF,
    SUPER,
    EigenSolverError,
    HierarchyError,
    atom_graph,
    build_hier,
    laplacian_eigenpairs,
    laplacian_pe,
)

from molgen import random_smiles


def _counts(smiles):
    h = build_hier(parse_smiles(smiles))
    return h.n_nodes, len(h.edges)


def test_size_examples():
    assert _counts("CCO") == (5, 8)
    assert _counts("c1ccccc1") == (8, 18)
    # Three BRICS motifs here (the ester oxygen stands alone): 7 + 3 + 1 nodes.
    assert _counts("CCOC(=O)CC") == (11, 20)


def test_super_edges_touch_one_atom_and_one_supernode():
    h = build_hier(parse_smiles("CC(=O)Nc1ccc(O)cc1"))
    n = h.n_atoms
    for e in h.edges:
        if e.kind == SUPER:
            assert e.u < n <= e.v
        else:
            assert e.u < n and e.v < n
    assert [h.nodes[i].kind for i in range(n, h.n_nodes)][-1] == GRAPH
    assert all(h.nodes[i].kind == MOTIF for i in range(n, h.n_nodes - 1))


def test_bad_motif_index():
    mol = parse_smiles("CC")
    with pytest.raises(HierarchyError):
        build_hier(mol, [Motif(1, (0, 5)), Motif(2, (0, 1), True)])


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_size_identities(seed):
    mol = parse_smiles(random_smiles(random.Random(seed)))
    motifs = fragment(mol)
    h = build_hier(mol, motifs)
    k = len(motifs) - 1
    assert h.n_nodes == mol.n_atoms + k + 1
    assert len(h.edges) == mol.n_bonds + sum(len(m) for m in motifs)


def _star(leaves=4):
    a = np.zeros((leaves + 1, leaves + 1))
    a[0, 1:] = a[1:, 0] = 1
    return a


def test_star_spectrum():
    _, w, v = laplacian_eigenpairs(_star())
    assert np.allclose(w, [1, 1, 1, 2], atol=1e-10, rtol=0)
    assert np.allclose(np.sort(np.linalg.eigvalsh(np.eye(5) - _star() / 2)), [0, 1, 1, 1, 2], atol=1e-12)


def test_two_atom_path_with_supernodes():
    h = build_hier(parse_smiles("CC"))
    lap, w, v = laplacian_eigenpairs(h.adjacency())
    ref = np.linalg.eigvalsh(lap)
    assert np.allclose(w, ref[ref > 1e-9], atol=1e-12)
    assert np.all(np.linalg.norm(lap @ v - v * w, axis=0) < 1e-8)


def _check_pairs(adj, dim=8):
    lap, w, v = laplacian_eigenpairs(adj, dim)
    assert np.all(np.diff(w) >= -1e-12)
    assert np.all(np.linalg.norm(lap @ v - v * w, axis=0) <= 1e-8)
    assert np.max(np.abs(v.T @ v - np.eye(v.shape[1]))) <= 1e-8
    ref = np.linalg.eigvalsh(lap)
    ref = ref[ref > 1e-9][: len(w)]
    assert np.allclose(w, ref, atol=1e-9)
    return lap, w, v


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_eigenpairs_against_dense_solver(seed):
    h = build_hier(parse_smiles(random_smiles(random.Random(seed))))
    lap, w, v = _check_pairs(h.adjacency())
    # Connected graph: exactly one zero eigenvalue is dropped.
    assert np.sum(np.linalg.eigvalsh(lap) < 1e-9) == 1
    assert len(w) == min(8, h.n_nodes - 1)


def test_sign_convention():
    h = build_hier(parse_smiles("CC(=O)Nc1ccc(O)cc1"))
    pe = laplacian_pe(h)
    for j in range(pe.shape[1]):
        col = pe[:, j]
        top = np.abs(col).max()
        lead = np.flatnonzero(np.abs(col) >= top - 1e-10)[0]
        assert col[lead] > 0


def test_padding_and_bitwise_repeat():
    h = build_hier(parse_smiles("CO"))
    pe = laplacian_pe(h)
    assert pe.shape == (4, 8)
    assert np.all(pe[:, 3:] == 0)
    again = laplacian_pe(build_hier(parse_smiles("CO")))
    assert pe.tobytes() == again.tobytes()


def test_plain_graph_of_disconnected_molecule():
    g = atom_graph(parse_smiles("CC.O"))
    pe = laplacian_pe(g)
    assert pe.shape == (3, 8)


def _simple_spectrum(lap, w):
    # Only the returned pairs and the first one left out need to be separated.
    full = np.sort(np.linalg.eigvalsh(lap))
    full = full[full > 1e-9][: len(w) + 1]
    return np.min(np.diff(full)) > 1e-6


def test_equivariance_on_simple_spectra():
    rng = np.random.default_rng(0)
    tested = 0
    for smi in ["CC(=O)Nc1ccc(O)cc1", "CCN(CC)CCOC(=O)C", "OCC(N)C(=O)O", "NCC(=O)NC(CS)C(=O)O",
                "OCC1OC(O)C(O)C1N", "CC(N)C(=O)NCC(=O)O"]:
        adj = build_hier(parse_smiles(smi)).adjacency()
        lap, w, v = laplacian_eigenpairs(adj)
        if not _simple_spectrum(lap, w):
            continue
        perm = rng.permutation(len(adj))
        _, w2, v2 = laplacian_eigenpairs(adj[np.ix_(perm, perm)])
        assert np.allclose(w, w2, atol=1e-10)
        # Rows follow the permutation; a sign flip is allowed only when the leading magnitude is tied.
        for j in range(v.shape[1]):
            a, b = v[perm, j], v2[:, j]
            mag = np.abs(a)
            tied = np.sum(mag >= mag.max() - 1e-9) > 1
            assert np.allclose(a, b, atol=1e-8) or (tied and np.allclose(a, -b, atol=1e-8))
        tested += 1
    assert tested >= 1


def test_nonconvergence_reports_residual(monkeypatch):
    from molhier import kernels

    real = kernels.jacobi_eigh
    monkeypatch.setattr(kernels, "jacobi_eigh", lambda m, rel_tol=1e-15, max_sweeps=100: real(m, rel_tol, 1)[:3] + (False,))
    with pytest.raises(EigenSolverError) as info:
        laplacian_pe(build_hier(parse_smiles("CCO")))
    assert info.value.residual >= 0
