"""Supernode-augmented molecular graphs and Laplacian positional encodings.

Node layout of a :class:`HierGraph`: atom nodes ``0..n-1`` in atom order,
then one supernode per BRICS motif ``n..n+k-1``, then the graph supernode
``n+k``. Every atom is linked to the supernode of its motif and to the graph
supernode; supernodes are never linked to each other.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .brics import Motif, fragment
from .chem import AROMATIC, DOUBLE, SINGLE, TRIPLE, Molecule

ATOM, MOTIF, GRAPH = "atom", "motif_super", "graph_super"
CHEMICAL, SUPER = "chemical", "super"

EDGE_TYPES = (SINGLE, DOUBLE, TRIPLE, AROMATIC, SUPER)
EDGE_TYPE_INDEX = {name: i for i, name in enumerate(EDGE_TYPES)}

PE_DIM = 8
ZERO_EIGENVALUE = 1e-9
DEGENERACY_TOL = 1e-8
RESIDUAL_TOL = 1e-8


class HierarchyError(ValueError):
    pass


class EigenSolverError(ArithmeticError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True, slots=True)
class Node:
    kind: str
    ref: int  # atom index for atoms, motif id for supernodes


@dataclass(frozen=True, slots=True)
class Edge:
    u: int
    v: int
    kind: str
    order: str  # bond order for chemical edges, "super" otherwise


@dataclass
class HierGraph:
    base: Molecule
    motifs: tuple[Motif, ...]
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    pe: np.ndarray | None = None
    _csr: tuple[np.ndarray, np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_atoms(self) -> int:
        return self.base.n_atoms

    def indices(self, kind: str) -> list[int]:
        return [i for i, node in enumerate(self.nodes) if node.kind == kind]

    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(indptr, neighbor, edge type)`` with neighbors ascending per node."""
        if self._csr is None:
            rows: list[list[tuple[int, int]]] = [[] for _ in self.nodes]
            for e in self.edges:
                t = EDGE_TYPE_INDEX[e.order]
                rows[e.u].append((e.v, t))
                rows[e.v].append((e.u, t))
            indptr = [0]
            nbr: list[int] = []
            typ: list[int] = []
            for row in rows:
                row.sort()
                nbr.extend(v for v, _ in row)
                typ.extend(t for _, t in row)
                indptr.append(len(nbr))
            self._csr = (
                np.asarray(indptr, dtype=np.int64),
                np.asarray(nbr, dtype=np.int64),
                np.asarray(typ, dtype=np.int64),
            )
        return self._csr

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n_nodes, self.n_nodes))
        for e in self.edges:
            a[e.u, e.v] = a[e.v, e.u] = 1.0
        return a


def _chemical_edges(mol: Molecule) -> list[Edge]:
    return [Edge(b.a, b.b, CHEMICAL, b.order) for b in mol.bonds]


def build_hier(mol: Molecule, motifs: list[Motif] | None = None) -> HierGraph:
    """Add one supernode per motif (graph motif included) and link it to its atoms."""
    if motifs is None:
        motifs = fragment(mol)
    n = mol.n_atoms
    nodes = [Node(ATOM, i) for i in range(n)]
    edges = _chemical_edges(mol)
    for offset, motif in enumerate(motifs):
        sid = n + offset
        nodes.append(Node(GRAPH if motif.is_graph_motif else MOTIF, motif.id))
        for u in motif.atoms:
            if not 0 <= u < n:
                raise HierarchyError(f"motif {motif.id} references atom {u} outside 0..{n - 1}")
            edges.append(Edge(u, sid, SUPER, SUPER))
    return HierGraph(mol, tuple(motifs), tuple(nodes), tuple(edges))


def atom_graph(mol: Molecule) -> HierGraph:
    """The plain molecular graph in :class:`HierGraph` form (no supernodes)."""
    return HierGraph(mol, (), tuple(Node(ATOM, i) for i in range(mol.n_atoms)), tuple(_chemical_edges(mol)))


def normalized_laplacian(adjacency: np.ndarray) -> np.ndarray:
    """``I - D^-1/2 A D^-1/2``; isolated nodes keep a unit diagonal."""
    deg = adjacency.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    return np.eye(adjacency.shape[0]) - inv_sqrt[:, None] * adjacency * inv_sqrt[None, :]


def _sign_fix(vec: np.ndarray) -> np.ndarray:
    mag = np.abs(vec)
    top = mag.max()
    # Near-equal magnitudes count as ties; the lowest index decides.
    lead = int(np.flatnonzero(mag >= top - 1e-10 * max(top, 1.0))[0])
    return -vec if vec[lead] < 0 else vec


def laplacian_eigenpairs(adjacency: np.ndarray, dim: int = PE_DIM) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Smallest ``dim`` strictly positive eigenpairs of the normalized Laplacian.

    Returns ``(laplacian, eigenvalues, vectors)``; ``vectors[:, j]`` belongs to
    ``eigenvalues[j]``. Fewer than ``dim`` pairs come back for small graphs.

    Raises:
        EigenSolverError: when the solver does not converge or a returned
            pair misses the residual bound.
    """
    lap = normalized_laplacian(adjacency)
    n = lap.shape[0]
    if n == 0:
        return lap, np.zeros(0), np.zeros((0, 0))
    w, v, sweeps, converged = kernels.jacobi_eigh(lap)
    if not converged:
        resid = float(np.linalg.norm(lap @ v - v * w[None, :], axis=0).max())
        raise EigenSolverError(f"Jacobi did not converge after {sweeps} sweeps", resid)
    order = np.argsort(w, kind="stable")
    w = w[order]
    v = v[:, order]
    keep = w > ZERO_EIGENVALUE
    w = w[keep]
    v = v[:, keep]
    vecs = [_sign_fix(v[:, j]) for j in range(v.shape[1])]

    # Within a block of (numerically) equal eigenvalues order vectors lexicographically.
    ordered: list[int] = []
    j = 0
    while j < len(w):
        block = [j]
        while block[-1] + 1 < len(w) and w[block[-1] + 1] - w[block[0]] <= DEGENERACY_TOL * max(1.0, abs(w[block[0]])):
            block.append(block[-1] + 1)
        block.sort(key=lambda b: tuple(vecs[b]))
        ordered.extend(block)
        j = block[-1] + 1 if len(block) == 1 else max(block) + 1
    ordered = ordered[:dim]
    values = w[ordered]
    vectors = np.stack([vecs[j] for j in ordered], axis=1) if ordered else np.zeros((n, 0))
    if len(values):
        resid = np.linalg.norm(lap @ vectors - vectors * values[None, :], axis=0)
        worst = float(resid.max())
        if worst > RESIDUAL_TOL:
            raise EigenSolverError("eigenpair residual above tolerance", worst)
    return lap, values, vectors


def laplacian_pe(hier: HierGraph, dim: int = PE_DIM) -> np.ndarray:
    """Per-node Laplacian positional encodings, zero-padded to ``dim`` columns.

    The result is also stored on ``hier.pe``.
    """
    _, _, vectors = laplacian_eigenpairs(hier.adjacency(), dim)
    pe = np.zeros((hier.n_nodes, dim))
    pe[:, : vectors.shape[1]] = vectors
    hier.pe = pe
    return pe
