"""SMILES parsing into an explicit heavy-atom molecular graph.

Hydrogens never become graph nodes; their counts are derived on demand by
:func:`implicit_hydrogens`. Ring membership is computed once at parse time by
bridge detection, so every :class:`Molecule` returned by :func:`parse_smiles`
already carries ``in_ring`` flags on atoms and bonds.

Example:
    >>> mol = parse_smiles("c1ccccc1O")
    >>> len(mol.atoms), len(mol.bonds)
    (7, 7)
    >>> [a.in_ring for a in mol.atoms][-1]
    False
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator

from .elements import (
    AROMATIC_BRACKET,
    AROMATIC_ORGANIC,
    ATOMIC_NUMBER,
    DEFAULT_VALENCE,
    ORGANIC_SUBSET,
    aromatic_number,
)

SINGLE = "single"
DOUBLE = "double"
TRIPLE = "triple"
AROMATIC = "aromatic"
BOND_ORDERS = (SINGLE, DOUBLE, TRIPLE, AROMATIC)
BOND_VALENCE = {SINGLE: 1.0, DOUBLE: 2.0, TRIPLE: 3.0, AROMATIC: 1.5}

_BOND_SYMBOLS = {"-": SINGLE, "=": DOUBLE, "#": TRIPLE, ":": AROMATIC, "/": SINGLE, "\\": SINGLE}


class SmilesError(ValueError):
    """Raised for SMILES outside the supported subset.

    Attributes:
        offset: 0-based byte offset of the offending token.
    """

    def __init__(self, message: str, offset: int, text: str = ""):
        super().__init__(f"{message} at offset {offset}")
        self.reason = message
        self.offset = offset
        self.text = text


@dataclass(frozen=True, slots=True)
class Atom:
    index: int
    element: int
    formal_charge: int = 0
    aromatic: bool = False
    explicit_h: int | None = None
    isotope: int | None = None
    in_ring: bool = False
    chirality: str | None = None
    bracket: bool = False


@dataclass(frozen=True, slots=True)
class Bond:
    a: int
    b: int
    order: str
    in_ring: bool = False
    stereo: str | None = None

    def other(self, atom: int) -> int:
        return self.b if atom == self.a else self.a


@dataclass(frozen=True)
class Molecule:
    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...]
    source: str = ""
    _adjacency: tuple[tuple[tuple[int, int], ...], ...] = field(
        default=(), repr=False, compare=False
    )

    def __post_init__(self) -> None:
        adj: list[list[tuple[int, int]]] = [[] for _ in self.atoms]
        for bi, bond in enumerate(self.bonds):
            adj[bond.a].append((bond.b, bi))
            adj[bond.b].append((bond.a, bi))
        frozen = tuple(tuple(sorted(row)) for row in adj)
        object.__setattr__(self, "_adjacency", frozen)

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def n_bonds(self) -> int:
        return len(self.bonds)

    def neighbors(self, atom: int) -> tuple[tuple[int, int], ...]:
        """``(neighbor atom, bond index)`` pairs in ascending neighbor order."""
        return self._adjacency[atom]

    def degree(self, atom: int) -> int:
        return len(self._adjacency[atom])

    def bond_between(self, a: int, b: int) -> Bond | None:
        for nb, bi in self._adjacency[a]:
            if nb == b:
                return self.bonds[bi]
        return None


@dataclass
class _PendingAtom:
    element: int
    aromatic: bool
    bracket: bool
    offset: int
    charge: int = 0
    hcount: int | None = None
    isotope: int | None = None
    chirality: str | None = None


def _lex_bracket(text: str, start: int) -> tuple[_PendingAtom, int]:
    """Parse ``[...]`` starting at ``text[start] == '['``; return atom and end offset."""
    end = text.find("]", start)
    if end < 0:
        raise SmilesError("unterminated bracket atom", start, text)
    body = text[start + 1 : end]
    pos = 0

    def at() -> int:
        return start + 1 + pos

    isotope = None
    j = pos
    while j < len(body) and body[j].isdigit():
        j += 1
    if j > pos:
        isotope = int(body[pos:j])
        pos = j

    element = None
    aromatic = False
    for sym in AROMATIC_BRACKET:
        if body.startswith(sym, pos):
            element, aromatic = aromatic_number(sym), True
            pos += len(sym)
            break
    else:
        if pos < len(body) and body[pos].isupper():
            two = body[pos : pos + 2]
            if len(two) == 2 and two[1].islower() and two in ATOMIC_NUMBER:
                element, pos = ATOMIC_NUMBER[two], pos + 2
            elif body[pos] in ATOMIC_NUMBER:
                element, pos = ATOMIC_NUMBER[body[pos]], pos + 1
    if element is None:
        raise SmilesError(f"unknown element in bracket atom '[{body}]'", at(), text)

    chirality = None
    if body.startswith("@@", pos):
        chirality, pos = "@@", pos + 2
    elif body.startswith("@", pos):
        chirality, pos = "@", pos + 1

    hcount = None
    if pos < len(body) and body[pos] == "H":
        pos += 1
        j = pos
        while j < len(body) and body[j].isdigit():
            j += 1
        hcount = int(body[pos:j]) if j > pos else 1
        pos = j
        if hcount > 9:
            raise SmilesError("hydrogen count above 9", at(), text)

    charge = 0
    if pos < len(body) and body[pos] in "+-":
        sign = 1 if body[pos] == "+" else -1
        ch = body[pos]
        pos += 1
        j = pos
        while j < len(body) and body[j].isdigit():
            j += 1
        if j > pos:
            charge = sign * int(body[pos:j])
            pos = j
        else:
            charge = sign
            while pos < len(body) and body[pos] == ch:
                charge += sign
                pos += 1

    if pos < len(body) and body[pos] == ":":
        j = pos + 1
        while j < len(body) and body[j].isdigit():
            j += 1
        pos = j
    if pos != len(body):
        raise SmilesError(f"unexpected token '{body[pos]}' in bracket atom", at(), text)

    return (
        _PendingAtom(
            element=element,
            aromatic=aromatic,
            bracket=True,
            offset=start,
            charge=charge,
            hcount=hcount,
            isotope=isotope,
            chirality=chirality,
        ),
        end + 1,
    )


def parse_smiles(text: str) -> Molecule:
    """Parse a SMILES string into a :class:`Molecule` with ring flags set.

    Raises:
        SmilesError: on unbalanced parentheses, dangling ring closures,
            unknown element tokens or bracket atoms whose explicit hydrogens
            plus bond orders exceed 8.
    """
    atoms: list[_PendingAtom] = []
    # (a, b, explicit order or None, stereo symbol)
    edges: list[tuple[int, int, str | None, str | None]] = []
    stack: list[tuple[int, int]] = []  # (atom index, offset of '(')
    rings: dict[int, tuple[int, str | None, str | None, int]] = {}
    prev: int | None = None
    pending_bond: str | None = None
    pending_stereo: str | None = None
    bond_offset = 0
    dot = False
    i = 0
    n = len(text)

    def add_atom(atom: _PendingAtom) -> None:
        nonlocal prev, pending_bond, pending_stereo, dot
        idx = len(atoms)
        atoms.append(atom)
        if prev is not None and not dot:
            edges.append((prev, idx, pending_bond, pending_stereo))
        elif pending_bond is not None:
            raise SmilesError("bond symbol without a preceding atom", bond_offset, text)
        prev = idx
        pending_bond = pending_stereo = None
        dot = False

    while i < n:
        ch = text[i]
        if ch == "[":
            atom, i = _lex_bracket(text, i)
            add_atom(atom)
            continue
        if ch in "BCNOPSFI":
            two = text[i : i + 2]
            sym = two if two in ("Cl", "Br") else ch
            if sym not in ORGANIC_SUBSET:
                raise SmilesError(f"unknown element token '{sym}'", i, text)
            add_atom(_PendingAtom(ATOMIC_NUMBER[sym], False, False, i))
            i += len(sym)
            continue
        if ch in AROMATIC_ORGANIC:
            add_atom(_PendingAtom(aromatic_number(ch), True, False, i))
            i += 1
            continue
        if ch in _BOND_SYMBOLS:
            if pending_bond is not None:
                raise SmilesError("consecutive bond symbols", i, text)
            pending_bond = _BOND_SYMBOLS[ch]
            pending_stereo = ch if ch in "/\\" else None
            bond_offset = i
            i += 1
            continue
        if ch == "(":
            if prev is None:
                raise SmilesError("branch opened before any atom", i, text)
            stack.append((prev, i))
            i += 1
            continue
        if ch == ")":
            if not stack:
                raise SmilesError("unbalanced parenthesis ')'", i, text)
            if pending_bond is not None:
                raise SmilesError("bond symbol before ')'", bond_offset, text)
            prev, _ = stack.pop()
            i += 1
            continue
        if ch.isdigit() or ch == "%":
            if ch == "%":
                digits = text[i + 1 : i + 3]
                if len(digits) != 2 or not digits.isdigit():
                    raise SmilesError("malformed '%nn' ring closure", i, text)
                label, width = int(digits), 3
            else:
                label, width = int(ch), 1
            if prev is None:
                raise SmilesError("ring closure before any atom", i, text)
            if label in rings:
                other, obond, ostereo, ooff = rings.pop(label)
                if other == prev:
                    raise SmilesError("ring closure onto the same atom", i, text)
                if pending_bond is not None and obond is not None and pending_bond != obond:
                    raise SmilesError("conflicting ring-closure bond orders", i, text)
                order = pending_bond if pending_bond is not None else obond
                edges.append((other, prev, order, pending_stereo or ostereo))
            else:
                rings[label] = (prev, pending_bond, pending_stereo, i)
            pending_bond = pending_stereo = None
            i += width
            continue
        if ch == ".":
            if pending_bond is not None:
                raise SmilesError("bond symbol before '.'", bond_offset, text)
            dot = True
            i += 1
            continue
        raise SmilesError(f"unknown token '{ch}'", i, text)

    if stack:
        raise SmilesError("unbalanced parenthesis '('", stack[-1][1], text)
    if rings:
        label, (_, _, _, off) = min(rings.items(), key=lambda kv: kv[1][3])
        raise SmilesError(f"unmatched ring-closure digit {label}", off, text)
    if pending_bond is not None:
        raise SmilesError("dangling bond symbol", bond_offset, text)
    if not atoms:
        raise SmilesError("empty SMILES", 0, text)

    seen: set[tuple[int, int]] = set()
    for a, b, _, _ in edges:
        key = (min(a, b), max(a, b))
        if key in seen:
            raise SmilesError("duplicate bond between the same atoms", atoms[b].offset, text)
        seen.add(key)

    # First pass: ring membership only depends on topology.
    ring_bond = _bridge_free_edges(len(atoms), [(a, b) for a, b, _, _ in edges])
    bonds: list[Bond] = []
    for ei, (a, b, order, stereo) in enumerate(edges):
        if order is None:
            # Implicit bonds between aromatic atoms are aromatic only inside rings.
            if atoms[a].aromatic and atoms[b].aromatic and ring_bond[ei]:
                order = AROMATIC
            else:
                order = SINGLE
        bonds.append(Bond(a, b, order, ring_bond[ei], stereo))

    ring_atom = [False] * len(atoms)
    for bond in bonds:
        if bond.in_ring:
            ring_atom[bond.a] = ring_atom[bond.b] = True

    valence = [0.0] * len(atoms)
    for bond in bonds:
        valence[bond.a] += BOND_VALENCE[bond.order]
        valence[bond.b] += BOND_VALENCE[bond.order]
    for idx, atom in enumerate(atoms):
        if atom.bracket and (atom.hcount or 0) + valence[idx] > 8:
            raise SmilesError("valence-impossible bracket atom", atom.offset, text)

    final = tuple(
        Atom(
            index=idx,
            element=atom.element,
            formal_charge=atom.charge,
            aromatic=atom.aromatic,
            explicit_h=atom.hcount,
            isotope=atom.isotope,
            in_ring=ring_atom[idx],
            chirality=atom.chirality,
            bracket=atom.bracket,
        )
        for idx, atom in enumerate(atoms)
    )
    return Molecule(final, tuple(bonds), text)


def _bridge_free_edges(n: int, edges: list[tuple[int, int]]) -> list[bool]:
    """Flag each edge that is not a bridge (iterative Tarjan lowlink)."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for ei, (a, b) in enumerate(edges):
        adj[a].append((b, ei))
        adj[b].append((a, ei))
    disc = [-1] * n
    low = [0] * n
    is_bridge = [False] * len(edges)
    timer = 0
    for root in range(n):
        if disc[root] != -1:
            continue
        disc[root] = low[root] = timer
        timer += 1
        work: list[tuple[int, int, Iterator[tuple[int, int]]]] = [(root, -1, iter(adj[root]))]
        while work:
            node, via, it = work[-1]
            advanced = False
            for nb, ei in it:
                if ei == via:
                    continue
                if disc[nb] == -1:
                    disc[nb] = low[nb] = timer
                    timer += 1
                    work.append((nb, ei, iter(adj[nb])))
                    advanced = True
                    break
                low[node] = min(low[node], disc[nb])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
                if low[node] > disc[parent]:
                    is_bridge[via] = True
    return [not b for b in is_bridge]


def ring_flags(mol: Molecule) -> Molecule:
    """Return ``mol`` with ``in_ring`` recomputed on every atom and bond.

    A bond is a ring bond iff it is not a bridge; an atom is a ring atom iff
    it touches a ring bond.
    """
    flags = _bridge_free_edges(mol.n_atoms, [(b.a, b.b) for b in mol.bonds])
    bonds = tuple(replace(b, in_ring=f) for b, f in zip(mol.bonds, flags))
    ring_atom = [False] * mol.n_atoms
    for b in bonds:
        if b.in_ring:
            ring_atom[b.a] = ring_atom[b.b] = True
    atoms = tuple(replace(a, in_ring=ring_atom[a.index]) for a in mol.atoms)
    return Molecule(atoms, bonds, mol.source)


def implicit_hydrogens(mol: Molecule, atom: int) -> int:
    """Hydrogen count of ``atom``.

    Bracket atoms report their written H count (0 if none). Organic-subset
    atoms take the default valence minus the bond-order sum, with aromatic
    bonds weighted 1.5 and the sum rounded down, clamped at 0.
    """
    a = mol.atoms[atom]
    if a.bracket:
        return a.explicit_h or 0
    default = DEFAULT_VALENCE.get(a.element)
    if default is None:
        return 0
    used = sum(BOND_VALENCE[mol.bonds[bi].order] for _, bi in mol.neighbors(atom))
    return max(0, default - math.floor(used))


def total_hydrogens(mol: Molecule) -> list[int]:
    return [implicit_hydrogens(mol, i) for i in range(mol.n_atoms)]


@dataclass(frozen=True, slots=True)
class CorpusEntry:
    id: str
    smiles: str
    caption: str | None
    line: int


def read_corpus(path: str | Path) -> list[CorpusEntry]:
    """Read one SMILES per line with an optional tab-separated caption.

    Blank lines and lines starting with ``#`` are skipped. Entry ids are
    ``<file name>:<line number>``.
    """
    path = Path(path)
    entries = []
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            smiles, _, caption = line.partition("\t")
            entries.append(
                CorpusEntry(f"{path.name}:{lineno}", smiles.strip(), caption if _ else None, lineno)
            )
    return entries
