"""BRICS motif extraction.

The sixteen retrosynthetic environments and their compatible pairs follow the
published BRICS rule table (as distributed with RDKit, including its later
amendments: the unified L5 amine definition and the extra L9/L14/L16 pairs).
Environments are extended-grammar SMARTS evaluated with the ordinary matcher;
a bond is cleavable when it is acyclic, has the rule's bond order and joins
atoms in a compatible pair of environments.

Cleaved bonds are simply deleted: motifs are induced subgraphs of the input
molecule and no dummy atoms are introduced.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .chem import Molecule
from .smarts import SmartsPattern, bond_matches, find_matches, mol_view, parse_smarts

ENVIRONMENTS: dict[str, str] = {
    "L1": "[C;D3]([#0,#6,#7,#8])(=O)",
    "L3": "[O;D2]-;!@[#0,#6,#1]",
    "L4": "[C;!D1;!$(C=*)]-;!@[#6]",
    "L5": "[N;!D1;!$(N=*);!$(N-[!#6;!#16;!#0;!#1]);!$([N;R]@[C;R]=O)]",
    "L6": "[C;D3;!R](=O)-;!@[#0,#6,#7,#8]",
    "L7a": "[C;D2,D3]-[#6]",
    "L7b": "[C;D2,D3]-[#6]",
    "L8": "[C;!R;!D1;!$(C!-*)]",
    "L9": "[n;+0;$(n(:[c,n,o,s]):[c,n,o,s])]",
    "L10": "[N;R;$(N(@C(=O))@[C,N,O,S])]",
    "L11": "[S;D2](-;!@[#0,#6])",
    "L12": "[S;D4]([#6,#0])(=O)(=O)",
    "L13": "[C;$(C(-;@[C,N,O,S])-;@[N,O,S])]",
    "L14": "[c;$(c(:[c,n,o,s]):[n,o,s])]",
    "L14b": "[c;$(c(:[c,n,o,s]):[n,o,s])]",
    "L15": "[C;$(C(-;@C)-;@C)]",
    "L16": "[c;$(c(:c):c)]",
    "L16b": "[c;$(c(:c):c)]",
}

# (environment, environment, bond symbol), grouped as in the rule table.
RULES: tuple[tuple[str, str, str], ...] = (
    ("1", "3", "-"), ("1", "5", "-"), ("1", "10", "-"),
    ("3", "4", "-"), ("3", "13", "-"), ("3", "14", "-"), ("3", "15", "-"), ("3", "16", "-"),
    ("4", "5", "-"), ("4", "11", "-"),
    ("5", "12", "-"), ("5", "14", "-"), ("5", "16", "-"), ("5", "13", "-"), ("5", "15", "-"),
    ("6", "13", "-"), ("6", "14", "-"), ("6", "15", "-"), ("6", "16", "-"),
    ("7a", "7b", "="),
    ("8", "9", "-"), ("8", "10", "-"), ("8", "13", "-"), ("8", "14", "-"), ("8", "15", "-"), ("8", "16", "-"),
    ("9", "13", "-"), ("9", "14", "-"), ("9", "15", "-"), ("9", "16", "-"),
    ("10", "13", "-"), ("10", "14", "-"), ("10", "15", "-"), ("10", "16", "-"),
    ("11", "13", "-"), ("11", "14", "-"), ("11", "15", "-"), ("11", "16", "-"),
    ("13", "14", "-"), ("13", "15", "-"), ("13", "16", "-"),
    ("14", "14", "-"), ("14", "15", "-"), ("14", "16", "-"),
    ("15", "16", "-"),
    ("16", "16", "-"),
)


@lru_cache(maxsize=1)
def _environment_patterns() -> dict[str, SmartsPattern]:
    return {name: parse_smarts(f"[$({sma})]", extended=True) for name, sma in ENVIRONMENTS.items()}


@lru_cache(maxsize=1)
def _bond_exprs() -> dict[str, tuple]:
    # Bond part of each rule pattern: "<bond>;!@" (given order, not in a ring).
    return {sym: parse_smarts(f"*{sym};!@*", extended=True).bonds[0].expr for sym in "-="}


@dataclass(frozen=True, slots=True)
class BricsBond:
    bond: int
    atoms: tuple[int, int]
    environments: tuple[str, str]


@dataclass(frozen=True, slots=True)
class Motif:
    id: int
    atoms: tuple[int, ...]
    is_graph_motif: bool = False

    def __len__(self) -> int:
        return len(self.atoms)


def brics_cleavable_bonds(mol: Molecule) -> list[BricsBond]:
    """Acyclic bonds whose end environments form a BRICS pair, in bond-index order.

    When several rules hit the same bond the first rule in table order names it.
    """
    view = mol_view(mol)
    envs = {
        name: {m[0] for m in find_matches(mol, pattern)}
        for name, pattern in _environment_patterns().items()
    }
    bond_ok = {sym: [bond_matches(expr, view, bi) for bi in range(mol.n_bonds)]
               for sym, expr in _bond_exprs().items()}
    found: dict[int, BricsBond] = {}
    for e1, e2, sym in RULES:
        left, right = envs["L" + e1], envs["L" + e2]
        if not left or not right:
            continue
        ok = bond_ok[sym]
        for bi, bond in enumerate(mol.bonds):
            if bi in found or not ok[bi]:
                continue
            if bond.a in left and bond.b in right:
                atoms = (bond.a, bond.b)
            elif bond.b in left and bond.a in right:
                atoms = (bond.b, bond.a)
            else:
                continue
            found[bi] = BricsBond(bi, atoms, (e1.rstrip("ab"), e2.rstrip("ab")))
    return [found[bi] for bi in sorted(found)]


def fragment(mol: Molecule) -> list[Motif]:
    """Split ``mol`` at its BRICS bonds.

    Returns motifs ``1..k`` (connected components ordered by smallest atom
    index) followed by the graph motif ``k+1`` that spans every atom.
    """
    cut = {b.bond for b in brics_cleavable_bonds(mol)}
    parent = list(range(mol.n_atoms))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for bi, bond in enumerate(mol.bonds):
        if bi not in cut:
            ra, rb = find(bond.a), find(bond.b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for i in range(mol.n_atoms):
        groups.setdefault(find(i), []).append(i)
    ordered = sorted(groups.values(), key=lambda g: g[0])
    motifs = [Motif(i + 1, tuple(g)) for i, g in enumerate(ordered)]
    motifs.append(Motif(len(motifs) + 1, tuple(range(mol.n_atoms)), True))
    return motifs
