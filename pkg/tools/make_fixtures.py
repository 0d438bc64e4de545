"""Regenerate tests/fixtures/rdkit_oracle.json (requires RDKit; not a runtime dependency).

    python tools/make_fixtures.py tools/fixture_smiles.txt tests/fixtures/rdkit_oracle.json
"""

import json
import sys
from pathlib import Path

from rdkit import Chem
from rdkit.Chem import BRICS

ORDERS = {
    Chem.BondType.SINGLE: "single",
    Chem.BondType.DOUBLE: "double",
    Chem.BondType.TRIPLE: "triple",
    Chem.BondType.AROMATIC: "aromatic",
}


def registry_rows(path):
    rows = []
    for line in Path(path).read_text().splitlines():
        if not line.strip() or line.startswith("//"):
            continue
        rep, smarts, name = [f for f in line.split("\t") if f]
        rows.append((rep, smarts, name))
    return rows


def partition(mol):
    cut = {tuple(sorted(b)) for b, _ in BRICS.FindBRICSBonds(mol)}
    n = mol.GetNumAtoms()
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for bond in mol.GetBonds():
        a, b = bond.GetBeginAtomIdx(), bond.GetEndAtomIdx()
        if (min(a, b), max(a, b)) not in cut:
            parent[find(a)] = find(b)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(cut), sorted(sorted(g) for g in groups.values())


def fg_counts(mol, rows):
    out = {}
    for rep, smarts, name in rows:
        patt = Chem.MolFromSmarts(smarts)
        keys = set()
        for m in mol.GetSubstructMatches(patt, uniquify=False, maxMatches=100000):
            keys.add(frozenset(m[1:]))
        if keys:
            out[f"{rep}\t{name}"] = len(keys)
    return out


def main(src, dst):
    rows = registry_rows(Path(__file__).resolve().parents[1] / "src/molhier/data/functional_groups.txt")
    records = []
    for line in Path(src).read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        mol = Chem.MolFromSmiles(line.strip())
        smi = Chem.MolToSmiles(mol)
        mol = Chem.MolFromSmiles(smi)
        ri = mol.GetRingInfo()
        cut, parts = partition(mol)
        records.append({
            "input": line.strip(),
            "smiles": smi,
            "atoms": [
                {
                    "element": a.GetAtomicNum(),
                    "charge": a.GetFormalCharge(),
                    "aromatic": a.GetIsAromatic(),
                    "in_ring": ri.NumAtomRings(a.GetIdx()) > 0,
                    "hydrogens": a.GetTotalNumHs(),
                    "degree": a.GetDegree(),
                }
                for a in mol.GetAtoms()
            ],
            "bonds": [
                [b.GetBeginAtomIdx(), b.GetEndAtomIdx(), ORDERS[b.GetBondType()], ri.NumBondRings(b.GetIdx()) > 0]
                for b in mol.GetBonds()
            ],
            "brics_bonds": [list(b) for b in cut],
            "brics_partition": parts,
            "functional_groups": fg_counts(mol, rows),
        })
    Path(dst).write_text(json.dumps({"rdkit": Chem.rdBase.rdkitVersion, "molecules": records}, indent=1) + "\n")
    print(f"wrote {len(records)} records to {dst}")


if __name__ == "__main__":
    main(*sys.argv[1:3])
