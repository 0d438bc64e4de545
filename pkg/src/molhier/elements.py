"""Periodic table lookups used by the SMILES and SMARTS parsers."""

from __future__ import annotations

SYMBOLS: tuple[str, ...] = (
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne",
    "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar", "K", "Ca",
    "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr",
    "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn",
    "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb",
    "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg",
    "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
    "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm",
    "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds",
    "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og",
)

ATOMIC_NUMBER: dict[str, int] = {sym: z for z, sym in enumerate(SYMBOLS, start=1)}
MAX_ATOMIC_NUMBER = len(SYMBOLS)

# Organic subset usable without brackets, longest symbols first for greedy lexing.
ORGANIC_SUBSET = ("Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I")
AROMATIC_ORGANIC = ("b", "c", "n", "o", "p", "s")
# Aromatic symbols permitted inside brackets.
AROMATIC_BRACKET = ("se", "as", "te", "b", "c", "n", "o", "p", "s")

DEFAULT_VALENCE: dict[int, int] = {
    5: 3,   # B
    6: 4,   # C
    7: 3,   # N
    8: 2,   # O
    15: 3,  # P
    16: 2,  # S
    9: 1, 17: 1, 35: 1, 53: 1,
}


def symbol(z: int) -> str:
    if 1 <= z <= MAX_ATOMIC_NUMBER:
        return SYMBOLS[z - 1]
    return "*"


def aromatic_number(sym: str) -> int:
    """Atomic number for a lowercase aromatic symbol (``"c"`` -> 6)."""
    return ATOMIC_NUMBER[sym[0].upper() + sym[1:]]
