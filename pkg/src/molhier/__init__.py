"""Hierarchical molecular graph tokenization toolkit."""

from .chem import Atom, Bond, Molecule, SmilesError, implicit_hydrogens, parse_smiles, ring_flags
from .fgroups import FunctionalGroupRegistry, detect_functional_groups, load_registry
from .kernels import BACKEND
from .smarts import SmartsError, SmartsPattern, find_matches, parse_smarts

__version__ = "0.1.0"

__all__ = [
    "Atom",
    "Bond",
    "Molecule",
    "SmilesError",
    "implicit_hydrogens",
    "parse_smiles",
    "ring_flags",
    "FunctionalGroupRegistry",
    "detect_functional_groups",
    "load_registry",
    "BACKEND",
    "SmartsError",
    "SmartsPattern",
    "find_matches",
    "parse_smarts",
]
