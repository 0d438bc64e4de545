"""A small SMARTS compiler and subgraph matcher.

Two grammar levels share one parser:

* ``strict`` (the default) accepts exactly the primitives used by the
  functional-group registry: aliphatic element symbols, ``#n``, ``*``,
  ``D<n>``, ``H<n>``, ``R0``, charges, ``,`` (or) and ``;`` (and) inside
  brackets, bonds ``- = #`` and ring-closure digits.
* ``extended`` additionally accepts aromatic symbols, ``!``, ``&``, ``R``,
  ``a``/``A``, recursive ``$(...)`` and the bond primitives ``: ~ @``. It is
  used internally for the BRICS environment definitions.

Matching enumerates injective maps with the backtracking kernel from
:mod:`molhier.kernels`; atom and bond predicates are evaluated up front into
compatibility tables so the kernel only touches integer arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from . import kernels
from .chem import AROMATIC, DOUBLE, SINGLE, TRIPLE, Molecule, implicit_hydrogens
from .elements import ATOMIC_NUMBER, aromatic_number

Expr = tuple[Any, ...]


class SmartsError(ValueError):
    """Unsupported or malformed SMARTS. ``token`` names the offending text."""

    def __init__(self, message: str, token: str = "", offset: int = -1):
        super().__init__(message)
        self.token = token
        self.offset = offset


@dataclass(frozen=True, slots=True)
class AtomSpec:
    expr: Expr
    text: str

    @property
    def is_wildcard(self) -> bool:
        return self.expr == ("any",)

    def required(self, primitive: str) -> Any:
        """Value of a top-level conjunct such as ``"D"`` or ``"H"``, else None."""
        terms = self.expr[1] if self.expr[0] == "and" else [self.expr]
        for term in terms:
            if term[0] == primitive:
                return term[1]
        return None


@dataclass(frozen=True, slots=True)
class BondSpec:
    a: int
    b: int
    expr: Expr
    text: str


@dataclass(frozen=True)
class SmartsPattern:
    text: str
    atoms: tuple[AtomSpec, ...]
    bonds: tuple[BondSpec, ...]
    attachment: bool
    ring_closures: int = 0

    def __len__(self) -> int:
        return len(self.atoms)


_STRICT_BOND = {"-": ("single",), "=": ("double",), "#": ("triple",)}
_EXT_BOND = {**_STRICT_BOND, ":": ("arombond",), "~": ("anybond",), "@": ("ringbond",)}
_DEFAULT_BOND = ("default",)
_ORGANIC = ("Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I")
_AROMATIC = ("c", "n", "o", "s", "p", "b")


class _Parser:
    def __init__(self, text: str, extended: bool):
        self.text = text
        self.extended = extended
        self.pos = 0

    def error(self, token: str, what: str = "unsupported primitive") -> SmartsError:
        return SmartsError(f"{what} {token!r} at offset {self.pos} in {self.text!r}", token, self.pos)

    # ---- bracket atom expressions -------------------------------------------------
    def bracket(self) -> Expr:
        end = self._matching_bracket(self.pos)
        body_start = self.pos + 1
        self.pos = body_start
        expr = self._low(end)
        if self.pos != end:
            raise self.error(self.text[self.pos])
        self.pos = end + 1
        return expr

    def _matching_bracket(self, start: int) -> int:
        depth = 0
        i = start
        while i < len(self.text):
            ch = self.text[i]
            if ch == "[":
                depth += 1
            elif ch == "]":
                depth -= 1
                if depth == 0:
                    return i
            i += 1
        raise SmartsError(f"unterminated '[' in {self.text!r}", "[", start)

    def _low(self, end: int) -> Expr:
        terms = [self._or(end)]
        while self.pos < end and self.text[self.pos] == ";":
            self.pos += 1
            terms.append(self._or(end))
        return terms[0] if len(terms) == 1 else ("and", terms)

    def _or(self, end: int) -> Expr:
        terms = [self._high(end)]
        while self.pos < end and self.text[self.pos] == ",":
            self.pos += 1
            terms.append(self._high(end))
        return terms[0] if len(terms) == 1 else ("or", terms)

    def _high(self, end: int) -> Expr:
        terms = [self._unary(end)]
        while self.pos < end and self.text[self.pos] not in ";,":
            if self.text[self.pos] == "&":
                if not self.extended:
                    raise self.error("&")
                self.pos += 1
            elif not self.extended:
                raise self.error(self.text[self.pos])
            terms.append(self._unary(end))
        return terms[0] if len(terms) == 1 else ("and", terms)

    def _unary(self, end: int) -> Expr:
        if self.pos < end and self.text[self.pos] == "!":
            if not self.extended:
                raise self.error("!")
            self.pos += 1
            return ("not", self._unary(end))
        return self._primitive(end)

    def _digits(self, end: int) -> int | None:
        start = self.pos
        while self.pos < end and self.text[self.pos].isdigit():
            self.pos += 1
        return int(self.text[start : self.pos]) if self.pos > start else None

    def _primitive(self, end: int) -> Expr:
        t = self.text
        if self.pos >= end:
            raise SmartsError(f"empty primitive at offset {self.pos} in {t!r}", "", self.pos)
        ch = t[self.pos]
        if ch == "*":
            self.pos += 1
            return ("any",)
        if ch == "#":
            self.pos += 1
            z = self._digits(end)
            if z is None:
                raise self.error("#")
            return ("num", z)
        if ch in "DH":
            self.pos += 1
            n = self._digits(end)
            return (ch, 1 if n is None else n)
        if ch == "R":
            self.pos += 1
            n = self._digits(end)
            if n != 0 and not self.extended:
                raise self.error("R" if n is None else f"R{n}")
            return ("R", n)
        if ch in "+-":
            sign = 1 if ch == "+" else -1
            self.pos += 1
            n = self._digits(end)
            if n is None:
                n = 1
                while self.pos < end and t[self.pos] == ch:
                    n += 1
                    self.pos += 1
            return ("charge", sign * n)
        if ch == "$" and self.extended:
            if t[self.pos + 1 : self.pos + 2] != "(":
                raise self.error("$")
            depth, i = 0, self.pos + 1
            while i < end:
                if t[i] == "(":
                    depth += 1
                elif t[i] == ")":
                    depth -= 1
                    if depth == 0:
                        break
                i += 1
            inner = t[self.pos + 2 : i]
            self.pos = i + 1
            return ("rec", parse_smarts(inner, extended=True))
        if self.extended and ch in "aA":
            self.pos += 1
            return ("arom", ch == "a")
        if self.extended:
            for sym in ("se", "as") + _AROMATIC:
                if t.startswith(sym, self.pos):
                    self.pos += len(sym)
                    return ("elem", aromatic_number(sym), True)
        if ch.isupper():
            two = t[self.pos : self.pos + 2]
            if len(two) == 2 and two[1].islower() and two in ATOMIC_NUMBER:
                self.pos += 2
                return ("elem", ATOMIC_NUMBER[two], False)
            if ch in ATOMIC_NUMBER:
                self.pos += 1
                return ("elem", ATOMIC_NUMBER[ch], False)
        raise self.error(ch)

    # ---- bond expressions ---------------------------------------------------------
    def bond(self) -> tuple[Expr, str] | None:
        t = self.text
        start = self.pos
        table = _EXT_BOND if self.extended else _STRICT_BOND
        ops = ";,&!" if self.extended else ""
        while self.pos < len(t) and (t[self.pos] in table or t[self.pos] in ops):
            self.pos += 1
        if self.pos == start:
            return None
        text = t[start : self.pos]
        return _BondExprParser(text, table).parse(), text


class _BondExprParser:
    def __init__(self, text: str, table: dict[str, Expr]):
        self.text = text
        self.table = table
        self.pos = 0

    def parse(self) -> Expr:
        expr = self._low()
        if self.pos != len(self.text):
            raise SmartsError(f"malformed bond expression {self.text!r}", self.text)
        return expr

    def _low(self) -> Expr:
        terms = [self._or()]
        while self.pos < len(self.text) and self.text[self.pos] == ";":
            self.pos += 1
            terms.append(self._or())
        return terms[0] if len(terms) == 1 else ("and", terms)

    def _or(self) -> Expr:
        terms = [self._high()]
        while self.pos < len(self.text) and self.text[self.pos] == ",":
            self.pos += 1
            terms.append(self._high())
        return terms[0] if len(terms) == 1 else ("or", terms)

    def _high(self) -> Expr:
        terms = [self._unary()]
        while self.pos < len(self.text) and self.text[self.pos] not in ";,":
            if self.text[self.pos] == "&":
                self.pos += 1
            terms.append(self._unary())
        return terms[0] if len(terms) == 1 else ("and", terms)

    def _unary(self) -> Expr:
        if self.pos < len(self.text) and self.text[self.pos] == "!":
            self.pos += 1
            return ("not", self._unary())
        if self.pos >= len(self.text) or self.text[self.pos] not in self.table:
            raise SmartsError(f"malformed bond expression {self.text!r}", self.text)
        expr = self.table[self.text[self.pos]]
        self.pos += 1
        return expr


def parse_smarts(text: str, extended: bool = False) -> SmartsPattern:
    """Compile ``text`` into a :class:`SmartsPattern`.

    Unspecified bonds compile to "single or aromatic"; an explicit ``-`` is
    strictly single.

    Raises:
        SmartsError: naming the first unsupported or malformed token.
    """
    p = _Parser(text, extended)
    atoms: list[AtomSpec] = []
    bonds: list[BondSpec] = []
    stack: list[int] = []
    rings: dict[int, tuple[int, Expr | None, str]] = {}
    prev: int | None = None
    pending: tuple[Expr, str] | None = None
    closures = 0

    while p.pos < len(text):
        ch = text[p.pos]
        start = p.pos
        if ch == "[":
            expr = p.bracket()
        elif ch == "*":
            p.pos += 1
            expr = ("any",)
        elif ch.isupper():
            for sym in _ORGANIC:
                if text.startswith(sym, p.pos):
                    p.pos += len(sym)
                    expr = ("elem", ATOMIC_NUMBER[sym], False)
                    break
            else:
                raise p.error(ch)
        elif extended and ch in _AROMATIC:
            p.pos += 1
            expr = ("elem", aromatic_number(ch), True)
        elif ch == "(":
            if prev is None or pending is not None:
                raise p.error("(", "misplaced branch")
            stack.append(prev)
            p.pos += 1
            continue
        elif ch == ")":
            if not stack or pending is not None:
                raise p.error(")", "unbalanced")
            prev = stack.pop()
            p.pos += 1
            continue
        elif ch.isdigit() or ch == "%":
            if ch == "%":
                digits = text[p.pos + 1 : p.pos + 3]
                if len(digits) != 2 or not digits.isdigit():
                    raise p.error("%", "malformed ring closure")
                label, width = int(digits), 3
            else:
                label, width = int(ch), 1
            if prev is None:
                raise p.error(ch, "ring closure before atom")
            if label in rings:
                other, oexpr, otext = rings.pop(label)
                bexpr, btext = pending if pending is not None else (oexpr, otext)
                bonds.append(BondSpec(other, prev, bexpr or _DEFAULT_BOND, btext))
                closures += 1
            else:
                rings[label] = (prev, pending[0] if pending else None, pending[1] if pending else "")
            pending = None
            p.pos += width
            continue
        else:
            parsed = p.bond()
            if parsed is None:
                raise p.error(ch)
            if pending is not None:
                raise p.error(parsed[1], "consecutive bonds")
            pending = parsed
            continue

        atoms.append(AtomSpec(expr, text[start : p.pos]))
        idx = len(atoms) - 1
        if prev is not None:
            bexpr, btext = pending if pending is not None else (_DEFAULT_BOND, "")
            bonds.append(BondSpec(prev, idx, bexpr, btext))
        elif pending is not None:
            raise p.error(pending[1], "bond without preceding atom")
        prev = idx
        pending = None

    if stack:
        raise SmartsError(f"unbalanced '(' in {text!r}", "(")
    if rings:
        raise SmartsError(f"unmatched ring closure in {text!r}", str(next(iter(rings))))
    if pending is not None:
        raise SmartsError(f"dangling bond in {text!r}", pending[1])
    if not atoms:
        raise SmartsError("empty SMARTS", "")

    wildcards = [i for i, a in enumerate(atoms) if a.is_wildcard]
    attachment = bool(
        wildcards == [0] and len(atoms) > 1 and text.startswith("*") and len(text) > 1
        and text[1] in "-=#~:"
    )
    return SmartsPattern(text, tuple(atoms), tuple(bonds), attachment, closures)


# ---- molecule views -----------------------------------------------------------------

_ORDER_CODE = {SINGLE: 0, DOUBLE: 1, TRIPLE: 2, AROMATIC: 3}


class MolView:
    """Per-atom/per-bond arrays of one molecule, plus match caches."""

    __slots__ = (
        "mol", "n", "element", "aromatic", "degree", "hcount", "ring", "charge",
        "bond_order", "bond_ring", "adj_ptr", "adj_idx", "molbond", "cache",
    )

    def __init__(self, mol: Molecule):
        self.mol = mol
        n = mol.n_atoms
        self.n = n
        self.element = np.array([a.element for a in mol.atoms], dtype=np.int64)
        self.aromatic = np.array([a.aromatic for a in mol.atoms], dtype=bool)
        self.degree = np.array([mol.degree(i) for i in range(n)], dtype=np.int64)
        self.hcount = np.array([implicit_hydrogens(mol, i) for i in range(n)], dtype=np.int64)
        self.ring = np.array([a.in_ring for a in mol.atoms], dtype=bool)
        self.charge = np.array([a.formal_charge for a in mol.atoms], dtype=np.int64)
        self.bond_order = np.array([_ORDER_CODE[b.order] for b in mol.bonds], dtype=np.int64)
        self.bond_ring = np.array([b.in_ring for b in mol.bonds], dtype=bool)
        ptr = [0]
        idx: list[int] = []
        for i in range(n):
            idx.extend(nb for nb, _ in mol.neighbors(i))
            ptr.append(len(idx))
        self.adj_ptr = np.asarray(ptr, dtype=np.int64)
        self.adj_idx = np.asarray(idx, dtype=np.int64)
        molbond = np.full((n, n), -1, dtype=np.int64)
        for bi, b in enumerate(mol.bonds):
            molbond[b.a, b.b] = bi
            molbond[b.b, b.a] = bi
        self.molbond = molbond
        # id(pattern) -> (pattern, compiled tables); the stored pattern guards id reuse.
        self.cache: dict[int, tuple[SmartsPattern, Any]] = {}


def mol_view(mol: Molecule) -> MolView:
    view = mol.__dict__.get("_view")
    if view is None:
        view = MolView(mol)
        object.__setattr__(mol, "_view", view)
    return view


def atom_mask(expr: Expr, view: MolView) -> np.ndarray:
    """Boolean vector over the molecule's atoms for one atom expression."""
    op = expr[0]
    if op == "and":
        out = atom_mask(expr[1][0], view)
        for e in expr[1][1:]:
            out = out & atom_mask(e, view)
        return out
    if op == "or":
        out = atom_mask(expr[1][0], view)
        for e in expr[1][1:]:
            out = out | atom_mask(e, view)
        return out
    if op == "not":
        return ~atom_mask(expr[1], view)
    if op == "any":
        return np.ones(view.n, dtype=bool)
    if op == "elem":
        return (view.element == expr[1]) & (view.aromatic == expr[2])
    if op == "num":
        return view.element == expr[1]
    if op == "D":
        return view.degree == expr[1]
    if op == "H":
        return view.hcount == expr[1]
    if op == "R":
        return ~view.ring if expr[1] == 0 else view.ring.copy()
    if op == "charge":
        return view.charge == expr[1]
    if op == "arom":
        return view.aromatic == expr[1]
    if op == "rec":
        return _recursive_mask(expr[1], view)
    raise SmartsError(f"unknown atom primitive {op!r}", str(op))


def atom_matches(expr: Expr, view: MolView, i: int) -> bool:
    return bool(atom_mask(expr, view)[i])


def bond_mask(expr: Expr, view: MolView) -> np.ndarray:
    """Boolean vector over the molecule's bonds for one bond expression."""
    op = expr[0]
    if op == "and":
        out = bond_mask(expr[1][0], view)
        for e in expr[1][1:]:
            out = out & bond_mask(e, view)
        return out
    if op == "or":
        out = bond_mask(expr[1][0], view)
        for e in expr[1][1:]:
            out = out | bond_mask(e, view)
        return out
    if op == "not":
        return ~bond_mask(expr[1], view)
    order = view.bond_order
    if op == "default":
        return (order == 0) | (order == 3)
    if op == "single":
        return order == 0
    if op == "double":
        return order == 1
    if op == "triple":
        return order == 2
    if op == "arombond":
        return order == 3
    if op == "anybond":
        return np.ones(order.shape[0], dtype=bool)
    if op == "ringbond":
        return view.bond_ring.copy()
    raise SmartsError(f"unknown bond primitive {op!r}", str(op))


def bond_matches(expr: Expr, view: MolView, bi: int) -> bool:
    return bool(bond_mask(expr, view)[bi])


def _search_order(pattern: SmartsPattern, start: int) -> tuple[list[int], list[list[tuple[int, int]]]]:
    n = len(pattern.atoms)
    nbrs: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for bi, b in enumerate(pattern.bonds):
        nbrs[b.a].append((b.b, bi))
        nbrs[b.b].append((b.a, bi))
    order: list[int] = []
    placed = [False] * n
    roots = [start] + [i for i in range(n) if i != start]
    for root in roots:
        if placed[root]:
            continue
        queue = [root]
        placed[root] = True
        while queue:
            cur = queue.pop(0)
            order.append(cur)
            for nb, _ in sorted(nbrs[cur]):
                if not placed[nb]:
                    placed[nb] = True
                    queue.append(nb)
    position = {p: k for k, p in enumerate(order)}
    constraints = []
    for p in order:
        cons = [(nb, bi) for nb, bi in nbrs[p] if position[nb] < position[p]]
        cons.sort(key=lambda c: position[c[0]])
        constraints.append(cons)
    return order, constraints


class _Compiled:
    __slots__ = ("cand", "bond_ok", "feasible", "plans")

    def __init__(self, pattern: SmartsPattern, view: MolView):
        n_pat = len(pattern.atoms)
        cand = np.zeros((n_pat, view.n), dtype=np.uint8)
        for p, spec in enumerate(pattern.atoms):
            cand[p] = atom_mask(spec.expr, view)
        self.cand = cand
        self.feasible = bool(view.n) and bool(cand.any(axis=1).all())
        n_bonds = len(view.bond_order)
        bond_ok = np.zeros((max(len(pattern.bonds), 1), max(n_bonds, 1)), dtype=np.uint8)
        if n_bonds:
            for pb, spec in enumerate(pattern.bonds):
                bond_ok[pb, :n_bonds] = bond_mask(spec.expr, view)
        self.bond_ok = bond_ok
        self.plans: dict[int, tuple[np.ndarray, ...]] = {}

    def plan(self, pattern: SmartsPattern, start: int) -> tuple[np.ndarray, ...]:
        plan = self.plans.get(start)
        if plan is None:
            order, constraints = _search_order(pattern, start)
            con_ptr = [0]
            con_atom: list[int] = []
            con_bond: list[int] = []
            for cons in constraints:
                con_atom.extend(c[0] for c in cons)
                con_bond.extend(c[1] for c in cons)
                con_ptr.append(len(con_atom))
            plan = (
                np.asarray(order, dtype=np.int64),
                np.asarray(con_ptr, dtype=np.int64),
                np.asarray(con_atom, dtype=np.int64),
                np.asarray(con_bond, dtype=np.int64),
            )
            self.plans[start] = plan
        return plan


def _compiled(pattern: SmartsPattern, view: MolView) -> _Compiled:
    hit = view.cache.get(id(pattern))
    if hit is not None and hit[0] is pattern and isinstance(hit[1], _Compiled):
        return hit[1]
    comp = _Compiled(pattern, view)
    view.cache[id(pattern)] = (pattern, comp)
    return comp


def _recursive_mask(pattern: SmartsPattern, view: MolView) -> np.ndarray:
    key = -id(pattern)  # negative keys hold recursive masks
    hit = view.cache.get(key)
    if hit is not None and hit[0] is pattern:
        return hit[1].copy()
    comp = _compiled(pattern, view)
    mask = np.zeros(view.n, dtype=bool)
    if comp.feasible:
        for i in np.flatnonzero(comp.cand[0]):
            mask[i] = bool(_search(pattern, view, anchor=int(i), limit=1))
    view.cache[key] = (pattern, mask)
    return mask.copy()


def _search(pattern: SmartsPattern, view: MolView, anchor: int = -1, limit: int = 0) -> list[tuple[int, ...]]:
    comp = _compiled(pattern, view)
    if not comp.feasible:
        return []
    if anchor >= 0:
        if not comp.cand[0, anchor]:
            return []
        start = 0
    else:
        start = int(np.argmin(comp.cand.sum(axis=1)))
    order, con_ptr, con_atom, con_bond = comp.plan(pattern, start)
    return kernels.match_embeddings(
        order, con_ptr, con_atom, con_bond, comp.cand, view.adj_ptr, view.adj_idx,
        view.molbond, comp.bond_ok, anchor, limit,
    )


def dedup_key(pattern: SmartsPattern, mapping: tuple[int, ...]) -> frozenset[int]:
    if pattern.attachment:
        return frozenset(mapping[1:])
    return frozenset(mapping)


def find_matches(mol: Molecule, pattern: SmartsPattern, unique: bool = True) -> list[tuple[int, ...]]:
    """All matches of ``pattern`` in ``mol`` as tuples indexed by pattern atom.

    With ``unique`` (the default) mappings covering the same atom set are
    collapsed to the lexicographically smallest one; for attachment patterns
    the wildcard atom is left out of that set. Results are sorted.
    """
    found = _search(pattern, mol_view(mol))
    if not unique:
        return sorted(found)
    best: dict[frozenset[int], tuple[int, ...]] = {}
    for m in found:
        key = dedup_key(pattern, m)
        if key not in best or m < best[key]:
            best[key] = m
    return sorted(best.values())


def has_match(mol: Molecule, pattern: SmartsPattern) -> bool:
    return bool(_search(pattern, mol_view(mol), limit=1))


def count_matches(mol: Molecule, pattern: SmartsPattern) -> int:
    return len(find_matches(mol, pattern))
