"""Functional-group registry and per-molecule group counting."""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .chem import Molecule
from .smarts import SmartsPattern, count_matches, parse_smarts

REGISTRY_VERSION = 1


@dataclass(frozen=True)
class FunctionalGroup:
    representation: str
    smarts: str
    name: str
    label: str
    pattern: SmartsPattern


@dataclass(frozen=True)
class FunctionalGroupRegistry:
    entries: tuple[FunctionalGroup, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def labels(self) -> list[str]:
        return [e.label for e in self.entries]

    def get(self, label: str) -> FunctionalGroup:
        for e in self.entries:
            if e.label == label:
                return e
        raise KeyError(label)

    def checksum(self) -> str:
        """sha256 over ``name\\tsmarts\\n`` lines in registry order."""
        payload = "".join(f"{e.name}\t{e.smarts}\n" for e in self.entries)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class RegistryError(ValueError):
    pass


def parse_registry(text: str, source: str = "<registry>") -> FunctionalGroupRegistry:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("//"):
            continue
        fields = [f.strip() for f in raw.split("\t") if f.strip()]
        if len(fields) != 3:
            raise RegistryError(f"{source}:{lineno}: expected 3 tab-separated fields, got {len(fields)}")
        rows.append((lineno, *fields))

    name_counts = Counter(name for _, _, _, name in rows)
    entries = []
    seen: set[str] = set()
    for lineno, rep, smarts, name in rows:
        # Repeated names (the two imine rows) are told apart by representation.
        label = name if name_counts[name] == 1 else f"{name} ({rep})"
        if label in seen:
            raise RegistryError(f"{source}:{lineno}: duplicate group {label!r}")
        seen.add(label)
        try:
            pattern = parse_smarts(smarts)
        except ValueError as exc:
            raise RegistryError(f"{source}:{lineno}: {exc}") from exc
        entries.append(FunctionalGroup(rep, smarts, name, label, pattern))
    return FunctionalGroupRegistry(tuple(entries))


def load_registry(path: str | Path | None = None) -> FunctionalGroupRegistry:
    """Load a registry file, defaulting to the bundled 38-group table."""
    if path is None:
        text = resources.files("molhier").joinpath("data/functional_groups.txt").read_text("utf-8")
        return parse_registry(text, "functional_groups.txt")
    path = Path(path)
    return parse_registry(path.read_text(encoding="utf-8"), str(path))


_default: FunctionalGroupRegistry | None = None


def default_registry() -> FunctionalGroupRegistry:
    global _default
    if _default is None:
        _default = load_registry()
    return _default


def detect_functional_groups(mol: Molecule, registry: FunctionalGroupRegistry | None = None) -> dict[str, int]:
    """Map group label -> number of occurrences, omitting absent groups.

    Occurrences are deduplicated by matched atom set, wildcard excluded.
    Keys follow registry order.
    """
    registry = registry or default_registry()
    out = {}
    for entry in registry:
        n = count_matches(mol, entry.pattern)
        if n:
            out[entry.label] = n
    return out
