"""Yes/no functional-group questions and group-augmented captions.

Groups are addressed by name. Two registry rows may share a name (the two
imine patterns); their counts are summed and they are asked about once.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

import numpy as np

from .chem import Molecule
from .fgroups import FunctionalGroupRegistry, default_registry, detect_functional_groups

QUESTION = "Is there a {} in the molecule?"
_QUESTION_RE = re.compile(r"^Is there a (.+) in the molecule\?$")
N_NEGATIVES = 6
K_NEG = 4


@dataclass(frozen=True)
class QAItem:
    id: str
    smiles: str
    fg: str
    question: str
    answer: str

    def to_json(self) -> str:
        return json.dumps({"id": self.id, "smiles": self.smiles, "fg": self.fg,
                           "question": self.question, "answer": self.answer}, ensure_ascii=False)


@dataclass(frozen=True)
class CaptionRecord:
    smiles: str
    caption: str
    augmented: str

    def to_json(self) -> str:
        return json.dumps({"smiles": self.smiles, "caption": self.caption, "augmented": self.augmented},
                          ensure_ascii=False)


def question_for(name: str) -> str:
    return QUESTION.format(name)


def parse_question(text: str) -> str:
    m = _QUESTION_RE.match(text)
    if not m:
        raise ValueError(f"not a functional-group question: {text!r}")
    return m.group(1)


def group_names(registry: FunctionalGroupRegistry) -> list[str]:
    return list(dict.fromkeys(e.name for e in registry))


def group_counts(mol: Molecule, registry: FunctionalGroupRegistry) -> dict[str, int]:
    """Occurrences per group name (registry order), absent names omitted."""
    by_label = detect_functional_groups(mol, registry)
    out: dict[str, int] = {}
    for e in registry:
        if e.label in by_label:
            out[e.name] = out.get(e.name, 0) + by_label[e.label]
    return out


def molecule_rng(seed: int, ordinal: int) -> np.random.Generator:
    return np.random.default_rng((seed ^ ordinal) & 0xFFFFFFFFFFFFFFFF)


def _sample(pool: list[str], k: int, rng: np.random.Generator) -> list[str]:
    k = min(k, len(pool))
    if k == 0:
        return []
    return [pool[i] for i in rng.choice(len(pool), size=k, replace=False)]


def qa_for_molecule(mol_id: str, smiles: str, mol: Molecule, registry: FunctionalGroupRegistry,
                    rng: np.random.Generator, n_neg: int = N_NEGATIVES) -> list[QAItem]:
    present = group_counts(mol, registry)
    absent = [n for n in group_names(registry) if n not in present]
    items = [(name, "Yes") for name in present]
    items += [(name, "No") for name in _sample(absent, n_neg, rng)]
    return [QAItem(f"{mol_id}#{j}", smiles, name, question_for(name), ans) for j, (name, ans) in enumerate(items)]


def gen_motifhallu(corpus, registry: FunctionalGroupRegistry | None = None, rng_seed: int = 0,
                   n_neg: int = N_NEGATIVES) -> list[QAItem]:
    """Questions for every molecule of ``corpus``.

    ``corpus`` yields ``(id, smiles, Molecule)`` triples. Each molecule gets one
    Yes item per detected group, then up to ``n_neg`` No items drawn without
    replacement from its undetected groups. Molecule ``i`` (0-based) draws
    from a generator seeded with ``rng_seed ^ i``.
    """
    registry = registry or default_registry()
    out: list[QAItem] = []
    for ordinal, (mol_id, smiles, mol) in enumerate(corpus):
        out.extend(qa_for_molecule(mol_id, smiles, mol, registry, molecule_rng(rng_seed, ordinal), n_neg))
    return out


def positive_sentence(name: str, count: int) -> str:
    noun = "group" if count == 1 else "groups"
    return f"This molecule has {count} {name} functional {noun}."


def negative_sentence(names: list[str]) -> str:
    if len(names) <= 1:
        joined = "".join(names)
    else:
        joined = ", or ".join(names[:-1]) + " or " + names[-1]
    return f"This molecule has no {joined} groups."


def augment_caption(smiles: str, caption: str, mol: Molecule, registry: FunctionalGroupRegistry | None = None,
                    k_neg: int = K_NEG, rng_seed: int = 0) -> CaptionRecord:
    """Prefix ``caption`` with positive and negative functional-group sentences."""
    if k_neg < 0:
        raise ValueError(f"k_neg must be >= 0, got {k_neg}")
    registry = registry or default_registry()
    present = group_counts(mol, registry)
    if present:
        parts = [positive_sentence(name, n) for name, n in present.items()]
    else:
        parts = ["This molecule has 0 functional groups."]
    absent = [n for n in group_names(registry) if n not in present]
    negatives = _sample(absent, k_neg, np.random.default_rng(rng_seed & 0xFFFFFFFFFFFFFFFF))
    if negatives:
        parts.append(negative_sentence(negatives))
    parts.append(caption)
    return CaptionRecord(smiles, caption, " ".join(p for p in parts if p))
