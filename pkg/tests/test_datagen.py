import random

import pytest
from hypothesis import given, settings, strategies as st

from molhier import parse_smiles
from molhier.datagen import (
    augment_caption,
    gen_motifhallu,
    group_counts,
    group_names,
    negative_sentence,
    parse_question,
    positive_sentence,
    question_for,
)
from molhier.fgroups import default_registry

from molgen import random_smiles

REG = default_registry()


def _corpus(smiles):
    return [(f"t:{i}", s, parse_smiles(s)) for i, s in enumerate(smiles)]


def test_question_template_round_trip():
    q = question_for("carboxylic acids")
    assert q == "Is there a carboxylic acids in the molecule?"
    assert parse_question(q) == "carboxylic acids"
    with pytest.raises(ValueError):
        parse_question("Is there carboxylic acids?")


def test_pool_has_one_entry_per_name():
    names = group_names(REG)
    assert len(names) == 37 and names.count("Imines") == 1


def test_two_groups_give_eight_items():
    mol = parse_smiles("ClCCO")
    assert len(group_counts(mol, REG)) == 2
    items = gen_motifhallu(_corpus(["ClCCO"]), REG, 0)
    assert len(items) == 8
    assert [i.answer for i in items] == ["Yes", "Yes"] + ["No"] * 6


def test_answers_agree_with_detection():
    smiles = ["CC(=O)Nc1ccc(O)cc1", "CS(=O)(=O)N", "CCC#N", "c1ccccc1"]
    for item in gen_motifhallu(_corpus(smiles), REG, 5):
        present = group_counts(parse_smiles(item.smiles), REG)
        assert (item.answer == "Yes") == (item.fg in present)
        assert parse_question(item.question) == item.fg


def test_output_is_repeatable_and_seed_sensitive():
    corpus = _corpus(["CCO", "CC(=O)O", "CCN"])
    a = [i.to_json() for i in gen_motifhallu(corpus, REG, 3)]
    b = [i.to_json() for i in gen_motifhallu(corpus, REG, 3)]
    c = [i.to_json() for i in gen_motifhallu(corpus, REG, 4)]
    assert a == b and a != c


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 2**63))
def test_item_counts(seed, rng_seed):
    smiles = random_smiles(random.Random(seed))
    mol = parse_smiles(smiles)
    items = gen_motifhallu([("m", smiles, mol)], REG, rng_seed)
    pos = len(group_counts(mol, REG))
    assert sum(i.answer == "Yes" for i in items) == pos
    assert sum(i.answer == "No" for i in items) == min(6, len(group_names(REG)) - pos)
    assert len({i.fg for i in items}) == len(items)


def test_sentences():
    assert positive_sentence("carboxylic acids", 1) == "This molecule has 1 carboxylic acids functional group."
    assert positive_sentence("halogens", 3) == "This molecule has 3 halogens functional groups."
    assert negative_sentence(["a", "b", "c", "d"]) == "This molecule has no a, or b, or c or d groups."
    assert negative_sentence(["a"]) == "This molecule has no a groups."


def test_augment_layout():
    mol = parse_smiles("CC(=O)O")
    rec = augment_caption("CC(=O)O", "It is acetic acid.", mol, REG, 4, 1)
    assert rec.augmented.startswith("This molecule has 1 carboxylic acids functional group.")
    assert rec.augmented.endswith("It is acetic acid.")
    neg = [s for s in rec.augmented.split(". ") if s.startswith("This molecule has no")]
    assert len(neg) == 1 and neg[0].count(" or ") == 3


def test_no_groups_and_no_negatives():
    rec = augment_caption("c1ccccc1", "Benzene.", parse_smiles("c1ccccc1"), REG, 0, 0)
    assert rec.augmented == "This molecule has 0 functional groups. Benzene."
    with pytest.raises(ValueError):
        augment_caption("C", "", parse_smiles("C"), REG, -1, 0)
