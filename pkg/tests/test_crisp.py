import numpy as np
import pytest

from ndprop.crisp import (
    OracleScaleExceeded,
    enumerate_stable_models,
    format_models,
    immediate_consequence,
    is_stable,
    least_fixpoint,
)
from ndprop.program import parse_program

from .oracles import is_stable_reduct, random_program, stable_models_bruteforce


def test_consequence_examples(choice_program):
    assert immediate_consequence(choice_program, {0}, set()) == {0}
    p = parse_program("a.\nb :- a.\n")
    assert immediate_consequence(p, set(), {0}) == {0, 1}


def test_consequence_with_everything_blocked():
    p = parse_program("a.\nb :- not c.\nc :- a.\nd :- a, not b.\n")
    # only rules without negative body can fire; positive bodies still need support
    assert immediate_consequence(p, range(p.n), set()) == {0}


def test_least_fixpoint_examples(choice_program):
    assert least_fixpoint(choice_program, {0}) == {0}
    assert least_fixpoint(parse_program(""), set()) == set()
    chain = parse_program("a.\nb :- a.\nc :- b.\n")
    assert least_fixpoint(chain, set()) == {0, 1, 2}


def test_least_fixpoint_does_not_mutate_inputs(choice_program):
    j, i = {0}, set()
    least_fixpoint(choice_program, j, i)
    assert j == {0} and i == set()


def test_is_stable_examples(choice_program):
    assert is_stable(choice_program, {0})
    assert is_stable(choice_program, {1})
    assert not is_stable(choice_program, {0, 1})
    assert is_stable(parse_program(""), set())


def test_enumerate_examples(choice_program):
    assert enumerate_stable_models(choice_program) == [{0}, {1}]
    assert enumerate_stable_models(parse_program("a :- not a.")) == []
    assert enumerate_stable_models(parse_program("")) == [frozenset()]


def test_enumerate_cap():
    p = parse_program("".join(f"x{i} :- not y{i}.\n" for i in range(11)))
    with pytest.raises(OracleScaleExceeded):
        enumerate_stable_models(p, atom_cap=20)
    assert len(enumerate_stable_models(p, atom_cap=22)) == 1


def test_enumerate_matches_reduct_oracle():
    rng = np.random.default_rng(3)
    for _ in range(300):
        p = random_program(rng, max_atoms=9)
        assert enumerate_stable_models(p) == stable_models_bruteforce(p)


def test_is_stable_matches_reduct_oracle():
    rng = np.random.default_rng(4)
    for _ in range(300):
        p = random_program(rng, max_atoms=10)
        s = {a for a in range(p.n) if rng.random() < 0.5}
        assert is_stable(p, s) == is_stable_reduct(p, s)


def test_fixpoint_monotone_in_falsified_set():
    # larger F means a smaller blocking set, so more rules fire
    rng = np.random.default_rng(5)
    for _ in range(2000):
        p = random_program(rng)
        f = {a for a in range(p.n) if rng.random() < 0.4}
        f2 = f | {a for a in range(p.n) if rng.random() < 0.4}
        everything = set(range(p.n))
        assert least_fixpoint(p, everything - f) <= least_fixpoint(p, everything - f2)


def test_fixpoint_seed_absorption():
    rng = np.random.default_rng(6)
    for _ in range(2000):
        p = random_program(rng)
        j = {a for a in range(p.n) if rng.random() < 0.5}
        base = least_fixpoint(p, j)
        seed = {a for a in base if rng.random() < 0.5}
        assert least_fixpoint(p, j, seed) == base


def test_format_models(choice_program):
    assert format_models(choice_program, [{0}, {1}]) == "a\nb\n"
