import random

import pytest

from prooftutor.corpus import bundled_corpus_dir, load_corpus
from prooftutor.formula import (
    Biconditional,
    Conjunction,
    Disjunction,
    Implication,
    Negation,
    Variable,
    parse,
)
from prooftutor.kg import BuildBounds, ProofProblem, build_kg


def random_formula(rng: random.Random, depth: int, variables: str = "PQRSTU"):
    """Uniform-ish random formula of bounded depth for property sweeps."""
    if depth == 0 or rng.random() < 0.3:
        return Variable(rng.choice(variables))
    kind = rng.randrange(5)
    if kind == 0:
        return Negation(random_formula(rng, depth - 1, variables))
    left = random_formula(rng, depth - 1, variables)
    right = random_formula(rng, depth - 1, variables)
    if kind == 1:
        return Conjunction(left, right)
    if kind == 2:
        return Disjunction(left, right)
    if kind == 3:
        return Implication(left, right)
    return Biconditional(left, right)


@pytest.fixture(scope="session")
def manifest():
    return load_corpus(bundled_corpus_dir())


@pytest.fixture(scope="session")
def ladder_problem():
    return ProofProblem(
        id="ladder",
        premises=(parse("((~K + L) > (M * N))"), parse("(K > O)"), parse("~O")),
        conclusion=parse("N"),
        level=4,
    )


@pytest.fixture(scope="session")
def ladder_kg(ladder_problem):
    return build_kg(ladder_problem, bounds=BuildBounds(max_nodes=700, max_intermediates=6))


@pytest.fixture(scope="session")
def corpus_kgs(manifest):
    """Knowledge graphs for every bundled problem, built at the stored bounds."""
    kgs = {}
    for problem in manifest.problems:
        kgs[problem.id] = build_kg(problem, bounds=manifest.build_bounds[problem.id])
    return kgs
