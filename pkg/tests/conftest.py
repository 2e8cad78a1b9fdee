"""Shared fixtures: corpus paths and a seeded random-expression generator."""

from fractions import Fraction
from pathlib import Path
from random import Random

import pytest

from eqvlab import (
    Expression,
    antiderivative,
    as_expression,
    exp,
    func,
    jet,
    log,
    param,
    var,
)

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


@pytest.fixture
def corpus():
    return CORPUS


def random_expression(
    rng: Random,
    depth: int = 3,
    *,
    transcendental: bool = True,
    vars_pool: tuple[str, ...] = ("y", "z"),
) -> Expression:
    """A small random expression over two variables, jets of w, a parameter
    and an unspecified function.  Leaf weights keep most draws nontrivial
    without exploding term counts at depth 3."""
    if depth == 0:
        roll = rng.randrange(8)
        if roll < 3:
            return var(rng.choice(vars_pool))
        if roll < 4:
            return as_expression(Fraction(rng.randint(-4, 4), rng.randint(1, 3)))
        if roll < 5:
            return param("c" + str(rng.randint(1, 2)))
        if roll < 7:
            return jet("w", *rng.sample(vars_pool, rng.randint(0, 2)))
        return func("F", *[var(v) for v in vars_pool])
    a = random_expression(rng, depth - 1, transcendental=transcendental, vars_pool=vars_pool)
    b = random_expression(rng, depth - 1, transcendental=transcendental, vars_pool=vars_pool)
    roll = rng.randrange(10 if transcendental else 7)
    if roll < 3:
        return a + b
    if roll < 5:
        return a * b
    if roll < 6:
        return a - b
    if roll < 7:
        # denominators must stay provably nonzero for the numeric companions
        return a / (as_expression(2) + var(vars_pool[0]) ** 2)
    if roll < 8:
        return exp(var(rng.choice(vars_pool)) * Fraction(rng.randint(-2, 2)))
    if roll < 9:
        return log(as_expression(1) + var(vars_pool[0]) ** 2)
    return antiderivative(a, rng.choice(vars_pool))


def seeded_cases(seed: int, count: int, **kwargs):
    """Deterministic stream of (index, expression) pairs for bulk suites."""
    rng = Random(seed)
    for i in range(count):
        yield i, random_expression(rng, **kwargs)
