"""The numeric side: polynomial stand-ins, evaluation, identity checking."""

from fractions import Fraction
from random import Random

import pytest

from eqvlab import (
    EvaluationError,
    Instantiation,
    PolyFunc,
    UPoly,
    antiderivative,
    check_identity,
    check_zero,
    draw_point,
    evaluate,
    exp,
    func,
    jet,
    log,
    param,
    required_point_names,
    var,
)

y, z = var("y"), var("z")
DEP = {"w": ("y", "z")}


def test_upoly_arithmetic():
    t = UPoly.indeterminate()
    p = 3 * t ** 2 + t - 5
    assert p.degree == 2
    assert p(Fraction(2)) == Fraction(9)
    q = p * p
    assert q.degree == 4
    assert q(3) == p(3) ** 2
    assert (p - p).degree == 0 and (p - p)(7) == 0
    assert (p + 1)(0) == -4
    assert (p / 2)(4) == p(4) / 2
    assert p ** 3 == p * p * p
    assert 2 - p == -(p - 2)
    with pytest.raises(EvaluationError):
        p / t
    with pytest.raises(EvaluationError):
        p.constant()


def test_upoly_antiderivative():
    p = 6 * UPoly.indeterminate() ** 2 - 4 * UPoly.indeterminate() + 1
    a = p.antiderivative()
    assert a.coeffs[0] == 0
    # differentiating the antiderivative recovers the coefficients exactly
    da = [a.coeffs[i] * i for i in range(1, len(a.coeffs))]
    assert da == list(p.coeffs)
    assert a(Fraction(2)) == Fraction(16 - 8 + 2)


def test_polyfunc_partial_matches_finite_differences():
    rng = Random(12)
    f = PolyFunc.random(rng, 3, degree=3, require=(1, 2, 3))
    h = Fraction(1, 10 ** 6)
    pt = [Fraction(5, 7), Fraction(-2, 3), Fraction(9, 5)]
    for slot in (1, 2, 3):
        d = f.partial(slot)
        hi = list(pt)
        lo = list(pt)
        hi[slot - 1] += h
        lo[slot - 1] -= h
        fd = (f.evaluate(hi) - f.evaluate(lo)) / (2 * h)
        assert abs(fd - d.evaluate(pt)) <= Fraction(1, 10 ** 4)


def test_polyfunc_random_require_guarantee():
    # required slots must genuinely appear for every seed
    for seed in range(40):
        f = PolyFunc.random(Random(seed), 2, degree=2, require=(1, 2))
        assert any(e[0] > 0 for e in f.coeffs)
        assert any(e[1] > 0 for e in f.coeffs)
        assert f.partial(1).coeffs and f.partial(2).coeffs


def test_polyfunc_to_expression_consistency():
    rng = Random(77)
    f = PolyFunc.random(rng, 2, degree=2, require=(1, 2))
    e = f.to_expression(("y", "z"))
    for pt in ([Fraction(1, 2), Fraction(3)], [Fraction(-2), Fraction(5, 3)]):
        inst = Instantiation()
        v = evaluate(e, inst, {"y": pt[0], "z": pt[1]})
        assert v == f.evaluate(pt)


def test_polyfunc_validation():
    with pytest.raises(ValueError):
        PolyFunc(2, {(1,): Fraction(1)})
    f = PolyFunc(1, {(2,): Fraction(3)})
    with pytest.raises(EvaluationError):
        f.evaluate([1, 2])
    with pytest.raises(EvaluationError):
        f.partial(5)


def test_evaluate_covers_every_atom_kind():
    e = (2 * y + param("c") * jet("w", "y") + func("F", y, z)
         + exp(y - y) + log(1 + z * z) + antiderivative(y, "y"))
    rng = Random(3)
    inst = Instantiation.for_expressions([e], rng, DEP)
    pt = draw_point(rng, required_point_names([e], inst))
    v = evaluate(e, inst, pt)
    assert v == pytest.approx(float(v))
    # the antiderivative of y in y evaluates to y^2/2 exactly
    a = evaluate(antiderivative(y, "y"), inst, pt)
    assert a == pt["y"] ** 2 / 2


def test_jets_evaluate_as_partials_of_the_dependent_polynomial():
    rng = Random(9)
    e = jet("w", "y", "z")
    inst = Instantiation.for_expressions([e], rng, DEP, degree=3)
    _slots, poly = inst.dependents["w"]
    pt = {"y": Fraction(1, 3), "z": Fraction(-2, 5)}
    direct = poly.partial(1).partial(2).evaluate([pt["y"], pt["z"]])
    assert evaluate(e, inst, pt) == direct


def test_check_identity_accepts_true_identities():
    lhs = (y + z) ** 2
    rhs = y * y + 2 * y * z + z * z
    res = check_identity(lhs, rhs, DEP, seed=1, points=12)
    assert res.ok and res.points == 12 and res.max_error <= 1e-6
    assert bool(res)
    f = func("F", y, z)
    res2 = check_zero(f * (y + 1) - f * y - f, DEP, seed=2)
    assert res2.ok


def test_check_identity_rejects_near_misses():
    lhs = (y + z) ** 2
    rhs = y * y + 2 * y * z + z * z + y * Fraction(1, 10 ** 4)
    res = check_identity(lhs, rhs, DEP, seed=3)
    assert not res.ok
    assert res.worst_point is not None
    assert not bool(res)


def test_check_identity_respects_assumptions():
    # an assumption that can never clear the floor must exhaust the attempts
    with pytest.raises(EvaluationError, match="no admissible point"):
        check_identity(y, y, DEP, seed=4, assumptions=[y - y + 0], max_attempts=5)
    # a generically nonzero assumption just filters points
    res = check_identity((y * y - 1) / (y - 1) * (y - 1), y * y - 1, DEP,
                         seed=5, assumptions=[y - 1])
    assert res.ok


def test_required_point_names_tracks_variables():
    e = func("F", y) + jet("w", "z")
    rng = Random(6)
    inst = Instantiation.for_expressions([e], rng, DEP)
    names = required_point_names([e], inst)
    assert set(names) == {"y", "z"}
    pt = draw_point(rng, names)
    assert set(pt) == {"y", "z"}
    assert all(isinstance(v, Fraction) for v in pt.values())


def test_undeclared_dependent_is_an_error():
    rng = Random(8)
    with pytest.raises(EvaluationError, match="no declared independent"):
        Instantiation.for_expressions([jet("q", "y")], rng, DEP)


def test_inconsistent_function_arity_is_an_error():
    rng = Random(8)
    e = func("F", y) + func("F", y, z)
    with pytest.raises(EvaluationError, match="arguments"):
        Instantiation.for_expressions([e], rng, DEP)
