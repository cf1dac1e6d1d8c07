import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from faberpade.conformal import Disk
from faberpade.errors import DomainError, OnBranchCut, ParseError, PoleEvaluation
from faberpade.funcsys import (
    ExpTail,
    FunctionSystem,
    LogBranch,
    MeromorphicFunction,
    MultiIndex,
    PoleTerm,
    PolynomialTail,
    PowBranch,
    evaluate,
    format_function,
    laurent_matrix_entry,
    parse_function_expression,
    true_poles,
)


def structure(f: MeromorphicFunction):
    poles = sorted((t.location.real, t.location.imag, t.laurent) for t in f.rational_part)
    tail = f.tail
    if tail is not None:
        tail = (type(tail).__name__, tuple(np.ravel(list(tail.__dict__.values()))))
    return poles, tail


def test_evaluate_examples():
    assert evaluate(parse_function_expression("1/(z-2)"), 0) == pytest.approx(-0.5)
    f = MeromorphicFunction((PoleTerm(2, (0, 1)),), LogBranch(4, 0))
    assert evaluate(f, 1) == pytest.approx(1.0)
    g = MeromorphicFunction((), LogBranch(4, 1))
    assert evaluate(g, 0) == pytest.approx(math.log(4) + 1j * math.pi)


def test_evaluate_errors():
    f = parse_function_expression("1/(z-2) + log(z-4)")
    with pytest.raises(PoleEvaluation):
        evaluate(f, 2)
    with pytest.raises(OnBranchCut):
        evaluate(f, 5)
    with pytest.raises(OnBranchCut):
        evaluate(parse_function_expression("(z-3i)^0.5"), 4j)


def test_branch_cut_points_away_from_origin():
    g = MeromorphicFunction((), LogBranch(2j, 1))
    # continuous across the opposite ray (through the origin)
    a = evaluate(g, -1e-9 + 0j)
    b = evaluate(g, 1e-9 + 0j)
    assert abs(a - b) < 1e-6
    # jump of 2 pi i across the cut above the branch point
    above = evaluate(g, 3j + 1e-9)
    below = evaluate(g, 3j - 1e-9)
    assert abs(abs(above - below) - 2 * math.pi) < 1e-6


def test_power_branch_argument_range():
    # arg(z - b) is taken in [arg b, arg b + 2 pi); for b = -3 that is [pi, 3 pi)
    f = MeromorphicFunction((), PowBranch(-3, 0.5, 2))
    z = 0.3 + 0.1j
    assert evaluate(f, z) == pytest.approx(-2 * cmath.sqrt(z + 3))
    g = MeromorphicFunction((), PowBranch(3, 0.5, 1))
    assert evaluate(g, 0) == pytest.approx(1j * math.sqrt(3))


def test_parse_examples():
    f = parse_function_expression("1/(z-2)")
    assert structure(f) == structure(MeromorphicFunction((PoleTerm(2, (1,)),)))
    g = parse_function_expression("3/(z-2)^2 + 1/(z-2) + log(z-4)")
    assert structure(g) == structure(MeromorphicFunction((PoleTerm(2, (1, 3)),), LogBranch(4, 1)))
    with pytest.raises(ParseError) as info:
        parse_function_expression("1/(z-2")
    assert info.value.position == 7
    assert ")" in info.value.expected


@pytest.mark.parametrize(
    "text",
    [
        "1/(z-2-1i)^3",
        "(2+1i)/(z+3) - 0.5/(z-1.5i)^2",
        "poly(1, 2, -3i) + 1/(z-4)",
        "exp(2*z)",
        "exp(z) + 1/(z-2)",
        "2*log(z-4) + 1/(z-2)",
        "(1-2i)*(z+3)^0.25",
        "1 + 2 + 1/(z-3)",
    ],
)
def test_format_then_parse_is_identity(text):
    f = parse_function_expression(text)
    again = parse_function_expression(format_function(f))
    assert structure(again) == structure(f)


def test_parse_rejects_malformed_input():
    for bad in ["", "1/(z-2", "1/(x-2)", "log(z-4) + exp(z)", "(z-2)^2", "1/(z-2)^0", "1/(z-2) +", "poly()"]:
        with pytest.raises(ParseError):
            parse_function_expression(bad)


def test_true_poles_examples():
    assert true_poles(parse_function_expression("1/(z-2)")) == [(2, 1)]
    assert sorted(true_poles(parse_function_expression("1/(z-2)^2 + 1/(z-3)")), key=lambda p: p[0].real) == [
        (2, 2),
        (3, 1),
    ]
    assert true_poles(parse_function_expression("exp(z)")) == []


def test_function_invariants():
    with pytest.raises(ValueError):
        PoleTerm(2, (1, 0))
    with pytest.raises(ValueError):
        MeromorphicFunction((PoleTerm(2, (1,)), PoleTerm(2, (3,))))
    with pytest.raises(ValueError):
        PowBranch(3, 2.0)
    with pytest.raises(DomainError):
        parse_function_expression("1/(z-0.5)").check_domain(Disk(0, 1))
    with pytest.raises(ValueError):
        MultiIndex((1, 0))
    assert MultiIndex((2, 1)).total == 3
    assert MultiIndex((2, 1)).row_labels() == [(0, 0), (0, 1), (1, 0)]
    system = FunctionSystem((parse_function_expression("1/(z-2)"), parse_function_expression("exp(z)")))
    assert system.d == 2 and system.names == ("f1", "f2")
    assert not system.is_rational()


def test_residue_round_trip_on_small_circles():
    f = parse_function_expression("(1+2i)/(z-2)^2 - 3/(z-2) + 0.5/(z+3i)^3 + log(z-6)")
    for term in f.rational_part:
        r = 1e-1
        theta = 2 * np.pi * np.arange(256) / 256
        z = term.location + r * np.exp(1j * theta)
        vals = evaluate(f, z)
        for o in range(1, term.order + 1):
            # coefficient of (z - a)^{-o}: mean of vals * (z - a)^o
            c = np.mean(vals * (r * np.exp(1j * theta)) ** o)
            assert abs(c - term.laurent[o - 1]) <= 1e-6


def test_laurent_matrix_entry_against_expansion():
    term = PoleTerm(2 + 1j, (0.5, -1, 2j))
    for j in range(4):
        r = 1e-1
        theta = 2 * np.pi * np.arange(256) / 256
        z = term.location + r * np.exp(1j * theta)
        vals = z**j * term(z)
        for o in range(1, 4):
            c = np.mean(vals * (r * np.exp(1j * theta)) ** o)
            assert abs(c - laurent_matrix_entry(term, j, o)) <= 1e-9


def test_scaling():
    f = parse_function_expression("1/(z-2) + log(z-4)")
    g = f.scaled(3)
    assert evaluate(g, 0.5) == pytest.approx(3 * evaluate(f, 0.5))
    with pytest.raises(ValueError):
        parse_function_expression("exp(z)").scaled(2)


coef = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False).filter(lambda c: abs(c) > 1e-3)
loc = st.complex_numbers(min_magnitude=1.5, max_magnitude=8, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(
    poles=st.lists(st.tuples(loc, st.lists(coef, min_size=1, max_size=3)), min_size=0, max_size=3),
    tail=st.one_of(
        st.none(),
        st.builds(LogBranch, loc, coef),
        st.builds(ExpTail, coef),
        st.builds(PowBranch, loc, st.floats(0.1, 0.9), coef),
        st.builds(PolynomialTail, st.lists(coef, min_size=1, max_size=3)),
    ),
)
def test_format_parse_round_trip_property(poles, tail):
    seen, terms = set(), []
    for a, lau in poles:
        if a not in seen:
            seen.add(a)
            terms.append(PoleTerm(a, tuple(lau)))
    if not terms and tail is None:
        tail = PolynomialTail((1.0,))
    f = MeromorphicFunction(tuple(terms), tail)
    assert structure(parse_function_expression(format_function(f))) == structure(f)
