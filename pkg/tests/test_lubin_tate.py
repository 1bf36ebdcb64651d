from fractions import Fraction
from pathlib import Path
import sys

import numpy as np
import pytest
import sympy

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from _padic_rigidity.lubin_tate import (
    LTGroup,
    LTParams,
    lt_bracket,
    lt_change_of_vars,
    lt_group_law,
    lt_torsion_minpoly,
    lt_torsion_point,
    verify_axioms,
)
from _padic_rigidity.padic import EisensteinRing, PadicApprox, PrecisionError, ValuationRat
from _padic_rigidity.series import (
    ChangeOfVariables,
    MultiSeries,
    binomial_series,
    mult_change_of_vars,
    series_equal,
)


def test_params_validation():
    with pytest.raises(ValueError):
        LTParams(4)
    with pytest.raises(ValueError):
        LTParams(3, "custom", ((1, 3), (2, 1)))  # f = X^2 mod 3
    with pytest.raises(ValueError):
        LTParams(3, "custom", ((1, 3), (3, 3)))  # no unit X^3 term
    with pytest.raises(ValueError):
        LTParams(3, "custom", ((1, 1), (3, 1)))  # linear term is not 3X
    with pytest.raises(ValueError):
        LTParams(3, "other")


def test_params_json():
    custom = LTParams(3, "custom", ((1, 3), (3, 1), (5, 9)))
    assert LTParams.from_json(custom.to_json()) == custom
    assert LTParams.from_json({"p": 2, "f": "standard"}) == LTParams.standard(2)
    assert custom.f_integer_coeffs() == {1: 3, 3: 1, 5: 9}


def test_cyclotomic_group_law_is_multiplicative():
    ring = EisensteinRing.base(3, 12)
    expected = MultiSeries.from_terms(ring, 2, 16, [((1, 0), 1), ((0, 1), 1), ((1, 1), 1)])
    assert series_equal(lt_group_law(LTParams.cyclotomic(3), 16, 12), expected)


@pytest.mark.parametrize("p", [2, 3])
def test_cyclotomic_brackets_are_binomial(p):
    params = LTParams.cyclotomic(p)
    ring = EisensteinRing.base(p, 12)
    rng = np.random.default_rng(p)
    for a in [int(x) for x in rng.integers(0, p ** 12, size=50)]:
        assert series_equal(lt_bracket(params, a, 16, 12), binomial_series(a, 16, ring) - 1), a


def test_bracket_of_p_is_f():
    params = LTParams.cyclotomic(3)
    ring = EisensteinRing.base(3, 10)
    assert series_equal(lt_bracket(params, 3, 8, 10), params.f_series(ring, 8))


def test_bracket_of_one_and_zero():
    params = LTParams.standard(3)
    ring = EisensteinRing.base(3, 10)
    assert series_equal(lt_bracket(params, 1, 10, 10), MultiSeries.variable(ring, 1, 10, 0))
    assert lt_bracket(params, 0, 10, 10).is_zero()


def test_standard_bracket_two():
    params = LTParams.standard(3)
    N = 12
    bracket = lt_bracket(params, 2, 16, N)
    assert bracket.coefficient_int((1,)) == 2
    assert bracket.coefficient_int((2,)) == 0
    assert bracket.coefficient_int((3,)) == pow(4, -1, 3 ** N)
    assert bracket.coefficient_int((4,)) == 0


def _bracket_by_linear_solves(p, a, degree):
    """[a] for f = pX + X^p, one rational unknown per degree."""
    x, c = sympy.symbols("x c")

    def f(t):
        return p * t + t ** p

    g = a * x
    for d in range(2, degree + 1):
        trial = g + c * x ** d
        diff = sympy.Poly(sympy.expand(f(trial) - trial.subs(x, f(x))), x)
        (value,) = sympy.solve(diff.coeff_monomial(x ** d), c)
        g = g + value * x ** d
    return sympy.Poly(g, x)


@pytest.mark.parametrize("p, a", [(3, 2), (3, 4), (2, 3)])
def test_standard_bracket_is_the_unique_commuting_series(p, a):
    N, D = 10, 6
    bracket = lt_bracket(LTParams.standard(p), a, D, N)
    assert series_equal(bracket, lt_bracket(LTParams.standard(p), a, D, N))
    oracle = _bracket_by_linear_solves(p, a, D)
    for d in range(D + 1):
        value = sympy.Rational(oracle.coeff_monomial(sympy.Symbol("x") ** d))
        assert value.q % p != 0
        expected = (int(value.p) * pow(int(value.q), -1, p ** N)) % p ** N
        assert bracket.coefficient_int((d,)) == expected, d


def test_bracket_scalar_needs_working_precision():
    params = LTParams.standard(3)
    with pytest.raises(PrecisionError):
        lt_bracket(params, PadicApprox(2, 12, 3), 8, 12)
    lifted = lt_bracket(params, PadicApprox(2, 20, 3), 8, 12)
    assert series_equal(lifted, lt_bracket(params, 2, 8, 12))


def _brute_force_law(p, degree):
    """Coefficients of L up to `degree` for f = pX + X^p from a rational linear solve."""
    x, y = sympy.symbols("x y")
    unknowns = {}
    law = x + y
    for d in range(2, degree + 1):
        for i in range(d + 1):
            c = sympy.Symbol(f"c_{i}_{d - i}")
            unknowns[(i, d - i)] = c
            law += c * x ** i * y ** (d - i)

    def f(t):
        return p * t + t ** p

    diff = sympy.Poly(sympy.expand(f(law) - law.subs({x: f(x), y: f(y)}, simultaneous=True)), x, y)
    equations = [coeff for (i, j), coeff in diff.terms() if i + j <= degree]
    solution = sympy.solve(equations, list(unknowns.values()), dict=True)[0]
    return {exp: solution.get(sym, 0) for exp, sym in unknowns.items()}


def test_standard_law_low_degrees_match_a_linear_solve():
    p, N = 3, 10
    law = lt_group_law(LTParams.standard(p), 6, N)
    for (i, j), value in _brute_force_law(p, 3).items():
        value = sympy.Rational(value)
        expected = (int(value.p) * pow(int(value.q), -1, p ** N)) % p ** N
        assert law.coefficient_int((i, j)) == expected, (i, j)
    assert law.coefficient_int((1, 0)) == 1
    assert law.coefficient_int((0, 1)) == 1


@pytest.mark.parametrize(
    "params, k, expected",
    [
        (LTParams.cyclotomic(3), 1, (3, 3, 1)),
        (LTParams.standard(3), 1, (3, 0, 1)),
        (LTParams.cyclotomic(2), 2, (2, 2, 1)),
    ],
)
def test_torsion_minpolys(params, k, expected):
    assert lt_torsion_minpoly(params, k) == expected


def test_torsion_minpoly_degree():
    assert len(lt_torsion_minpoly(LTParams.standard(3), 2)) - 1 == 6


@pytest.mark.parametrize("p, K", [(2, 4), (3, 4)])
@pytest.mark.parametrize("kind", ["standard", "cyclotomic"])
def test_torsion_point_valuations(p, K, kind):
    group = LTGroup(LTParams(p, kind), 16, 8)
    for k in range(1, K + 1):
        for u in [u for u in (1, 2, 5, 7) if u % p and u < p ** k]:
            point = lt_torsion_point(group, k, u)
            assert point.valuation() == ValuationRat(Fraction(1, p ** k - p ** (k - 1)))


def test_cyclotomic_torsion_point_is_a_root_of_unity():
    group = LTGroup(LTParams.cyclotomic(3), 16, 10)
    point = lt_torsion_point(group, 2, 2)
    ring = group.torsion_ring(2)
    assert point.raw == ((ring.uniformizer() + 1) ** 2 - 1).raw
    assert point.ceiling == Fraction(17, 6)


def test_tower_compatibility():
    params = LTParams.standard(3)
    group = LTGroup(params, 8, 10)
    ring = group.torsion_ring(2)
    image = group.apply_f(ring.uniformizer())
    below = lt_torsion_minpoly(params, 1)
    value = ring.zero()
    for i, c in enumerate(below):
        value = value + image ** i * c
    assert value.is_zero()


def test_group_exposes_a_tag_and_caches_brackets():
    group = LTGroup(LTParams.standard(2), 8, 8)
    assert group.tag == "lubin-tate:standard"
    assert group.bracket(3) is group.bracket(3 + 2 ** 16)


def test_cyclotomic_axioms_pass():
    report = verify_axioms(LTParams.cyclotomic(3), 10, 8, trials=5, seed=4)
    assert report.all_passed
    assert set(report.passed) == {"endomorphism", "additive", "multiplicative", "frobenius", "unit", "commutative"}


@pytest.mark.parametrize("p", [2, 3])
def test_standard_axioms_pass(p):
    report = verify_axioms(LTParams.standard(p), 16, 12, trials=50, seed=11)
    assert report.all_passed, report.failures
    payload = report.to_json()
    assert payload["all_passed"] is True
    assert payload["failures"] == {}


def test_lt_change_of_vars_matches_multiplicative_for_cyclotomic_f():
    p, D, N = 3, 6, 6
    group = LTGroup(LTParams.cyclotomic(p), D, N)
    ring = EisensteinRing.base(p, N)
    phi = MultiSeries.from_terms(ring, 2, D, [((0, 1), 1), ((1, 1), 4), ((2, 0), 2)], polynomial=True)
    cv = ChangeOfVariables.unitriangular(2, {(1, 0): 5}, p, N + D, permutation=(1, 0))
    assert series_equal(lt_change_of_vars(phi, cv, group), mult_change_of_vars(phi, cv))


def test_lt_change_of_vars_shape_checks():
    group = LTGroup(LTParams.standard(3), 6, 6)
    phi = MultiSeries.variable(EisensteinRing.base(3, 6), 2, 5, 0)
    with pytest.raises(ValueError):
        lt_change_of_vars(phi, ChangeOfVariables.identity(2), group)
