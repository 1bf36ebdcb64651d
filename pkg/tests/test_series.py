from fractions import Fraction
from math import comb
from pathlib import Path
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from _padic_rigidity.padic import (
    EisensteinRing,
    PadicApprox,
    PrecisionError,
    RingMismatchError,
    ValuationRat,
    cyclotomic_minpoly,
)
from _padic_rigidity.series import (
    ChangeOfVariables,
    MultiSeries,
    binomial_series,
    change_of_vars_images,
    change_ring,
    evaluate,
    evaluation_ceiling,
    lift_variables,
    mult_change_of_vars,
    reduce_mod_pi,
    series_equal,
    substitute,
    truncate,
    unit_order,
    vp_factorial,
    xn_power_factor,
)


def zp(p=3, n=12):
    return EisensteinRing.base(p, n)


def two_vars(ring, D, items, polynomial=True):
    return MultiSeries.from_terms(ring, 2, D, items, polynomial=polynomial)


def test_vp_factorial():
    assert vp_factorial(16, 3) == 6
    assert vp_factorial(16, 2) == 15
    assert vp_factorial(2, 3) == 0


def test_binomial_series_small_exponent_is_a_polynomial():
    ring = zp()
    b = binomial_series(5, 16, ring)
    assert b.polynomial
    assert [b.coefficient_int((i,)) for i in range(7)] == [comb(5, i) for i in range(6)] + [0]


def test_binomial_series_negative_exponent():
    ring = zp(2, 10)
    b = binomial_series(-1, 6, ring)
    assert not b.polynomial
    assert [b.coefficient_int((i,)) for i in range(7)] == [(-1) ** i % 2 ** 10 for i in range(7)]


def test_binomial_series_needs_enough_exponent_digits():
    ring = zp(3, 12)
    with pytest.raises(PrecisionError, match="18"):
        binomial_series(PadicApprox(5, 12, 3), 16, ring)
    approx = binomial_series(PadicApprox(5, 18, 3), 16, ring)
    assert series_equal(approx, binomial_series(5, 16, ring))


@settings(max_examples=100, deadline=None)
@given(a=st.integers(min_value=0, max_value=3 ** 10), b=st.integers(min_value=0, max_value=3 ** 10))
def test_binomial_exponent_law(a, b):
    ring = zp(3, 8)
    lhs = binomial_series(a, 10, ring) * binomial_series(b, 10, ring)
    assert series_equal(lhs, binomial_series(a + b, 10, ring))


def test_truncated_product_drops_the_polynomial_flag():
    ring = zp()
    x = MultiSeries.variable(ring, 1, 3, 0)
    assert (x * x).polynomial
    assert not (x * x * x * x).polynomial
    assert (x * x * x * x).is_zero()


def test_truncate_cannot_raise_an_unknown_tail():
    ring = zp()
    s = binomial_series(-1, 4, ring)
    with pytest.raises(PrecisionError):
        truncate(s, 6)
    assert truncate(binomial_series(2, 4, ring), 6).polynomial


def test_shapes_and_rings_must_agree():
    a = MultiSeries.variable(zp(3, 12), 1, 4, 0)
    with pytest.raises(RingMismatchError):
        a + MultiSeries.variable(zp(3, 10), 1, 4, 0)
    with pytest.raises(ValueError):
        a + MultiSeries.variable(zp(3, 12), 1, 5, 0)


def test_substitute_on_the_diagonal():
    ring = zp()
    law = two_vars(ring, 6, [((1, 0), 1), ((0, 1), 1), ((1, 1), 1)])
    t = MultiSeries.variable(ring, 1, 6, 0)
    out = substitute(law, [t, t])
    assert dict(out.terms) == {(1,): (2,), (2,): (1,)}
    assert out.polynomial


def test_substitute_rejects_constant_terms():
    ring = zp()
    phi = MultiSeries.variable(ring, 1, 4, 0)
    with pytest.raises(ValueError):
        substitute(phi, [MultiSeries.variable(ring, 1, 4, 0) + 1])


def test_substitute_with_constants_expands_every_known_term():
    ring = zp(3, 6)
    phi = binomial_series(3, 3, ring) - 1  # 3X + 3X^2 + X^3
    g = MultiSeries.variable(ring, 1, 3, 0) + 3
    out = substitute(phi, [g], allow_constant=True)
    # phi(3 + T) = (4 + T)^3 - 1
    assert out.coefficient_int((0,)) == 63
    assert out.coefficient_int((1,)) == 48
    assert out.coefficient_int((2,)) == 12
    assert out.coefficient_int((3,)) == 1


def test_lift_variables_places_a_one_variable_series():
    ring = zp()
    b = binomial_series(2, 4, ring)
    lifted = lift_variables(b, 3, [2])
    assert dict(lifted.terms) == {(0, 0, 0): (1,), (0, 0, 1): (2,), (0, 0, 2): (1,)}


def test_identity_change_of_variables_returns_the_series():
    ring = zp()
    phi = two_vars(ring, 5, [((1, 0), 1), ((0, 2), 4)])
    assert mult_change_of_vars(phi, ChangeOfVariables.identity(2)) is phi


def test_change_of_variables_images():
    ring = zp(3, 6)
    cv = ChangeOfVariables.unitriangular(2, {(1, 0): 2}, 3, 10)
    g0, g1 = change_of_vars_images(cv, ring, 4)
    assert dict(g0.terms) == {(1, 0): (1,)}
    # (1+Y)(1+X)^2 - 1
    assert dict(g1.terms) == {(1, 0): (2,), (2, 0): (1,), (0, 1): (1,), (1, 1): (2,), (2, 1): (1,)}


def test_change_of_variables_inverse_undoes_it():
    ring = zp(3, 6)
    phi = two_vars(ring, 8, [((0, 1), 1), ((1, 1), 5), ((3, 0), 7)])
    cv = ChangeOfVariables.unitriangular(2, {(1, 0): 2}, 3, 10)
    there = mult_change_of_vars(phi, cv)
    back = mult_change_of_vars(there, cv.inverse())
    assert series_equal(back, phi)


def test_permutation_inverse():
    cv = ChangeOfVariables((2, 0, 1))
    assert cv.inverse().permutation == (1, 2, 0)
    with pytest.raises(ValueError):
        ChangeOfVariables((0, 0, 1))
    with pytest.raises(ValueError):
        ChangeOfVariables((0, 1), {(0, 1): PadicApprox(1, 3, 3)})


def test_change_of_variables_json():
    cv = ChangeOfVariables.unitriangular(3, {(1, 0): 4, (2, 1): 0, (2, 0): 7}, 3, 5, permutation=(1, 0, 2))
    payload = cv.to_json()
    assert payload["permutation"] == [1, 0, 2]
    assert [(e["i"], e["j"]) for e in payload["matrix"]] == [(1, 0), (2, 0)]
    assert ChangeOfVariables.from_json(payload, 3) == cv


def test_xn_power_factor():
    ring = zp()
    phi = two_vars(ring, 8, [((2, 0), 1), ((2, 1), 1), ((1, 0), 3)])
    M, psi = xn_power_factor(phi, 0)
    assert M == 2
    assert psi.degree_bound == 6
    assert dict(psi.terms) == {(0, 0): (1,), (0, 1): (1,)}
    with pytest.raises(ValueError):
        xn_power_factor(two_vars(ring, 8, [((1, 0), 3)]), 0)


def test_unit_order():
    ring = zp()
    assert unit_order(MultiSeries.from_terms(ring, 1, 6, [((1,), 3), ((3,), 1), ((4,), 5)])) == 3
    assert unit_order(MultiSeries.from_terms(ring, 1, 6, [((1,), 3)])) is None


def test_evaluation_ceiling_of_a_truncated_series():
    ring = EisensteinRing(3, cyclotomic_minpoly(3, 1), 12)
    phi = binomial_series(26, 16, zp(3, 12)) - 1
    point = [ring.uniformizer()]
    assert evaluation_ceiling(phi, point) == Fraction(17, 2)
    assert evaluate(phi, point).ceiling == Fraction(17, 2)


def test_polynomial_evaluation_matches_ring_arithmetic():
    ring = EisensteinRing(2, cyclotomic_minpoly(2, 3), 10)
    phi = binomial_series(5, 8, zp(2, 10)) - 1
    z = ring.uniformizer()
    value = evaluate(phi, [z])
    assert value.ceiling == 10
    assert value.raw == ((z + 1) ** 5 - 1).raw


def test_evaluation_outside_the_disk_is_rejected():
    ring = zp(3, 6)
    phi = MultiSeries.variable(ring, 1, 4, 0)
    with pytest.raises(ValueError):
        evaluate(phi, [ring.one()])


def test_small_points_law():
    p, N, D = 3, 6, 8
    base = zp(p, N)
    rng = np.random.default_rng(7)
    for trial in range(50):
        M = int(rng.integers(1, 5))
        items = [((i,), p * int(rng.integers(0, p ** (N - 1)))) for i in range(1, M)]
        items.append(((M,), int(rng.integers(1, p)) + p * int(rng.integers(0, p ** (N - 1)))))
        items += [((i,), int(rng.integers(0, p ** N))) for i in range(M + 1, D + 1)]
        phi = MultiSeries.from_terms(base, 1, D, items, polynomial=True)
        assert unit_order(phi) == M
        k = 2 + trial % 2
        ring = EisensteinRing(p, cyclotomic_minpoly(p, k), N)
        u = int(rng.choice([e for e in range(1, p ** k) if e % p]))
        z = (ring.uniformizer() + 1) ** u - 1
        v = z.valuation().value
        assert evaluate(phi, [z]).valuation() == ValuationRat(M * v)


def test_series_json_in_an_extension_ring():
    ring = EisensteinRing(2, cyclotomic_minpoly(2, 2), 8, label="cyclotomic-2")
    phi = MultiSeries.from_terms(ring, 2, 5, [((1, 0), (1, 3)), ((2, 1), (5, 0))])
    again = MultiSeries.from_json(phi.to_json())
    assert again == phi
    assert again.to_json()["coeff_ring"]["label"] == "cyclotomic-2"


@pytest.mark.parametrize("p, k", [(2, 3), (3, 2), (5, 1)])
def test_cyclotomic_minpoly_times_lower_level_is_the_full_relation(p, k):
    # Phi_{p^k}(1+X) * ((1+X)^(p^(k-1)) - 1) = (1+X)^(p^k) - 1
    ring = zp(p, 12)
    D = p ** k
    phi = MultiSeries.from_terms(ring, 1, D, [((i,), c) for i, c in enumerate(cyclotomic_minpoly(p, k))],
                                 polynomial=True)
    lhs = phi * (binomial_series(p ** (k - 1), D, ring) - 1)
    assert series_equal(lhs, binomial_series(p ** k, D, ring) - 1)


def test_substitute_into_the_multiplicative_law():
    ring = zp()
    phi = two_vars(ring, 2, [((1, 1), 1)])
    x = MultiSeries.variable(ring, 2, 2, 0)
    y = MultiSeries.variable(ring, 2, 2, 1)
    out = substitute(phi, [x, (1 + x) * (1 + y) - 1])
    assert dict(out.terms) == {(2, 0): (1,), (1, 1): (1,)}


def test_substitute_small_examples():
    ring = zp()
    x = MultiSeries.variable(ring, 1, 3, 0)
    assert dict(substitute(x * x, [x + x * x]).terms) == {(2,): (1,), (3,): (2,)}
    y = MultiSeries.variable(ring, 2, 3, 1)
    assert series_equal(substitute(MultiSeries.variable(ring, 2, 3, 0), [y, y]), y)


def _random_series(rng, ring, nvars, D, constant=False):
    items = []
    for _ in range(5):
        exp = [int(e) for e in rng.integers(0, 3, size=nvars)]
        if sum(exp) == 0 and not constant:
            continue
        items.append((exp, int(rng.integers(0, ring.modulus))))
    return MultiSeries.from_terms(ring, nvars, D, items)


def test_substitute_is_associative():
    ring = zp(3, 6)
    D = 5
    rng = np.random.default_rng(31)
    for _ in range(20):
        phi = _random_series(rng, ring, 2, D, constant=True)
        g = [_random_series(rng, ring, 2, D) for _ in range(2)]
        h = [_random_series(rng, ring, 2, D) for _ in range(2)]
        inner = [substitute(g_i, h) for g_i in g]
        assert series_equal(substitute(phi, inner), substitute(substitute(phi, g), h))


@pytest.mark.parametrize(
    "expr, expected",
    [
        ([((1, 0), 3), ((0, 1), 1)], {(0, 1): (1,)}),
        ([((0, 0), 3), ((1, 0), 1)], {(1, 0): (1,)}),
    ],
)
def test_reduce_mod_pi_examples(expr, expected):
    phi = two_vars(zp(), 4, expr)
    bar = reduce_mod_pi(phi)
    assert bar.ring.modulus == 3
    assert dict(bar.terms) == expected


def test_reduce_mod_pi_kills_the_middle_binomials():
    bar = reduce_mod_pi(binomial_series(3, 6, zp()) - 1)
    assert dict(bar.terms) == {(3,): (1,)}


def test_series_over_a_lower_cyclotomic_level_evaluates_higher_up():
    low = EisensteinRing(3, cyclotomic_minpoly(3, 1), 10, label="cyclotomic-1")
    high = EisensteinRing(3, cyclotomic_minpoly(3, 2), 10, label="cyclotomic-2")
    # X - (zeta_3 - 1)
    phi = MultiSeries.from_terms(low, 1, 4, [((1,), 1), ((0,), -low.uniformizer())], polynomial=True)
    lam = high.uniformizer()
    assert evaluate(phi, [(lam + 1) ** 3 - 1]).is_zero()
    assert evaluate(phi, [(lam + 1) ** 6 - 1]).valuation() == ValuationRat(Fraction(1, 2))
    assert evaluate(phi, [lam]).valuation() == ValuationRat(Fraction(1, 6))
    moved = change_ring(phi, high)
    assert moved.ring == high
    assert moved.coefficient((0,)) == (-((lam + 1) ** 3 - 1)).raw


def test_series_cannot_descend_the_tower():
    low = EisensteinRing(3, cyclotomic_minpoly(3, 1), 10)
    high = EisensteinRing(3, cyclotomic_minpoly(3, 2), 10)
    phi = MultiSeries.from_terms(high, 1, 4, [((1,), 1), ((0,), high.uniformizer())], polynomial=True)
    with pytest.raises(RingMismatchError):
        evaluate(phi, [low.uniformizer()])
    with pytest.raises(RingMismatchError):
        change_ring(phi, low)
