"""Lubin-Tate formal groups over Z_p with uniformizer p.

Given f = pX + ... with f = X^p mod p, the group law L(X, Y) and the
endomorphisms [a](X) are the unique series commuting with f. Both are solved
total degree by total degree: writing Phi = Phi_<d + Phi_d,

    (p - p^d) Phi_d = [Phi_<d(f(X_1), ..., f(X_n))]_d - [f(Phi_<d)]_d,

and the right-hand side is divisible by p. Each step divides by p once, so the
solver works at precision N + D and truncates to N at the end.
"""
from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field
from functools import reduce
from typing import Dict, List, Optional, Tuple

import numpy as np
import sympy

from .padic import (
    EisensteinRing,
    PadicApprox,
    PrecisionError,
    RingElement,
    Scalar,
    is_eisenstein,
)
from .series import (
    ChangeOfVariables,
    MultiSeries,
    change_ring,
    evaluate,
    first_difference,
    lift_variables,
    substitute,
)

logger = logging.getLogger(__name__)

KINDS = ("cyclotomic", "standard", "custom")


@dataclass(frozen=True)
class LTParams:
    """Base prime p (uniformizer p, residue field F_p) and the series f.

    Custom f is given by exact integer coefficients {degree: coefficient};
    a non-polynomial custom f is only known up to `f_degree_bound`.
    """

    prime: int
    kind: str = "cyclotomic"
    f_coeffs: Tuple[Tuple[int, int], ...] = ()
    f_polynomial: bool = True
    f_degree_bound: Optional[int] = None

    def __post_init__(self):
        if not sympy.isprime(self.prime):
            raise ValueError(f"{self.prime} is not prime")
        if self.kind not in KINDS:
            raise ValueError(f"unknown Lubin-Tate series kind {self.kind!r}")
        if self.kind == "custom" and not self.f_coeffs:
            raise ValueError("custom Lubin-Tate params need f coefficients")
        check_congruences(self.prime, self.f_integer_coeffs())

    @classmethod
    def cyclotomic(cls, p: int) -> "LTParams":
        return cls(p, "cyclotomic")

    @classmethod
    def standard(cls, p: int) -> "LTParams":
        return cls(p, "standard")

    def f_integer_coeffs(self) -> Dict[int, int]:
        p = self.prime
        if self.kind == "cyclotomic":
            return {i: math.comb(p, i) for i in range(1, p + 1)}
        if self.kind == "standard":
            return {1: p, p: 1}
        return dict(self.f_coeffs)

    def f_series(self, ring: EisensteinRing, D: int) -> MultiSeries:
        if self.f_degree_bound is not None and D > self.f_degree_bound:
            raise PrecisionError(f"f is only known up to degree {self.f_degree_bound}, degree {D} requested")
        items = [((i,), c) for i, c in self.f_integer_coeffs().items()]
        return MultiSeries.from_terms(ring, 1, D, items, polynomial=self.f_polynomial)

    def to_json(self) -> dict:
        if self.kind != "custom":
            return {"p": self.prime, "f": self.kind}
        return {
            "p": self.prime,
            "f": {
                "terms": [{"exp": [i], "coeff": str(c)} for i, c in self.f_coeffs],
                "polynomial": self.f_polynomial,
                "degree_bound": self.f_degree_bound,
            },
        }

    @classmethod
    def from_json(cls, payload: dict) -> "LTParams":
        p = int(payload["p"])
        f = payload.get("f", "cyclotomic")
        if isinstance(f, str):
            return cls(p, f)
        coeffs = tuple(sorted((int(t["exp"][0]), int(t["coeff"])) for t in f["terms"]))
        polynomial = bool(f.get("polynomial", True))
        bound = f.get("degree_bound")
        return cls(p, "custom", coeffs, polynomial, None if polynomial or bound is None else int(bound))


def check_congruences(p: int, coeffs: Dict[int, int]) -> None:
    """f = pX mod X^2 and f = X^p mod p."""
    if coeffs.get(0, 0) != 0 or coeffs.get(1, 0) != p:
        raise ValueError(f"f must be {p}X mod X^2; got constant {coeffs.get(0, 0)}, linear {coeffs.get(1, 0)}")
    for i, c in coeffs.items():
        expected = 1 if i == p else 0
        if (c - expected) % p:
            raise ValueError(f"f is not X^{p} mod {p}: coefficient of X^{i} is {c}")
    if p not in coeffs:
        raise ValueError(f"f is not X^{p} mod {p}: X^{p} term missing")


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------

def _scalar_value(a: Scalar, p: int, working: int) -> int:
    if isinstance(a, PadicApprox):
        if a.prime != p:
            raise ValueError("scalar prime differs from Lubin-Tate prime")
        if a.precision < working:
            raise PrecisionError(
                f"scalar known mod {p}^{a.precision}; the solver needs working precision {working}"
            )
        return a.value
    return int(a)


def _solve_commuting(params: LTParams, linear: MultiSeries, D: int, N: int) -> MultiSeries:
    """Unique Phi = linear + O(deg 2) with f(Phi) = Phi(f(X_1), ..., f(X_n)) mod (p^N, deg D).

    `linear` lives in the working ring (precision N + D).
    """
    p = params.prime
    ring = linear.ring
    n = linear.nvars
    solved: Dict[Tuple[int, ...], Tuple[int, ...]] = dict(linear.terms)
    for d in range(2, D + 1):
        f_d = params.f_series(ring, d)
        partial = MultiSeries(ring, n, d, dict(solved), False)
        f_vars = [lift_variables(f_d, n, [i]) for i in range(n)]
        rhs = substitute(partial, f_vars)
        lhs = substitute(f_d, [partial])
        unit_inv = pow(1 - p ** (d - 1), -1, ring.modulus)
        known = {x: c for x, c in rhs.homogeneous(d).items()}
        for x, c in lhs.homogeneous(d).items():
            known[x] = ring._sub(known.get(x, ring._zero()), c)
        for x, c in known.items():
            t = PadicApprox(c[0], ring.precision, p)
            try:
                quotient = t.divide_by_p()
            except PrecisionError as exc:
                raise ValueError(f"degree {d} equation is not divisible by {p}; f is invalid") from exc
            value = (quotient.value * unit_inv) % ring.modulus
            if value:
                solved[x] = (value,)
        logger.debug("Lubin-Tate solver: degree %d, %d terms", d, len(solved))
    result = MultiSeries(ring, n, D, solved, False)
    return change_ring(result, EisensteinRing.base(p, N))


def lt_bracket(params: LTParams, a: Scalar, D: int, N: int) -> MultiSeries:
    """[a](X) mod (p^N, deg D)."""
    working = N + D
    value = _scalar_value(a, params.prime, working)
    ring = EisensteinRing.base(params.prime, working)
    linear = MultiSeries.from_terms(ring, 1, D, [((1,), value)], polynomial=True)
    return _solve_commuting(params, linear, D, N)


def lt_group_law(params: LTParams, D: int, N: int) -> MultiSeries:
    """L(X, Y) mod (p^N, deg D)."""
    ring = EisensteinRing.base(params.prime, N + D)
    linear = MultiSeries.from_terms(ring, 2, D, [((1, 0), 1), ((0, 1), 1)], polynomial=True)
    return _solve_commuting(params, linear, D, N)


def _compose_integer_poly(coeffs: Dict[int, int], times: int) -> sympy.Poly:
    x = sympy.Symbol("X")
    f = sympy.Poly(sum(c * x ** i for i, c in coeffs.items()), x)
    result = sympy.Poly(x, x)
    for _ in range(times):
        result = f.compose(result)
    return result


def lt_torsion_minpoly(params: LTParams, k: int) -> Tuple[int, ...]:
    """f^(k) / f^(k-1) as exact integers, low degree first."""
    if k < 1:
        raise ValueError("torsion level must be at least 1")
    if not params.f_polynomial:
        raise ValueError("the torsion minimal polynomial needs a polynomial f")
    coeffs = params.f_integer_coeffs()
    top = _compose_integer_poly(coeffs, k)
    below = _compose_integer_poly(coeffs, k - 1)
    quotient, remainder = top.div(below)
    if not remainder.is_zero:
        raise ValueError(f"f^({k}) is not divisible by f^({k - 1}); f is invalid")
    poly = tuple(int(c) for c in reversed(quotient.all_coeffs()))
    if not is_eisenstein(poly, params.prime):
        raise ValueError(f"level-{k} torsion polynomial is not Eisenstein")
    return poly


class LTGroup:
    """A Lubin-Tate group at fixed (D, N) with cached brackets and torsion rings."""

    def __init__(self, params: LTParams, degree_bound: int, precision: int):
        self.params = params
        self.degree_bound = degree_bound
        self.precision = precision
        self._law: Optional[MultiSeries] = None
        self._brackets: Dict[int, MultiSeries] = {}
        self._rings: Dict[int, EisensteinRing] = {}
        self._lock = threading.RLock()

    @property
    def prime(self) -> int:
        return self.params.prime

    @property
    def tag(self) -> str:
        return f"lubin-tate:{self.params.kind}"

    @property
    def law(self) -> MultiSeries:
        with self._lock:
            if self._law is None:
                logger.info("Solving the %s group law (p=%d, D=%d, N=%d)", self.params.kind,
                            self.prime, self.degree_bound, self.precision)
                self._law = lt_group_law(self.params, self.degree_bound, self.precision)
            return self._law

    def bracket(self, a: int) -> MultiSeries:
        key = int(a) % self.prime ** (self.precision + self.degree_bound)
        with self._lock:
            if key not in self._brackets:
                self._brackets[key] = lt_bracket(self.params, key, self.degree_bound, self.precision)
            return self._brackets[key]

    def torsion_ring(self, k: int) -> EisensteinRing:
        with self._lock:
            if k not in self._rings:
                self._rings[k] = EisensteinRing(
                    self.prime, lt_torsion_minpoly(self.params, k), self.precision,
                    label=f"LT-{self.params.kind}-{k}",
                )
            return self._rings[k]

    def apply_f(self, x: RingElement, times: int = 1) -> RingElement:
        """f applied exactly; f is a polynomial here."""
        coeffs = self.params.f_integer_coeffs()
        for _ in range(times):
            total = x.parent.zero().with_ceiling(x.ceiling)
            for i, c in coeffs.items():
                total = total + (x ** i) * c
            x = total
        return x

    def torsion_point(self, k: int, u: int) -> RingElement:
        return lt_torsion_point(self, k, u)


def lt_torsion_point(group: LTGroup, k: int, u: int) -> RingElement:
    """[u](lambda_k) in E_k, lambda_k the class of X."""
    ring = group.torsion_ring(k)
    value = evaluate(group.bracket(u), [ring.uniformizer()])
    if not value.valuation().exact:
        raise PrecisionError(
            f"degree bound {group.degree_bound} cannot certify [{u}](lambda_{k}); ceiling {value.ceiling}"
        )
    return value


# ---------------------------------------------------------------------------
# Axioms
# ---------------------------------------------------------------------------

@dataclass
class AxiomReport:
    params: LTParams
    degree_bound: int
    precision: int
    trials: int
    passed: Dict[str, bool] = field(default_factory=dict)
    failures: Dict[str, dict] = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(self.passed.values())

    def record(self, name: str, lhs: MultiSeries, rhs: MultiSeries, **context) -> None:
        diff = first_difference(lhs, rhs)
        ok = diff is None
        self.passed[name] = self.passed.get(name, True) and ok
        if not ok and name not in self.failures:
            exp, left, right = diff
            self.failures[name] = {
                **{k: str(v) for k, v in context.items()},
                "exp": list(exp),
                "lhs": str(left[0]),
                "rhs": str(right[0]),
            }

    def to_json(self) -> dict:
        return {
            "lt_params": self.params.to_json(),
            "degree_bound": self.degree_bound,
            "precision": self.precision,
            "trials": self.trials,
            "passed": dict(sorted(self.passed.items())),
            "all_passed": self.all_passed,
            "failures": self.failures,
        }


def random_scalar(rng: np.random.Generator, p: int, digits: int) -> int:
    """A uniformly random residue mod p^digits built from base-p digits."""
    return sum(int(d) * p ** i for i, d in enumerate(rng.integers(0, p, size=digits)))


def verify_axioms(params: LTParams, D: int, N: int, trials: int, seed: int = 1,
                  group: Optional[LTGroup] = None) -> AxiomReport:
    """Check the module-law axioms mod (p^N, deg D) on `trials` random pairs plus a = b = 0."""
    group = group or LTGroup(params, D, N)
    p = params.prime
    ring = EisensteinRing.base(p, N)
    report = AxiomReport(params, D, N, trials)
    law = group.law
    x = MultiSeries.variable(ring, 1, D, 0)

    rng = np.random.default_rng(seed)
    pairs = [(0, 0)] + [(random_scalar(rng, p, N), random_scalar(rng, p, N)) for _ in range(trials)]
    for a, b in pairs:
        bracket_a, bracket_b = group.bracket(a), group.bracket(b)
        ax = lift_variables(bracket_a, 2, [0])
        ay = lift_variables(bracket_a, 2, [1])
        report.record("endomorphism", substitute(law, [ax, ay]), substitute(bracket_a, [law]), a=a)
        report.record("additive", substitute(law, [bracket_a, bracket_b]), group.bracket(a + b), a=a, b=b)
        report.record("multiplicative", substitute(bracket_a, [bracket_b]), group.bracket(a * b), a=a, b=b)
    report.record("frobenius", group.bracket(p), params.f_series(ring, D))
    report.record("unit", group.bracket(1), x)

    zero_pair = substitute(law, [MultiSeries.zero(ring, 1, D), MultiSeries.zero(ring, 1, D)])
    report.record("unit", zero_pair, MultiSeries.zero(ring, 1, D))
    law_x0 = substitute(law, [x, MultiSeries.zero(ring, 1, D)])
    report.record("unit", law_x0, x)
    swapped = substitute(law, [MultiSeries.variable(ring, 2, D, 1), MultiSeries.variable(ring, 2, D, 0)])
    report.record("commutative", swapped, law)
    for name, ok in sorted(report.passed.items()):
        logger.info("axiom %-14s %s", name, "pass" if ok else "FAIL")
    return report


# ---------------------------------------------------------------------------
# Changes of variables through the group law
# ---------------------------------------------------------------------------

def lt_change_of_vars(phi: MultiSeries, cv: ChangeOfVariables, group: LTGroup) -> MultiSeries:
    """X_i -> L(X_s(i), [B_i0](X_s(0)), ..., [B_i,i-1](X_s(i-1))) with s the permutation."""
    n = phi.nvars
    if cv.nvars != n:
        raise ValueError(f"change of variables on {cv.nvars} variables applied to {n}")
    if phi.degree_bound != group.degree_bound or phi.precision != group.precision:
        raise ValueError("series and group must share degree bound and precision")
    ring = phi.ring
    law = change_ring(group.law, ring)
    working = group.precision + group.degree_bound

    def combine(u: MultiSeries, v: MultiSeries) -> MultiSeries:
        return substitute(law, [u, v])

    images: List[MultiSeries] = []
    for i in range(n):
        parts = [MultiSeries.variable(ring, n, phi.degree_bound, cv.permutation[i])]
        for j in range(i):
            b = cv.entry(i, j)
            if b is None:
                continue
            bracket = group.bracket(_scalar_value(b, group.prime, working))
            parts.append(lift_variables(change_ring(bracket, ring), n, [cv.permutation[j]]))
        images.append(reduce(combine, parts))
    return substitute(phi, images)
