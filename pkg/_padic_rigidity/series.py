"""Truncated multivariate power series over an EisensteinRing.

A MultiSeries keeps the terms of total degree <= degree_bound as a sparse map
from exponent tuples to raw ring coordinates. Absent terms are zero. A series
flagged `polynomial` is known to have no terms above its degree bound, so
evaluating it has no truncation tail.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from operator import add, itemgetter
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .padic import (
    EisensteinRing,
    PadicApprox,
    PrecisionError,
    Raw,
    RingElement,
    RingMismatchError,
    Scalar,
    ValuationRat,
    element_valuation,
    ring_embedding,
)

logger = logging.getLogger(__name__)

Exp = Tuple[int, ...]
Terms = Dict[Exp, Raw]


def _degree(exp: Exp) -> int:
    return sum(exp)


def vp_factorial(n: int, p: int) -> int:
    """Legendre's formula for v_p(n!)."""
    total, q = 0, p
    while q <= n:
        total += n // q
        q *= p
    return total


@dataclass(frozen=True, eq=False)
class MultiSeries:
    ring: EisensteinRing
    nvars: int
    degree_bound: int
    terms: Mapping[Exp, Raw] = field(default_factory=dict)
    polynomial: bool = False

    # construction ----------------------------------------------------------

    @classmethod
    def from_terms(
        cls,
        ring: EisensteinRing,
        nvars: int,
        degree_bound: int,
        items: Iterable[Tuple[Sequence[int], object]],
        polynomial: bool = False,
    ) -> "MultiSeries":
        """Coefficients may be ints, PadicApprox, RingElement or raw tuples."""
        if nvars < 1:
            raise ValueError("a series needs at least one variable")
        if degree_bound < 0:
            raise ValueError(f"negative degree bound {degree_bound}")
        terms: Terms = {}
        for exp, coeff in items:
            exp = tuple(int(x) for x in exp)
            if len(exp) != nvars or any(x < 0 for x in exp):
                raise ValueError(f"bad exponent {exp} for {nvars} variables")
            raw = _to_raw(ring, coeff)
            if exp in terms:
                raw = ring._add(terms[exp], raw)
            if _degree(exp) > degree_bound:
                if any(raw):
                    polynomial = False
                continue
            terms[exp] = raw
        return cls(ring, nvars, degree_bound, {k: v for k, v in terms.items() if any(v)}, polynomial)

    @classmethod
    def zero(cls, ring: EisensteinRing, nvars: int, degree_bound: int) -> "MultiSeries":
        return cls(ring, nvars, degree_bound, {}, True)

    @classmethod
    def constant(cls, ring: EisensteinRing, nvars: int, degree_bound: int, c=1) -> "MultiSeries":
        return cls.from_terms(ring, nvars, degree_bound, [((0,) * nvars, c)], polynomial=True)

    @classmethod
    def variable(cls, ring: EisensteinRing, nvars: int, degree_bound: int, index: int) -> "MultiSeries":
        exp = tuple(1 if i == index else 0 for i in range(nvars))
        return cls.from_terms(ring, nvars, degree_bound, [(exp, 1)], polynomial=True)

    # inspection ------------------------------------------------------------

    @property
    def prime(self) -> int:
        return self.ring.prime

    @property
    def precision(self) -> int:
        return self.ring.precision

    def coefficient(self, exp: Sequence[int]) -> Raw:
        return self.terms.get(tuple(exp), self.ring._zero())

    def coefficient_int(self, exp: Sequence[int]) -> int:
        """First coordinate of a coefficient; the coefficient itself over Z_p."""
        return self.coefficient(exp)[0]

    def is_zero(self) -> bool:
        return not self.terms

    def homogeneous(self, d: int) -> Terms:
        return {x: c for x, c in self.terms.items() if _degree(x) == d}

    def sorted_terms(self) -> List[Tuple[Exp, Raw]]:
        return sorted(self.terms.items(), key=lambda item: (_degree(item[0]), item[0]))

    def __eq__(self, other):
        if not isinstance(other, MultiSeries):
            return NotImplemented
        return (
            self.ring == other.ring
            and self.nvars == other.nvars
            and self.degree_bound == other.degree_bound
            and dict(self.terms) == dict(other.terms)
            and self.polynomial == other.polynomial
        )

    def __hash__(self):
        return hash((self.ring, self.nvars, self.degree_bound, frozenset(self.terms.items()), self.polynomial))

    def __repr__(self):
        shown = " + ".join(f"{c if len(c) > 1 else c[0]}*X^{x}" for x, c in self.sorted_terms()[:6])
        more = " + ..." if len(self.terms) > 6 else ""
        return f"MultiSeries(n={self.nvars}, D={self.degree_bound}, {shown or '0'}{more})"

    # operators -------------------------------------------------------------

    def __add__(self, other):
        return ms_add(self, _as_series(self, other))

    __radd__ = __add__

    def __sub__(self, other):
        return ms_add(self, -_as_series(self, other))

    def __rsub__(self, other):
        return ms_add(-self, _as_series(self, other))

    def __neg__(self):
        ring = self.ring
        return MultiSeries(ring, self.nvars, self.degree_bound,
                           {x: ring._neg(c) for x, c in self.terms.items()}, self.polynomial)

    def __mul__(self, other):
        return ms_mul(self, _as_series(self, other))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        return ms_pow(self, k)

    # serialization ---------------------------------------------------------

    def to_json(self) -> dict:
        ring = self.ring
        return {
            "p": ring.prime,
            "precision": ring.precision,
            "degree_bound": self.degree_bound,
            "vars": self.nvars,
            "coeff_ring": "Zp" if ring.is_base else ring.descriptor(),
            "polynomial": self.polynomial,
            "terms": [
                {"exp": list(x), "coeff": str(c[0]) if ring.is_base else [str(v) for v in c]}
                for x, c in self.sorted_terms()
            ],
        }

    @classmethod
    def from_json(cls, payload: dict) -> "MultiSeries":
        p = int(payload["p"])
        precision = int(payload["precision"])
        coeff_ring = payload.get("coeff_ring", "Zp")
        if coeff_ring == "Zp":
            ring = EisensteinRing.base(p, precision)
        else:
            ring = EisensteinRing.from_descriptor(coeff_ring)
            if ring.prime != p or ring.precision != precision:
                raise ValueError("coeff_ring descriptor disagrees with p / precision")
        items = []
        for term in payload.get("terms", []):
            coeff = term["coeff"]
            if isinstance(coeff, list):
                coeff = tuple(int(v) for v in coeff)
            else:
                coeff = int(coeff)
            items.append((term["exp"], coeff))
        return cls.from_terms(ring, int(payload["vars"]), int(payload["degree_bound"]), items,
                              bool(payload.get("polynomial", False)))


def _to_raw(ring: EisensteinRing, coeff) -> Raw:
    if isinstance(coeff, int):
        return ring._from_int(coeff)
    if isinstance(coeff, PadicApprox):
        if coeff.prime != ring.prime:
            raise RingMismatchError("coefficient prime differs from ring prime")
        return ring._from_int(coeff.value)
    if isinstance(coeff, RingElement):
        if coeff.parent != ring:
            raise RingMismatchError(f"coefficient lives in {coeff.parent}, not {ring}")
        return coeff.raw
    coeff = tuple(int(c) for c in coeff)
    if len(coeff) != ring.degree:
        raise ValueError(f"coefficient has {len(coeff)} coordinates, ring degree is {ring.degree}")
    return ring._reduce(list(coeff))


def _as_series(like: MultiSeries, other) -> MultiSeries:
    if isinstance(other, MultiSeries):
        return other
    if isinstance(other, (int, PadicApprox, RingElement)):
        return MultiSeries.constant(like.ring, like.nvars, like.degree_bound, other)
    return NotImplemented


def _check_shape(a: MultiSeries, b: MultiSeries) -> None:
    if a.ring != b.ring:
        raise RingMismatchError(f"series over different rings: {a.ring} vs {b.ring}")
    if a.nvars != b.nvars or a.degree_bound != b.degree_bound:
        raise ValueError(
            f"shape mismatch: ({a.nvars} vars, D={a.degree_bound}) vs ({b.nvars} vars, D={b.degree_bound})"
        )


# ---------------------------------------------------------------------------
# Ring operations
# ---------------------------------------------------------------------------

def ms_add(a: MultiSeries, b: MultiSeries) -> MultiSeries:
    _check_shape(a, b)
    ring = a.ring
    terms = dict(a.terms)
    for x, c in b.terms.items():
        if x in terms:
            s = ring._add(terms[x], c)
            if any(s):
                terms[x] = s
            else:
                del terms[x]
        else:
            terms[x] = c
    return MultiSeries(ring, a.nvars, a.degree_bound, terms, a.polynomial and b.polynomial)


def _mul_terms(ring: EisensteinRing, ta: Mapping[Exp, Raw], tb: Mapping[Exp, Raw], D: int) -> Tuple[Terms, bool]:
    """Truncated product of two term maps; the flag reports dropped products above D."""
    items_b = sorted(((_degree(x), x, c) for x, c in tb.items()), key=itemgetter(0))
    dropped = False
    e = ring.degree
    mod = ring.modulus
    if e == 1:
        acc: Dict[Exp, int] = {}
        for xa, ca in ta.items():
            a0 = ca[0]
            room = D - _degree(xa)
            for db, xb, cb in items_b:
                if db > room:
                    dropped = True
                    break
                key = tuple(map(add, xa, xb))
                acc[key] = acc.get(key, 0) + a0 * cb[0]
        out: Terms = {}
        for key, v in acc.items():
            v %= mod
            if v:
                out[key] = (v,)
        return out, dropped

    wide: Dict[Exp, List[int]] = {}
    width = 2 * e - 1
    for xa, ca in ta.items():
        room = D - _degree(xa)
        nz_a = [(i, ai) for i, ai in enumerate(ca) if ai]
        for db, xb, cb in items_b:
            if db > room:
                dropped = True
                break
            key = tuple(map(add, xa, xb))
            slot = wide.get(key)
            if slot is None:
                slot = wide[key] = [0] * width
            for j, bj in enumerate(cb):
                if bj:
                    for i, ai in nz_a:
                        slot[i + j] += ai * bj
    out = {}
    for key, slot in wide.items():
        raw = ring._reduce(slot)
        if any(raw):
            out[key] = raw
    return out, dropped


def ms_mul(a: MultiSeries, b: MultiSeries) -> MultiSeries:
    _check_shape(a, b)
    terms, dropped = _mul_terms(a.ring, a.terms, b.terms, a.degree_bound)
    return MultiSeries(a.ring, a.nvars, a.degree_bound, terms, a.polynomial and b.polynomial and not dropped)


def ms_pow(a: MultiSeries, k: int) -> MultiSeries:
    if k < 0:
        raise ValueError("negative powers of a series are not supported")
    result = MultiSeries.constant(a.ring, a.nvars, a.degree_bound, 1)
    base = a
    while k:
        if k & 1:
            result = ms_mul(result, base)
        k >>= 1
        if k:
            base = ms_mul(base, base)
    return result


def ms_scale(a: MultiSeries, c) -> MultiSeries:
    ring = a.ring
    raw = _to_raw(ring, c)
    terms = {}
    for x, v in a.terms.items():
        w = ring._mul(v, raw)
        if any(w):
            terms[x] = w
    return MultiSeries(ring, a.nvars, a.degree_bound, terms, a.polynomial)


# ---------------------------------------------------------------------------
# Reshaping
# ---------------------------------------------------------------------------

def truncate(a: MultiSeries, degree_bound: int) -> MultiSeries:
    """Lower the degree bound; raising it is only allowed for polynomials."""
    if degree_bound > a.degree_bound and not a.polynomial:
        raise PrecisionError(f"terms above degree {a.degree_bound} are unknown")
    terms = {x: c for x, c in a.terms.items() if _degree(x) <= degree_bound}
    polynomial = a.polynomial and len(terms) == len(a.terms)
    return MultiSeries(a.ring, a.nvars, degree_bound, terms, polynomial)


def change_ring(a: MultiSeries, ring: EisensteinRing, image: Optional[Raw] = None) -> MultiSeries:
    """Move coefficients to `ring` at equal or lower precision.

    `image` is where the class of X of the source ring goes; without it the
    embeddings of `ring_embedding` are used.
    """
    if ring == a.ring and image is None:
        return a
    if ring.prime != a.ring.prime:
        raise RingMismatchError("primes differ")
    if ring.precision > a.ring.precision:
        raise PrecisionError(f"cannot raise precision {a.ring.precision} to {ring.precision}")
    convert = ring_embedding(a.ring, ring, image)
    terms = {}
    for x, c in a.terms.items():
        raw = convert(c)
        if any(raw):
            terms[x] = raw
    return MultiSeries(ring, a.nvars, a.degree_bound, terms, a.polynomial)


def lift_variables(a: MultiSeries, nvars: int, indices: Sequence[int]) -> MultiSeries:
    """Place variable j of `a` at position indices[j] among `nvars` variables."""
    if len(indices) != a.nvars:
        raise ValueError("one target index per source variable is required")
    terms = {}
    for x, c in a.terms.items():
        target = [0] * nvars
        for j, idx in enumerate(indices):
            target[idx] += x[j]
        terms[tuple(target)] = c
    return MultiSeries(a.ring, nvars, a.degree_bound, terms, a.polynomial)


def series_equal(a: MultiSeries, b: MultiSeries) -> bool:
    """Equality mod (p^N, degree > D), ignoring the polynomial flag."""
    _check_shape(a, b)
    return dict(a.terms) == dict(b.terms)


def first_difference(a: MultiSeries, b: MultiSeries) -> Optional[Tuple[Exp, Raw, Raw]]:
    _check_shape(a, b)
    zero = a.ring._zero()
    keys = sorted(set(a.terms) | set(b.terms), key=lambda x: (_degree(x), x))
    for x in keys:
        ca, cb = a.terms.get(x, zero), b.terms.get(x, zero)
        if ca != cb:
            return x, ca, cb
    return None


# ---------------------------------------------------------------------------
# Binomial series and substitution
# ---------------------------------------------------------------------------

def binomial_series(m: Scalar, D: int, ring: EisensteinRing) -> MultiSeries:
    """(1+X)^m truncated at degree D, coefficients mod p^N of `ring`.

    The exponent m may be an exact integer or a PadicApprox known mod p^M;
    C(m, i) is computed from the least nonnegative lift of m, which is correct
    mod p^N as long as M >= N + v_p(D!).
    """
    p, n = ring.prime, ring.precision
    required = n + vp_factorial(D, p)
    if isinstance(m, PadicApprox):
        if m.prime != p:
            raise RingMismatchError("exponent prime differs from ring prime")
        if m.precision < required:
            raise PrecisionError(
                f"exponent known mod {p}^{m.precision}, degree {D} at precision {n} requires M >= {required}"
            )
        lifted = m.value
        polynomial = False
    else:
        m = int(m)
        polynomial = 0 <= m <= D
        lifted = m if m >= 0 else m % p ** required
    coeffs = []
    c = 1
    for i in range(D + 1):
        if i:
            c = c * (lifted - i + 1) // i
        coeffs.append(((i,), c))
        if c == 0:
            break
    return MultiSeries.from_terms(ring, 1, D, coeffs, polynomial=polynomial)


def substitute(phi: MultiSeries, g: Sequence[MultiSeries], allow_constant: bool = False) -> MultiSeries:
    """phi(g_1, ..., g_n) truncated at the common degree bound.

    With allow_constant the g_i may have constant terms of positive valuation;
    every known term of phi is then expanded and the caller accounts for the
    contribution of the unknown terms above phi's degree bound.
    """
    if len(g) != phi.nvars:
        raise ValueError(f"{phi.nvars} substitutions required, got {len(g)}")
    target = g[0]
    for gi in g:
        _check_shape(gi, target)
        if not allow_constant and (0,) * gi.nvars in gi.terms:
            raise ValueError("substituted series must have zero constant term")
    ring = target.ring
    if phi.ring != ring:
        phi = change_ring(phi, ring)
    if allow_constant or phi.polynomial:
        D = target.degree_bound
    else:
        D = min(phi.degree_bound, target.degree_bound)

    n_out = target.nvars
    zero_exp = (0,) * n_out
    one = ring._from_int(1)
    cache: Dict[Exp, Terms] = {(0,) * phi.nvars: {zero_exp: one}}
    dropped = [False]

    def monomial(exp: Exp) -> Terms:
        hit = cache.get(exp)
        if hit is not None:
            return hit
        j = max(i for i, x in enumerate(exp) if x)
        prev = exp[:j] + (exp[j] - 1,) + exp[j + 1:]
        terms, lost = _mul_terms(ring, monomial(prev), g[j].terms, D)
        dropped[0] = dropped[0] or lost
        cache[exp] = terms
        return terms

    acc: Terms = {}
    for exp, c in sorted(phi.terms.items(), key=lambda item: (_degree(item[0]), item[0])):
        if not allow_constant and _degree(exp) > D:
            continue
        for x, v in monomial(exp).items():
            w = ring._mul(c, v)
            acc[x] = ring._add(acc[x], w) if x in acc else w
    terms = {x: c for x, c in acc.items() if any(c)}
    polynomial = phi.polynomial and all(gi.polynomial for gi in g) and not dropped[0]
    return MultiSeries(ring, n_out, D, terms, polynomial)


# ---------------------------------------------------------------------------
# Multiplicative changes of variables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChangeOfVariables:
    """X_i -> (1+X_s(i)) * prod_{j<i} (1+X_s(j))^B[i,j] - 1 with s the permutation.

    Indices are 0-based. `matrix` holds the strictly lower triangular entries
    B[i, j] (j < i) as exponents mod p^K; absent entries are 0.
    """

    permutation: Tuple[int, ...]
    matrix: Mapping[Tuple[int, int], PadicApprox] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.permutation)
        if sorted(self.permutation) != list(range(n)):
            raise ValueError(f"{self.permutation} is not a permutation of 0..{n - 1}")
        for (i, j) in self.matrix:
            if not 0 <= j < i < n:
                raise ValueError(f"entry ({i}, {j}) is not strictly below the diagonal")
        object.__setattr__(self, "matrix", {k: v for k, v in self.matrix.items() if not v.is_zero()})

    @classmethod
    def identity(cls, n: int) -> "ChangeOfVariables":
        return cls(tuple(range(n)))

    @classmethod
    def unitriangular(cls, n: int, entries: Mapping[Tuple[int, int], int], p: int, precision: int,
                      permutation: Optional[Sequence[int]] = None) -> "ChangeOfVariables":
        perm = tuple(permutation) if permutation is not None else tuple(range(n))
        return cls(perm, {k: PadicApprox(v, precision, p) for k, v in entries.items()})

    @property
    def nvars(self) -> int:
        return len(self.permutation)

    def entry(self, i: int, j: int) -> Optional[PadicApprox]:
        return self.matrix.get((i, j))

    def is_identity(self) -> bool:
        return not self.matrix and self.permutation == tuple(range(self.nvars))

    def exponent_precision(self) -> Optional[int]:
        return min((v.precision for v in self.matrix.values()), default=None)

    def inverse(self) -> "ChangeOfVariables":
        """Inverse for a pure permutation or a pure unitriangular change."""
        n = self.nvars
        if not self.matrix:
            inv = [0] * n
            for i, s in enumerate(self.permutation):
                inv[s] = i
            return ChangeOfVariables(tuple(inv))
        if self.permutation != tuple(range(n)):
            raise ValueError("inverse is only available without a permutation or without a matrix")
        # (I + B)^-1 by forward substitution, column by column
        some = next(iter(self.matrix.values()))
        p, prec = some.prime, self.exponent_precision()
        mod = p ** prec
        inv: Dict[Tuple[int, int], int] = {}
        for j in range(n):
            for i in range(j + 1, n):
                acc = self.matrix[(i, j)].value if (i, j) in self.matrix else 0
                for k in range(j + 1, i):
                    b = self.matrix.get((i, k))
                    if b is not None and (k, j) in inv:
                        acc += b.value * inv[(k, j)]
                inv[(i, j)] = (-acc) % mod
        return ChangeOfVariables(self.permutation, {k: PadicApprox(v, prec, p) for k, v in inv.items()})

    def to_json(self) -> dict:
        return {
            "permutation": list(self.permutation),
            "matrix": [
                {"i": i, "j": j, **v.to_json()} for (i, j), v in sorted(self.matrix.items())
            ],
        }

    @classmethod
    def from_json(cls, payload: dict, p: int) -> "ChangeOfVariables":
        entries = {
            (int(e["i"]), int(e["j"])): PadicApprox(int(e["value"]), int(e["modulus_exp"]), p)
            for e in payload.get("matrix", [])
        }
        return cls(tuple(int(s) for s in payload["permutation"]), entries)


def change_of_vars_images(cv: ChangeOfVariables, ring: EisensteinRing, D: int) -> List[MultiSeries]:
    """The series g_i substituted for X_i."""
    n = cv.nvars
    images = []
    for i in range(n):
        factor = MultiSeries.variable(ring, n, D, cv.permutation[i]) + 1
        for j in range(i):
            b = cv.entry(i, j)
            if b is None:
                continue
            binom = binomial_series(b, D, ring)
            factor = factor * lift_variables(binom, n, [cv.permutation[j]])
        images.append(factor - 1)
    return images


def mult_change_of_vars(phi: MultiSeries, cv: ChangeOfVariables) -> MultiSeries:
    if cv.nvars != phi.nvars:
        raise ValueError(f"change of variables on {cv.nvars} variables applied to {phi.nvars}")
    if cv.is_identity():
        return phi
    return substitute(phi, change_of_vars_images(cv, phi.ring, phi.degree_bound))


# ---------------------------------------------------------------------------
# Residues and orders
# ---------------------------------------------------------------------------

def reduce_mod_pi(phi: MultiSeries) -> MultiSeries:
    """Coefficient-wise reduction to the residue field F_p (totally ramified rings)."""
    p = phi.ring.prime
    residue = EisensteinRing.base(p, 1)
    terms = {x: (c[0] % p,) for x, c in phi.terms.items() if c[0] % p}
    return MultiSeries(residue, phi.nvars, phi.degree_bound, terms, phi.polynomial)


def xn_power_factor(phi: MultiSeries, index: int) -> Tuple[int, MultiSeries]:
    """Largest M with X_index^M dividing phi mod pi, and psi with phi = X^M psi mod pi.

    psi keeps the full coefficients of the terms divisible by X_index^M; the
    remaining terms are multiples of pi. Its degree bound is D - M.
    """
    if not 0 <= index < phi.nvars:
        raise ValueError(f"variable index {index} out of range")
    bar = reduce_mod_pi(phi)
    if bar.is_zero():
        raise ValueError("series vanishes mod pi; divide by pi first")
    M = min(x[index] for x in bar.terms)
    if M > phi.degree_bound:
        raise PrecisionError(f"X^{M} exceeds the degree bound {phi.degree_bound}")
    terms = {}
    for x, c in phi.terms.items():
        if x[index] >= M:
            shifted = x[:index] + (x[index] - M,) + x[index + 1:]
            terms[shifted] = c
    psi = MultiSeries(phi.ring, phi.nvars, phi.degree_bound - M,
                      {x: c for x, c in terms.items() if _degree(x) <= phi.degree_bound - M},
                      phi.polynomial)
    return M, psi


def unit_order(phi: MultiSeries) -> Optional[int]:
    """Smallest degree with a unit coefficient, None when phi = 0 mod pi up to D."""
    if phi.nvars != 1:
        raise ValueError("unit_order is defined for one-variable series")
    p = phi.ring.prime
    degrees = [x[0] for x, c in phi.terms.items() if c[0] % p]
    return min(degrees) if degrees else None


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _lower_bound(v: ValuationRat) -> Fraction:
    return v.value


def evaluation_ceiling(phi: MultiSeries, point: Sequence[RingElement]) -> Fraction:
    """min(N, coordinate ceilings, (D+1) * min valuation) for non-polynomial phi."""
    ring = point[0].parent
    ceiling = Fraction(min(ring.precision, phi.ring.precision))
    min_val = None
    for x in point:
        ceiling = min(ceiling, x.ceiling)
        v = _lower_bound(element_valuation(x))
        min_val = v if min_val is None else min(min_val, v)
    if not phi.polynomial:
        ceiling = min(ceiling, (phi.degree_bound + 1) * min_val)
    return ceiling


def evaluate(phi: MultiSeries, point: Sequence[RingElement]) -> RingElement:
    """phi at a point of the open polydisk, with its certified ceiling attached."""
    if len(point) != phi.nvars:
        raise ValueError(f"{phi.nvars} coordinates required, got {len(point)}")
    ring = point[0].parent
    for x in point:
        if x.parent != ring:
            raise RingMismatchError("coordinates live in different rings")
        if ring.prime != phi.ring.prime:
            raise RingMismatchError("series and point have different primes")
        if _lower_bound(element_valuation(x)) <= 0:
            raise ValueError(f"coordinate {x.raw} is not in the open unit disk")
    ceiling = evaluation_ceiling(phi, point)

    scalar = phi.ring.is_base
    coeff = None if scalar else ring_embedding(phi.ring, ring)

    coords = [x.raw for x in point]
    zero_exp = (0,) * phi.nvars
    cache: Dict[Exp, Raw] = {zero_exp: ring._from_int(1)}

    def monomial(exp: Exp) -> Raw:
        hit = cache.get(exp)
        if hit is not None:
            return hit
        j = max(i for i, x in enumerate(exp) if x)
        prev = exp[:j] + (exp[j] - 1,) + exp[j + 1:]
        value = ring._mul(monomial(prev), coords[j])
        cache[exp] = value
        return value

    total = ring._zero()
    for exp, c in phi.terms.items():
        if scalar:
            term = ring._scale(monomial(exp), c[0])
        else:
            term = ring._mul(coeff(c), monomial(exp))
        total = ring._add(total, term)
    return RingElement(ring, total, ceiling)
