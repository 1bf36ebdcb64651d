"""Exact arithmetic in Z/p^N and in totally ramified Eisenstein extensions.

Elements of an Eisenstein ring O = Z_p[X]/(g) are stored in the power basis
1, pi, ..., pi^(e-1) of the uniformizer class pi = X mod g, with integer
coordinates reduced mod p^N.

Valuation certificate: for a = sum_i c_i pi^i the terms c_i pi^i have
valuations v_p(c_i) + i/e whose fractional parts i/e are pairwise distinct,
so no two of them cancel and v(a) = min_i (v_p(c_i) + i/e). Every coordinate
is known mod p^N, hence an element is known up to valuation N; results of
truncated computations may carry a lower certified ceiling.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Callable, Optional, Sequence, Tuple, Union

import sympy

from .utils import format_rational, parse_rational

logger = logging.getLogger(__name__)

Raw = Tuple[int, ...]


class PrecisionError(ValueError):
    """A computation needs more p-adic digits than were supplied."""


class RingMismatchError(ValueError):
    """Elements of different coefficient rings were combined."""


def vp_int(n: int, p: int) -> Optional[int]:
    """v_p of a nonzero integer, None for 0."""
    if n == 0:
        return None
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


# ---------------------------------------------------------------------------
# Scalars
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PadicApprox:
    """An integer known modulo p^precision."""

    value: int
    precision: int
    prime: int

    def __post_init__(self):
        if self.precision < 0:
            raise ValueError(f"negative precision {self.precision}")
        object.__setattr__(self, "value", self.value % self.prime ** self.precision)

    @property
    def modulus(self) -> int:
        return self.prime ** self.precision

    def _coerce(self, other) -> "PadicApprox":
        if isinstance(other, PadicApprox):
            if other.prime != self.prime:
                raise RingMismatchError(f"primes differ: {self.prime} vs {other.prime}")
            return other
        if isinstance(other, int):
            return PadicApprox(other, self.precision, self.prime)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return PadicApprox(self.value + other.value, min(self.precision, other.precision), self.prime)

    __radd__ = __add__

    def __neg__(self):
        return PadicApprox(-self.value, self.precision, self.prime)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return PadicApprox(self.value * other.value, min(self.precision, other.precision), self.prime)

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return self.value == 0

    def is_unit(self) -> bool:
        return self.precision > 0 and self.value % self.prime != 0

    def divide_by_p(self) -> "PadicApprox":
        """Exact division by p; the result is known to one digit less."""
        if self.precision == 0 or self.value % self.prime:
            raise PrecisionError(
                f"{self.value} mod {self.prime}^{self.precision} is not divisible by {self.prime}"
            )
        return PadicApprox(self.value // self.prime, self.precision - 1, self.prime)

    def inverse(self) -> "PadicApprox":
        if not self.is_unit():
            raise ValueError(f"{self.value} is not a unit mod {self.prime}")
        return PadicApprox(pow(self.value, -1, self.modulus), self.precision, self.prime)

    def to_json(self) -> dict:
        return {"value": str(self.value), "modulus_exp": self.precision}

    @classmethod
    def from_json(cls, payload: dict, prime: int) -> "PadicApprox":
        return cls(int(payload["value"]), int(payload["modulus_exp"]), prime)

    def __str__(self):
        return f"{self.value} mod {self.prime}^{self.precision}"


@dataclass(frozen=True)
class ValuationRat:
    """An exact rational valuation, or the lower bound AtLeast(value)."""

    value: Fraction
    exact: bool = True

    def __post_init__(self):
        object.__setattr__(self, "value", Fraction(self.value))

    @classmethod
    def at_least(cls, bound) -> "ValuationRat":
        return cls(Fraction(bound), exact=False)

    def certainly_greater(self, threshold) -> bool:
        return self.value > Fraction(threshold)

    def certainly_at_least(self, threshold) -> bool:
        return self.value >= Fraction(threshold)

    def certainly_at_most(self, threshold) -> bool:
        return self.exact and self.value <= Fraction(threshold)

    def classify(self, threshold) -> str:
        """'above', 'at_most' or 'undecided' relative to a strict threshold."""
        if self.certainly_greater(threshold):
            return "above"
        if self.certainly_at_most(threshold):
            return "at_most"
        return "undecided"

    def __add__(self, other: "ValuationRat") -> "ValuationRat":
        return ValuationRat(self.value + other.value, self.exact and other.exact)

    def __str__(self):
        text = format_rational(self.value)
        return text if self.exact else f">={text}"

    def to_json(self) -> str:
        return str(self)

    @classmethod
    def from_json(cls, text: str) -> "ValuationRat":
        if text.startswith(">="):
            return cls.at_least(parse_rational(text[2:]))
        return cls(parse_rational(text))


def min_valuation(values: Sequence[ValuationRat]) -> ValuationRat:
    """Valuation of the minimum, certified as far as the inputs allow."""
    if not values:
        raise ValueError("empty valuation list")
    low = min(v.value for v in values)
    exact_low = [v for v in values if v.exact and v.value == low]
    return ValuationRat(low, exact=bool(exact_low))


def val_int(x: PadicApprox) -> ValuationRat:
    v = vp_int(x.value, x.prime)
    if v is None:
        return ValuationRat.at_least(x.precision)
    return ValuationRat(v)


# ---------------------------------------------------------------------------
# Eisenstein rings
# ---------------------------------------------------------------------------

def is_eisenstein(poly: Sequence[int], p: int) -> bool:
    """poly is given low degree first."""
    if len(poly) < 2 or poly[-1] != 1:
        return False
    if any(c % p for c in poly[:-1]):
        return False
    return poly[0] % (p * p) != 0


@lru_cache(maxsize=None)
def cyclotomic_minpoly(p: int, k: int) -> Raw:
    """Phi_{p^k}(1+X), the minimal polynomial of zeta_{p^k} - 1, low degree first."""
    if not sympy.isprime(p):
        raise ValueError(f"{p} is not prime")
    if k < 1:
        raise ValueError("level must be at least 1; use the base ring for level 0")
    x = sympy.Symbol("X")
    poly = sympy.Poly(sympy.cyclotomic_poly(p ** k, x), x).compose(sympy.Poly(x + 1, x))
    return tuple(int(c) for c in reversed(poly.all_coeffs()))


@dataclass(frozen=True)
class EisensteinRing:
    """Z_p[X]/(minpoly) modulo p^precision; minpoly is low degree first."""

    prime: int
    minpoly: Raw
    precision: int
    label: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "minpoly", tuple(int(c) for c in self.minpoly))
        if self.precision < 1:
            raise ValueError(f"precision must be positive, got {self.precision}")
        if not is_eisenstein(self.minpoly, self.prime):
            raise ValueError(f"{self.minpoly} is not Eisenstein at {self.prime}")

    @classmethod
    def base(cls, p: int, precision: int) -> "EisensteinRing":
        """Z_p itself, as Z_p[X]/(X - p): the class of X is p."""
        return cls(p, (-p, 1), precision, label="Zp")

    @property
    def degree(self) -> int:
        return len(self.minpoly) - 1

    @property
    def is_base(self) -> bool:
        return self.degree == 1

    @cached_property
    def modulus(self) -> int:
        return self.prime ** self.precision

    @cached_property
    def _reduction_tail(self) -> Raw:
        # X^e = -(m_0 + m_1 X + ... + m_{e-1} X^{e-1})
        return tuple((-c) % self.modulus for c in self.minpoly[:-1])

    def with_precision(self, precision: int) -> "EisensteinRing":
        return EisensteinRing(self.prime, self.minpoly, precision, self.label)

    # raw arithmetic on coordinate tuples ------------------------------------

    def _zero(self) -> Raw:
        return (0,) * self.degree

    def _from_int(self, n: int) -> Raw:
        return (n % self.modulus,) + (0,) * (self.degree - 1)

    def _add(self, a: Raw, b: Raw) -> Raw:
        mod = self.modulus
        return tuple((x + y) % mod for x, y in zip(a, b))

    def _sub(self, a: Raw, b: Raw) -> Raw:
        mod = self.modulus
        return tuple((x - y) % mod for x, y in zip(a, b))

    def _neg(self, a: Raw) -> Raw:
        mod = self.modulus
        return tuple((-x) % mod for x in a)

    def _scale(self, a: Raw, n: int) -> Raw:
        mod = self.modulus
        return tuple((x * n) % mod for x in a)

    def _mul(self, a: Raw, b: Raw) -> Raw:
        e = self.degree
        if e == 1:
            return ((a[0] * b[0]) % self.modulus,)
        prod = [0] * (2 * e - 1)
        for i, ai in enumerate(a):
            if ai:
                for j, bj in enumerate(b):
                    if bj:
                        prod[i + j] += ai * bj
        return self._reduce(prod)

    def _reduce(self, coeffs: Sequence[int]) -> Raw:
        """Reduce an integer polynomial in X (low degree first) modulo minpoly and p^N."""
        e = self.degree
        mod = self.modulus
        work = list(coeffs) + [0] * max(0, e - len(coeffs))
        tail = self._reduction_tail
        for d in range(len(work) - 1, e - 1, -1):
            c = work[d] % mod
            if c:
                base = d - e
                for i, t in enumerate(tail):
                    if t:
                        work[base + i] += c * t
        return tuple(c % mod for c in work[:e])

    def _is_zero(self, a: Raw) -> bool:
        return not any(a)

    def _valuation(self, a: Raw) -> Optional[Fraction]:
        best = None
        e = self.degree
        for i, c in enumerate(a):
            if c:
                cand = Fraction(vp_int(c, self.prime) * e + i, e)
                if best is None or cand < best:
                    best = cand
        return best

    # public constructors ---------------------------------------------------

    def element(self, coeffs: Sequence[int], ceiling=None) -> "RingElement":
        return RingElement(self, self._reduce(list(coeffs)), ceiling)

    def zero(self) -> "RingElement":
        return RingElement(self, self._zero())

    def one(self) -> "RingElement":
        return RingElement(self, self._from_int(1))

    def from_int(self, n: int) -> "RingElement":
        return RingElement(self, self._from_int(n))

    def uniformizer(self) -> "RingElement":
        """The class of X."""
        return self.element([0, 1])

    def embed_base(self, a: Raw) -> Raw:
        """Coordinates of a Z_p-scalar (a base-ring raw value) in this ring."""
        return self._from_int(a[0])

    def descriptor(self) -> dict:
        return {
            "p": self.prime,
            "minpoly": [str(c) for c in self.minpoly],
            "precision": self.precision,
            "label": self.label,
        }

    @classmethod
    def from_descriptor(cls, payload: dict) -> "EisensteinRing":
        return cls(
            int(payload["p"]),
            tuple(int(c) for c in payload["minpoly"]),
            int(payload["precision"]),
            payload.get("label", ""),
        )

    def __str__(self):
        return self.label or f"Zp[X]/({self.minpoly}) mod {self.prime}^{self.precision}"


def _check_same(a: "RingElement", b: "RingElement") -> None:
    if a.parent != b.parent:
        raise RingMismatchError(f"ring mismatch: {a.parent} vs {b.parent}")


@dataclass(frozen=True)
class RingElement:
    """An element of an EisensteinRing with its certified valuation ceiling.

    The stored coordinates agree with the true value up to an error of
    valuation >= ceiling. Sums and products of integral elements keep the
    smaller ceiling.
    """

    parent: EisensteinRing
    raw: Raw
    ceiling: Optional[Fraction] = None

    def __post_init__(self):
        top = Fraction(self.parent.precision)
        ceiling = top if self.ceiling is None else min(Fraction(self.ceiling), top)
        object.__setattr__(self, "ceiling", ceiling)

    @property
    def coeffs(self) -> Tuple[PadicApprox, ...]:
        p, n = self.parent.prime, self.parent.precision
        return tuple(PadicApprox(c, n, p) for c in self.raw)

    def _other(self, other) -> "RingElement":
        if isinstance(other, int):
            return self.parent.from_int(other)
        if isinstance(other, RingElement):
            _check_same(self, other)
            return other
        return NotImplemented

    def __add__(self, other):
        other = self._other(other)
        if other is NotImplemented:
            return other
        return RingElement(self.parent, self.parent._add(self.raw, other.raw), min(self.ceiling, other.ceiling))

    __radd__ = __add__

    def __neg__(self):
        return RingElement(self.parent, self.parent._neg(self.raw), self.ceiling)

    def __sub__(self, other):
        other = self._other(other)
        if other is NotImplemented:
            return other
        return RingElement(self.parent, self.parent._sub(self.raw, other.raw), min(self.ceiling, other.ceiling))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._other(other)
        if other is NotImplemented:
            return other
        return RingElement(self.parent, self.parent._mul(self.raw, other.raw), min(self.ceiling, other.ceiling))

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative powers are not supported")
        result = self.parent.one()
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return RingElement(self.parent, result.raw, min(result.ceiling, self.ceiling))

    def is_zero(self) -> bool:
        return self.parent._is_zero(self.raw)

    def valuation(self) -> ValuationRat:
        return element_valuation(self)

    def with_ceiling(self, ceiling) -> "RingElement":
        return RingElement(self.parent, self.raw, min(self.ceiling, Fraction(ceiling)))

    def agrees_with(self, other: "RingElement") -> bool:
        """True when the difference is certified zero up to both ceilings."""
        return not (self - other).valuation().exact

    def to_json(self) -> dict:
        return {
            "ring": self.parent.descriptor(),
            "coeffs": [str(c) for c in self.raw],
            "ceiling": format_rational(self.ceiling),
        }

    @classmethod
    def from_json(cls, payload: dict) -> "RingElement":
        ring = EisensteinRing.from_descriptor(payload["ring"])
        ceiling = payload.get("ceiling")
        return cls(ring, tuple(int(c) for c in payload["coeffs"]),
                   parse_rational(ceiling) if ceiling is not None else None)


def ring_add(a: RingElement, b: RingElement) -> RingElement:
    _check_same(a, b)
    return a + b


def ring_mul(a: RingElement, b: RingElement) -> RingElement:
    _check_same(a, b)
    return a * b


def cyclotomic_level(ring: EisensteinRing) -> Optional[int]:
    """k when `ring` is presented by cyclotomic_minpoly(p, k), else None."""
    p = ring.prime
    k = 1
    while (p - 1) * p ** (k - 1) <= ring.degree:
        if (p - 1) * p ** (k - 1) == ring.degree and ring.minpoly == cyclotomic_minpoly(p, k):
            return k
        k += 1
    return None


def ring_embedding(source: EisensteinRing, target: EisensteinRing,
                   image: Optional[Raw] = None) -> Callable[[Raw], Raw]:
    """Coordinate map source -> target sending the class of X to `image`.

    Without an image: reduction between presentations by the same minimal
    polynomial, the inclusion of Z_p, or the cyclotomic tower inclusion
    zeta_{p^k} - 1 -> (1 + lambda_K)^(p^(K-k)) - 1.
    """
    if source.prime != target.prime:
        raise RingMismatchError(f"primes differ: {source.prime} vs {target.prime}")
    if image is None:
        if source.minpoly == target.minpoly:
            return lambda c: target._reduce(list(c))
        if source.is_base:
            return target.embed_base
        k, K = cyclotomic_level(source), cyclotomic_level(target)
        if k is None or K is None or k > K:
            raise RingMismatchError(f"no embedding of {source} into {target}")
        image = ((target.uniformizer() + 1) ** (source.prime ** (K - k)) - 1).raw
    powers = [target._from_int(1)]
    for _ in range(1, source.degree):
        powers.append(target._mul(powers[-1], image))

    def convert(c: Raw) -> Raw:
        total = target._zero()
        for ci, power in zip(c, powers):
            if ci:
                total = target._add(total, target._scale(power, ci))
        return total

    return convert


def element_valuation(a: RingElement) -> ValuationRat:
    v = a.parent._valuation(a.raw)
    if v is None or v >= a.ceiling:
        return ValuationRat.at_least(a.ceiling)
    return ValuationRat(v)


Scalar = Union[int, PadicApprox]
