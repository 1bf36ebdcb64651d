"""Symbolic torsion points, their embedding into torsion rings, and scans.

A torsion point is a pair (k, u): for the multiplicative group it stands for
zeta_{p^k}^u - 1, for a Lubin-Tate group for [u](lambda_k). Points are kept
canonical (u a unit in [1, p^k), the origin is (0, 0)), so equal points have
equal data and all group operations are exponent arithmetic.

Inside the level-K ring, zeta_{p^k} = (1 + lambda_K)^(p^(K-k)) and
lambda_k = [p^(K-k)](lambda_K).
"""
from __future__ import annotations

import itertools
import logging
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import sympy
from tqdm import tqdm

from .lubin_tate import LTGroup
from .padic import (
    EisensteinRing,
    PrecisionError,
    RingElement,
    RingMismatchError,
    ValuationRat,
    cyclotomic_minpoly,
    min_valuation,
    vp_int,
)
from .series import ChangeOfVariables, MultiSeries, change_ring, evaluate
from .utils import chunked, format_rational, format_tuple, parse_tuple

logger = logging.getLogger(__name__)

DEFAULT_CAP = 10 ** 6


class MultiplicativeGroup:
    """The formal multiplicative group, torsion realized in cyclotomic rings."""

    tag = "multiplicative"

    def __init__(self, prime: int, precision: int):
        if not sympy.isprime(prime):
            raise ValueError(f"{prime} is not prime")
        self.prime = prime
        self.precision = precision
        self._rings: Dict[int, EisensteinRing] = {}
        self._lock = threading.Lock()

    def torsion_ring(self, k: int) -> EisensteinRing:
        with self._lock:
            if k not in self._rings:
                self._rings[k] = EisensteinRing(
                    self.prime, cyclotomic_minpoly(self.prime, k), self.precision, label=f"cyclotomic-{k}"
                )
            return self._rings[k]


Group = Union[MultiplicativeGroup, LTGroup]


def group_tag(group: Group) -> str:
    return group.tag


def coefficient_level(group: Group, ring: EisensteinRing) -> Optional[int]:
    """k when `ring` presents the level-k torsion ring of `group`, 0 for Z_p, else None."""
    if ring.is_base:
        return 0
    p = group.prime
    k = 1
    while (p - 1) * p ** (k - 1) <= ring.degree:
        if group.torsion_ring(k).minpoly == ring.minpoly:
            return k
        k += 1
    return None


# ---------------------------------------------------------------------------
# Symbolic points
# ---------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class TorsionPoint:
    level: int
    exponent: int

    @classmethod
    def origin(cls) -> "TorsionPoint":
        return cls(0, 0)

    @classmethod
    def from_exponent(cls, e: int, level: int, p: int) -> "TorsionPoint":
        """The point with exponent e relative to the level-`level` generator."""
        e %= p ** level
        if e == 0:
            return cls.origin()
        v = vp_int(e, p)
        return cls(level - v, e // p ** v)

    def is_origin(self) -> bool:
        return self.level == 0

    def exponent_at(self, level: int, p: int) -> int:
        """Exponent relative to the level-`level` generator, level >= self.level."""
        if level < self.level:
            raise ValueError(f"point of level {self.level} has no exponent at level {level}")
        return (self.exponent * p ** (level - self.level)) % p ** level

    def times(self, a: int, p: int) -> "TorsionPoint":
        return TorsionPoint.from_exponent(self.exponent * a, self.level, p)

    def __str__(self):
        return f"{self.level}:{self.exponent}"


@dataclass(frozen=True, order=True)
class TorsionTuple:
    """Torsion points, one per coordinate; `group` tags the formal group they
    were built for ("" accepts any group) and takes no part in equality."""

    points: Tuple[TorsionPoint, ...]
    group: str = field(default="", compare=False)

    @classmethod
    def of(cls, coords: Sequence[Tuple[int, int]], p: int, group: str = "") -> "TorsionTuple":
        """Build from (level, exponent) pairs, canonicalizing each."""
        return cls(tuple(TorsionPoint.from_exponent(u, k, p) for k, u in coords), group)

    @classmethod
    def parse(cls, text: str, p: int, group: str = "") -> "TorsionTuple":
        return cls.of(parse_tuple(text), p, group)

    @property
    def nvars(self) -> int:
        return len(self.points)

    @property
    def level(self) -> int:
        return max((pt.level for pt in self.points), default=0)

    def exponents(self, level: int, p: int) -> List[int]:
        return [pt.exponent_at(level, p) for pt in self.points]

    def times(self, a: int, p: int) -> "TorsionTuple":
        return TorsionTuple(tuple(pt.times(a, p) for pt in self.points), self.group)

    def check_group(self, group: "Group") -> None:
        if self.group and self.group != group_tag(group):
            raise ValueError(f"tuple {self} was built for {self.group}, not {group_tag(group)}")

    def notation(self) -> str:
        return format_tuple([(pt.level, pt.exponent) for pt in self.points])

    def __str__(self):
        return self.notation()


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------

def _decode(index: int, n: int, base: int, K: int, p: int, group: str = "") -> TorsionTuple:
    exps = []
    for _ in range(n):
        index, e = divmod(index, base)
        exps.append(e)
    return TorsionTuple(tuple(TorsionPoint.from_exponent(e, K, p) for e in reversed(exps)), group)


def enumerate_torsion(
    K: int,
    n: int,
    p: int,
    mode: str = "exhaustive",
    count: int = 200,
    seed: int = 1,
    cap: int = DEFAULT_CAP,
    group: str = "",
) -> Iterator[TorsionTuple]:
    """Every n-tuple of torsion points of level <= K, or a seeded sample of them."""
    if K < 0 or n < 1:
        raise ValueError("need K >= 0 and at least one coordinate")
    base = p ** K
    total = base ** n
    if mode == "exhaustive":
        if total > cap:
            raise ValueError(f"{total} tuples exceed the cap of {cap}; use sample mode")
        for exps in itertools.product(range(base), repeat=n):
            yield TorsionTuple(tuple(TorsionPoint.from_exponent(e, K, p) for e in exps), group)
        return
    if mode != "sample":
        raise ValueError(f"unknown enumeration mode {mode!r}")
    if count < 1:
        raise ValueError("sample count must be positive")
    rng = np.random.default_rng(seed)
    size = min(count, total)
    if total < 2 ** 62:
        indices = sorted(int(i) for i in rng.choice(total, size=size, replace=False))
    else:
        chosen = set()
        while len(chosen) < size:
            digits = rng.integers(0, p, size=n * K)
            chosen.add(sum(int(d) * p ** i for i, d in enumerate(digits)))
        indices = sorted(chosen)
    for index in indices:
        yield _decode(index, n, base, K, p, group)


# ---------------------------------------------------------------------------
# Embedding
# ---------------------------------------------------------------------------

class TorsionEmbedding:
    """Torsion points of level <= K realized in the single level-K ring.

    Series with coefficients over a level-k torsion ring, k <= K, are carried
    into the level-K ring along lambda_k -> the embedded point (k, 1).
    """

    def __init__(self, group: Group, K: int):
        self.group = group
        self.K = K
        self.prime = group.prime
        self.ring = group.torsion_ring(K) if K else EisensteinRing.base(group.prime, group.precision)
        self._cache: Dict[TorsionPoint, RingElement] = {}
        self._carried: Dict[int, Tuple[MultiSeries, MultiSeries, Fraction]] = {}
        self._lock = threading.Lock()
        self._exact_powers = isinstance(group, MultiplicativeGroup) or group.params.kind == "cyclotomic"

    def point(self, pt: TorsionPoint) -> RingElement:
        if pt.level > self.K:
            raise ValueError(f"point {pt} exceeds embedding level {self.K}")
        with self._lock:
            hit = self._cache.get(pt)
        if hit is not None:
            return hit
        value = self._compute(pt)
        with self._lock:
            self._cache[pt] = value
        return value

    def _compute(self, pt: TorsionPoint) -> RingElement:
        ring = self.ring
        if pt.is_origin():
            return ring.zero()
        if self._exact_powers:
            one_plus = ring.uniformizer() + 1
            return one_plus ** pt.exponent_at(self.K, self.prime) - 1
        group: LTGroup = self.group
        image = evaluate(group.bracket(pt.exponent), [ring.uniformizer()])
        return group.apply_f(image, self.K - pt.level)

    def tuple(self, t: TorsionTuple) -> List[RingElement]:
        t.check_group(self.group)
        return [self.point(pt) for pt in t.points]

    def carry(self, phi: MultiSeries) -> Tuple[MultiSeries, Fraction]:
        """phi over the level-K ring, and the ceiling its carried coefficients are certified to."""
        source = phi.ring
        if source.is_base or source.minpoly == self.ring.minpoly:
            return phi, Fraction(source.precision)
        with self._lock:
            hit = self._carried.get(id(phi))
        if hit is not None and hit[0] is phi:
            return hit[1], hit[2]
        k = coefficient_level(self.group, source)
        if k is None or k > self.K:
            raise RingMismatchError(f"coefficients over {source} do not embed at level {self.K}")
        image = self.point(TorsionPoint(k, 1))
        target = self.ring
        if target.precision > source.precision:
            target = target.with_precision(source.precision)
        moved = change_ring(phi, target, image.raw)
        with self._lock:
            self._carried[id(phi)] = (phi, moved, image.ceiling)
        logger.debug("carried a series over %s into %s", source, self.ring)
        return moved, image.ceiling

    def evaluate(self, phi: MultiSeries, t: TorsionTuple) -> RingElement:
        moved, ceiling = self.carry(phi)
        return evaluate(moved, self.tuple(t)).with_ceiling(ceiling)


def embed(t: TorsionTuple, K: int, group: Group) -> List[RingElement]:
    if t.level > K:
        raise ValueError(f"tuple {t} has level {t.level} > {K}")
    return TorsionEmbedding(group, K).tuple(t)


# ---------------------------------------------------------------------------
# Changes of variables on torsion
# ---------------------------------------------------------------------------

def action_on_torsion(cv: ChangeOfVariables, t: TorsionTuple, p: int) -> TorsionTuple:
    """Coordinate i becomes zeta_s(i) * prod_{j<i} zeta_s(j)^B[i,j]."""
    if cv.nvars != t.nvars:
        raise ValueError(f"change of variables on {cv.nvars} variables applied to a {t.nvars}-tuple")
    L = t.level
    precision = cv.exponent_precision()
    if precision is not None and precision < L:
        raise PrecisionError(f"exponents known mod p^{precision}, tuple level is {L}")
    exps = t.exponents(L, p)
    out = []
    for i in range(cv.nvars):
        e = exps[cv.permutation[i]]
        for j in range(i):
            b = cv.entry(i, j)
            if b is not None:
                e += b.value * exps[cv.permutation[j]]
        out.append(TorsionPoint.from_exponent(e, L, p))
    return TorsionTuple(tuple(out), t.group)


# ---------------------------------------------------------------------------
# Scans
# ---------------------------------------------------------------------------

IN, OUT, UNDECIDED = "in", "out", "undecided"


@dataclass
class ScanRecord:
    index: int
    tuple: TorsionTuple
    valuations: List[ValuationRat]
    ceiling: Fraction

    @property
    def min_valuation(self) -> ValuationRat:
        return min_valuation(self.valuations)

    @property
    def level(self) -> int:
        return self.tuple.level

    def classify(self, threshold: Fraction) -> str:
        """Every generator certified above the threshold, some certified at or below, or neither."""
        states = [v.classify(threshold) for v in self.valuations]
        if all(s == "above" for s in states):
            return IN
        if any(s == "at_most" for s in states):
            return OUT
        return UNDECIDED

    def to_json(self) -> dict:
        return {
            "tuple": self.tuple.notation(),
            "valuations": [v.to_json() for v in self.valuations],
            "min_valuation": self.min_valuation.to_json(),
            "ceiling": format_rational(self.ceiling),
        }


@dataclass
class LevelProfile:
    level: int
    tuples: int = 0
    certified: int = 0
    undecided: int = 0
    max_min_valuation: Optional[Fraction] = None
    witness: Optional[str] = None

    def add(self, record: ScanRecord) -> None:
        self.tuples += 1
        v = record.min_valuation
        if not v.exact:
            self.undecided += 1
            return
        self.certified += 1
        if self.max_min_valuation is None or v.value > self.max_min_valuation:
            self.max_min_valuation = v.value
            self.witness = record.tuple.notation()

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "tuples": self.tuples,
            "certified": self.certified,
            "undecided": self.undecided,
            "max_min_valuation": None if self.max_min_valuation is None else format_rational(self.max_min_valuation),
            "witness": self.witness,
        }


@dataclass
class ScanReport:
    prime: int
    K: int
    nvars: int
    group: str
    mode: str
    thresholds: List[Fraction]
    records: List[ScanRecord] = field(default_factory=list)

    def membership(self, threshold) -> Dict[str, List[TorsionTuple]]:
        threshold = Fraction(threshold)
        out = {IN: [], OUT: [], UNDECIDED: []}
        for r in self.records:
            out[r.classify(threshold)].append(r.tuple)
        return out

    def members(self, threshold) -> List[TorsionTuple]:
        """S_I(threshold)."""
        return self.membership(threshold)[IN]

    def undecided(self, threshold) -> List[TorsionTuple]:
        return self.membership(threshold)[UNDECIDED]

    def zeros(self) -> List[ScanRecord]:
        """Tuples where every generator vanishes to the certified ceiling."""
        return [r for r in self.records if not any(v.exact for v in r.valuations)]

    def profile(self) -> Dict[int, LevelProfile]:
        levels = {k: LevelProfile(k) for k in range(self.K + 1)}
        for r in self.records:
            levels[r.level].add(r)
        return levels

    def undecided_share(self) -> Fraction:
        """Share of tuples undecided at some threshold; without thresholds, of uncertified minima."""
        if not self.records:
            return Fraction(0)
        if self.thresholds:
            pending = sum(
                1 for r in self.records if any(r.classify(t) == UNDECIDED for t in self.thresholds)
            )
        else:
            pending = sum(1 for r in self.records if not r.min_valuation.exact)
        return Fraction(pending, len(self.records))

    def to_json(self) -> dict:
        sets = {}
        for t in self.thresholds:
            m = self.membership(t)
            sets[format_rational(t)] = {
                "members": [x.notation() for x in m[IN]],
                "undecided": [x.notation() for x in m[UNDECIDED]],
                "out_count": len(m[OUT]),
            }
        return {
            "p": self.prime,
            "level": self.K,
            "vars": self.nvars,
            "group": self.group,
            "mode": self.mode,
            "tuples": len(self.records),
            "records": [r.to_json() for r in self.records],
            "near_zero_sets": sets,
            "profile": [lp.to_json() for _, lp in sorted(self.profile().items())],
        }


def evaluate_tuple(ideal: Sequence[MultiSeries], embedding: TorsionEmbedding, t: TorsionTuple,
                   index: int = 0) -> ScanRecord:
    values = [embedding.evaluate(phi, t) for phi in ideal]
    return ScanRecord(index, t, [v.valuation() for v in values], min(v.ceiling for v in values))


def _scan_chunk(ideal, embedding, start: int, chunk: Sequence[TorsionTuple]) -> List[ScanRecord]:
    return [evaluate_tuple(ideal, embedding, t, start + offset) for offset, t in enumerate(chunk)]


def scan(
    ideal: Sequence[MultiSeries],
    K: int,
    thresholds: Sequence = (),
    group: Optional[Group] = None,
    mode: str = "exhaustive",
    count: int = 200,
    seed: int = 1,
    cap: int = DEFAULT_CAP,
    workers: int = 1,
    progress: bool = False,
    tuples: Optional[Sequence[TorsionTuple]] = None,
) -> ScanReport:
    """Evaluate every generator on the enumerated tuples and classify them."""
    if not ideal:
        raise ValueError("an ideal needs at least one generator")
    first = ideal[0]
    for phi in ideal[1:]:
        if phi.nvars != first.nvars or phi.ring != first.ring:
            raise ValueError("generators must share the number of variables and the coefficient ring")
    p = first.prime
    group = group or MultiplicativeGroup(p, first.precision)
    if group.prime != p:
        raise ValueError("group prime and series prime differ")
    if tuples is None:
        tuples = list(enumerate_torsion(K, first.nvars, p, mode, count, seed, cap, group_tag(group)))
    for t in tuples:
        t.check_group(group)
    thresholds = [Fraction(t) for t in thresholds]

    embedding = TorsionEmbedding(group, K)
    for phi in ideal:
        embedding.carry(phi)
    logger.info("Scanning %d tuples at level <= %d with %d generator(s), %d worker(s)",
                len(tuples), K, len(ideal), workers)
    records: List[Optional[ScanRecord]] = [None] * len(tuples)
    chunk_size = max(1, len(tuples) // (4 * max(1, workers)) or 1)
    with tqdm(total=len(tuples), disable=not progress, desc="scan", unit="tuple") as bar:
        if workers <= 1:
            for start, chunk in chunked(tuples, chunk_size):
                for rec in _scan_chunk(ideal, embedding, start, chunk):
                    records[rec.index] = rec
                bar.update(len(chunk))
        else:
            with ThreadPoolExecutor(max_workers=workers) as exe:
                futures = {
                    exe.submit(_scan_chunk, ideal, embedding, start, chunk): (start, len(chunk))
                    for start, chunk in chunked(tuples, chunk_size)
                }
                for future in as_completed(futures):
                    start, size = futures[future]
                    for rec in future.result():
                        records[rec.index] = rec
                    logger.debug("scan chunk at %d (%d tuples) done", start, size)
                    bar.update(size)

    report = ScanReport(p, K, first.nvars, group_tag(group), mode, thresholds, list(records))
    for t in thresholds:
        pending = report.undecided(t)
        if pending:
            logger.warning("%d tuple(s) undecided at threshold %s: certification ceiling too low",
                           len(pending), format_rational(t))
    return report


# ---------------------------------------------------------------------------
# Frobenius
# ---------------------------------------------------------------------------

def frobenius_congruence_check(phi: MultiSeries, t: TorsionTuple, K: int,
                               group: Optional[Group] = None) -> ValuationRat:
    """Certified valuation of phi([p] t) - phi(t)^p; the congruence says it is >= 1."""
    p = phi.prime
    group = group or MultiplicativeGroup(p, phi.precision)
    if t.level > K:
        raise ValueError(f"tuple {t} has level {t.level} > {K}")
    embedding = TorsionEmbedding(group, K)
    image = embedding.evaluate(phi, t.times(p, p))
    value = embedding.evaluate(phi, t)
    return (image - value ** p).valuation()
