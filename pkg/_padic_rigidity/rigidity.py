"""Special-subscheme detection and the rigidity dichotomy at finite depth.

An ideal either vanishes along a torsion translate of a formal subtorus, or
its generators are bounded below (in absolute value) on all but finitely
many torsion tuples. Given a scan to level K this module looks for the first
branch through rank-1 translates

    X_i = zeta0_i * (1 + T)^(N_i) - 1,

verified by substitution, and otherwise reports the empirical constant C (a
valuation threshold) with the finite exception set F of tuples above it.
"""
from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .lubin_tate import LTGroup
from .padic import (
    EisensteinRing,
    PadicApprox,
    PrecisionError,
    RingElement,
    RingMismatchError,
    Scalar,
    ValuationRat,
    element_valuation,
    min_valuation,
)
from .series import (
    ChangeOfVariables,
    MultiSeries,
    binomial_series,
    change_ring,
    ms_scale,
    substitute,
    truncate,
)
from .torsion import (
    DEFAULT_CAP,
    Group,
    LevelProfile,
    MultiplicativeGroup,
    ScanReport,
    TorsionEmbedding,
    TorsionPoint,
    TorsionTuple,
    action_on_torsion,
    coefficient_level,
    group_tag,
    scan,
)
from .utils import format_rational

logger = logging.getLogger(__name__)

SPECIAL_FOUND = "special-found"
BOUNDED_BELOW = "bounded-below"
MAX_TRANSLATE_CANDIDATES = 64


@dataclass
class SpecialWitness:
    kind: str
    exponents: Tuple[PadicApprox, ...]
    translate: TorsionTuple
    residual: ValuationRat
    parameter: int = 0
    partial: bool = False
    swapped: bool = False

    @property
    def m(self) -> Optional[PadicApprox]:
        """The exponent of a binomial relation (1+Y) = xi0 (1+X)^m."""
        if self.kind != "binomial-relation":
            return None
        return self.exponents[1 - self.parameter]

    def to_json(self) -> dict:
        payload = {
            "kind": self.kind,
            "exponents": [e.to_json() for e in self.exponents],
            "translate": self.translate.notation(),
            "residual": self.residual.to_json(),
            "parameter": self.parameter,
            "partial": self.partial,
            "swapped": self.swapped,
        }
        if self.m is not None:
            payload["m"] = self.m.to_json()
        return payload


@dataclass
class Detection:
    witness: Optional[SpecialWitness]
    diagnostics: List[str] = field(default_factory=list)

    def __bool__(self):
        return self.witness is not None


# ---------------------------------------------------------------------------
# Translate verification
# ---------------------------------------------------------------------------

def _exponent_int(n: Scalar) -> int:
    return n.value if isinstance(n, PadicApprox) else int(n)


def _parametrization(embedding: TorsionEmbedding, exponents: Sequence[Scalar], translate: TorsionTuple,
                     D: int) -> Tuple[List[MultiSeries], Optional[Fraction], Optional[int]]:
    """The series X_i(T), the least valuation of a nonzero translate coordinate,
    and the degree bound of any non-polynomial group law that entered."""
    group = embedding.group
    ring = embedding.ring
    images = []
    v0 = None
    law_bound = None
    for n_i, pt in zip(exponents, translate.points):
        z = embedding.point(pt)
        if not pt.is_origin():
            v = z.valuation().value
            v0 = v if v0 is None else min(v0, v)
        if embedding._exact_powers:
            images.append(ms_scale(binomial_series(n_i, D, ring), z + 1) - 1)
            continue
        lt: LTGroup = group
        if D > lt.degree_bound:
            raise PrecisionError(f"group brackets are known to degree {lt.degree_bound}, {D} requested")
        bracket = change_ring(truncate(lt.bracket(_exponent_int(n_i)), D), ring)
        if pt.is_origin():
            images.append(bracket)
        else:
            law = change_ring(truncate(lt.law, D), ring)
            images.append(substitute(law, [MultiSeries.constant(ring, 1, D, z), bracket], allow_constant=True))
            law_bound = lt.degree_bound
    return images, v0, law_bound


def verify_subtorus_translate(phi: MultiSeries, exponents: Sequence[Scalar], translate: TorsionTuple,
                              D: int, precision: int, group: Optional[Group] = None) -> ValuationRat:
    """Residual of phi along X_i = zeta0_i (1+T)^(N_i) - 1.

    The T^j coefficient is certified up to min(N, (D_tail + 1 - j) v0) when a
    nonzero translate meets a truncated series; coefficients certified below
    valuation 1 are not examined. The translate lies in the zero locus when
    the residual is not exact.
    """
    if len(exponents) != phi.nvars or translate.nvars != phi.nvars:
        raise ValueError("one exponent and one translate coordinate per variable are required")
    group = group or MultiplicativeGroup(phi.prime, precision)
    if group.precision != precision:
        raise ValueError(f"group precision {group.precision} differs from {precision}")
    translate.check_group(group)
    level = coefficient_level(group, phi.ring)
    if level is None:
        raise RingMismatchError(f"{phi.ring} is not a torsion ring of {group_tag(group)}")
    embedding = TorsionEmbedding(group, max(translate.level, level))
    images, v0, law_bound = _parametrization(embedding, exponents, translate, D)
    ring = images[0].ring
    carried, coefficient_ceiling = embedding.carry(phi)
    psi = substitute(carried, images, allow_constant=v0 is not None)

    tails = [b for b in (None if phi.polynomial else phi.degree_bound, law_bound) if b is not None]
    vals = []
    for j in range(psi.degree_bound + 1):
        ceiling = min(Fraction(precision), coefficient_ceiling)
        if v0 is not None and tails:
            ceiling = min(ceiling, (min(tails) + 1 - j) * v0)
        if ceiling < 1:
            break
        vals.append(element_valuation(RingElement(ring, psi.coefficient((j,)), ceiling)))
    if not vals:
        raise PrecisionError("no coefficient of the restricted series is certified mod p")
    return min_valuation(vals)


def translate_holds(residual: ValuationRat) -> bool:
    return not residual.exact


def _lifts(value: int, modulus: int) -> List[int]:
    """Least nonnegative and least negative representatives."""
    value %= modulus
    return [value] if value == 0 else [value, value - modulus]


# ---------------------------------------------------------------------------
# Binomial relations in two variables
# ---------------------------------------------------------------------------

def detect_binomial_relation(
    phi: MultiSeries,
    K: int,
    N: Optional[int] = None,
    *,
    group: Optional[Group] = None,
    report: Optional[ScanReport] = None,
    workers: int = 1,
) -> Detection:
    """Find m and xi0 with phi vanishing on (1+Y) = xi0 (1+X)^m from the torsion zeros.

    Zeros over the level-k generators give m mod p^k by exact discrete logs;
    the relation is then verified by substitution. When Y is not a function
    of X the roles of the variables are switched.
    """
    if phi.nvars != 2:
        raise ValueError("binomial relations need a two-variable series")
    N = N or phi.precision
    group = group or MultiplicativeGroup(phi.prime, N)
    if report is None:
        report = scan([phi], K, group=group, workers=workers)
    zeros = [r.tuple for r in report.zeros()]
    diagnostics: List[str] = []
    for swapped in (False, True):
        x, y = (1, 0) if swapped else (0, 1)
        witness = _binomial_from_zeros(phi, zeros, K, N, group, x, y, report.mode == "exhaustive", diagnostics)
        if witness is not None:
            witness.swapped = swapped
            logger.info("binomial relation found: m = %s mod %d^%d", witness.m.value, phi.prime, witness.m.precision)
            return Detection(witness, diagnostics)
    for line in diagnostics:
        logger.debug("binomial detection: %s", line)
    return Detection(None, diagnostics)


def _binomial_from_zeros(phi, zeros, K, N, group, x, y, exhaustive, diagnostics) -> Optional[SpecialWitness]:
    p = phi.prime
    tag = "X->Y" if x == 0 else "Y->X"
    fibres: Dict[TorsionPoint, List[TorsionPoint]] = defaultdict(list)
    for t in zeros:
        fibres[t.points[x]].append(t.points[y])

    base = fibres.get(TorsionPoint.origin(), [])
    if len(base) != 1:
        diagnostics.append(f"[{tag}] {len(base)} zeros over the origin, need exactly one")
        return None
    xi0 = base[0]

    m, known = 0, 0
    for k in range(1, K + 1):
        over = fibres.get(TorsionPoint(k, 1), [])
        if len(over) != 1:
            diagnostics.append(f"[{tag}] {len(over)} zeros over the level-{k} generator")
            break
        xi = over[0]
        L = max(k, xi.level, xi0.level)
        e = (xi.exponent_at(L, p) - xi0.exponent_at(L, p)) % p ** L
        step = p ** (L - k)
        if e % step:
            diagnostics.append(f"[{tag}] zero {xi} over level {k} is not xi0 times a power of the generator")
            return None
        m_k = (e // step) % p ** k
        if m_k % p ** known != m % p ** known:
            diagnostics.append(f"[{tag}] incompatible exponents: {m_k} mod {p}^{k} vs {m} mod {p}^{known}")
            return None
        m, known = m_k, k
    if known == 0:
        diagnostics.append(f"[{tag}] no zero over the level-1 generator")
        return None

    if exhaustive:
        for k in range(1, known + 1):
            over_k = [t for t in zeros if t.points[x].level <= k]
            distinct = {t.points[x] for t in over_k}
            if len(over_k) != p ** k or len(distinct) != p ** k:
                diagnostics.append(f"[{tag}] {len(over_k)} zeros of level <= {k}, expected {p ** k}")
                return None

    translate = [TorsionPoint.origin(), TorsionPoint.origin()]
    translate[y] = xi0
    translate = TorsionTuple(tuple(translate), group_tag(group))
    for lift in _lifts(m, p ** known):
        exps = [0, 0]
        exps[x], exps[y] = 1, lift
        residual = verify_subtorus_translate(phi, exps, translate, phi.degree_bound, N, group)
        if translate_holds(residual):
            padic = [PadicApprox(0, known, p), PadicApprox(0, known, p)]
            padic[x] = PadicApprox(1, known, p)
            padic[y] = PadicApprox(m, known, p)
            return SpecialWitness("binomial-relation", tuple(padic), translate, residual,
                                  parameter=x, partial=known < K)
    diagnostics.append(f"[{tag}] m = {m} mod {p}^{known} fails verification")
    return None


# ---------------------------------------------------------------------------
# Rank-1 translates in n variables
# ---------------------------------------------------------------------------

def detect_subtorus_translate(
    ideal: Sequence[MultiSeries],
    zeros: Sequence[TorsionTuple],
    K: int,
    group: Optional[Group] = None,
    D: Optional[int] = None,
    N: Optional[int] = None,
    max_candidates: int = MAX_TRANSLATE_CANDIDATES,
) -> Detection:
    """Search zeta0 * zeta^N among the zeros and verify it on every generator.

    For a parameter variable j, a base zero zeta0 with zeta0_j = origin and a
    deep zero with coordinate j equal to the level-K generator fix N mod p^K;
    all predicted torsion points must be zeros before the series check runs.
    """
    diagnostics: List[str] = []
    if K < 1 or not zeros:
        diagnostics.append("no zeros of positive level")
        return Detection(None, diagnostics)
    first = ideal[0]
    p, n = first.prime, first.nvars
    D = D or first.degree_bound
    N = N or first.precision
    group = group or MultiplicativeGroup(p, N)
    zero_set = set(zeros)
    generator = TorsionPoint(K, 1)
    modulus = p ** K
    for j in range(n):
        bases = sorted(t for t in zeros if t.points[j].is_origin())
        deeps = sorted(t for t in zeros if t.points[j] == generator)
        tried = 0
        for base in bases:
            base_exps = base.exponents(K, p)
            for deep in deeps:
                if tried >= max_candidates:
                    break
                tried += 1
                direction = [(d - b) % modulus for d, b in zip(deep.exponents(K, p), base_exps)]
                predicted = (
                    TorsionTuple(tuple(TorsionPoint.from_exponent(b + s * d, K, p)
                                       for b, d in zip(base_exps, direction)))
                    for s in range(modulus)
                )
                if not all(t in zero_set for t in predicted):
                    continue
                balanced = [d - modulus if d > modulus // 2 else d for d in direction]
                for exps in (direction, balanced) if balanced != direction else (direction,):
                    residuals = [verify_subtorus_translate(phi, exps, base, D, N, group) for phi in ideal]
                    if all(translate_holds(r) for r in residuals):
                        witness = SpecialWitness(
                            "subtorus-translate",
                            tuple(PadicApprox(d, K, p) for d in direction),
                            base,
                            min_valuation(residuals),
                            parameter=j,
                        )
                        logger.info("subtorus translate found: %s * zeta^(%s)", base.notation(),
                                    ",".join(str(d) for d in direction))
                        return Detection(witness, diagnostics)
                diagnostics.append(f"translate {base.notation()} direction {direction} fails verification")
        if tried >= max_candidates:
            diagnostics.append(f"candidate cap {max_candidates} reached for parameter {j}")
    diagnostics.append("no rank-1 translate among the zeros")
    return Detection(None, diagnostics)


# ---------------------------------------------------------------------------
# Normalizing torsion sequences
# ---------------------------------------------------------------------------

@dataclass
class NormalizationResult:
    cv: ChangeOfVariables
    tuples: List[TorsionTuple]
    chains: List[List[Optional[int]]]
    limits: List[Optional[PadicApprox]]
    finite_projection: bool
    ties: List[int] = field(default_factory=list)
    diagnostics: List[str] = field(default_factory=list)
    modulus: Optional[int] = None

    def to_json(self) -> dict:
        return {
            "change_of_variables": self.cv.to_json(),
            "modulus_exp": self.modulus,
            "tuples": [t.notation() for t in self.tuples],
            "chains": self.chains,
            "limits": [None if a is None else a.to_json() for a in self.limits],
            "finite_projection": self.finite_projection,
            "ties": self.ties,
            "diagnostics": self.diagnostics,
        }


def _dlog(point: TorsionPoint, base: TorsionPoint, p: int) -> Optional[int]:
    """a mod p^level(base) with point = base^a, or None."""
    if base.is_origin() or point.level > base.level:
        return None
    L = base.level
    return (point.exponent_at(L, p) * pow(base.exponent, -1, p ** L)) % p ** L


def _majority_residue(values: Sequence[int], modulus: int) -> Tuple[int, bool]:
    counts = Counter(v % modulus for v in values)
    best = max(counts.values())
    winners = sorted(r for r, c in counts.items() if c == best)
    return winners[0], len(winners) > 1


def normalize_sequence(tuples: Sequence[TorsionTuple], p: int) -> NormalizationResult:
    """A change of variables pushing the trailing exponents of a torsion sequence toward 0.

    Coordinates are ordered by decreasing level; a_i = dlog of coordinate i
    relative to coordinate i-1; its limit A_i is the majority residue over the
    deepest third of the tuples; B[i, 0] = -A_1 ... A_i.
    """
    if not tuples:
        raise ValueError("normalize_sequence needs at least one tuple")
    n = tuples[0].nvars
    diagnostics: List[str] = []
    if n == 1:
        diagnostics.append("single coordinate: nothing to normalize")
        return NormalizationResult(ChangeOfVariables.identity(1), list(tuples), [], [], False, [], diagnostics)

    deepest = max(tuples, key=lambda t: t.level)
    totals = [sum(t.points[i].level for t in tuples) for i in range(n)]
    order = sorted(range(n), key=lambda i: (-deepest.points[i].level, -totals[i], i))
    permuted = [TorsionTuple(tuple(t.points[i] for i in order), t.group) for t in tuples]

    chains: List[List[Optional[int]]] = [[None] * len(permuted)]
    for i in range(1, n):
        chains.append([_dlog(t.points[i], t.points[i - 1], p) for t in permuted])

    ranked = sorted(range(len(permuted)), key=lambda k: (-permuted[k].level, k))
    deep = ranked[:max(1, len(ranked) // 3)]
    shallow = ranked[max(1, len(ranked) // 3):]

    limits: List[Optional[PadicApprox]] = [None]
    ties: List[int] = []
    for i in range(1, n):
        known = [(chains[i][k], permuted[k].points[i - 1].level) for k in deep if chains[i][k] is not None]
        if not known:
            limits.append(None)
            continue
        j = min(level for _, level in known)
        if j == 0:
            limits.append(None)
            continue
        residue, tied = _majority_residue([a for a, _ in known], p ** j)
        if tied:
            ties.append(i)
        limits.append(PadicApprox(residue, j, p))

    trailing = n - 1
    finite_projection = bool(shallow) and (
        max(permuted[k].points[trailing].level for k in deep)
        <= max(permuted[k].points[trailing].level for k in shallow)
    )

    if any(a is None for a in limits[1:]):
        diagnostics.append("sequence too shallow to estimate every limit mod p; identity change of variables")
        cv = ChangeOfVariables(tuple(order)) if order != list(range(n)) else ChangeOfVariables.identity(n)
        return NormalizationResult(cv, [action_on_torsion(cv, t, p) for t in tuples], chains, limits,
                                   finite_projection, ties, diagnostics)

    modulus = min(a.precision for a in limits[1:])
    entries: Dict[Tuple[int, int], PadicApprox] = {}
    product = 1
    for i in range(1, n):
        product = (product * limits[i].value) % p ** modulus
        if product:
            entries[(i, 0)] = PadicApprox(-product, modulus, p)
    cv = ChangeOfVariables(tuple(order), entries)
    reach = cv.exponent_precision()
    normalized = [action_on_torsion(cv, t, p) for t in tuples if reach is None or t.level <= reach]
    beyond = [t for t in tuples if reach is not None and t.level > reach]
    if beyond:
        diagnostics.append(
            f"B known mod {p}^{reach}; left out {len(beyond)} tuple(s) of higher level: "
            + ", ".join(t.notation() for t in beyond)
        )
    if ties:
        diagnostics.append(f"majority ties broken toward the smaller residue at coordinates {ties}")
    return NormalizationResult(cv, normalized, chains, limits, finite_projection, ties, diagnostics, reach)


# ---------------------------------------------------------------------------
# Dichotomy
# ---------------------------------------------------------------------------

def _stabilized(profile: Dict[int, LevelProfile]) -> bool:
    values = [lp.max_min_valuation for k, lp in sorted(profile.items()) if k >= 1 and lp.max_min_valuation is not None]
    return all(b <= a for a, b in zip(values, values[1:]))


@dataclass
class DichotomyReport:
    outcome: str
    prime: int
    K: int
    nvars: int
    group: str
    tuples: int
    witness: Optional[SpecialWitness] = None
    constant: Optional[Fraction] = None
    exceptions: List[TorsionTuple] = field(default_factory=list)
    undecided: List[TorsionTuple] = field(default_factory=list)
    profile: Dict[int, LevelProfile] = field(default_factory=dict)
    normalization: Optional[NormalizationResult] = None
    diagnostics: List[str] = field(default_factory=list)

    @property
    def undecided_share(self) -> Fraction:
        return Fraction(len(self.undecided), self.tuples) if self.tuples else Fraction(0)

    @property
    def stabilized(self) -> bool:
        return _stabilized(self.profile)

    def to_json(self) -> dict:
        return {
            "outcome": self.outcome,
            "p": self.prime,
            "level": self.K,
            "vars": self.nvars,
            "group": self.group,
            "tuples": self.tuples,
            "witness": None if self.witness is None else self.witness.to_json(),
            "constant": None if self.constant is None else format_rational(self.constant),
            "exceptions": [t.notation() for t in self.exceptions],
            "undecided": [t.notation() for t in self.undecided],
            "undecided_count": len(self.undecided),
            "profile": [lp.to_json() for _, lp in sorted(self.profile.items())],
            "stabilized": self.stabilized,
            "normalization": None if self.normalization is None else self.normalization.to_json(),
            "diagnostics": self.diagnostics,
        }


def dichotomy_report(
    ideal: Sequence[MultiSeries],
    K: int,
    N: Optional[int] = None,
    D: Optional[int] = None,
    *,
    group: Optional[Group] = None,
    mode: str = "exhaustive",
    count: int = 200,
    seed: int = 1,
    cap: int = DEFAULT_CAP,
    workers: int = 1,
    progress: bool = False,
) -> DichotomyReport:
    """Scan, look for a special translate through the zeros, else bound below.

    C is the largest certified minimum valuation over tuples of positive level
    and F the tuples certified above C. Tuples whose certificate stops at or
    below C are reported as undecided.
    """
    first = ideal[0]
    p = first.prime
    N = N or first.precision
    D = D or first.degree_bound
    group = group or MultiplicativeGroup(p, N)
    report = scan(ideal, K, group=group, mode=mode, count=count, seed=seed, cap=cap,
                  workers=workers, progress=progress)
    result = DichotomyReport(BOUNDED_BELOW, p, K, first.nvars, group_tag(group), len(report.records),
                             profile=report.profile())

    zeros = report.zeros()
    zero_levels = {r.level for r in zeros}
    if K >= 1 and all(k in zero_levels for k in range(1, K + 1)):
        zero_tuples = [r.tuple for r in sorted(zeros, key=lambda r: (r.level, r.tuple))]
        result.normalization = normalize_sequence(zero_tuples, p)
        witness = None
        if len(ideal) == 1 and first.nvars == 2:
            detection = detect_binomial_relation(first, K, N, group=group, report=report)
            result.diagnostics.extend(detection.diagnostics)
            witness = detection.witness
        if witness is None:
            detection = detect_subtorus_translate(ideal, zero_tuples, K, group, D, N)
            result.diagnostics.extend(detection.diagnostics)
            witness = detection.witness
        if witness is not None:
            result.outcome = SPECIAL_FOUND
            result.witness = witness
            logger.info("dichotomy: special translate found at depth %d", K)
            return result
    else:
        result.diagnostics.append("zeros do not reach every level up to K; zero set treated as finite")

    certified = [r.min_valuation.value for r in report.records if r.level >= 1 and r.min_valuation.exact]
    constant = max(certified) if certified else None
    result.constant = constant
    for r in report.records:
        v = r.min_valuation
        if constant is None:
            (result.exceptions if v.exact else result.undecided).append(r.tuple)
        elif v.certainly_greater(constant):
            result.exceptions.append(r.tuple)
        elif not v.exact:
            result.undecided.append(r.tuple)
    logger.info("dichotomy: bounded below by valuation %s off %d exception(s), %d undecided",
                "none" if constant is None else format_rational(constant),
                len(result.exceptions), len(result.undecided))
    return result


@dataclass
class ProfileResult:
    rows: List[LevelProfile]
    stabilized: bool
    report: ScanReport

    def to_json(self) -> dict:
        return {
            "p": self.report.prime,
            "level": self.report.K,
            "vars": self.report.nvars,
            "group": self.report.group,
            "tuples": len(self.report.records),
            "profile": [row.to_json() for row in self.rows],
            "stabilized": self.stabilized,
        }


def profile(ideal: Sequence[MultiSeries], K: int, **scan_options) -> ProfileResult:
    """Per-level maximum of the certified min-valuation, and whether it stopped growing."""
    report = scan(ideal, K, **scan_options)
    levels = report.profile()
    return ProfileResult([lp for _, lp in sorted(levels.items())], _stabilized(levels), report)
