from __future__ import annotations

import json
import re
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple

SEP = ","

_RATIONAL = re.compile(r"^\s*(-?\d+)\s*(?:/\s*(\d+))?\s*$")


def format_rational(x) -> str:
    """'n' for integers, 'num/den' otherwise."""
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def parse_rational(s) -> Fraction:
    if isinstance(s, (int, Fraction)):
        return Fraction(s)
    m = _RATIONAL.match(str(s))
    if not m:
        raise ValueError(f"not a rational: {s!r}")
    num = int(m.group(1))
    den = int(m.group(2)) if m.group(2) else 1
    if den == 0:
        raise ValueError(f"zero denominator in {s!r}")
    return Fraction(num, den)


def format_tuple(coords: Sequence[Tuple[int, int]]) -> str:
    """Torsion tuple notation, e.g. '2:4,1:1'."""
    return SEP.join(f"{k}:{u}" for k, u in coords)


def parse_tuple(s: str) -> List[Tuple[int, int]]:
    coords = []
    for part in s.split(SEP):
        part = part.strip()
        if not part:
            continue
        level, _, exponent = part.partition(":")
        if not exponent:
            raise ValueError(f"torsion coordinate must read level:exponent, got {part!r}")
        coords.append((int(level), int(exponent)))
    return coords


def deterministic_json(obj, indent: Optional[int] = 2) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=indent) + "\n"


def chunked(items: Sequence, size: int) -> Iterable[Tuple[int, Sequence]]:
    """Contiguous slices with their start offsets."""
    size = max(1, size)
    for start in range(0, len(items), size):
        yield start, items[start:start + size]
