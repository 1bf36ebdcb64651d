from __future__ import annotations

import json
import os
from pathlib import Path
from typing import List, Optional, Sequence, Union

import sympy

from .lubin_tate import LTGroup, LTParams
from .padic import EisensteinRing
from .series import ChangeOfVariables, MultiSeries
from .torsion import Group, MultiplicativeGroup

PathLike = Union[str, Path]


def load_params(path: Optional[str]) -> dict:
    """Default run parameters from the first params.json found."""
    candidates = [path] if path else []
    here = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    candidates += [os.path.join(here, "params.json"), os.path.join(os.getcwd(), "params.json"),
                   os.path.join(os.path.dirname(here), "params.json")]
    for cand in candidates:
        if cand and os.path.exists(cand):
            with open(cand, "r", encoding="utf-8") as f:
                return json.load(f)
    raise FileNotFoundError("params.json not found. Provide --params or place it next to run_rigidity.py.")


def read_json(path: PathLike) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def series_from_expression(expr: str, variables: Sequence[str], ring: EisensteinRing, degree_bound: int) -> MultiSeries:
    """An integer polynomial given as a sympy expression, e.g. "(1+X)**5 - (1+Y)"."""
    symbols = sympy.symbols(list(variables))
    poly = sympy.Poly(sympy.expand(sympy.sympify(expr, locals=dict(zip(variables, symbols)))), *symbols)
    items = []
    for exp, coeff in poly.terms():
        if not coeff.is_integer:
            raise ValueError(f"coefficient {coeff} of {expr!r} is not an integer")
        items.append((exp, int(coeff)))
    return MultiSeries.from_terms(ring, len(symbols), degree_bound, items, polynomial=True)


def ideal_from_json(payload: dict, p: Optional[int] = None, precision: Optional[int] = None,
                    degree_bound: Optional[int] = None) -> List[MultiSeries]:
    """Generators of an ideal.

    Accepted payloads: a single series, {"generators": [series, ...]}, or
    {"vars": ["X", "Y"], "generators": ["expr", ...], "p": .., "precision": .., "degree_bound": ..}
    where missing numeric fields fall back to the arguments.
    """
    if "generators" not in payload:
        return [MultiSeries.from_json(payload)]
    generators = payload["generators"]
    if not generators:
        raise ValueError("an ideal needs at least one generator")
    if all(isinstance(g, dict) for g in generators):
        return [MultiSeries.from_json(g) for g in generators]
    variables = payload.get("vars")
    if not variables:
        raise ValueError("expression generators need a 'vars' list")
    p = int(payload.get("p", p))
    precision = int(payload.get("precision", precision))
    degree_bound = int(payload.get("degree_bound", degree_bound))
    ring = EisensteinRing.base(p, precision)
    return [series_from_expression(g, variables, ring, degree_bound) for g in generators]


def load_ideal(path: PathLike, p: Optional[int] = None, precision: Optional[int] = None,
               degree_bound: Optional[int] = None) -> List[MultiSeries]:
    return ideal_from_json(read_json(path), p, precision, degree_bound)


def load_lt_params(path: PathLike) -> LTParams:
    return LTParams.from_json(read_json(path))


def load_change_of_vars(path: PathLike, p: int) -> ChangeOfVariables:
    return ChangeOfVariables.from_json(read_json(path), p)


def resolve_lt_params(group: str, p: int) -> Optional[LTParams]:
    """None for the multiplicative group, else the Lubin-Tate params named or stored in `group`."""
    if group == "multiplicative":
        return None
    if group in ("cyclotomic", "standard"):
        return LTParams(p, group)
    params = load_lt_params(group)
    if params.prime != p:
        raise ValueError(f"Lubin-Tate params are for p={params.prime}, run uses p={p}")
    return params


def build_group(group: str, p: int, precision: int, degree_bound: int) -> Group:
    params = resolve_lt_params(group, p)
    if params is None:
        return MultiplicativeGroup(p, precision)
    return LTGroup(params, degree_bound, precision)
