from __future__ import annotations

from pathlib import Path
from typing import Iterable, Union

import pandas as pd

from .torsion import LevelProfile
from .utils import deterministic_json

PROFILE_COLUMNS = [
    "level", "tuples", "certified", "undecided", "max_min_valuation", "witness",
]


def write_json(payload: dict, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(deterministic_json(payload), encoding="utf-8")
    return path


def profile_frame(rows: Iterable[LevelProfile]) -> pd.DataFrame:
    df = pd.DataFrame([row.to_json() for row in rows])
    for c in PROFILE_COLUMNS:
        if c not in df.columns:
            df[c] = ""
    # exact rationals stay strings; empty cells for levels without certified tuples
    return df[PROFILE_COLUMNS].fillna("")


def export_profile(rows: Iterable[LevelProfile], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    profile_frame(rows).to_csv(path, index=False, lineterminator="\n")
    return path
