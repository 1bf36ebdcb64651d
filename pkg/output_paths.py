"""Where runs write: logs and the provenance ledger under ``logs/``, reports under ``reports/``."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Union

DEFAULT_LOG_DIR_NAME = "logs"
DEFAULT_REPORTS_DIR_NAME = "reports"
PROVENANCE_DIR_NAME = "provenance"


def _ensure_dir(root: Path, chosen: Optional[Union[str, Path]], fallback: str) -> Path:
    """*chosen* (relative paths hang off *root*) or ``root/fallback``, created on demand."""

    root = root.resolve()
    target = Path(chosen) if chosen else Path(fallback)
    if not target.is_absolute():
        target = root / target
    target.mkdir(parents=True, exist_ok=True)
    return target


def resolve_log_dir(root: Path, chosen: Optional[str]) -> Path:
    return _ensure_dir(root, chosen, DEFAULT_LOG_DIR_NAME)


def resolve_reports_dir(root: Path, chosen: Optional[str]) -> Path:
    return _ensure_dir(root, chosen, DEFAULT_REPORTS_DIR_NAME)


def resolve_provenance_dir(log_dir: Path) -> Path:
    """One ``run_<command>.json`` ledger per subcommand lives here."""

    return _ensure_dir(log_dir, None, PROVENANCE_DIR_NAME)


def resolve_output_file(reports_dir: Path, out: Union[str, Path]) -> Path:
    """A relative ``--out`` is placed inside *reports_dir*; parent directories are created."""

    target = Path(out)
    if not target.is_absolute():
        target = reports_dir / target
    target.parent.mkdir(parents=True, exist_ok=True)
    return target
