#!/usr/bin/env python3
"""
run_rigidity.py: Lubin-Tate groups, torsion scans and the rigidity dichotomy from the command line.

Subcommands:
- lt-build    emit L(X,Y) and the requested [a](X) as series JSON.
- verify      check the Lubin-Tate axioms on random scalars.
- scan        evaluate an ideal on torsion tuples, near-zero sets per --epsilon.
- detect      special translate or lower bound with finite exceptions.
- profile     per-level maximum of the certified min-valuation (JSON + CSV).
- changevars  transport an ideal and torsion tuples through a change of variables.

Exit codes: 0 success, 1 bounded-below (detect) or failed axioms (verify),
2 input or precondition error, 3 undecided tuples dominate the run.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from logging import FileHandler, Formatter, StreamHandler
from pathlib import Path
from typing import Dict, List, Optional

import sympy

from _padic_rigidity import __version__
from _padic_rigidity.export import export_profile, write_json
from _padic_rigidity.io_utils import (
    build_group,
    load_change_of_vars,
    load_ideal,
    load_params,
    resolve_lt_params,
)
from _padic_rigidity.lubin_tate import LTGroup, lt_change_of_vars, verify_axioms
from _padic_rigidity.rigidity import SPECIAL_FOUND, dichotomy_report, profile
from _padic_rigidity.series import mult_change_of_vars
from _padic_rigidity.torsion import TorsionTuple, action_on_torsion, group_tag, scan
from _padic_rigidity.utils import format_rational, parse_rational

from output_paths import resolve_log_dir, resolve_output_file, resolve_provenance_dir, resolve_reports_dir

DEFAULT_LOG_FILE = "run_rigidity.log"
EXIT_OK, EXIT_BOUNDED, EXIT_INPUT, EXIT_UNDECIDED = 0, 1, 2, 3
MODES = ("exhaustive", "sample")

logger = logging.getLogger("run_rigidity")


class ConsoleFilter(logging.Filter):
    """
    Allow only INFO, ERROR, and CRITICAL records to pass to the console,
    unless the record has 'suppress_console' set to True.
    """
    def __init__(self, debug: bool = False):
        super().__init__()
        self.debug = debug

    def filter(self, record: logging.LogRecord) -> bool:
        if getattr(record, "suppress_console", False):
            return False
        if self.debug:
            return True
        return record.levelno in (logging.INFO, logging.ERROR, logging.CRITICAL)


def setup_logging(log_path: Path, debug: bool = False) -> None:
    root = logging.getLogger()
    root.setLevel(logging.DEBUG)

    for h in list(root.handlers):
        root.removeHandler(h)
        h.close()

    sh = StreamHandler(sys.stdout)
    sh.setLevel(logging.DEBUG if debug else logging.INFO)
    sh.setFormatter(Formatter("%(asctime)s [%(levelname)s] %(message)s", "%Y-%m-%d %H:%M:%S"))
    sh.addFilter(ConsoleFilter(debug))
    root.addHandler(sh)

    fh = FileHandler(str(log_path), encoding="utf-8")
    fh.setLevel(logging.DEBUG)
    fh.setFormatter(Formatter("%(asctime)s [%(levelname)s] %(message)s", "%Y-%m-%d %H:%M:%S"))
    root.addHandler(fh)


@dataclass
class RunConfig:
    p: int
    precision: int
    degree_bound: int
    level: int
    group: str = "multiplicative"
    mode: str = "exhaustive"
    sample_count: int = 200
    cap: int = 10 ** 6
    seed: int = 1
    workers: int = 1
    epsilons: List[str] = field(default_factory=list)
    trials: int = 10
    undecided_dominance: str = "1/2"
    progress: bool = False

    def __post_init__(self):
        if not sympy.isprime(self.p):
            raise ValueError(f"p={self.p} is not prime")
        for name in ("precision", "degree_bound", "level", "cap", "sample_count", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.trials < 0:
            raise ValueError("trials must be non-negative")
        self.epsilons = [format_rational(parse_rational(e)) for e in self.epsilons]
        self.undecided_dominance = format_rational(parse_rational(self.undecided_dominance))

    @classmethod
    def from_sources(cls, params: dict, args: argparse.Namespace) -> "RunConfig":
        values = {name: params[name] for name in cls.__dataclass_fields__ if name in params}
        overrides = {
            "p": args.p, "precision": args.precision, "degree_bound": args.degree, "level": args.level,
            "group": args.group, "mode": args.mode, "sample_count": args.count, "cap": args.cap,
            "seed": args.seed, "workers": args.workers, "epsilons": args.epsilon, "trials": args.trials,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        if args.progress:
            values["progress"] = True
        missing = [name for name in ("p", "precision", "degree_bound", "level") if name not in values]
        if missing:
            raise ValueError(f"missing run parameters: {', '.join(missing)}")
        return cls(**values)

    @property
    def dominance(self) -> Fraction:
        return parse_rational(self.undecided_dominance)

    def scan_options(self) -> dict:
        return {"mode": self.mode, "count": self.sample_count, "seed": self.seed, "cap": self.cap,
                "workers": self.workers, "progress": self.progress}


def parse_args(argv=None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("command", choices=("lt-build", "verify", "scan", "detect", "profile", "changevars"))
    parser.add_argument("--params", default=None, help="params.json with default run parameters.")
    parser.add_argument("--p", type=int, default=None, help="Residue characteristic.")
    parser.add_argument("--precision", type=int, default=None, help="Coefficient precision N (mod p^N).")
    parser.add_argument("--degree", type=int, default=None, help="Total degree bound D.")
    parser.add_argument("--level", type=int, default=None, help="Torsion level K.")
    parser.add_argument("--group", default=None,
                        help="multiplicative, cyclotomic, standard, or a Lubin-Tate params JSON file.")
    parser.add_argument("--mode", default=None, choices=MODES, help="Torsion enumeration mode.")
    parser.add_argument("--count", type=int, default=None, help="Tuples drawn in sample mode.")
    parser.add_argument("--cap", type=int, default=None, help="Refuse exhaustive scans above this many tuples.")
    parser.add_argument("--seed", type=int, default=None, help="Seed for sampling and random trials.")
    parser.add_argument("--workers", type=int, default=None, help="Worker threads for scans.")
    parser.add_argument("--epsilon", action="append", default=None,
                        help="Valuation threshold for near-zero sets (repeatable, e.g. 1/2).")
    parser.add_argument("--trials", type=int, default=None, help="Random scalar pairs for verify.")
    parser.add_argument("--a", action="append", default=None, type=int,
                        help="Scalars whose [a](X) lt-build emits (repeatable).")
    parser.add_argument("--in", dest="inputs", default=None, help="Ideal / series JSON input.")
    parser.add_argument("--cv", default=None, help="Change-of-variables JSON (changevars).")
    parser.add_argument("--tuple", dest="tuples", action="append", default=None,
                        help="Torsion tuple 'level:exp,...' to transport (changevars, repeatable).")
    parser.add_argument("--out", default=None, help="Report path (a directory for lt-build).")
    parser.add_argument("--log-dir", default=None, help="Directory for logs (defaults to ./logs).")
    parser.add_argument("--log-file-name", default=DEFAULT_LOG_FILE,
                        help=f"File name for the log output (default: {DEFAULT_LOG_FILE}).")
    parser.add_argument("--reports-dir", default=None, help="Directory for reports (defaults to ./reports).")
    parser.add_argument("--debug", action="store_true", help="Show DEBUG records on the console.")
    parser.add_argument("--progress", action="store_true", help="Show a progress bar during scans.")
    return parser.parse_args(argv)


def _require_input(args) -> str:
    if not args.inputs:
        raise ValueError(f"{args.command} needs --in")
    return args.inputs


def _ideal(args, config: RunConfig):
    ideal = load_ideal(_require_input(args), config.p, config.precision, config.degree_bound)
    if ideal[0].prime != config.p:
        raise ValueError(f"input series are over p={ideal[0].prime}, run uses p={config.p}")
    return ideal


def _group(config: RunConfig, ideal=None):
    precision = ideal[0].precision if ideal else config.precision
    degree_bound = ideal[0].degree_bound if ideal else config.degree_bound
    return build_group(config.group, config.p, precision, degree_bound)


def cmd_lt_build(args, config: RunConfig, out: Path) -> int:
    params = resolve_lt_params(config.group, config.p)
    if params is None:
        raise ValueError("lt-build needs a Lubin-Tate group: --group cyclotomic, standard or a params file")
    group = LTGroup(params, config.degree_bound, config.precision)
    out.mkdir(parents=True, exist_ok=True)
    write_json(group.law.to_json(), out / "group_law.json")
    for a in args.a or []:
        write_json(group.bracket(a).to_json(), out / f"bracket_{a}.json")
    logger.info("Wrote group law and %d bracket(s) to %s", len(args.a or []), out)
    return EXIT_OK


def cmd_verify(args, config: RunConfig, out: Path) -> int:
    params = resolve_lt_params(config.group, config.p)
    if params is None:
        raise ValueError("verify needs a Lubin-Tate group: --group cyclotomic, standard or a params file")
    report = verify_axioms(params, config.degree_bound, config.precision, config.trials, seed=config.seed)
    write_json(report.to_json(), out)
    return EXIT_OK if report.all_passed else EXIT_BOUNDED


def _dominated(share: Fraction, config: RunConfig) -> bool:
    if share > config.dominance:
        logger.error("Undecided tuples make up %s of the run; raise --precision or --degree",
                     format_rational(share))
        return True
    return False


def cmd_scan(args, config: RunConfig, out: Path) -> int:
    ideal = _ideal(args, config)
    report = scan(ideal, config.level, thresholds=config.epsilons, group=_group(config, ideal),
                  **config.scan_options())
    write_json(report.to_json(), out)
    for eps in config.epsilons:
        logger.info("S(%s): %d member(s)", eps, len(report.members(parse_rational(eps))))
    return EXIT_UNDECIDED if _dominated(report.undecided_share(), config) else EXIT_OK


def cmd_detect(args, config: RunConfig, out: Path) -> int:
    ideal = _ideal(args, config)
    report = dichotomy_report(ideal, config.level, group=_group(config, ideal), **config.scan_options())
    write_json(report.to_json(), out)
    if report.outcome == SPECIAL_FOUND:
        return EXIT_OK
    if _dominated(report.undecided_share, config):
        return EXIT_UNDECIDED
    return EXIT_BOUNDED


def cmd_profile(args, config: RunConfig, out: Path) -> int:
    ideal = _ideal(args, config)
    result = profile(ideal, config.level, group=_group(config, ideal), **config.scan_options())
    write_json(result.to_json(), out)
    csv_path = export_profile(result.rows, out.with_suffix(".csv"))
    logger.info("Profile table written to %s (stabilized: %s)", csv_path, result.stabilized)
    return EXIT_UNDECIDED if _dominated(result.report.undecided_share(), config) else EXIT_OK


def cmd_changevars(args, config: RunConfig, out: Path) -> int:
    ideal = _ideal(args, config)
    if not args.cv:
        raise ValueError("changevars needs --cv")
    cv = load_change_of_vars(args.cv, config.p)
    group = _group(config, ideal)
    if isinstance(group, LTGroup) and group.params.kind != "cyclotomic":
        transformed = [lt_change_of_vars(phi, cv, group) for phi in ideal]
    else:
        transformed = [mult_change_of_vars(phi, cv) for phi in ideal]
    tuples = [TorsionTuple.parse(t, config.p, group_tag(group)) for t in args.tuples or []]
    payload = {
        "change_of_variables": cv.to_json(),
        "generators": [phi.to_json() for phi in transformed],
        "tuples": [
            {"input": t.notation(), "image": action_on_torsion(cv, t, config.p).notation()} for t in tuples
        ],
    }
    write_json(payload, out)
    return EXIT_OK


COMMANDS = {
    "lt-build": (cmd_lt_build, "lt_build"),
    "verify": (cmd_verify, "verify.json"),
    "scan": (cmd_scan, "scan.json"),
    "detect": (cmd_detect, "detect.json"),
    "profile": (cmd_profile, "profile.json"),
    "changevars": (cmd_changevars, "changevars.json"),
}


def _write_ledger(provenance_dir: Path, entry: Dict) -> None:
    path = provenance_dir / f"run_{entry['command'].replace('-', '_')}.json"
    with open(path, "w", encoding="utf-8") as f:
        json.dump(entry, f, indent=2, sort_keys=True)


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)

    base_dir = Path(__file__).resolve().parent
    log_dir = resolve_log_dir(base_dir, args.log_dir)
    reports_dir = resolve_reports_dir(base_dir, args.reports_dir)
    setup_logging(log_dir / args.log_file_name, debug=args.debug)

    handler, default_out = COMMANDS[args.command]
    entry = {
        "command": args.command,
        "version": __version__,
        "start_utc": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
    }
    try:
        config = RunConfig.from_sources(load_params(args.params), args)
        out = resolve_output_file(reports_dir, args.out or default_out)
        entry["config"] = asdict(config)
        entry["output"] = str(out)
        logger.info("Running %s (p=%d, N=%d, D=%d, K=%d, group=%s)", args.command, config.p,
                    config.precision, config.degree_bound, config.level, config.group)
        code = handler(args, config, out)
    except (ValueError, FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        # PrecisionError and RingMismatchError are ValueErrors
        logger.error("%s: %s", type(exc).__name__, exc)
        code = EXIT_INPUT
    except Exception:
        logging.exception("Unexpected failure in %s", args.command)
        raise
    entry["exit_code"] = code
    entry["end_utc"] = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    _write_ledger(resolve_provenance_dir(log_dir), entry)
    logger.info("%s finished with exit code %d", args.command, code)
    return code


if __name__ == "__main__":
    sys.exit(main())
