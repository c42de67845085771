"""Command line entry point.

Subcommands: ``run`` (classify one scenario), ``sweep`` (phase-map CSV),
``spectrum`` (one named spectral bound), ``oracle`` (integral checks on
stored profiles).  Exit codes: 0 ok, 2 bad configuration, 3 falsification
event (outputs still written), 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ScenarioConfig, SweepConfig
from .errors import ConfigError, NclabError
from .runner import (EXIT_CONFIG, EXIT_NUMERIC, SPECTRUM_TARGETS, oracle_suite,
                     resolve_threads, run_scenario, run_sweep, spectrum_query)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ncl",
        description="competition dynamics with nonlocal dispersal")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, threads=False):
        p.add_argument("config", type=Path, help="JSON configuration file")
        p.add_argument("--out", type=Path, default=Path("out"),
                       help="output directory (default: ./out)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        if threads:
            p.add_argument("--threads", type=int, default=None,
                           help="worker threads (default: NCL_THREADS or 1)")

    common(sub.add_parser("run", help="run and classify one scenario"),
           threads=True)
    common(sub.add_parser("sweep", help="run a parameter sweep"), threads=True)
    p_spec = sub.add_parser("spectrum", help="compute one spectral bound")
    common(p_spec)
    p_spec.add_argument("--target", required=True, choices=SPECTRUM_TARGETS)
    p_orc = sub.add_parser("oracle", help="run integral oracles on stored profiles")
    common(p_orc)
    p_orc.add_argument("--profiles", type=Path, default=None,
                       help="directory with stored profile CSVs "
                            "(default: <out>/profiles)")
    return parser


def _load_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _scenario(args) -> ScenarioConfig:
    cfg = ScenarioConfig.from_json(_load_text(args.config))
    if args.seed is not None:
        data = dict(cfg.data)
        data["seed"] = int(args.seed)
        cfg = ScenarioConfig.from_dict(data)
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = _scenario(args)
            report, code = run_scenario(cfg, args.out)
            print(f"case: {report.case}  classified: {report.classified}  "
                  f"falsifications: {len(report.falsifications)}")
            print(f"report: {args.out / 'report.json'}")
            return code
        if args.command == "sweep":
            sweep = SweepConfig.from_json(_load_text(args.config))
            if args.seed is not None:
                base = dict(sweep.base.data)
                base["seed"] = int(args.seed)
                sweep = SweepConfig.from_dict(
                    {"base": base, "axes": sweep.axes})
            threads = resolve_threads(args.threads)
            csv_path, code = run_sweep(sweep, args.out, threads=threads)
            print(f"sweep: {sweep.n_cells()} cells -> {csv_path}")
            return code
        if args.command == "spectrum":
            cfg = _scenario(args)
            result = spectrum_query(cfg, args.target, args.out)
            print(json.dumps({"target": args.target, **result.to_dict()},
                             sort_keys=True, indent=2))
            return 0
        if args.command == "oracle":
            cfg = _scenario(args)
            profiles = args.profiles or (args.out / "profiles")
            results = oracle_suite(cfg, profiles, args.out)
            print(json.dumps(results, sort_keys=True, indent=2))
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NclabError as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
