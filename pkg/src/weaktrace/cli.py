"""Command-line front end (``weaktrace``).

Exit status: 0 success, 1 validation error (bad config, network file or
parameters), 2 runtime failure.  Diagnostics go to stderr; result files
are only written once a run has finished computing.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .config import ConfigError, ScenarioConfig, apply_overrides, dump_config, parse_config
from .dsl import load_network
from .dynamics import VibrationError
from .netgraph import NetworkError, build_nested_mzi, enumerate_paths
from .scenarios import run_scenario
from .tsvf import InvalidCutError, ZeroOverlapError, weak_values

log = logging.getLogger("weaktrace")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 by default; usage errors are validation errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="flat key = value configuration file")
    p.add_argument("--out", metavar="DIR", help="output directory (default from config: out)")
    p.add_argument("--phi-c", metavar="RAD", help="arm-C phase, radians or a pi expression, or 'auto'")
    p.add_argument("--zd", metavar="Z", help="detector distance, or 'far'")
    p.add_argument("--eps", metavar="EPS", help="kick strength k*w0*theta")
    p.add_argument("--seed", type=int, help="accepted for compatibility; the pipeline is deterministic")
    p.add_argument("--format", choices=("csv", "csv+svg"))
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
    p.add_argument("--dump-config", action="store_true", help="print the effective config and exit")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="weaktrace", description="Weak traces in a nested interferometer with vibrating mirrors.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("weak-values", help="print the weak-value table of the nested interferometer")
    _common(p)
    p = sub.add_parser("simulate", help="run the original or the PF-modified experiment")
    _common(p)
    p.add_argument("--scenario", choices=("original", "pf"))
    p = sub.add_parser("sweep-zd", help="sweep the detector distance")
    _common(p)
    p = sub.add_parser("scaling", help="trace strengths over a range of kick strengths")
    _common(p)
    p = sub.add_parser("parse-check", help="validate a network description file")
    p.add_argument("file")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def effective_config(args: argparse.Namespace, scenario: str | None = None) -> ScenarioConfig:
    if args.config:
        path = Path(args.config)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
        cfg = parse_config(text, origin=str(path))
    else:
        cfg = ScenarioConfig()
    if scenario is not None:
        cfg = replace(cfg, scenario=scenario)
    pairs = []
    if args.phi_c is not None:
        pairs.append(f"phi_c={args.phi_c}")
    if args.zd is not None:
        pairs.append(f"z_d={args.zd}")
    if args.eps is not None:
        pairs.append(f"eps={args.eps}")
    if args.format is not None:
        pairs.append(f"format={args.format}")
    if args.out is not None:
        pairs.append(f"out={args.out}")
    cfg = apply_overrides(cfg, pairs, origin="option")
    cfg = apply_overrides(cfg, args.set, origin="--set")
    return cfg.validate()


def _weak_values(args) -> int:
    cfg = effective_config(args, "original")
    phi = cfg.phi_c if cfg.phi_c is not None else 0.0
    report = weak_values(build_nested_mzi(phi, cfg.z, cfg.delta), phi_C=phi, delta=cfg.delta)
    text = report.to_csv()
    if args.out is not None:
        root = Path(cfg.out) / "weak-values"
        root.mkdir(parents=True, exist_ok=True)
        (root / "weak_values.csv").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def _scenario(args, scenario: str | None) -> int:
    cfg = effective_config(args, scenario)
    if args.dump_config:
        sys.stdout.write(dump_config(cfg))
        return EXIT_OK
    if args.seed is not None:
        log.info("--seed %d ignored: the pipeline is deterministic", args.seed)
    art = run_scenario(cfg)
    for k, v in art.summary.items():
        print(f"{k} = {v!r}")
    for n in art.notes:
        print(f"note: {n}")
    print(f"wrote {art.directory}")
    return EXIT_OK


def _parse_check(args) -> int:
    net = load_network(args.file)
    paths = enumerate_paths(net)
    print(f"{args.file}: ok ({len(net.elements)} elements, {len(net.segments)} segments, {len(paths)} paths)")
    if net.mirrors:
        try:
            report = weak_values(net)
        except ZeroOverlapError as exc:
            print(f"weak values: undefined ({exc})")
        else:
            sys.stdout.write(report.to_csv())
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "parse-check":
            return _parse_check(args)
        if args.command == "weak-values":
            if args.dump_config:
                sys.stdout.write(dump_config(effective_config(args, "original")))
                return EXIT_OK
            return _weak_values(args)
        scenario = {"sweep-zd": "zd-sweep", "scaling": "scaling"}.get(args.command)
        if args.command == "simulate":
            scenario = args.scenario
            if scenario is None and not args.config:
                scenario = "original"
        return _scenario(args, scenario)
    except OSError as exc:
        if args.command == "parse-check" and exc.filename == args.file:
            print(f"error: {args.file}: {exc.strerror}", file=sys.stderr)
            return EXIT_INVALID
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ConfigError, NetworkError, VibrationError, InvalidCutError) as exc:
        where = f"{args.file}: " if args.command == "parse-check" else ""
        print(f"error: {where}{exc}", file=sys.stderr)
        return EXIT_INVALID
    except ZeroOverlapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        log.debug("traceback", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
