"""Command line entry point: ``lff3d simulate | verify | plotdata``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from lff3d import logio
from lff3d.config import ConfigError, dump_config, load_config, load_preset, preset_names
from lff3d.sim import SimulationError, run_scenario

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_SINGULAR = 3

LOG_NAME = "log.csv"
SUMMARY_NAME = "summary.json"
CONFIG_NAME = "config.yaml"

_log = logging.getLogger("lff3d")


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def cmd_simulate(args) -> int:
    try:
        cfg = load_preset(args.preset) if args.preset else load_config(args.config)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except OSError as exc:
        _err(f"cannot read config: {exc}")
        return EXIT_CONFIG

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / CONFIG_NAME).write_text(dump_config(cfg))
    code = EXIT_OK
    abort = None
    try:
        log = run_scenario(cfg)
    except SimulationError as exc:
        log = exc.log
        abort = {"tick": exc.tick, "follower": exc.follower, "message": str(exc)}
        _err(f"simulation aborted at tick {exc.tick} (follower {exc.follower}): {exc}")
        code = EXIT_SINGULAR

    table = logio.write_log(log, out / LOG_NAME)
    summary = logio.summary_for_config(table, cfg)
    if abort is not None:
        summary["aborted"] = abort
    logio.write_summary(summary, out / SUMMARY_NAME)
    print(f"wrote {out / LOG_NAME} ({len(log.t)} ticks) and {out / SUMMARY_NAME}")
    for f in summary["followers"]:
        print(f"  f{f['index']} {f['name'] or '-'}: min_h={f['min_h']:.4g} "
              f"intervention={f['intervention_duration']:.2f}s qp={f['qp_status_counts']}")
    return code


def cmd_verify(args) -> int:
    from lff3d.verify import run_checks

    try:
        results = run_checks(tol_scale=args.tol_scale, report=print)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"FAILED: {', '.join(failed)}")
        return EXIT_FAILED
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def cmd_plotdata(args) -> int:
    from lff3d.plotting import write_panels

    try:
        table = logio.read_csv(args.log)
    except logio.LogFormatError as exc:
        _err(str(exc))
        return EXIT_FAILED
    cfg_path = Path(args.config) if args.config else Path(args.log).with_name(CONFIG_NAME)
    frustum, names = None, ()
    if cfg_path.is_file():
        try:
            cfg = load_config(cfg_path)
            frustum = cfg.frustum_params()
            names = [f.name for f in cfg.followers]
        except ConfigError as exc:
            _err(str(exc))
            return EXIT_CONFIG
    elif args.config:
        _err(f"config {cfg_path} not found")
        return EXIT_CONFIG
    else:
        _log.warning("no %s next to the log; state panels are drawn without unsafe shading", CONFIG_NAME)
    for path in write_panels(table, args.out, frustum, names):
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lff3d", description="Leader-follower formation with a frustum safety filter.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress messages")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a scenario and write its tick log and summary")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="scenario YAML file")
    src.add_argument("--preset", help=f"shipped scenario: {', '.join(preset_names())}")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="run the oracle checks")
    v.add_argument("--tol-scale", type=float, default=1.0, help="multiply every threshold by this factor")
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("plotdata", help="write panel CSVs and SVG charts from a tick log")
    d.add_argument("--log", required=True, help="tick log CSV written by simulate")
    d.add_argument("--out", required=True, help="output directory")
    d.add_argument("--config", help=f"scenario YAML for frustum shading (default: {CONFIG_NAME} next to the log)")
    d.set_defaults(func=cmd_plotdata)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
