"""Command-line entry point: ``resonator <mode> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .config import MODES, RunConfig, load_config
from .errors import ConfigError, InvalidSpec, NoConvergence, ResonatorError

EXIT_OK, EXIT_CONFIG, EXIT_NO_CONVERGENCE, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("resonator")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="JSON run configuration")
    p.add_argument("--out", default=S, help="directory for <mode>.csv and <mode>.json")
    p.add_argument("--resolution", type=int, default=S, help="cells along the longest axis")
    p.add_argument("--eigen-index", type=int, default=S, dest="eigen_index",
                   help="limiting eigenpair to follow (0 = principal)")
    p.add_argument("--workers", type=int, default=S, help="concurrent h values in a sweep")
    p.add_argument("--quiet", action="store_true", default=S, help="no table on stdout")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="resonator", parents=[common],
                                     description="Scattering resonances of small layered bodies.")
    sub = parser.add_subparsers(dest="mode", required=True)
    help_text = {
        "spectrum": "eigenpairs of the limiting operator T0",
        "resonance": "solve the nonlinear resonance problem for each h",
        "asym": "first-order asymptotic resonance for each h",
        "sweep": "solver vs asymptotics over h with fitted convergence orders",
        "invert": "recover susceptibilities or scale from measured resonances",
        "oracle": "analytic unit-ball modes as CSV",
    }
    for mode in MODES:
        sub.add_parser(mode, parents=[common], help=help_text[mode])
    return parser


def _configure(args) -> tuple[RunConfig, Path | None]:
    base_dir = None
    if "config" in args:
        cfg = load_config(args.config)
        base_dir = Path(args.config).resolve().parent
        cfg = cfg.model_copy(update={"mode": args.mode})
    else:
        if args.mode == "invert":
            raise ConfigError("invert needs --config with an 'inversion' section")
        cfg = RunConfig(mode=args.mode)
    updates = {}
    for key in ("resolution", "eigen_index", "workers"):
        if key in args:
            updates[key] = getattr(args, key)
    if updates:
        cfg = RunConfig.model_validate({**cfg.model_dump(), **updates})
    return cfg, base_dir


def _paths(cfg: RunConfig, args) -> dict:
    if "out" in args:
        out = Path(args.out)
        return {"csv": out / f"{cfg.mode}.csv", "json": out / f"{cfg.mode}.json"}
    return {"csv": cfg.outputs.csv_path, "json": cfg.outputs.json_path}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    quiet = getattr(args, "quiet", False)
    logging.basicConfig(level=logging.WARNING if quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg, base_dir = _configure(args)
    except (ConfigError, InvalidSpec) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # pydantic errors from CLI overrides
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    status = EXIT_OK
    try:
        result = harness.run(cfg, base_dir)
    except (ConfigError, InvalidSpec) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoConvergence as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        if exc.best is None:
            return EXIT_NO_CONVERGENCE
        result, status = exc.best, EXIT_NO_CONVERGENCE
    except ResonatorError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    if isinstance(result, harness.SweepReport) and not result.all_converged:
        status = EXIT_NO_CONVERGENCE
    if isinstance(result, harness.Table) and not result.converged:
        status = EXIT_NO_CONVERGENCE
    try:
        harness.emit_report(result, _paths(cfg, args))
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    if not quiet:
        text = result.csv_text() if hasattr(result, "csv_text") else harness.report_json(result)
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
