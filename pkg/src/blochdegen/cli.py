"""Command-line front end: ``blochdegen <command> --config FILE [--out DIR] [--seed N]``.

Exit codes: 0 when every check passes, 1 when a tolerance check fails (the
failing residual is named on stderr), 2 for configuration or input errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .config import load_config
from .errors import (
    BlochDegenError,
    ConfigError,
    IncommensurateK,
    IoFailure,
    NonHermitianAmplitudes,
    NonLatticeVector,
    OutOfRange,
    ParityViolation,
    SingularLattice,
)
from .experiments import (
    band_structure,
    build_setup,
    degeneracy_ladder,
    external_channel,
    operator_identities,
    oracle_scan,
    perturbation_outcome,
    transformation_laws,
)
from .report import BANDS_HEADER, SCAN_HEADER, bands_rows, render_csv, render_json, write_outputs

log = logging.getLogger("blochdegen")

COMMANDS = ("verify", "bands", "degeneracy", "perturb", "external", "oracle")
INPUT_ERRORS = (
    ConfigError, ParityViolation, NonHermitianAmplitudes, SingularLattice,
    OutOfRange, IncommensurateK, NonLatticeVector, IoFailure,
)


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blochdegen", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, type=Path, help="YAML run configuration")
    parser.add_argument("--out", type=Path, default=Path("."), help="output directory (default: .)")
    parser.add_argument("--seed", type=_u64, default=None, help="override the config seed")
    parser.add_argument("--plot", action="store_true", help="also render PNG figures")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def run(command: str, cfg, plot: bool = False) -> tuple[dict, dict]:
    """Execute one command; returns (report payload, extra files)."""
    setup = build_setup(cfg)
    files = {}
    if command == "verify":
        ids = operator_identities(setup)
        laws = transformation_laws(setup)
        results = {"identities": ids, "transformations": laws}
        checks = ids["checks"] + laws["checks"]
    elif command == "bands":
        rows, results = band_structure(setup)
        files["bands.csv"] = render_csv(BANDS_HEADER, bands_rows(rows, cfg.bands.n_bands))
        if plot or cfg.bands.plot:
            from .plotting import bands_figure

            files["bands.png"] = bands_figure(rows, cfg.bands.n_bands, f"{cfg.bands.regime} crystal")
        checks = results.pop("checks")
    elif command == "degeneracy":
        results = degeneracy_ladder(setup)
        checks = results.pop("checks")
    elif command == "perturb":
        results = perturbation_outcome(setup)
        checks = results.pop("checks")
    elif command == "external":
        results = external_channel(setup)
        checks = results.pop("checks")
    elif command == "oracle":
        results = oracle_scan(setup)
        checks = results.pop("checks")
        scan = results["scan"]
        files["scan.csv"] = render_csv(SCAN_HEADER, scan["rows"])
        if plot:
            from .plotting import scan_figure

            files["scan.png"] = scan_figure(scan["rows"], scan["exponent"])
    else:  # argparse already restricts the choice
        raise ConfigError(f"unknown command {command!r}")
    failures = [c for c in checks if not c["passed"]]
    payload = {
        "command": command,
        "version": __version__,
        "seed": cfg.seed,
        "config": cfg.echo(),
        "results": results,
        "checks": checks,
        "passed": not failures,
    }
    return payload, files


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config).with_seed(args.seed)
        payload, files = run(args.command, cfg, args.plot)
        files["report.json"] = render_json(payload)
        for path in write_outputs(args.out, files):
            log.info("wrote %s", path)
    except INPUT_ERRORS as exc:
        print(f"blochdegen: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except BlochDegenError as exc:
        print(f"blochdegen: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    failures = [c for c in payload["checks"] if not c["passed"]]
    for c in failures:
        rel = "<=" if c["mode"] == "le" else ">="
        print(f"FAIL {c['name']} = {c['value']:.6e} (required {rel} {c['limit']:.3e})", file=sys.stderr)
    if not failures:
        print(f"{args.command}: {len(payload['checks'])} checks passed")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
