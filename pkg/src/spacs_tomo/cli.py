"""Command-line front end.

Defaults reproduce the heralded-vacuum scenario (alpha = 0, sigma = 1/sqrt(2),
r = 0.4, gamma = 2.5).  ``--config FILE`` loads a flat key=value file first;
every other flag then overrides it in command-line order.  Exit status is 0 on
success, 1 on usage errors and 2 on runtime failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import SpacsError
from .runner import ExperimentConfig, parse_range, read_config, run_experiment, sweep_campaign

# config-file key for each override flag
_FLAG_KEYS = {
    "--alpha-re": "alpha_re",
    "--alpha-im": "alpha_im",
    "--sigma": "sigma",
    "--r": "r",
    "--gamma": "gamma",
    "--samples": "samples",
    "--seed": "seed",
    "--max-trials": "max_trials",
    "--theta-step-deg": "theta_step_deg",
    "--bins": "bins",
    "--nmax": "nmax",
    "--grid": "grid",
    "--grid-extent": "grid_extent",
    "--out": "out",
    "--format": "format",
}
# error-message prefix -> flag to blame
_FIELD_FLAGS = {
    "alpha": "--alpha-re/--alpha-im",
    "alpha_re": "--alpha-re",
    "alpha_im": "--alpha-im",
    "samples": "--samples",
    "q_min": "--q-range",
    "q_max": "--q-range",
    "sigma": "--sigma",
    "r": "--r",
    "gamma": "--gamma",
    "seed": "--seed",
    "target_conditioned": "--samples",
    "max_trials": "--max-trials",
    "theta_step_deg": "--theta-step-deg",
    "q_range": "--q-range",
    "bins": "--bins",
    "nmax": "--nmax",
    "grid": "--grid",
    "grid_extent": "--grid-extent",
    "format": "--format",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class _Override(argparse.Action):
    def __call__(self, parser, namespace, values, option_string=None):
        pending = getattr(namespace, "overrides", None) or []
        if self.dest == "q_range":
            pending += [("q_min", values[0]), ("q_max", values[1])]
        else:
            pending.append((_FLAG_KEYS[option_string], values))
        namespace.overrides = pending


def build_parser():
    p = _Parser(prog="spacs-tomo", description=__doc__.split("\n\n")[0])
    p.add_argument("--config", help="flat key=value config file, applied before other flags")
    scen = p.add_argument_group("scenario")
    sim = p.add_argument_group("simulation")
    io = p.add_argument_group("output")
    for group, flag, help_ in (
        (scen, "--alpha-re", "real part of the coherent amplitude"),
        (scen, "--alpha-im", "imaginary part of the coherent amplitude"),
        (scen, "--sigma", "background fluctuation scale (vacuum 0.7071...)"),
        (scen, "--r", "squeezing parameter"),
        (scen, "--gamma", "herald amplitude threshold"),
        (sim, "--samples", "heralded samples to collect"),
        (sim, "--seed", "64-bit RNG seed"),
        (sim, "--max-trials", "abort after this many unconditioned trials"),
        (sim, "--theta-step-deg", "phase-sweep step in degrees"),
        (sim, "--bins", "histogram bins"),
        (sim, "--nmax", "Fock truncation (number of modes)"),
        (sim, "--grid", "Wigner grid points per axis"),
        (sim, "--grid-extent", "Wigner grid half-width"),
        (io, "--out", "output directory (campaign root with --vary)"),
    ):
        group.add_argument(flag, action=_Override, dest=flag[2:].replace("-", "_"), help=help_)
    sim.add_argument(
        "--q-range", nargs=2, type=float, metavar=("QMIN", "QMAX"), action=_Override,
        help="histogram quadrature range",
    )
    io.add_argument("--format", choices=("text", "json"), action=_Override, help="summary format on stdout")
    io.add_argument(
        "--vary", action="append", default=[], metavar="KEY=V1,V2,...",
        help="campaign over a config key (repeatable; cartesian product)",
    )
    io.add_argument("-v", "--verbose", action="store_true", help="log pipeline stages")
    return p


def _blame(exc):
    msg = str(exc)
    field = msg.split(" ", 1)[0]
    flag = _FIELD_FLAGS.get(field)
    return f"{flag}: {msg}" if flag else msg


def cli_parse(argv):
    """Parse ``argv`` into ``(ExperimentConfig, campaign ranges, verbose)``."""
    ns = build_parser().parse_args(argv)
    try:
        base = read_config(ns.config) if ns.config else ExperimentConfig()
    except OSError as exc:
        raise UsageError(f"--config: {exc}") from exc
    except (ValueError, KeyError) as exc:
        raise UsageError(f"--config {ns.config}: {_blame(exc)}") from exc
    overrides = dict(getattr(ns, "overrides", None) or [])
    try:
        config = ExperimentConfig.from_flat(overrides, base=base)
    except ValueError as exc:
        raise UsageError(_blame(exc)) from exc
    ranges = {}
    for spec in ns.vary:
        try:
            key, values = parse_range(spec)
        except ValueError as exc:
            raise UsageError(f"--vary: {exc}") from exc
        if key not in config.to_flat():
            raise UsageError(f"--vary: unknown config key {key!r}")
        if not values:
            raise UsageError(f"--vary: empty range for {key!r}")
        ranges[key] = values
    return config, ranges, ns.verbose


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        config, ranges, verbose = cli_parse(argv)
    except UsageError as exc:
        print(f"spacs-tomo: error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if ranges:
            entries = sweep_campaign(config, ranges)
            failed = [e for e in entries if e.report is None]
            if config.report_format == "json":
                print(json.dumps([
                    {"index": e.index, "seed": e.seed, "overrides": e.overrides,
                     "report": e.report.to_dict() if e.report else None, "error": e.error}
                    for e in entries
                ], indent=1))
            else:
                for e in entries:
                    status = f"min W {e.report.wigner_min:.4f}, fidelity {e.report.fidelity:.4f}" if e.report else e.error
                    print(f"run {e.index:3d} {e.overrides}: {status}")
            return 2 if failed else 0
        report = run_experiment(config)
    except (SpacsError, OSError) as exc:
        print(f"spacs-tomo: {exc}", file=sys.stderr)
        return 2
    if config.report_format == "json":
        print(json.dumps(report.to_dict(), indent=1))
    else:
        print(report.format_text())
    return 0
