"""Command-line entry point.

Exit codes: 0 success, 1 check failed, 2 config/validation error, 3 I/O error,
4 undefined statistic.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, experiments, outputs
from .config import bundled_config, load_config
from .errors import ConfigError, InvalidArgument, UndefinedStatistic
from .protocol import qber_report, run_session

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3, 4

_DEFAULT_CONFIGS = {"simulate": "table1.json", "hwp": "scan_hwp.json", "phase": "scan_phase.json"}


def _prepare_out(path: Path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    cfg = load_config(args.config or bundled_config(_DEFAULT_CONFIGS["simulate"]),
                      seed=args.seed, engine=args.engine)
    out = _prepare_out(args.out)
    tallies, reports = [], []
    for session in cfg.sessions():
        tally, _ = run_session(session)
        tallies.append((session.mu_a, tally))
        reports.append(qber_report(tally, mu=session.mu_a, as_printed=session.eq2_as_printed))
    files = [outputs.write_tally_csv(out / "tally.csv", tallies),
             outputs.write_qber_json(out / "qber.json", reports)]
    outputs.write_manifest(out, "simulate", files, cfg.config_hash, cfg.session.seed,
                           cfg.session.engine, time.perf_counter() - t0)
    print(f"{'mu':>6} {'E_Z (%)':>16} {'E_X (%)':>16}")
    for r in reports:
        print(f"{r.mu:6.3f} {100 * r.e_z:8.3f} ± {100 * r.se_z:5.3f} {100 * r.e_x:8.3f} ± {100 * r.se_x:5.3f}")
    return EXIT_OK


def cmd_scan(args) -> int:
    t0 = time.perf_counter()
    cfg = load_config(args.config or bundled_config(_DEFAULT_CONFIGS[args.kind]),
                      seed=args.seed, engine=args.engine)
    out = _prepare_out(args.out)
    session = next(cfg.sessions())
    if args.kind == "hwp":
        curve = experiments.scan_hwp(session, cfg.angles, hwp1=cfg.hwp1)
        fit = experiments.fit_sine(curve, harmonic=4)
        v_hom = experiments.hom_visibility(fit.visibility) if fit.visibility < 1 else None
        payload = outputs.fit_payload(fit, v_hom)
        summary = f"V_sine = {fit.visibility:.4f}   V_HOM = {v_hom if v_hom is None else round(v_hom, 4)}"
    else:
        phases = 2.0 * np.pi * np.arange(cfg.phase_points) / cfg.phase_points
        curve = experiments.scan_phase(args.sync, session, phases, port=cfg.port)
        fit = experiments.fit_sine(curve, harmonic=1)
        payload = outputs.fit_payload(fit, None, visibility=curve.visibility(), sync=args.sync)
        summary = f"visibility = {curve.visibility():.4f} ({'synchronized' if args.sync else 'independent'} phase)"
    files = [outputs.write_scan_csv(out / "scan.csv", curve),
             outputs.write_json(out / "fit.json", payload)]
    outputs.write_manifest(out, f"scan {args.kind}", files, cfg.config_hash, session.seed,
                           session.engine, time.perf_counter() - t0)
    print(summary)
    return EXIT_OK


def cmd_faraday_check(args) -> int:
    t0 = time.perf_counter()
    if args.samples < 1:
        raise InvalidArgument("--samples must be >= 1")
    seed = 0 if args.seed is None else args.seed
    result = experiments.faraday_check(args.samples, seed, reciprocal=not args.non_reciprocal,
                                       identity=args.identity)
    status = "PASS" if result.passed else "FAIL"
    print(f"{status}: {result.samples} channels, worst fidelity to F*input = "
          f"{result.worst_fidelity:.15f} (threshold {result.threshold})")
    if args.out:
        out = _prepare_out(args.out)
        files = [outputs.write_json(out / "faraday.json", {
            "samples": result.samples, "seed": seed, "worst_fidelity": result.worst_fidelity,
            "threshold": result.threshold, "passed": result.passed,
            "reciprocal": not args.non_reciprocal})]
        outputs.write_manifest(out, "faraday-check", files, None, seed, None,
                               time.perf_counter() - t0)
    return EXIT_OK if result.passed else EXIT_FAIL


def _common(p: argparse.ArgumentParser, physics: bool = True) -> None:
    unused = "" if physics else " (not used by this command)"
    p.add_argument("--config", type=Path,
                   help="JSON config" + (unused or " (defaults to a bundled one)"))
    p.add_argument("--out", type=Path, default=Path("out") if physics else None,
                   help="output directory" + ("" if physics else " (optional)"))
    p.add_argument("--seed", type=int, help="master seed, overrides the config")
    p.add_argument("--engine", choices=["analytic", "mc"], help="overrides the config" + unused)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pnpmdi", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run sessions and report QBERs")
    _common(sim)
    sim.set_defaults(func=cmd_simulate)

    scan = sub.add_parser("scan", help="interference scans")
    scan_sub = scan.add_subparsers(dest="kind", required=True)
    hwp = scan_sub.add_parser("hwp", help="two-photon interference vs Bob's waveplate")
    _common(hwp)
    phase = scan_sub.add_parser("phase", help="single-photon interference vs path phase")
    _common(phase)
    phase.add_argument("--sync", action=argparse.BooleanOptionalAction, default=False,
                       help="lock both phase randomizers")
    for p in (hwp, phase):
        p.set_defaults(func=cmd_scan)

    far = sub.add_parser("faraday-check", help="verify polarization auto-compensation")
    _common(far, physics=False)
    far.add_argument("--samples", type=int, default=1000)
    far.add_argument("--identity", action="store_true", help="use identity channels")
    far.add_argument("--non-reciprocal", action="store_true", help=argparse.SUPPRESS)
    far.set_defaults(func=cmd_faraday_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidArgument) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UndefinedStatistic as exc:
        print(f"error: undefined statistic: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
