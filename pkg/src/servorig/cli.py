"""Command-line pipeline: ingest -> gen-schedule -> simulate -> analyze -> report."""
from __future__ import annotations

import argparse
import dataclasses
import io
import json
import logging
import sys
from pathlib import Path

from servorig import anova, fdr, kernels, reference, report, testbed
from servorig.config import PRESETS, dump_config, load_config
from servorig.dynamics import aero_force, size_spring, spring_force
from servorig.errors import ConfigurationError, ServorigError

log = logging.getLogger("servorig")


def _parse_sets(pairs):
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _config(args, **flag_keys):
    overrides = _parse_sets(args.set)
    for attr, key in flag_keys.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    return load_config(args.config, args.preset, overrides)


def _read_text(path, what):
    try:
        return Path(path).read_text()
    except FileNotFoundError:
        raise ConfigurationError(f"{what} not found: {path}") from None
    except OSError as exc:
        raise ConfigurationError(f"cannot read {what} {path}: {exc.strerror}") from None


def _write_text(path, text):
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, newline="\n")


# --------------------------------------------------------------------------
# subcommands


def cmd_synth_fdr(args):
    cfg = _config(args, out="fdr_path")
    _write_text(cfg.fdr_path, reference.synthetic_fdr(seed=args.seed, bad_rows=args.bad_rows))
    print(f"wrote synthetic recorder file {cfg.fdr_path} "
          f"({reference.FDR_ROWS + args.bad_rows} rows)")
    return 0


def cmd_ingest(args):
    cfg = _config(args, input="fdr_path", positions="positions_path", stats="stats_path")
    delim = "\t" if cfg.delimiter in ("\\t", "tab") else cfg.delimiter
    text = _read_text(cfg.fdr_path, "recorder file")
    parsed = fdr.parse_fdr(text, cfg.units_column, cfg.time_column or None, delim)
    for lineno, reason in parsed.rejected:
        print(f"{cfg.fdr_path}:{lineno}: rejected: {reason}", file=sys.stderr)
    if args.strict and parsed.rejected:
        raise ConfigurationError(f"{parsed.rejected_count} rows rejected (--strict)")
    samples = fdr.filter_outliers([fdr.to_deflection(e) for e in parsed.entries])
    neg, pos = fdr.split_by_sign(samples)
    stats = {
        "source": str(cfg.fdr_path),
        "valid_rows": parsed.valid_count,
        "rejected_rows": parsed.rejected_count,
        "rejected": [{"line": ln, "reason": r} for ln, r in parsed.rejected],
        "duration_s": fdr.duration_s(parsed.entries),
        "deflection_samples": len(samples),
        "zero_samples": len(samples) - len(neg) - len(pos),
        "negative": fdr.describe(neg, missing=0).as_dict() if len(neg) >= 4 else None,
        "positive": fdr.describe(pos, missing=0).as_dict() if len(pos) >= 4 else None,
        "frequencies": fdr.frequency_table(samples),
    }
    buf = io.StringIO()
    fdr.write_positions(samples, buf)
    _write_text(cfg.positions_path, buf.getvalue())
    _write_text(cfg.stats_path, report.dumps(report._clean(stats)))
    print(f"{parsed.valid_count} valid rows ({parsed.rejected_count} rejected); "
          f"negative n={len(neg)}, positive n={len(pos)}; "
          f"wrote {cfg.positions_path} and {cfg.stats_path}")
    return 0


def cmd_gen_schedule(args):
    cfg = _config(args, positions="positions_path", schedule="schedule_path")
    if args.reference:
        schedule = fdr.CommandSchedule(reference.FLIGHT_SCHEDULE)
    else:
        samples = fdr.read_positions(_read_text(cfg.positions_path, "positions file").splitlines())
        schedule = fdr.build_schedule(samples, cfg.schedule_length, cfg.min_multiplicity,
                                      cfg.schedule_seed)
    buf = io.StringIO()
    fdr.write_schedule(schedule, buf)
    _write_text(cfg.schedule_path, buf.getvalue())
    mult = schedule.multiplicities()
    print(f"wrote {cfg.schedule_path}: {len(schedule)} commands, {len(mult)} distinct "
          f"positions, range [{min(mult)}, {max(mult)}]")
    return 0


def cmd_simulate(args):
    cfg = _config(args, schedule="schedule_path", log="log_path")
    problems = [p for p in cfg.problems() if not p.startswith("total_cycles")]
    if problems:
        raise ConfigurationError("invalid configuration:\n  " + "\n  ".join(problems))
    schedule = fdr.read_schedule(_read_text(cfg.schedule_path, "schedule file").splitlines())
    camp = testbed.run_campaign(schedule, cfg.total_cycles, cfg.wear(), cfg.ppr,
                                cfg.step_period_ms)
    _write_text(cfg.log_path, camp.to_csv())
    hours = testbed.simulated_hours(camp)
    print(f"wrote {cfg.log_path}: {len(camp)} rows ({kernels.IMPLEMENTATION} kernel)")
    print(f"simulated duration {hours:.1f} h = total one-degree steps x "
          f"{cfg.step_period_ms:g} ms; mean {testbed.pacing_seconds_per_command(camp):.2f} s "
          f"per command")
    airfoil = cfg.airfoil()
    spring = size_spring(airfoil, cfg.arm_length_m)
    print(f"load model: aero force at v_max, theta_max = "
          f"{aero_force(airfoil, airfoil.v_max_mps, airfoil.theta_max_deg):.3f} N; "
          f"spring k = {spring.stiffness_n_per_m:.1f} N/m, restoring force at theta_max = "
          f"{abs(spring_force(spring, airfoil.theta_max_deg)):.3f} N")
    return 0


def cmd_analyze(args):
    cfg = _config(args, log="log_path", report="report_path")
    problems = [p for p in cfg.problems() if not p.startswith("total_cycles")]
    if problems:
        raise ConfigurationError("invalid configuration:\n  " + "\n  ".join(problems))
    with open(_existing(cfg.log_path, "log file")) as fh:
        camp = testbed.CampaignLog.read_csv(fh)
    need = cfg.n_periods * cfg.period_cycles
    if len(camp) < need:
        raise ConfigurationError(
            f"log {cfg.log_path} has {len(camp)} rows; analysis needs {need} "
            f"({cfg.n_periods} periods x {cfg.period_cycles} cycles)")
    matrix = anova.build_subject_matrix(camp, cfg.period_cycles, cfg.n_periods,
                                        cfg.sample_size, cfg.sampling_seed)
    stats = None
    if Path(cfg.stats_path).exists():
        stats = json.loads(Path(cfg.stats_path).read_text())
    bundle = report.suite_to_bundle(matrix, camp, stats, dataclasses.asdict(cfg), cfg.alpha)
    _write_text(cfg.report_path, report.dumps(bundle))
    gg = bundle["tables"]["Tests of Within-Subjects Effects"]["effect"][1]
    print(f"wrote {cfg.report_path}: n={matrix.n} positions x k={matrix.k} periods; "
          f"GG-corrected F={report.fmt(gg['F'])}, p={report.fmt(gg['Sig.'], True)}")
    for note in bundle["notes"]:
        print(f"note: {note}", file=sys.stderr)
    return 0


def _existing(path, what):
    if not Path(path).exists():
        raise ConfigurationError(f"{what} not found: {path}")
    return path


def cmd_report(args):
    cfg = _config(args, report="report_path", out_dir="report_dir")
    path = args.report_file or cfg.report_path
    try:
        bundle = json.loads(_read_text(path, "report file"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"report file {path} is not valid JSON: {exc}") from None
    if "tables" not in bundle or "charts" not in bundle:
        raise ConfigurationError(f"report file {path} lacks tables/charts")
    files = report.render(bundle, args.format)
    for p in report.write_files(files, cfg.report_dir):
        print(p)
    return 0


def cmd_show_config(args):
    cfg = _config(args)
    sys.stdout.write(dump_config(cfg))
    problems = cfg.problems()
    for p in problems:
        print(f"warning: {p}", file=sys.stderr)
    return 0


# --------------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file with a [servorig] section")
    common.add_argument("--preset", choices=sorted(PRESETS), help="named parameter preset")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="servorig", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth-fdr", parents=[common],
                       help="write a synthetic recorder file shaped like the study's flight log")
    s.add_argument("--out")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--bad-rows", type=int, default=0)
    s.set_defaults(func=cmd_synth_fdr)

    s = sub.add_parser("ingest", parents=[common], help="parse a recorder file")
    s.add_argument("--input")
    s.add_argument("--positions")
    s.add_argument("--stats")
    s.add_argument("--strict", action="store_true", help="fail if any row is rejected")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("gen-schedule", parents=[common], help="build the command schedule")
    s.add_argument("--positions")
    s.add_argument("--schedule")
    s.add_argument("--reference", action="store_true",
                   help="write the 119-command list the physical rig ran")
    s.set_defaults(func=cmd_gen_schedule)

    s = sub.add_parser("simulate", parents=[common], help="run a rig campaign")
    s.add_argument("--schedule")
    s.add_argument("--log")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("analyze", parents=[common], help="repeated-measures analysis of a log")
    s.add_argument("--log")
    s.add_argument("--report")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("report", parents=[common], help="format a report bundle")
    s.add_argument("report_file", nargs="?")
    s.add_argument("--format", required=True, choices=report.FORMATS)
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("show-config", parents=[common], help="print the resolved configuration")
    s.set_defaults(func=cmd_show_config)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ServorigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
