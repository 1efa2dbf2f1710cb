"""Command-line entry point.

Every subcommand writes CSV (with a header row) to ``--out`` or stdout.
``--config FILE`` reads flat ``key=value`` lines whose keys mirror the long
flag names (``delta-us`` or ``delta_us``); flags given on the command line
win over the file.
"""

from __future__ import annotations

import argparse
import sys

from beaconfold.channel import ChannelModel
from beaconfold.errors import BeaconfoldError
from beaconfold.harness import (
    MULTIPLEX_FIELDS,
    OVERHEAD_FIELDS,
    SER_FIELDS,
    THROUGHPUT_FIELDS,
    ExperimentConfig,
    duty_cycle_experiment,
    multiplex_experiment,
    overhead_report,
    ser_sweep,
    throughput_report,
    write_csv,
)
from beaconfold.modem import AFREEBEE, FREEBEE, IntervalConfig, demodulate
from beaconfold.multiplex import IntervalAssignment, read_assignment
from beaconfold.rssi import DEFAULT_SAMPLE_PERIOD_US, packet_edge_filter, read_trace

DEMOD_FIELDS = ["variant", "x", "delta_us", "symbol", "confidence", "columns"]
DUTY_FIELDS = ["senders", "contact_window_s", "occupancy", "trials", "min_active_fraction",
               "success_rate"]

TRUE_WORDS = {"1", "true", "yes", "on"}
FALSE_WORDS = {"0", "false", "no", "off"}


def parse_rho_range(text):
    """``"5"`` -> (5,), ``"1..8"`` -> (1, ..., 8), ``"1,3,5"`` -> (1, 3, 5)."""
    text = str(text).strip()
    if ".." in text:
        a, _, b = text.partition("..")
        lo, hi = int(a), int(b)
        if lo > hi:
            raise argparse.ArgumentTypeError(f"empty rho range {text!r}")
        values = tuple(range(lo, hi + 1))
    else:
        values = tuple(int(v) for v in text.split(",") if v.strip())
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"rho must be positive integers, got {text!r}")
    return values


def parse_float_list(text):
    try:
        values = tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def read_config(path):
    """Flat ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise BeaconfoldError(f"{path}:{lineno}: expected key=value")
            out[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return out


def _add_out(p):
    p.add_argument("--out", help="CSV destination (default: stdout)")


def _add_interval(p):
    p.add_argument("--x", type=int, help="beacon interval in shift units")
    p.add_argument("--delta-us", type=int, default=1024, help="shift unit in microseconds")
    p.add_argument("--sample-period-us", type=int, default=DEFAULT_SAMPLE_PERIOD_US)


def build_parser():
    parser = argparse.ArgumentParser(prog="beaconfold",
                                     description="Beacon-timing side channel toolkit.")
    parser.add_argument("--config", help="file of key=value defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ser-sweep", help="symbol error rate over a rho x occupancy grid")
    p.add_argument("--variant", choices=[FREEBEE, AFREEBEE], default=FREEBEE)
    _add_interval(p)
    p.add_argument("--rho", type=parse_rho_range, default=(5,), help="e.g. 5, 1..8 or 1,3,5")
    p.add_argument("--occupancy", type=parse_float_list, default=(0.3,),
                   help="comma-separated busy fractions")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ideal", action="store_true",
                   help="no access delay: beacons leave exactly on schedule")
    _add_out(p)

    p = sub.add_parser("rate", help="model bit rate")
    _add_interval(p)
    p.add_argument("--assignment", help="assignment CSV instead of --x")
    p.add_argument("--rho", type=int, default=5)
    p.add_argument("--floor", action="store_true", help="only report whole-bit rates")
    p.add_argument("--afreebee", action="store_true")
    p.add_argument("--aggregate", action="store_true", help="sum over the assignment")
    _add_out(p)

    p = sub.add_parser("multiplex", help="per-sender SER with concurrent senders")
    p.add_argument("--assignment", help="assignment CSV")
    p.add_argument("--occupancy", type=float, default=0.1)
    p.add_argument("--rho", type=int, default=5)
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cancel", action="store_true", help="cancel decoded senders in turn")
    _add_out(p)

    p = sub.add_parser("duty", help="minimum receiver duty cycle for a contact window")
    p.add_argument("--contact-s", type=float, help="contact window in seconds")
    p.add_argument("--senders", help="assignment CSV")
    p.add_argument("--occupancy", type=float, default=0.05)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    _add_out(p)

    p = sub.add_parser("demod", help="demodulate one symbol from a trace file")
    p.add_argument("--trace", help="trace file")
    _add_interval(p)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--reference", type=int, help="reference column (FreeBee)")
    group.add_argument("--afreebee", action="store_true")
    p.add_argument("--raw", action="store_true", help="skip the packet-edge filter")
    _add_out(p)

    p = sub.add_parser("overhead", help="receiver storage and operation counts")
    _add_interval(p)
    p.add_argument("--rho", type=int, default=5)
    p.add_argument("--afreebee", action="store_true")
    _add_out(p)
    return parser


def _coerce(action, value):
    if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
        word = str(value).lower()
        if word not in TRUE_WORDS | FALSE_WORDS:
            raise BeaconfoldError(f"config: {action.dest} expects a boolean, got {value!r}")
        return word in TRUE_WORDS
    if action.type is not None:
        try:
            return action.type(value)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise BeaconfoldError(f"config: bad value for {action.dest}: {exc}") from None
    if action.choices is not None and value not in action.choices:
        raise BeaconfoldError(f"config: {action.dest} must be one of {list(action.choices)}")
    return value


def _subparser(parser, command):
    for action in parser._subparsers._group_actions:
        if command in action.choices:
            return action.choices[command]
    raise KeyError(command)


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        conf = read_config(args.config)
        sub = _subparser(parser, args.command)
        known = {a.dest: a for a in sub._actions}
        unknown = sorted(set(conf) - set(known) - {"config"})
        if unknown:
            raise BeaconfoldError(f"config: unknown key(s) for {args.command}: "
                                  + ", ".join(unknown))
        sub.set_defaults(**{k: _coerce(known[k], v) for k, v in conf.items() if k in known})
        args = parser.parse_args(argv)
    return args


def _need(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise BeaconfoldError(f"{args.command}: missing required option(s): {flags}")


def _interval(args):
    _need(args, "x")
    return IntervalConfig(args.delta_us, args.x, args.sample_period_us)


def cmd_ser_sweep(args):
    icfg = _interval(args)
    cfg = ExperimentConfig(variant=args.variant, x=icfg.x, delta_us=icfg.delta_us,
                           sample_period_us=icfg.sample_period_us, rhos=args.rho,
                           occupancies=args.occupancy, trials=args.trials, seed=args.seed,
                           channel=ChannelModel.ideal() if args.ideal else ChannelModel())
    points = ser_sweep(cfg)
    return [p.as_row() for p in points], SER_FIELDS


def cmd_rate(args):
    if args.assignment:
        assignment = read_assignment(args.assignment, args.sample_period_us)
    else:
        assignment = IntervalAssignment({"S1": _interval(args)})
    variant = AFREEBEE if args.afreebee else FREEBEE
    mode = "aggregated" if args.aggregate else "per-sender"
    rows = throughput_report(assignment, args.rho, mode, variant)
    fields = THROUGHPUT_FIELDS
    if args.floor:
        fields = [f for f in fields if "exact" not in f]
    return rows, fields


def cmd_multiplex(args):
    _need(args, "assignment")
    assignment = read_assignment(args.assignment)
    rows = multiplex_experiment(assignment, args.occupancy, args.trials, args.seed,
                                rho=args.rho, cancel=args.cancel)
    return rows, MULTIPLEX_FIELDS


def cmd_duty(args):
    _need(args, "contact_s", "senders")
    assignment = read_assignment(args.senders)
    res = duty_cycle_experiment(assignment, args.contact_s, args.seed,
                                occupancy=args.occupancy, trials=args.trials)
    row = {"senders": len(assignment), "contact_window_s": args.contact_s,
           "occupancy": args.occupancy, "trials": res.trials,
           "min_active_fraction": res.min_active_fraction, "success_rate": res.success_rate}
    return [row], DUTY_FIELDS


def cmd_demod(args):
    _need(args, "trace")
    cfg = _interval(args)
    trace = read_trace(args.trace)
    if trace.sample_period_us != cfg.sample_period_us:
        cfg = IntervalConfig(cfg.delta_us, cfg.x, trace.sample_period_us)
    if not args.raw:
        trace = packet_edge_filter(trace)
    variant = AFREEBEE if args.afreebee else FREEBEE
    res = demodulate(variant, trace, cfg, args.reference or 0)
    row = {"variant": variant, "x": cfg.x, "delta_us": cfg.delta_us, "symbol": res.symbol,
           "confidence": res.confidence, "columns": " ".join(map(str, res.columns))}
    return [row], DEMOD_FIELDS


def cmd_overhead(args):
    cfg = _interval(args)
    variant = AFREEBEE if args.afreebee else FREEBEE
    return [overhead_report(cfg, args.rho, variant)], OVERHEAD_FIELDS


COMMANDS = {
    "ser-sweep": cmd_ser_sweep,
    "rate": cmd_rate,
    "multiplex": cmd_multiplex,
    "duty": cmd_duty,
    "demod": cmd_demod,
    "overhead": cmd_overhead,
}


def main(argv=None):
    try:
        args = parse_args(argv)
        rows, fields = COMMANDS[args.command](args)
        if args.out:
            write_csv(rows, fields, args.out)
        else:
            sys.stdout.write(write_csv(rows, fields, None))
    except (BeaconfoldError, ValueError, OSError) as exc:
        print(f"beaconfold: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
