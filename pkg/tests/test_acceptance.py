"""End-to-end acceptance checks.

Each ``criterion_N`` returns ``(passed, detail)``. Under pytest every
criterion is a test, and a one-line PASS/FAIL verdict per criterion is
printed in the terminal summary. Run the file directly to get the same
lines without pytest.
"""

import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from beaconfold.channel import ChannelModel, render, render_background
from beaconfold.cli import main as cli_main
from beaconfold.harness import (
    ExperimentConfig,
    count_trend_inversions,
    multiplex_experiment,
    overhead_report,
    ser_sweep,
)
from beaconfold.modem import (
    AFREEBEE,
    FREEBEE,
    IntervalConfig,
    bit_rate,
    demodulate_afreebee,
    demodulate_freebee,
    fold,
    modulate_afreebee,
    modulate_freebee,
)
from beaconfold.multiplex import assign_intervals, write_assignment
from beaconfold.rssi import RssiTrace, edge_filter_array, write_trace

RESULTS = {}


def record(number, title):
    def wrap(fn):
        def run():
            start = time.perf_counter()
            passed, detail = fn()
            elapsed = time.perf_counter() - start
            RESULTS[number] = (passed, f"{title}: {detail} ({elapsed:.1f} s)")
            return passed, detail, elapsed
        run.number = number
        return run
    return wrap


@record(1, "noiseless round-trip")
def criterion_1():
    ideal = ChannelModel.ideal()
    checked = failures = 0
    start = time.perf_counter()
    for x in (4, 5, 97, 100, 113):
        cfg = IntervalConfig(1024, x)
        lo, hi = cfg.symbol_range(FREEBEE)
        origin = cfg.interval_us // 2 + cfg.delta_us // 2
        reference = ((cfg.interval_us - origin) // 128) % cfg.lam
        for sym in range(lo, hi + 1):
            trace = render([modulate_freebee(0, cfg, sym, 1)], ideal, cfg.interval_us,
                           np.random.default_rng(0), origin_us=origin)
            failures += demodulate_freebee(trace, cfg, reference).symbol != sym
            checked += 1
        for sym in range(x):
            trace = render([modulate_afreebee(0, cfg, sym, 1)], ideal, 2 * cfg.interval_us,
                           np.random.default_rng(0))
            failures += demodulate_afreebee(trace, cfg).symbol != sym
            checked += 1
    elapsed = time.perf_counter() - start
    return failures == 0 and elapsed < 10, f"{checked - failures}/{checked} exact"


def cross_fold_max(x1, x2):
    samples = np.zeros(x1 * x2 - 1, dtype=np.uint8)
    samples[::x2] = 1
    return int(fold(RssiTrace(samples), x1).sums.max())


@record(2, "coprime folding separates senders")
def criterion_2():
    start = time.perf_counter()
    pairs = violations = 0
    for x1 in range(2, 51):
        for x2 in range(x1 + 1, 51):
            if math.gcd(x1, x2) == 1:
                pairs += 1
                violations += cross_fold_max(x1, x2) > 1
    counter = cross_fold_max(2, 4)
    elapsed = time.perf_counter() - start
    ok = violations == 0 and counter > 1 and elapsed < 30
    return ok, f"{violations} violations over {pairs} coprime pairs; {{2,4}} max sum {counter}"


@record(3, "SER at five repetitions, B=0.3")
def criterion_3():
    start = time.perf_counter()
    fb = ser_sweep(ExperimentConfig(variant=FREEBEE, rhos=(5,), occupancies=(0.3,),
                                    trials=10_000, seed=2024))[0]
    afb = ser_sweep(ExperimentConfig(variant=AFREEBEE, rhos=(5,), occupancies=(0.3,),
                                     trials=10_000, seed=2024))[0]
    elapsed = time.perf_counter() - start
    ok = (fb.ser <= 0.02 and afb.ser <= 0.02 and 1.0 - 0.05 <= afb.sampling_duration_s <= 1.2
          and elapsed < 300)
    return ok, (f"FreeBee {fb.ser:.4f} [{fb.wilson_low:.4f}, {fb.wilson_high:.4f}] at "
                f"{fb.sampling_duration_s:.3f} s; A-FreeBee {afb.ser:.4f} "
                f"[{afb.wilson_low:.4f}, {afb.wilson_high:.4f}] at "
                f"{afb.sampling_duration_s:.3f} s; bound 0.02")


def _trend(variant):
    pts = ser_sweep(ExperimentConfig(variant=variant, rhos=tuple(range(1, 9)),
                                     occupancies=(0.1, 0.3, 0.5, 0.9), trials=1000, seed=77))
    inv = count_trend_inversions(pts, "rho") + count_trend_inversions(pts, "occupancy")
    ok = len(inv) <= 1 and all(overlap for _, overlap in inv)
    desc = "; ".join(f"{a.variant} rho {a.rho}->{b.rho} B {a.occupancy}->{b.occupancy}: "
                     f"{a.ser:.3f}->{b.ser:.3f}{'' if o else ' (separated)'}"
                     for (a, b), o in inv)
    return ok, len(inv), desc


@record(4, "SER trend over rho and B")
def criterion_4():
    ok_fb, n_fb, d_fb = _trend(FREEBEE)
    ok_afb, n_afb, d_afb = _trend(AFREEBEE)
    detail = f"FreeBee {n_fb} inversion(s), A-FreeBee {n_afb} inversion(s)"
    extra = "; ".join(d for d in (d_fb, d_afb) if d)
    return ok_fb and ok_afb, detail + (f" [{extra}]" if extra else "")


@record(5, "bit-rate formula")
def criterion_5():
    cfg = IntervalConfig(1024, 100)
    exact = bit_rate(cfg, 5)
    expected = math.log2(100) / 0.512
    ok = (abs(exact - expected) / expected <= 1e-9
          and bit_rate(cfg, 5, AFREEBEE) == exact / 2
          and bit_rate(cfg, 5, floor=True) == 6 / 0.512)
    return ok, (f"exact {exact:.6f} bps, A-FreeBee {bit_rate(cfg, 5, AFREEBEE):.6f}, "
                f"floor {bit_rate(cfg, 5, floor=True):.6f}")


@record(6, "five repetitions at B=0.1")
def criterion_6():
    p = ser_sweep(ExperimentConfig(variant=FREEBEE, rhos=(5,), occupancies=(0.1,),
                                   trials=10_000, seed=606))[0]
    return p.ser < 0.01, f"FreeBee SER {p.ser:.4f} [{p.wilson_low:.4f}, {p.wilson_high:.4f}]"


@record(7, "packet-edge filter noise reduction")
def criterion_7():
    trace = render_background(ChannelModel(occupancy=0.3), 100_000_000,
                              np.random.default_rng(7))
    raw = trace.samples.mean()
    ratio = edge_filter_array(trace.samples).mean() / raw
    return 0.14 <= ratio <= 0.20, f"ratio {ratio:.4f} at busy fraction {raw:.4f}"


@record(8, "twenty multiplexed senders")
def criterion_8():
    start = time.perf_counter()
    assignment = assign_intervals(20, 53, 149)
    rows = multiplex_experiment(assignment, 0.1, 500, seed=8, cancel=True)
    worst = max(rows, key=lambda r: r["ser"])
    elapsed = time.perf_counter() - start
    ok = all(r["ser"] < 0.05 for r in rows) and elapsed < 600
    mean = sum(r["ser"] for r in rows) / len(rows)
    return ok, f"worst {worst['sender_id']} (x={worst['x']}) SER {worst['ser']:.3f}, mean {mean:.4f}"


@record(9, "receiver overhead")
def criterion_9():
    rep = overhead_report(IntervalConfig(1024, 97), 5)
    ok = rep["lam"] == 776 and rep["storage_bits"] == 3880 and rep["storage_bytes"] == 485
    return ok, f"{rep['storage_bits']} bits / {rep['storage_bytes']} bytes"


@record(10, "byte-identical CSV per seed")
def criterion_10():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        assignment = tmp / "senders.csv"
        write_assignment(assign_intervals(2, 53, 149), assignment)
        cfg = IntervalConfig(1024, 13)
        trace_path = tmp / "sym.trace"
        trace = render([modulate_afreebee(0, cfg, 3, 3)], ChannelModel(occupancy=0.2),
                       6 * cfg.interval_us, np.random.default_rng(10))
        write_trace(trace, trace_path)
        commands = {
            "ser-sweep": ["ser-sweep", "--variant", "afreebee", "--x", "97", "--delta-us",
                          "1024", "--rho", "1..3", "--occupancy", "0.1,0.5", "--trials", "50",
                          "--seed", "10"],
            "rate": ["rate", "--x", "100", "--delta-us", "1024", "--rho", "5", "--floor"],
            "multiplex": ["multiplex", "--assignment", str(assignment), "--occupancy", "0.1",
                          "--trials", "20", "--seed", "10", "--cancel"],
            "duty": ["duty", "--contact-s", "4", "--senders", str(assignment), "--seed", "10",
                     "--trials", "20"],
            "demod": ["demod", "--trace", str(trace_path), "--x", "13", "--delta-us", "1024",
                      "--afreebee"],
            "overhead": ["overhead", "--x", "97", "--delta-us", "1024", "--rho", "5"],
        }
        same = []
        for name, argv in commands.items():
            outs = []
            for k in range(2):
                out = tmp / f"{name}-{k}.csv"
                if cli_main(argv + ["--out", str(out)]) != 0:
                    return False, f"{name} exited with an error"
                outs.append(out.read_bytes())
            if outs[0] == outs[1]:
                same.append(name)
        return len(same) == len(commands), f"{len(same)}/{len(commands)} subcommands identical"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10]


def verdict_line(number):
    passed, text = RESULTS[number]
    return f"{'PASS' if passed else 'FAIL'} criterion {number}: {text}"


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{c.number}" for c in CRITERIA])
def test_criterion(criterion):
    passed, detail, _ = criterion()
    print(verdict_line(criterion.number))
    assert passed, detail


if __name__ == "__main__":
    for criterion in CRITERIA:
        criterion()
        print(verdict_line(criterion.number), flush=True)
    sys.exit(0 if all(p for p, _ in RESULTS.values()) else 1)
