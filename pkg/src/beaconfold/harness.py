"""Monte-Carlo experiments and reports built on the modem and channel.

Every experiment is a pure function of its configuration and seed. Trial
``i`` of a grid point draws from ``default_rng([seed, tag, ..., i])`` so the
result of one point does not depend on which other points are in the grid
or on evaluation order.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import asdict, dataclass, field, fields
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import binomtest

from beaconfold.channel import ChannelModel, DutyCycleSchedule, render
from beaconfold.errors import InsufficientContactError, NoSignalError
from beaconfold.modem import (
    AFREEBEE,
    FREEBEE,
    IntervalConfig,
    bit_rate,
    bits_per_symbol,
    check_variant,
    demodulate,
    learn_reference,
    modulate_freebee,
    periodic_schedule,
    symbol_duration_us,
)
from beaconfold.multiplex import CANCELLING, PLAIN, demux, learn_references
from beaconfold.rssi import edge_filter_array

DEFAULT_LEARN_RHO = 5
# Quiet rows of the longest interval used to learn multiplexed references.
MULTIPLEX_LEARN_RHO = 20


def wilson_interval(errors, trials, confidence=0.95):
    ci = binomtest(int(errors), int(trials)).proportion_ci(confidence, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class ExperimentConfig:
    variant: str = FREEBEE
    x: int = 97
    delta_us: int = 1024
    sample_period_us: int = 128
    rhos: Tuple[int, ...] = (5,)
    occupancies: Tuple[float, ...] = (0.3,)
    trials: int = 1000
    seed: int = 0
    channel: ChannelModel = field(default_factory=ChannelModel)
    learn_rho: int = DEFAULT_LEARN_RHO
    learn_occupancy: float = 0.0
    out: Optional[str] = None

    def __post_init__(self):
        check_variant(self.variant)
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.rhos or not self.occupancies:
            raise ValueError("rho and occupancy ranges must be non-empty")
        if min(self.rhos) < 1:
            raise ValueError("rho values must be >= 1")
        object.__setattr__(self, "rhos", tuple(int(r) for r in self.rhos))
        object.__setattr__(self, "occupancies", tuple(float(b) for b in self.occupancies))

    @property
    def interval(self):
        return IntervalConfig(self.delta_us, self.x, self.sample_period_us)


@dataclass(frozen=True)
class SerPoint:
    variant: str
    x: int
    delta_us: int
    rho: int
    occupancy: float
    sampling_duration_s: float
    trials: int
    errors: int
    ser: float
    wilson_low: float
    wilson_high: float

    @property
    def wilson_half_width(self):
        return 0.5 * (self.wilson_high - self.wilson_low)

    def as_row(self):
        row = asdict(self)
        row["wilson_half_width"] = self.wilson_half_width
        return row


SER_FIELDS = [f.name for f in fields(SerPoint)] + ["wilson_half_width"]


# -- single-sender trials ----------------------------------------------------

def freebee_window(cfg):
    """Receiver window origin relative to the reference beacon time.

    Starting half an interval plus half a shift unit after the reference
    puts exactly one beacon of every valid symbol in each folded row.
    """
    return cfg.interval_us // 2 + cfg.delta_us // 2


def learn_freebee_reference(cfg, model, rho, seed, occupancy=0.0):
    origin = freebee_window(cfg)
    sched = modulate_freebee(0, cfg, 0, rho, model.beacon_len_us)
    rng = np.random.default_rng([seed, 0x5EF])
    trace = render([sched], model.with_(occupancy=occupancy), rho * cfg.interval_us, rng,
                   origin_us=origin, sample_period_us=cfg.sample_period_us)
    filtered = trace.replace_samples(edge_filter_array(trace.samples))
    return learn_reference(filtered, cfg)


def random_symbol(cfg, variant, rng):
    lo, hi = cfg.symbol_range(variant)
    return int(rng.integers(lo, hi + 1))


def run_trial(variant, cfg, model, rho, rng, reference=None):
    """One end-to-end symbol: draw, modulate, render, filter, demodulate.

    Returns ``(sent, decoded)``; ``decoded`` is None when no signal was found.
    """
    sym = random_symbol(cfg, variant, rng)
    if variant == FREEBEE:
        origin = freebee_window(cfg)
        duration = rho * cfg.interval_us
        sched = modulate_freebee(0, cfg, sym, rho, model.beacon_len_us)
    else:
        origin = 0
        duration = rho * 2 * cfg.interval_us
        # random column, but on the sample grid like the FreeBee window
        phase = int(rng.integers(0, 2 * cfg.lam)) * cfg.sample_period_us
        sched = periodic_schedule(phase, cfg, origin, origin + duration, sym,
                                  model.beacon_len_us, AFREEBEE)
    trace = render([sched], model, duration, rng, origin_us=origin,
                   sample_period_us=cfg.sample_period_us)
    filtered = trace.replace_samples(edge_filter_array(trace.samples))
    try:
        decoded = demodulate(variant, filtered, cfg, reference or 0).symbol
    except NoSignalError:
        decoded = None
    return sym, decoded


def ser_point(variant, cfg, model, rho, trials, seed, reference=None):
    occ_ppm = int(round(model.occupancy * 1_000_000))
    tag = 1 if variant == FREEBEE else 2
    errors = 0
    for i in range(trials):
        rng = np.random.default_rng([seed, tag, cfg.x, cfg.delta_us, rho, occ_ppm, i])
        sent, decoded = run_trial(variant, cfg, model, rho, rng, reference)
        errors += decoded != sent
    lo, hi = wilson_interval(errors, trials)
    return SerPoint(variant, cfg.x, cfg.delta_us, rho, model.occupancy,
                    symbol_duration_us(cfg, rho, variant) * 1e-6, trials, errors,
                    errors / trials, lo, hi)


def ser_sweep(cfg: ExperimentConfig) -> List[SerPoint]:
    """SER over the ``rho x occupancy`` grid, rows in grid order."""
    icfg = cfg.interval
    reference = None
    if cfg.variant == FREEBEE:
        reference = learn_freebee_reference(icfg, cfg.channel, cfg.learn_rho, cfg.seed,
                                            cfg.learn_occupancy)
    points = []
    for occupancy in cfg.occupancies:
        model = cfg.channel.with_(occupancy=occupancy)
        for rho in cfg.rhos:
            points.append(ser_point(cfg.variant, icfg, model, rho, cfg.trials, cfg.seed,
                                    reference))
    if cfg.out:
        write_csv([p.as_row() for p in points], SER_FIELDS, cfg.out)
    return points


def count_trend_inversions(points, axis):
    """Adjacent grid pairs that break the expected SER ordering.

    ``axis="rho"``: SER should not rise with rho at fixed occupancy.
    ``axis="occupancy"``: SER should not fall as occupancy rises at fixed rho.
    Returns ``(pair, overlapping)`` tuples, ``overlapping`` telling whether
    the two Wilson intervals overlap.
    """
    other = "occupancy" if axis == "rho" else "rho"
    groups = {}
    for p in points:
        groups.setdefault(getattr(p, other), []).append(p)
    out = []
    for group in groups.values():
        group.sort(key=lambda p: getattr(p, axis))
        for a, b in zip(group, group[1:]):
            broken = b.ser > a.ser if axis == "rho" else b.ser < a.ser
            if broken:
                overlap = a.wilson_low <= b.wilson_high and b.wilson_low <= a.wilson_high
                out.append(((a, b), overlap))
    return out


# -- multiplexed senders -----------------------------------------------------

def sender_phases(assignment, seed):
    rng = np.random.default_rng([seed, 0xF4A5E])
    return {sid: int(rng.integers(0, assignment[sid].interval_us))
            for sid in assignment.ascending()}


def _multiplex_render(assignment, phases, symbols, model, duration, rng, variant=FREEBEE,
                      duty=None):
    scheds = []
    for sid in assignment.ascending():
        cfg = assignment[sid]
        scheds.append(periodic_schedule(phases[sid], cfg, 0, duration, symbols[sid],
                                        model.beacon_len_us, variant))
    sp = next(iter(assignment.entries.values())).sample_period_us
    trace = render(scheds, model, duration, rng, duty=duty, sample_period_us=sp)
    return trace.replace_samples(edge_filter_array(trace.samples))


def multiplex_experiment(assignment, occupancy, trials, seed, rho=5, cancel=False,
                         model=None, learn_rho=MULTIPLEX_LEARN_RHO):
    """Per-sender SER for concurrent FreeBee senders sharing one trace.

    The trace spans ``rho`` of the longest interval. Sender phases are fixed
    for the experiment and references are learned once on a quiet channel.
    """
    model = (model or ChannelModel()).with_(occupancy=occupancy)
    mode = CANCELLING if cancel else PLAIN
    t_max = max(cfg.interval_us for _, cfg in assignment.items())
    phases = sender_phases(assignment, seed)

    zeros = {sid: 0 for sid in assignment}
    quiet = _multiplex_render(assignment, phases, zeros, model.with_(occupancy=0.0),
                              learn_rho * t_max, np.random.default_rng([seed, 0x5EF]))
    # no noise to cancel while learning; cancelling here would only let one
    # sender's collisions bleed into the next sender's reference
    references = learn_references(quiet, assignment, PLAIN)

    duration = rho * t_max
    errors = {sid: 0 for sid in assignment}
    for i in range(trials):
        rng = np.random.default_rng([seed, 3, rho, int(round(occupancy * 1e6)), i])
        symbols = {sid: random_symbol(assignment[sid], FREEBEE, rng)
                   for sid in assignment.ascending()}
        trace = _multiplex_render(assignment, phases, symbols, model, duration, rng)
        decoded = demux(trace, assignment, mode, references)
        for sid, res in decoded.items():
            errors[sid] += res is None or res.symbol != symbols[sid]
    rows = []
    for sid in assignment.ascending():
        cfg = assignment[sid]
        lo, hi = wilson_interval(errors[sid], trials)
        rows.append({
            "sender_id": sid, "x": cfg.x, "delta_us": cfg.delta_us, "rho": rho,
            "occupancy": occupancy, "mode": mode, "trials": trials,
            "errors": errors[sid], "ser": errors[sid] / trials,
            "wilson_low": lo, "wilson_high": hi,
        })
    return rows


MULTIPLEX_FIELDS = ["sender_id", "x", "delta_us", "rho", "occupancy", "mode", "trials",
                    "errors", "ser", "wilson_low", "wilson_high"]


# -- duty-cycled reception ---------------------------------------------------

@dataclass(frozen=True)
class DutyResult:
    min_active_fraction: float
    success_rate: float
    contact_window_s: float
    trials: int
    evaluated: Tuple[Tuple[float, float], ...]


def duty_success_rate(assignment, contact_window_s, active_fraction, trials, seed,
                      model, period_s=None, variant=AFREEBEE):
    """Fraction of trials in which every sender decodes inside the contact window."""
    if variant != AFREEBEE:
        raise ValueError("duty-cycle experiment supports A-FreeBee senders only")
    window_us = int(round(contact_window_s * 1e6))
    period_us = window_us if period_s is None else int(round(period_s * 1e6))
    successes = 0
    for i in range(trials):
        rng = np.random.default_rng([seed, 4, window_us, i])
        phases = {sid: int(rng.integers(0, 2 * assignment[sid].lam))
                  * assignment[sid].sample_period_us for sid in assignment.ascending()}
        symbols = {sid: random_symbol(assignment[sid], variant, rng)
                   for sid in assignment.ascending()}
        duty = DutyCycleSchedule(period_us, active_fraction,
                                 float(rng.uniform(0, period_us)))
        trace = _multiplex_render(assignment, phases, symbols, model, window_us, rng,
                                  variant, duty)
        decoded = demux(trace, assignment, PLAIN, variant=variant)
        successes += all(res is not None and res.symbol == symbols[sid]
                         for sid, res in decoded.items())
    return successes / trials


def duty_cycle_experiment(assignment, contact_window_s, seed, occupancy=0.05, trials=200,
                          model=None, period_s=None, granularity=0.005, success_bar=0.99):
    """Smallest receiver duty cycle that still decodes every sender.

    Binary search over multiples of ``granularity``; the same trial seeds are
    reused at every duty cycle so the success curve is compared on common
    random numbers. The receiver period defaults to the contact window, so
    a single wake-up always falls inside the contact.
    """
    model = (model or ChannelModel()).with_(occupancy=occupancy)
    need_us = max(2 * cfg.lam * cfg.sample_period_us for _, cfg in assignment.items())
    if contact_window_s * 1e6 < need_us:
        raise InsufficientContactError(
            f"insufficient contact: {contact_window_s} s is shorter than one "
            f"two-interval fold ({need_us * 1e-6:.3f} s)"
        )
    steps = int(round(1.0 / granularity))
    cache = {}

    def rate(k):
        if k not in cache:
            cache[k] = duty_success_rate(assignment, contact_window_s, k / steps, trials,
                                         seed, model, period_s)
        return cache[k]

    if rate(steps) < success_bar:
        raise InsufficientContactError(
            f"insufficient contact: always-on reception succeeds in only "
            f"{rate(steps):.3f} of trials within {contact_window_s} s"
        )
    lo, hi = 0, steps
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if rate(mid) >= success_bar:
            hi = mid
        else:
            lo = mid
    evaluated = tuple(sorted((k / steps, r) for k, r in cache.items()))
    return DutyResult(hi / steps, rate(hi), contact_window_s, trials, evaluated)


# -- analytic reports --------------------------------------------------------

THROUGHPUT_FIELDS = ["sender_id", "x", "delta_us", "rho", "variant", "bits_exact",
                     "bits_floor", "rate_exact_bps", "rate_floor_bps"]


def throughput_report(assignment, rho, mode="per-sender", variant=FREEBEE):
    """Model bit rates per sender, or their sum."""
    if mode not in ("per-sender", "aggregated"):
        raise ValueError(f"unknown mode {mode!r}")
    rows = []
    for sid in assignment.ascending():
        cfg = assignment[sid]
        rows.append({
            "sender_id": sid, "x": cfg.x, "delta_us": cfg.delta_us, "rho": rho,
            "variant": variant, "bits_exact": math.log2(cfg.x),
            "bits_floor": bits_per_symbol(cfg),
            "rate_exact_bps": bit_rate(cfg, rho, variant),
            "rate_floor_bps": bit_rate(cfg, rho, variant, floor=True),
        })
    if mode == "per-sender":
        return rows
    return [{
        "sender_id": "ALL", "x": "", "delta_us": "", "rho": rho, "variant": variant,
        "bits_exact": sum(r["bits_exact"] for r in rows),
        "bits_floor": sum(r["bits_floor"] for r in rows),
        "rate_exact_bps": sum(r["rate_exact_bps"] for r in rows),
        "rate_floor_bps": sum(r["rate_floor_bps"] for r in rows),
    }]


OVERHEAD_FIELDS = ["variant", "lam", "rho", "samples", "storage_bits", "storage_bytes",
                   "fetch_ops", "add_ops", "scan_compares"]


def overhead_report(cfg, rho, variant=FREEBEE, lams: Optional[Sequence[int]] = None):
    """Receiver storage and operation counts for demodulating one symbol.

    One bit per sample; each sample costs a fetch and an add; the final scan
    is linear in the fold period. With ``lams`` (multiplexed reception) the
    buffer only has to hold ``rho`` rows of the longest interval.
    """
    check_variant(variant)
    lam = max(lams) if lams else cfg.lam
    period = lam if variant == FREEBEE else 2 * lam
    samples = rho * period
    scan = period - 1 if variant == FREEBEE else 2 * period - 3
    return {
        "variant": variant, "lam": lam, "rho": rho, "samples": samples,
        "storage_bits": samples, "storage_bytes": math.ceil(samples / 8),
        "fetch_ops": samples, "add_ops": samples, "scan_compares": scan,
    }


# -- CSV -----------------------------------------------------------------------

def _fmt(value):
    if isinstance(value, float):
        return format(value, ".10g")
    return value


def write_csv(rows, fieldnames, destination):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n",
                            extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(v) for k, v in row.items()})
    text = buf.getvalue()
    if destination is None:
        return text
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "w", newline="") as fh:
            fh.write(text)
    else:
        destination.write(text)
    return text
