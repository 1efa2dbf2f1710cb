"""Interval multiplexing: coprime intervals, demultiplexing, cancellation.

Senders whose intervals (in shift units) are pairwise coprime do not pile
up in each other's fold columns, so a receiver can fold the same trace once
per interval and read every sender independently. The interval itself
identifies the sender.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, Mapping, Optional

import numpy as np

from beaconfold.errors import CapacityError, NoSignalError
from beaconfold.modem import (
    AFREEBEE,
    FREEBEE,
    IntervalConfig,
    check_variant,
    demodulate_afreebee,
    demodulate_freebee,
)
from beaconfold.rssi import DEFAULT_SAMPLE_PERIOD_US, RssiTrace

PLAIN = "plain"
CANCELLING = "cancelling"
ASSIGNMENT_FIELDS = ("sender_id", "x", "delta_us")


def pairwise_coprime(xs):
    return all(math.gcd(a, b) == 1 for a, b in combinations(xs, 2))


@dataclass(frozen=True)
class IntervalAssignment:
    entries: Mapping[str, IntervalConfig]

    def __post_init__(self):
        entries = dict(self.entries)
        xs = [cfg.x for cfg in entries.values()]
        if len(set(xs)) != len(xs):
            raise ValueError("duplicate interval in assignment")
        if not pairwise_coprime(xs):
            raise ValueError("assignment intervals are not pairwise coprime")
        object.__setattr__(self, "entries", entries)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, sender_id):
        return self.entries[sender_id]

    def items(self):
        return self.entries.items()

    @property
    def xs(self):
        return sorted(cfg.x for cfg in self.entries.values())

    def ascending(self):
        """Sender ids ordered by interval, shortest first."""
        return sorted(self.entries, key=lambda sid: (self.entries[sid].x, sid))

    @property
    def max_lam(self):
        return max(cfg.lam for cfg in self.entries.values())


def primes_between(lo, hi):
    from sympy import primerange

    return list(primerange(max(lo, 2), hi + 1))


def prime_count_estimate(x_min, x_max):
    """Prime-number-theorem estimate of how many primes lie in the range."""
    return x_max / math.log(x_max) - x_min / math.log(x_min)


def assign_intervals(n, x_min, x_max, delta_us=1024, sample_period_us=DEFAULT_SAMPLE_PERIOD_US):
    """The ``n`` smallest primes in ``[x_min, x_max]`` as sender intervals."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if x_min < 2:
        raise ValueError("x_min must be >= 2")
    primes = primes_between(x_min, x_max)
    if len(primes) < n:
        raise CapacityError(n, len(primes))
    return IntervalAssignment({
        f"F{i + 1}": IntervalConfig(delta_us, int(p), sample_period_us)
        for i, p in enumerate(primes[:n])
    })


def choose_interval(neighbor_xs, x_min, x_max):
    """Smallest prime in range not already used by, and coprime to, neighbours."""
    taken = set(neighbor_xs)
    for p in primes_between(x_min, x_max):
        if p not in taken and all(math.gcd(p, x) == 1 for x in taken):
            return int(p)
    raise CapacityError(1, 0)


def verify_orthogonality(xs, trace_len_samples, cfg_common):
    """Whether folding a trace this long keeps every pair of senders apart.

    Requires pairwise coprime intervals and a trace strictly shorter than
    the least common multiple of every pair of periods.
    """
    xs = list(xs)
    if len(set(xs)) != len(xs):
        return False
    per_unit = cfg_common.delta_us / cfg_common.sample_period_us
    for a, b in combinations(xs, 2):
        if math.gcd(a, b) != 1:
            return False
        if not trace_len_samples < math.lcm(a, b) * per_unit:
            return False
    return True


def cancel_beacons(trace, cfg, peak_column, rho=None, period=None):
    """Copy of ``trace`` with one sender's recovered beacons erased.

    Zeroes two samples in every folded row: the busy run through the peak
    column, which after edge filtering is the whole footprint of a beacon.
    When the peak is the second sample of a run the pair starts one sample
    earlier; otherwise it is the peak and the sample after it.
    """
    period = cfg.lam if period is None else int(period)
    if not 0 <= peak_column < period:
        raise ValueError(f"peak_column must be in [0, {period})")
    samples = np.array(trace.samples, dtype=np.uint8)
    rows = samples.size // period
    if rho is not None:
        rows = min(rows, int(rho))
    base = np.arange(rows, dtype=np.int64) * period + peak_column
    prev = np.where(base > 0, samples[np.maximum(base - 1, 0)], 0)
    second = (samples[base] == 1) & (prev == 1)
    start = base - second
    idx = np.concatenate([start, start + 1])
    samples[idx[idx < samples.size]] = 0
    return trace.replace_samples(samples)


def demux(trace: RssiTrace, assignment: IntervalAssignment, mode=PLAIN,
          references: Optional[Mapping[str, int]] = None, variant=FREEBEE,
          rho_hint=None) -> Dict[str, object]:
    """Demodulate every assigned sender from one shared trace.

    Returns ``{sender_id: Demodulated or None}``; ``None`` marks a sender
    whose signal could not be found. In cancelling mode senders are read in
    ascending interval order and each one's beacons are removed before the
    next fold.
    """
    check_variant(variant)
    if mode not in (PLAIN, CANCELLING):
        raise ValueError(f"unknown demux mode {mode!r}")
    if variant == FREEBEE and references is None:
        raise ValueError("FreeBee demultiplexing needs per-sender reference positions")
    order = assignment.ascending() if mode == CANCELLING else list(assignment)
    out = {}
    current = trace
    for sid in order:
        cfg = assignment[sid]
        try:
            if variant == FREEBEE:
                result = demodulate_freebee(current, cfg, references[sid], rho_hint)
            else:
                result = demodulate_afreebee(current, cfg, rho_hint)
        except NoSignalError:
            out[sid] = None
            continue
        out[sid] = result
        if mode == CANCELLING:
            period = cfg.lam if variant == FREEBEE else 2 * cfg.lam
            for column in result.columns:
                current = cancel_beacons(current, cfg, column, period=period)
    return {sid: out[sid] for sid in assignment}


def learn_references(trace, assignment, mode=CANCELLING):
    """Reference column per sender from a trace of unmodulated beacons."""
    from beaconfold.modem import learn_reference

    refs = {}
    current = trace
    order = assignment.ascending() if mode == CANCELLING else list(assignment)
    for sid in order:
        cfg = assignment[sid]
        refs[sid] = learn_reference(current, cfg)
        if mode == CANCELLING:
            current = cancel_beacons(current, cfg, refs[sid])
    return refs


# -- CSV -------------------------------------------------------------------

def write_assignment(assignment, destination):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ASSIGNMENT_FIELDS)
    for sid, cfg in assignment.items():
        writer.writerow([sid, cfg.x, cfg.delta_us])
    text = buf.getvalue()
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "w", newline="") as fh:
            fh.write(text)
    else:
        destination.write(text)


def read_assignment(source, sample_period_us=DEFAULT_SAMPLE_PERIOD_US):
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="") as fh:
            text = fh.read()
    else:
        text = source.read()
    reader = csv.DictReader(io.StringIO(text))
    missing = set(ASSIGNMENT_FIELDS) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"assignment CSV missing columns: {sorted(missing)}")
    entries = {}
    for lineno, row in enumerate(reader, start=2):
        try:
            cfg = IntervalConfig(int(row["delta_us"]), int(row["x"]), sample_period_us)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        sid = row["sender_id"].strip()
        if sid in entries:
            raise ValueError(f"line {lineno}: duplicate sender_id {sid!r}")
        entries[sid] = cfg
    if not entries:
        raise ValueError("assignment CSV has no senders")
    return IntervalAssignment(entries)
