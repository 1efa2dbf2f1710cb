"""Shared-channel simulation: beacons, access delay, background traffic.

Rendering turns ideal beacon schedules into the binary trace a receiver
would sample. Each beacon is delayed by a drawn channel-access delay;
background packets arrive as a Poisson process whose rate is calibrated to
a target occupancy. Beacons take priority over data: background packets
that would start inside a beacon's airtime, or within ``priority_guard_us``
before it, are deferred until the beacon ends. This keeps the idle gap in
front of beacons that makes their leading edge visible.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from beaconfold.modem import DELTA_BLUETOOTH_US, DELTA_WIFI_US, DELTA_ZIGBEE_US
from beaconfold.rssi import DEFAULT_SAMPLE_PERIOD_US, RssiTrace

MAX_OCCUPANCY = 0.95
CALIBRATION_WINDOW_US = 100_000_000
CALIBRATION_TOLERANCE = 0.005


@dataclass(frozen=True)
class ChannelModel:
    """Stochastic description of the shared channel.

    Access delay: with probability ``p_fast`` uniform in
    ``[0, fast_delay_us)``; otherwise ``fast_delay_us`` plus an exponential
    tail of mean ``tail_mean_us``, capped at ``tail_cap_us``. A uniform
    ``[0, backoff_extra_us]`` draw is added on top (Bluetooth advertisers).
    """

    occupancy: float = 0.0
    p_fast: float = 0.9
    fast_delay_us: float = 256.0
    tail_mean_us: float = 512.0
    tail_cap_us: float = 5000.0
    backoff_extra_us: float = 0.0
    packet_len_min_us: float = 128.0
    packet_len_max_us: float = 20 * 128.0
    beacon_len_us: int = 256
    beacon_priority: bool = True
    priority_guard_us: float = 256.0
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.occupancy < 1.0:
            raise ValueError("occupancy must be in [0, 1)")
        if not 0.0 < self.p_fast <= 1.0:
            raise ValueError("p_fast must be in (0, 1]")
        if self.fast_delay_us < 0 or self.tail_mean_us <= 0 or self.tail_cap_us < 0:
            raise ValueError("delay parameters must be non-negative")
        if self.backoff_extra_us < 0:
            raise ValueError("backoff_extra_us must be non-negative")
        if not 0 < self.packet_len_min_us <= self.packet_len_max_us:
            raise ValueError("packet lengths must satisfy 0 < min <= max")
        if self.beacon_len_us <= 0:
            raise ValueError("beacon_len_us must be positive")
        if self.priority_guard_us < 0:
            raise ValueError("priority_guard_us must be non-negative")

    @property
    def mean_packet_us(self):
        return 0.5 * (self.packet_len_min_us + self.packet_len_max_us)

    @property
    def max_delay_us(self):
        tail = max(self.fast_delay_us, self.tail_cap_us) if self.p_fast < 1 else self.fast_delay_us
        return tail + self.backoff_extra_us

    def with_(self, **changes):
        return replace(self, **changes)

    @classmethod
    def ideal(cls, **overrides):
        """Noise-free channel with zero access delay."""
        base = dict(occupancy=0.0, p_fast=1.0, fast_delay_us=0.0)
        base.update(overrides)
        return cls(**base)


# Per-technology defaults: shift unit and extra random backoff.
TECHNOLOGIES = {
    "wifi": {"delta_us": DELTA_WIFI_US, "backoff_extra_us": 0.0},
    "zigbee": {"delta_us": DELTA_ZIGBEE_US, "backoff_extra_us": 0.0},
    "bluetooth": {"delta_us": DELTA_BLUETOOTH_US, "backoff_extra_us": 10_000.0},
}


def channel_for(technology, **overrides):
    """Channel model for a sender of the given technology."""
    try:
        profile = TECHNOLOGIES[technology]
    except KeyError:
        raise ValueError(f"unknown technology {technology!r}") from None
    params = {"backoff_extra_us": profile["backoff_extra_us"]}
    params.update(overrides)
    return ChannelModel(**params)


@dataclass(frozen=True)
class DutyCycleSchedule:
    """Receiver wakes for ``active_fraction * period_us`` every period."""

    period_us: float
    active_fraction: float
    phase_us: float = 0.0

    def __post_init__(self):
        if self.period_us <= 0:
            raise ValueError("period_us must be positive")
        if not 0.0 < self.active_fraction <= 1.0:
            raise ValueError("active_fraction must be in (0, 1]")

    @property
    def active_us(self):
        return self.active_fraction * self.period_us

    def awake_mask(self, n_samples, sample_period_us, origin_us=0):
        if self.active_fraction >= 1.0:
            return np.ones(n_samples, dtype=np.uint8)
        t = origin_us + np.arange(n_samples, dtype=np.float64) * sample_period_us
        return (np.mod(t - self.phase_us, self.period_us) < self.active_us).astype(np.uint8)


# -- random draws ------------------------------------------------------------

def sample_access_delay(model, rng, size=None):
    """Channel access delay in µs (scalar if ``size`` is None)."""
    n = 1 if size is None else int(size)
    fast = rng.random(n) < model.p_fast
    delay = rng.uniform(0.0, 1.0, n) * model.fast_delay_us
    n_slow = int(n - fast.sum())
    if n_slow:
        tail = model.fast_delay_us + rng.exponential(model.tail_mean_us, n_slow)
        delay[~fast] = np.minimum(tail, max(model.tail_cap_us, model.fast_delay_us))
    if model.backoff_extra_us > 0:
        delay += rng.uniform(0.0, model.backoff_extra_us, n)
    return float(delay[0]) if size is None else delay


def _background_packets(model, rate_per_us, start_us, end_us, rng):
    """Raw (unmerged) packet start times and lengths covering the window."""
    lead = model.packet_len_max_us
    span = (end_us - start_us) + lead
    count = rng.poisson(rate_per_us * span) if rate_per_us > 0 else 0
    starts = np.sort(rng.uniform(start_us - lead, end_us, count))
    lengths = rng.uniform(model.packet_len_min_us, model.packet_len_max_us, count)
    return starts, lengths


def merge_intervals(starts, ends):
    """Union of half-open intervals as sorted, disjoint ``(starts, ends)``."""
    starts = np.asarray(starts, dtype=np.float64)
    ends = np.asarray(ends, dtype=np.float64)
    if starts.size == 0:
        return starts.copy(), ends.copy()
    order = np.argsort(starts, kind="stable")
    s, e = starts[order], ends[order]
    reach = np.maximum.accumulate(e)
    new = np.ones(s.size, dtype=bool)
    new[1:] = s[1:] > reach[:-1]
    idx = np.flatnonzero(new)
    run_end = np.maximum.reduceat(e, idx)
    return s[idx], run_end


def _covered_fraction(starts, ends, start_us, end_us):
    s, e = merge_intervals(np.clip(starts, start_us, end_us), np.clip(ends, start_us, end_us))
    return float((e - s).sum()) / (end_us - start_us)


@functools.lru_cache(maxsize=256)
def calibrate_noise_rate(model):
    """Poisson arrival rate (per µs) giving long-run busy fraction ``occupancy``.

    Starts from the coverage identity ``B = 1 - exp(-rate * mean_len)`` and
    corrects against a seeded simulation until within 0.5% relative.
    """
    B = model.occupancy
    if B == 0:
        return 0.0
    if B > MAX_OCCUPANCY:
        raise ValueError(f"occupancy {B} unreachable; calibration is capped at {MAX_OCCUPANCY}")
    rate = -math.log1p(-B) / model.mean_packet_us
    for attempt in range(12):
        rng = np.random.default_rng([model.rng_seed, 0xCA11B, attempt])
        starts, lengths = _background_packets(model, rate, 0, CALIBRATION_WINDOW_US, rng)
        measured = _covered_fraction(starts, starts + lengths, 0, CALIBRATION_WINDOW_US)
        if abs(measured - B) <= CALIBRATION_TOLERANCE * B or not 0 < measured < 1:
            break
        rate *= math.log1p(-B) / math.log1p(-measured)
    return rate


def gen_background(model, duration_us, rng, start_us=0):
    """Merged busy intervals of background traffic over ``[start, start+duration)``."""
    if duration_us <= 0:
        raise ValueError("duration must be positive")
    end_us = start_us + duration_us
    rate = calibrate_noise_rate(model)
    if rate == 0:
        empty = np.empty(0)
        return empty, empty.copy()
    starts, lengths = _background_packets(model, rate, start_us, end_us, rng)
    s, e = merge_intervals(starts, starts + lengths)
    keep = e > start_us
    return np.maximum(s[keep], start_us), np.minimum(e[keep], end_us)


def defer_to_beacons(starts, lengths, beacon_starts, beacon_ends, guard_us):
    """Move packets that would overlap a beacon's protected window past it."""
    if beacon_starts.size == 0 or starts.size == 0:
        return starts
    ws, we = merge_intervals(beacon_starts - guard_us, beacon_ends)
    starts = starts.copy()
    for _ in range(64):
        j = np.searchsorted(ws, starts + lengths, side="left") - 1
        valid = j >= 0
        jj = np.where(valid, j, 0)
        hit = valid & (we[jj] > starts)
        if not hit.any():
            break
        starts[hit] = we[jj[hit]]
    return starts


def rasterize(starts, ends, n_samples, sample_period_us, origin_us=0):
    """Sample the channel at each tick ``origin + i*sample_period``.

    Sample ``i`` is busy when some half-open interval contains its instant,
    so a busy period of length ``L`` always covers ``floor`` or ``ceil`` of
    ``L / sample_period`` samples, never more.
    """
    starts = np.asarray(starts, dtype=np.float64) - origin_us
    ends = np.asarray(ends, dtype=np.float64) - origin_us
    first = np.clip(np.ceil(starts / sample_period_us), 0, n_samples).astype(np.int64)
    last = np.clip(np.ceil(ends / sample_period_us), 0, n_samples).astype(np.int64)
    keep = last > first
    diff = np.bincount(first[keep], minlength=n_samples + 1)
    diff = diff - np.bincount(last[keep], minlength=n_samples + 1)
    return (np.cumsum(diff[:n_samples]) > 0).astype(np.uint8)


def render(schedules: Sequence, model: ChannelModel, duration_us, rng,
           duty: Optional[DutyCycleSchedule] = None, origin_us=0,
           sample_period_us=DEFAULT_SAMPLE_PERIOD_US):
    """Sample the channel as a receiver would.

    ``rng`` seeds independent substreams: one per schedule (access delays)
    and one for background traffic, so adding a sender does not perturb the
    noise realisation.
    """
    if duration_us <= 0:
        raise ValueError("duration must be positive")
    end_us = origin_us + duration_us
    for i, sched in enumerate(schedules):
        t = sched.times_us
        if t.size and (t[0] < origin_us or t[-1] >= end_us):
            raise ValueError(
                f"schedule {i} spans [{t[0]}, {t[-1]}] us, outside the rendered "
                f"window [{origin_us}, {end_us})"
            )
    n_samples = int(duration_us // sample_period_us)
    streams = rng.spawn(len(schedules) + 1)
    noise_rng, sender_rngs = streams[0], streams[1:]

    b_starts, b_ends = [], []
    for sched, srng in zip(schedules, sender_rngs):
        delays = sample_access_delay(model, srng, len(sched))
        start = sched.times_us.astype(np.float64) + delays
        b_starts.append(start)
        b_ends.append(start + sched.beacon_duration_us)
    b_starts = np.concatenate(b_starts) if b_starts else np.empty(0)
    b_ends = np.concatenate(b_ends) if b_ends else np.empty(0)

    rate = calibrate_noise_rate(model) if model.occupancy > 0 else 0.0
    n_starts, n_lengths = _background_packets(model, rate, origin_us, end_us, noise_rng)
    if model.beacon_priority:
        order = np.argsort(b_starts, kind="stable")
        n_starts = defer_to_beacons(n_starts, n_lengths, b_starts[order], b_ends[order],
                                    model.priority_guard_us)

    samples = rasterize(np.concatenate([b_starts, n_starts]),
                        np.concatenate([b_ends, n_starts + n_lengths]),
                        n_samples, sample_period_us, origin_us)
    awake = None
    if duty is not None:
        awake = duty.awake_mask(n_samples, sample_period_us, origin_us)
        samples = samples & awake
    return RssiTrace(samples, sample_period_us, origin_us, awake)


def render_background(model, duration_us, rng, origin_us=0,
                      sample_period_us=DEFAULT_SAMPLE_PERIOD_US):
    """Background traffic alone, sampled."""
    return render([], model, duration_us, rng, origin_us=origin_us,
                  sample_period_us=sample_period_us)
