"""Beacon-timing modulation and fold-based demodulation.

Two variants share the same machinery:

* ``freebee`` shifts every beacon by ``s`` shift units from a reference
  position the receiver learned beforehand.
* ``afreebee`` shifts every other beacon, forming two interleaved streams of
  period ``2T``; the receiver reads the symbol from the distance between the
  two streams and needs no reference.

Times are integer microseconds. Receivers work on sample bins of
``sample_period_us``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np

from beaconfold.errors import NoSignalError, SymbolRangeError
from beaconfold.rssi import DEFAULT_SAMPLE_PERIOD_US, RssiTrace

FREEBEE = "freebee"
AFREEBEE = "afreebee"
VARIANTS = (FREEBEE, AFREEBEE)

DEFAULT_BEACON_US = 2 * DEFAULT_SAMPLE_PERIOD_US

# Shift granularity per technology, in microseconds.
DELTA_WIFI_US = 1024
DELTA_ZIGBEE_US = 15360
DELTA_BLUETOOTH_US = 625


def check_variant(variant):
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    return variant


@dataclass(frozen=True)
class IntervalConfig:
    """Timing of one sender: interval ``T = x * delta_us``."""

    delta_us: int
    x: int
    sample_period_us: int = DEFAULT_SAMPLE_PERIOD_US

    def __post_init__(self):
        if self.delta_us <= 0:
            raise ValueError("delta_us must be positive")
        if self.sample_period_us <= 0:
            raise ValueError("sample_period_us must be positive")
        if self.x < 2:
            raise ValueError("x must be at least 2")
        if self.lam < 2:
            raise ValueError(f"interval spans only {self.lam} sample(s); need at least 2")

    @property
    def interval_us(self):
        return self.x * self.delta_us

    @property
    def interval_s(self):
        return self.interval_us * 1e-6

    @property
    def lam(self):
        """Sample bins per interval, rounded half up."""
        return (2 * self.interval_us + self.sample_period_us) // (2 * self.sample_period_us)

    @property
    def samples_per_delta(self):
        return self.delta_us / self.sample_period_us

    def symbol_range(self, variant=FREEBEE):
        """Inclusive ``(lo, hi)`` bounds of valid shifts."""
        if check_variant(variant) == FREEBEE:
            return -((self.x - 1) // 2), self.x // 2
        return 0, self.x - 1

    def check_symbol(self, sym, variant=FREEBEE):
        lo, hi = self.symbol_range(variant)
        if not isinstance(sym, (int, np.integer)) or not lo <= sym <= hi:
            raise SymbolRangeError(
                f"{variant} symbol {sym!r} outside [{lo}, {hi}] for x={self.x}"
            )
        return int(sym)


@dataclass(frozen=True, eq=False)
class BeaconSchedule:
    """Ideal emission instants (µs) before any channel effects."""

    times_us: np.ndarray
    beacon_duration_us: int = DEFAULT_BEACON_US

    def __post_init__(self):
        times = np.asarray(self.times_us, dtype=np.int64).reshape(-1).copy()
        if times.size > 1 and not (np.diff(times) > 0).all():
            raise ValueError("beacon times must be strictly increasing")
        if self.beacon_duration_us <= 0:
            raise ValueError("beacon_duration_us must be positive")
        times.flags.writeable = False
        object.__setattr__(self, "times_us", times)

    def __len__(self):
        return int(self.times_us.size)

    def __eq__(self, other):
        if not isinstance(other, BeaconSchedule):
            return NotImplemented
        return (self.beacon_duration_us == other.beacon_duration_us
                and np.array_equal(self.times_us, other.times_us))

    __hash__ = None

    def within(self, start_us, end_us):
        """Beacons whose emission instant falls in ``[start_us, end_us)``."""
        t = self.times_us
        return BeaconSchedule(t[(t >= start_us) & (t < end_us)], self.beacon_duration_us)

    def merged(self, other):
        if other.beacon_duration_us != self.beacon_duration_us:
            raise ValueError("cannot merge schedules with different beacon durations")
        return BeaconSchedule(np.union1d(self.times_us, other.times_us), self.beacon_duration_us)


@dataclass(frozen=True, eq=False)
class FoldSums:
    sums: np.ndarray
    period: int
    rows: int
    awake_rows: Optional[np.ndarray] = None

    def __len__(self):
        return self.period

    def argmax(self):
        return int(np.argmax(self.sums))

    def rows_at(self, column):
        if self.awake_rows is None:
            return self.rows
        return int(self.awake_rows[column])


class Demodulated(NamedTuple):
    symbol: int
    confidence: float
    columns: Tuple[int, ...]


# -- modulation ------------------------------------------------------------

def modulate_freebee(reference_time_us, cfg, sym, rho, beacon_duration_us=DEFAULT_BEACON_US):
    """Shift ``rho`` consecutive beacons by ``sym`` shift units.

    Beacon ``k`` (1-based) goes out at ``ref + k*T + sym*delta``; the gap
    between consecutive beacons stays ``T``.
    """
    sym = cfg.check_symbol(sym, FREEBEE)
    if rho < 1:
        raise ValueError("rho must be >= 1")
    k = np.arange(1, rho + 1, dtype=np.int64)
    times = int(reference_time_us) + k * cfg.interval_us + sym * cfg.delta_us
    return BeaconSchedule(times, beacon_duration_us)


def modulate_afreebee(reference_time_us, cfg, sym, rho, beacon_duration_us=DEFAULT_BEACON_US):
    """Shift every other beacon to encode ``sym``; ``rho`` counts beacon pairs.

    The base stream sits at ``ref + k*2T`` and the shifted stream at
    ``ref + k*2T + T - sym*delta`` for ``k = 0..rho-1``.
    """
    sym = cfg.check_symbol(sym, AFREEBEE)
    if rho < 1:
        raise ValueError("rho must be >= 1")
    T = cfg.interval_us
    base = int(reference_time_us) + np.arange(rho, dtype=np.int64) * 2 * T
    shifted = base + T - sym * cfg.delta_us
    return BeaconSchedule(np.sort(np.concatenate([base, shifted])), beacon_duration_us)


def modulate(variant, reference_time_us, cfg, sym, rho, beacon_duration_us=DEFAULT_BEACON_US):
    if check_variant(variant) == FREEBEE:
        return modulate_freebee(reference_time_us, cfg, sym, rho, beacon_duration_us)
    return modulate_afreebee(reference_time_us, cfg, sym, rho, beacon_duration_us)


def periodic_schedule(reference_time_us, cfg, start_us, end_us, sym=0,
                      beacon_duration_us=DEFAULT_BEACON_US, variant=FREEBEE):
    """Continuous modulated beacon stream restricted to ``[start_us, end_us)``.

    Used when a sender keeps repeating one symbol across an arbitrary
    receiver window.
    """
    period = cfg.interval_us if check_variant(variant) == FREEBEE else 2 * cfg.interval_us
    first = math.floor((start_us - reference_time_us) / period) - 1
    count = math.ceil((end_us - start_us) / period) + 3
    ref = reference_time_us + first * period
    if variant == FREEBEE:
        sched = modulate_freebee(ref - cfg.interval_us, cfg, sym, count, beacon_duration_us)
    else:
        sched = modulate_afreebee(ref, cfg, sym, count, beacon_duration_us)
    return sched.within(start_us, end_us)


# -- folding ---------------------------------------------------------------

def _samples_of(trace):
    if isinstance(trace, RssiTrace):
        return trace.samples, trace.awake
    return np.asarray(trace, dtype=np.uint8), None


def fold(trace, period, rows=None):
    """Stack the trace into rows of ``period`` samples and sum each column.

    Only the longest prefix made of whole rows is used. ``rows`` limits the
    fold to the first ``rows`` rows.
    """
    samples, awake = _samples_of(trace)
    period = int(period)
    if period < 2:
        raise ValueError("fold period must be >= 2")
    if samples.size < period:
        raise ValueError(f"trace of {samples.size} samples is shorter than period {period}")
    n = samples.size // period
    if rows is not None:
        n = min(n, int(rows))
        if n < 1:
            raise ValueError("rows must be >= 1")
    used = n * period
    sums = samples[:used].reshape(n, period).sum(axis=0, dtype=np.int64)
    awake_rows = None
    if awake is not None:
        awake_rows = awake[:used].reshape(n, period).sum(axis=0, dtype=np.int64)
    return FoldSums(sums, period, n, awake_rows)


def _nearest_units(offset_samples, cfg):
    """Nearest whole shift unit to ``offset_samples`` bins, ties toward zero."""
    n = abs(int(offset_samples)) * cfg.sample_period_us
    k, rem = divmod(n, cfg.delta_us)
    if 2 * rem > cfg.delta_us:
        k += 1
    return k if offset_samples >= 0 else -k


def _check_length(samples, period, what):
    if samples.size < period:
        raise ValueError(
            f"{what} needs at least {period} samples, trace has {samples.size}"
        )


def learn_reference(trace, cfg, rows=None):
    """Column of the unmodulated beacon within an interval."""
    samples, _ = _samples_of(trace)
    _check_length(samples, cfg.lam, "learn_reference")
    fs = fold(trace, cfg.lam, rows)
    if not fs.sums.any():
        raise NoSignalError("no signal: trace has no busy samples")
    return fs.argmax()


def demodulate_freebee(trace, cfg, reference_position, rho_hint=None):
    """Recover a FreeBee symbol by folding with the interval length.

    The peak column's offset from the reference is mapped into
    ``(-lam/2, lam/2]`` and rounded to the nearest shift unit. Confidence is
    the peak fold sum over the number of (awake) rows.
    """
    samples, _ = _samples_of(trace)
    lam = cfg.lam
    if not 0 <= reference_position < lam:
        raise ValueError(f"reference_position must be in [0, {lam})")
    _check_length(samples, lam, "demodulate_freebee")
    fs = fold(trace, lam, rho_hint)
    if not fs.sums.any():
        raise NoSignalError("no signal: trace has no busy samples")
    peak = fs.argmax()
    offset = (peak - int(reference_position)) % lam
    if 2 * offset > lam:
        offset -= lam
    lo, _ = cfg.symbol_range(FREEBEE)
    sym = (_nearest_units(offset, cfg) - lo) % cfg.x + lo
    rows = fs.rows_at(peak)
    confidence = float(fs.sums[peak]) / rows if rows else 0.0
    return Demodulated(int(sym), confidence, (peak,))


def _cyclic_exclusion(period, center, radius):
    return (np.arange(center - radius, center + radius + 1) % period)


def demodulate_afreebee(trace, cfg, rho_hint=None):
    """Recover an A-FreeBee symbol from the spacing of two beacon streams.

    Folds with ``2*lam``. The strongest column is taken first; the second
    stream is the strongest column more than half a shift unit away from it,
    so the two picks never land on the same beacon footprint. Ties go to
    the smaller column index.
    """
    samples, _ = _samples_of(trace)
    lam = cfg.lam
    period = 2 * lam
    _check_length(samples, period, "demodulate_afreebee")
    fs = fold(trace, period, rho_hint)
    sums = fs.sums
    if np.count_nonzero(sums) < 2:
        raise NoSignalError("no signal: fewer than two busy columns")
    radius = int(cfg.samples_per_delta // 2)
    first = fs.argmax()
    masked = sums.astype(np.int64).copy()
    masked[_cyclic_exclusion(period, first, radius)] = -1
    second = int(np.argmax(masked))
    if masked[second] <= 0:
        raise NoSignalError("no signal: no second beacon stream")
    c1, c2 = sorted((first, second))
    arc = min((c2 - c1) % period, (c1 - c2) % period)
    _, hi = cfg.symbol_range(AFREEBEE)
    sym = min(max(_nearest_units(lam - arc, cfg), 0), hi)
    rows = min(fs.rows_at(c1), fs.rows_at(c2))
    confidence = float(sums[c1] + sums[c2]) / (2 * rows) if rows else 0.0
    return Demodulated(int(sym), confidence, (c1, c2))


def demodulate(variant, trace, cfg, reference_position=0, rho_hint=None):
    if check_variant(variant) == FREEBEE:
        return demodulate_freebee(trace, cfg, reference_position, rho_hint)
    return demodulate_afreebee(trace, cfg, rho_hint)


# -- symbols <-> bits ------------------------------------------------------

def bits_per_symbol(cfg):
    return int(cfg.x).bit_length() - 1


def encodable_symbols(cfg, variant=FREEBEE):
    """The ``2**width`` lowest-magnitude valid shifts, in bit-pattern order."""
    width = bits_per_symbol(cfg)
    return [bits_to_symbol(format(v, f"0{width}b"), cfg, variant) for v in range(1 << width)]


def symbol_to_bits(sym, cfg, variant=FREEBEE):
    """Bit string (MSB first) for ``sym``.

    FreeBee uses a wrapped two's-complement order over
    ``(-2**(w-1), 2**(w-1)]`` so that all-zero bits mean no shift.
    """
    sym = cfg.check_symbol(sym, variant)
    width = bits_per_symbol(cfg)
    if variant == FREEBEE:
        half = 1 << (width - 1) if width else 0
        if not -half < sym <= half:
            raise SymbolRangeError(f"symbol {sym} is not encodable in {width} bits")
        value = sym % (1 << width)
    else:
        if sym >= 1 << width:
            raise SymbolRangeError(f"symbol {sym} is not encodable in {width} bits")
        value = sym
    return format(value, f"0{width}b")


def bits_to_symbol(bits, cfg, variant=FREEBEE):
    width = bits_per_symbol(cfg)
    if len(bits) != width or set(bits) - {"0", "1"}:
        raise ValueError(f"expected {width} binary digits, got {bits!r}")
    value = int(bits, 2)
    if check_variant(variant) == FREEBEE and value > (1 << (width - 1)):
        value -= 1 << width
    return cfg.check_symbol(value, variant)


# -- rate ------------------------------------------------------------------

def bit_rate(cfg, rho, variant=FREEBEE, floor=False):
    """Bits per second for one sender repeating each symbol ``rho`` times.

    ``log2(x) / (T * rho)``; A-FreeBee spends ``2T`` per repetition and gets
    half. ``floor=True`` counts only whole bits per symbol.
    """
    if rho < 1:
        raise ValueError("rho must be >= 1")
    bits = bits_per_symbol(cfg) if floor else math.log2(cfg.x)
    rate = bits / (cfg.interval_s * rho)
    return rate / 2 if check_variant(variant) == AFREEBEE else rate


def symbol_duration_us(cfg, rho, variant=FREEBEE):
    per = cfg.interval_us if check_variant(variant) == FREEBEE else 2 * cfg.interval_us
    return rho * per
