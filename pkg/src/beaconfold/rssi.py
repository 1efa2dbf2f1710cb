"""Binary RSSI traces: quantization, packet-edge filtering and file I/O."""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from beaconfold.errors import TraceFormatError

DEFAULT_SAMPLE_PERIOD_US = 128
DEFAULT_THRESHOLD_DBM = -75.0

TRACE_MAGIC = "beaconfold-trace v1"
LINE_WIDTH = 80


def _frozen_bits(values, name):
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0 and 1")
    arr = arr.astype(np.uint8, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class RssiTrace:
    """Fixed-rate binary channel occupancy (0 idle, 1 busy).

    ``awake`` is an optional mask of the same length; samples where it is 0
    were taken while the receiver radio slept and carry no information.
    """

    samples: np.ndarray
    sample_period_us: int = DEFAULT_SAMPLE_PERIOD_US
    origin_time_us: int = 0
    awake: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen_bits(self.samples, "samples"))
        if self.sample_period_us <= 0:
            raise ValueError("sample_period_us must be positive")
        if self.awake is not None:
            awake = _frozen_bits(self.awake, "awake")
            if awake.shape != self.samples.shape:
                raise ValueError("awake mask must match samples in length")
            object.__setattr__(self, "awake", awake)

    def __len__(self):
        return int(self.samples.size)

    def __eq__(self, other):
        if not isinstance(other, RssiTrace):
            return NotImplemented
        if (self.awake is None) != (other.awake is None):
            return False
        if self.awake is not None and not np.array_equal(self.awake, other.awake):
            return False
        return (
            self.sample_period_us == other.sample_period_us
            and self.origin_time_us == other.origin_time_us
            and np.array_equal(self.samples, other.samples)
        )

    __hash__ = None

    @property
    def busy_fraction(self):
        return float(self.samples.mean()) if len(self) else 0.0

    @property
    def duration_us(self):
        return len(self) * self.sample_period_us

    def replace_samples(self, samples):
        return RssiTrace(samples, self.sample_period_us, self.origin_time_us, self.awake)

    def __repr__(self):
        head = "".join(map(str, self.samples[:32]))
        more = "..." if len(self) > 32 else ""
        return (
            f"RssiTrace(n={len(self)}, period={self.sample_period_us}us, "
            f"origin={self.origin_time_us}us, samples={head}{more})"
        )


@dataclass(frozen=True)
class QuantizerConfig:
    threshold_dbm: float = DEFAULT_THRESHOLD_DBM

    def __post_init__(self):
        if not math.isfinite(self.threshold_dbm):
            raise ValueError("threshold_dbm must be finite")


def quantize(power_trace, cfg=QuantizerConfig(), sample_period_us=DEFAULT_SAMPLE_PERIOD_US,
             origin_time_us=0):
    """Threshold dBm readings into a busy/idle trace.

    A reading exactly at the threshold counts as busy.
    """
    power = np.asarray(power_trace, dtype=float)
    if power.size == 0:
        raise ValueError("empty trace")
    return RssiTrace((power >= cfg.threshold_dbm).astype(np.uint8), sample_period_us,
                     origin_time_us)


def edge_filter_array(samples):
    """Keep the first two samples of every busy run, zero the rest."""
    x = np.asarray(samples, dtype=np.uint8)
    if x.size == 0:
        return x.copy()
    prev1 = np.zeros_like(x)
    prev1[1:] = x[:-1]
    prev2 = np.zeros_like(x)
    prev2[2:] = x[:-2]
    head = (x == 1) & (prev1 == 0)
    second = (x == 1) & (prev1 == 1) & (prev2 == 0)
    return (head | second).astype(np.uint8)


def packet_edge_filter(trace):
    """Reduce each packet to its leading edge.

    Every maximal run of busy samples keeps its first ``min(2, len)`` samples.
    Long data packets shrink to the same footprint as a beacon, which cuts
    background noise far more than it cuts beacon energy.
    """
    return trace.replace_samples(edge_filter_array(trace.samples))


# -- file format -----------------------------------------------------------

def dumps_trace(trace):
    if trace.origin_time_us < 0:
        raise ValueError("origin_time_us must be non-negative to serialize")
    body = "".join("1" if v else "0" for v in trace.samples.tolist())
    lines = [
        TRACE_MAGIC,
        f"sample_period_us={int(trace.sample_period_us)}",
        f"origin_time_us={int(trace.origin_time_us)}",
    ]
    lines.extend(body[i:i + LINE_WIDTH] for i in range(0, len(body), LINE_WIDTH))
    return "\n".join(lines) + "\n"


def _header_int(line, lineno, key, minimum):
    name, sep, value = line.partition("=")
    if not sep or name.strip() != key:
        raise TraceFormatError(f"expected '{key}=<int>'", lineno)
    try:
        out = int(value.strip())
    except ValueError:
        raise TraceFormatError(f"{key} is not an integer: {value.strip()!r}", lineno)
    if out < minimum:
        raise TraceFormatError(f"{key} must be >= {minimum}", lineno)
    return out


def loads_trace(text):
    lines = text.splitlines()
    if not lines or lines[0].strip() != TRACE_MAGIC:
        raise TraceFormatError(f"missing '{TRACE_MAGIC}' header", 1)
    if len(lines) < 2:
        raise TraceFormatError("missing sample_period_us", 2)
    period = _header_int(lines[1], 2, "sample_period_us", 1)
    if len(lines) < 3:
        raise TraceFormatError("missing origin_time_us", 3)
    origin = _header_int(lines[2], 3, "origin_time_us", 0)
    chunks = []
    for lineno, line in enumerate(lines[3:], start=4):
        line = line.strip()
        bad = set(line) - {"0", "1"}
        if bad:
            raise TraceFormatError(f"non-binary sample character {sorted(bad)[0]!r}", lineno)
        chunks.append(line)
    body = "".join(chunks)
    samples = np.frombuffer(body.encode("ascii"), dtype=np.uint8) - ord("0")
    return RssiTrace(samples, period, origin)


def write_trace(trace, destination):
    """Write ``trace`` to a path or text stream.

    The sleep mask of a duty-cycled trace is not part of the format; asleep
    samples are written as idle.
    """
    text = dumps_trace(trace)
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    else:
        destination.write(text)


def read_trace(source):
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8", errors="replace") as fh:
            return loads_trace(fh.read())
    if isinstance(source, io.TextIOBase) or hasattr(source, "read"):
        return loads_trace(source.read())
    raise TypeError("source must be a path or readable text stream")
