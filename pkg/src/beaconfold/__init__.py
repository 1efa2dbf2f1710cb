"""Timing-based cross-technology communication over periodic beacons.

Symbols ride on the transmission timing of beacon frames; receivers recover
them from binary RSSI traces by folding.
"""

from beaconfold.channel import ChannelModel, DutyCycleSchedule, render
from beaconfold.modem import (
    BeaconSchedule,
    Demodulated,
    FoldSums,
    IntervalConfig,
    bit_rate,
    demodulate_afreebee,
    demodulate_freebee,
    fold,
    learn_reference,
    modulate_afreebee,
    modulate_freebee,
)
from beaconfold.multiplex import IntervalAssignment, assign_intervals, demux
from beaconfold.rssi import (
    QuantizerConfig,
    RssiTrace,
    packet_edge_filter,
    quantize,
    read_trace,
    write_trace,
)

__version__ = "0.1.0"

__all__ = [
    "BeaconSchedule",
    "ChannelModel",
    "Demodulated",
    "DutyCycleSchedule",
    "FoldSums",
    "IntervalAssignment",
    "IntervalConfig",
    "QuantizerConfig",
    "RssiTrace",
    "assign_intervals",
    "bit_rate",
    "demodulate_afreebee",
    "demodulate_freebee",
    "demux",
    "fold",
    "learn_reference",
    "modulate_afreebee",
    "modulate_freebee",
    "packet_edge_filter",
    "quantize",
    "read_trace",
    "render",
    "write_trace",
]
