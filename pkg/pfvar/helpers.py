"""
Helper functions shared by the filter, the experiments and the CLI:
seed derivation, RNG construction and lag parsing/formatting.
"""

import math
from typing import Union

import numpy as np

Lag = Union[int, float]  # nonnegative int, or math.inf for full tracing

LAG_INF = math.inf

_MASK64 = (1 << 64) - 1

# Stream identifiers keep the RNG streams of different experiment stages disjoint.
STREAMS = {
    "observations": 0x01,
    "reference": 0x02,
    "sweep": 0x03,
    "long_run": 0x04,
    "ci": 0x05,
    "run": 0x06,
}


def splitmix64(x: int) -> int:
    """
    One round of the SplitMix64 finalizer (Steele, Lea & Flood 2014).
    Maps any 64-bit integer to a well-mixed 64-bit integer.
    """
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(master_seed: int, stream: str, index: int = 0) -> int:
    """
    Seed for replicate `index` of experiment stage `stream`.

        seed = splitmix64(splitmix64(master ^ stream_id << 56) ^ index)

    Distinct (stream, index) pairs give distinct, reproducible seeds.
    """
    if stream not in STREAMS:
        raise KeyError(f"Unknown RNG stream '{stream}'")
    head = splitmix64((int(master_seed) & _MASK64) ^ (STREAMS[stream] << 56))
    return splitmix64(head ^ (int(index) & _MASK64))


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator owned by exactly one consumer."""
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK64))


def parse_lag(value) -> Lag:
    """Accept an int >= 0 or one of 'inf' / 'cle' / math.inf."""
    try:
        if isinstance(value, str):
            if value.strip().lower() in ("inf", "cle", "infinity"):
                return LAG_INF
            value = int(value)
        if isinstance(value, float) and math.isinf(value) and value > 0:
            return LAG_INF
        valid = not isinstance(value, bool) and int(value) == value and value >= 0
    except (TypeError, ValueError, OverflowError):
        valid = False
    if not valid:
        raise ValueError(f"lag must be a nonnegative integer or 'inf', got {value!r}")
    return int(value)


def format_lag(lag: Lag) -> str:
    return "inf" if math.isinf(lag) else str(int(lag))


def lag_root(n: int, lag: Lag) -> int:
    """Tracing root time (n - lag) v 0."""
    if math.isinf(lag):
        return 0
    return max(n - int(lag), 0)
