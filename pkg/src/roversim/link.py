"""Wi-Fi channel emulation: distance-dependent Bernoulli loss with a hard
cutoff, latency with uniform jitter, and serialization delay from a fixed
bandwidth.  Seeded and fully deterministic given the call sequence."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

RSSI_FLOOR_DBM = -95.0
RSSI_CEIL_DBM = -40.0


@dataclass(frozen=True)
class LinkProfile:
    d_full_m: float = 50.0  # loss-free radius
    d_max_m: float = 100.0  # absolute cutoff
    base_latency_s: float = 0.020
    jitter_s: float = 0.010  # uniform half-width
    bandwidth_bytes_per_s: float = 250000.0
    rng_seed: int = 1

    def __post_init__(self) -> None:
        if not 0.0 < self.d_full_m < self.d_max_m:
            raise ValueError("need 0 < d_full_m < d_max_m")
        if self.base_latency_s <= 0 or self.jitter_s <= 0 or self.bandwidth_bytes_per_s <= 0:
            raise ValueError("latency, jitter and bandwidth must be positive")


@dataclass
class LinkStats:
    sent: int = 0
    delivered: int = 0
    dropped: int = 0
    mean_delay_s: float = 0.0
    last_rssi_dbm: float = RSSI_CEIL_DBM

    def to_dict(self) -> dict:
        return {
            "sent": self.sent,
            "delivered": self.delivered,
            "dropped": self.dropped,
            "mean_delay_s": self.mean_delay_s,
            "last_rssi_dbm": self.last_rssi_dbm,
        }


def loss_probability(d_m: float, p: LinkProfile) -> float:
    """0 inside d_full, 1 at and beyond d_max, quadratic ramp between."""
    if d_m < 0:
        raise ValueError(f"negative distance {d_m}")
    if d_m <= p.d_full_m:
        return 0.0
    if d_m >= p.d_max_m:
        return 1.0
    return ((d_m - p.d_full_m) / (p.d_max_m - p.d_full_m)) ** 2


def transmit(payload_len: int, d_m: float, p: LinkProfile, rng: random.Random) -> float | None:
    """One frame through the channel: delay in seconds, or None if dropped.

    Draw order is fixed (drop draw always, jitter draw only on delivery) so
    outcomes replay exactly for a given seed and call sequence.
    """
    if payload_len <= 0:
        raise ValueError(f"payload_len must be positive, got {payload_len}")
    if rng.random() < loss_probability(d_m, p):
        return None
    return p.base_latency_s + rng.uniform(-p.jitter_s, p.jitter_s) + payload_len / p.bandwidth_bytes_per_s


def rssi(d_m: float, p: LinkProfile) -> float:
    """Synthetic display value: log-distance path, clamped to [-95, -40] dBm."""
    if d_m < 0:
        raise ValueError(f"negative distance {d_m}")
    value = -40.0 - 25.0 * math.log10(max(d_m, 1.0) / 1.0)
    return min(RSSI_CEIL_DBM, max(RSSI_FLOOR_DBM, value))


class LinkChannel:
    """One direction of the channel: profile + own generator + counters."""

    def __init__(self, profile: LinkProfile, seed: int):
        self.profile = profile
        self.rng = random.Random(seed)
        self.stats = LinkStats()

    def transmit(self, payload_len: int, d_m: float) -> float | None:
        delay = transmit(payload_len, d_m, self.profile, self.rng)
        st = self.stats
        st.sent += 1
        st.last_rssi_dbm = rssi(d_m, self.profile)
        if delay is None:
            st.dropped += 1
        else:
            st.delivered += 1
            st.mean_delay_s += (delay - st.mean_delay_s) / st.delivered
        return delay
