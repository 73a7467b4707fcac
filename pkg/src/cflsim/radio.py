"""Wireless and computation cost model.

Per-client compute time/energy follow the cycles-per-sample CPU model;
uplink rates follow a path-loss channel with OFDMA bandwidth sharing.
All functions are pure and operate on plain floats so they can be checked
against independent arithmetic oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping


@dataclass(frozen=True)
class RadioProfile:
    """Static client attributes driving its round costs.

    distance_m is the client-to-edge distance, ref_gain_db/ref_distance_m
    parameterize the path loss, tx_power_w is the uplink transmit power,
    cpu_hz the local CPU frequency, cycles_per_sample the per-sample
    training cost and capacitance the CPU energy coefficient.
    """

    distance_m: float
    tx_power_w: float
    cpu_hz: float
    cycles_per_sample: float = 20.0
    ref_gain_db: float = -35.0
    ref_distance_m: float = 2.0
    capacitance: float = 2e-28

    def __post_init__(self):
        if self.distance_m <= 0:
            raise ValueError("distance_m must be positive")
        if self.tx_power_w <= 0 or self.cpu_hz <= 0:
            raise ValueError("tx_power_w and cpu_hz must be positive")


@dataclass(frozen=True)
class CostLedger:
    """Per-client round costs, split into compute and uplink parts."""

    t_cmp: float
    t_com: float
    e_cmp: float
    e_com: float

    def __post_init__(self):
        for name in ("t_cmp", "t_com", "e_cmp", "e_com"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def t_total(self) -> float:
        return self.t_cmp + self.t_com

    @property
    def e_total(self) -> float:
        return self.e_cmp + self.e_com


def channel_gain(profile: RadioProfile, fading: float | None = None) -> float:
    """Linear power gain from the path-loss law, optionally scaled by a
    unit-mean fading draw."""
    if profile.distance_m <= 0:
        raise ValueError("distance must be positive")
    gain = 10.0 ** (profile.ref_gain_db / 10.0) * (
        profile.ref_distance_m / profile.distance_m) ** 4
    if fading is not None:
        gain *= fading
    return gain


def transmission_rate(beta: float, bandwidth_hz: float, gain: float,
                      tx_power_w: float, noise_power_w: float) -> float:
    """Achievable uplink rate (bits/s) on a `beta` share of the edge band."""
    if not 0.0 < beta <= 1.0:
        raise ValueError("beta must be in (0, 1]")
    if bandwidth_hz <= 0 or noise_power_w <= 0:
        raise ValueError("bandwidth and noise power must be positive")
    return beta * bandwidth_hz * math.log2(1.0 + gain * tx_power_w / noise_power_w)


def comp_time(epochs: int, n_samples: int, cycles_per_sample: float,
              cpu_hz: float) -> float:
    """Seconds of local compute for `epochs` passes over `n_samples`."""
    return epochs * n_samples * cycles_per_sample / cpu_hz


def comp_energy(capacitance: float, cpu_hz: float, epochs: int,
                n_samples: int, cycles_per_sample: float) -> float:
    """Joules of local compute; equals (capacitance/2) * f^3 * comp_time."""
    return 0.5 * capacitance * epochs * cpu_hz ** 2 * n_samples * cycles_per_sample


def comm_time(size_bits: float, rate_bps: float) -> float:
    """Seconds to upload `size_bits` at `rate_bps`."""
    if rate_bps <= 0:
        raise ValueError("rate must be positive (client unreachable)")
    return size_bits / rate_bps


def comm_energy(t_com: float, tx_power_w: float) -> float:
    """Joules spent transmitting for `t_com` seconds."""
    if t_com < 0:
        raise ValueError("t_com must be non-negative")
    return t_com * tx_power_w


def edge_round_latency(ledgers: Mapping[int, CostLedger]) -> float:
    """Edge round latency: the slowest selected client's total time."""
    if not ledgers:
        raise ValueError("latency undefined for an empty selection")
    return max(ledger.t_total for ledger in ledgers.values())


def system_round_totals(
    edge_latency: Mapping[int, float],
    edge_energy: Mapping[int, float],
    cloud_time: Mapping[int, float],
    cloud_energy: Mapping[int, float],
    uploaded: Mapping[int, bool],
) -> tuple[float, float]:
    """Round totals across edges.

    The cloud-upload terms of an edge count only in rounds where that edge
    uploaded. Returns (round time, round energy).
    """
    edges = sorted(edge_latency)
    if sorted(edge_energy) != edges or sorted(uploaded) != edges:
        raise ValueError("edge maps must share one key set")
    t_round = max(
        edge_latency[k] + (cloud_time[k] if uploaded[k] else 0.0)
        for k in edges
    )
    e_round = sum(
        edge_energy[k] + (cloud_energy[k] if uploaded[k] else 0.0)
        for k in edges
    )
    return t_round, e_round
