"""Shared test fixtures: hand-built states and independent brute-force oracles.

The oracle functions deliberately use plain Python loops and math, never the
vectorized library code paths they are checking.
"""

from __future__ import annotations

import math

import numpy as np

from rancmf.ndt import NetworkConfig, NetworkState


def make_config(**overrides) -> NetworkConfig:
    return NetworkConfig(**overrides)


def make_state(power, gains, association=None, demands=None,
               area_m: float = 1000.0) -> NetworkState:
    """Synthetic state with explicit power/gain tensors; positions are dummies."""
    power = np.asarray(power, dtype=float)
    gains = np.asarray(gains, dtype=float)
    n_rus, n_rbs, n_ues = gains.shape
    if demands is None:
        demands = np.full(n_ues, 2, dtype=np.int64)
    return NetworkState(
        ru_positions=np.zeros((n_rus, 2)),
        ue_positions=np.full((n_ues, 2), area_m / 2.0),
        power_w=power,
        demands_mbps=np.asarray(demands),
        association=set(association or ()),
        gains_linear=gains,
        rng_seed=0,
    )


# ---------------------------------------------------------------------------
# channel / KPI oracles (element-by-element summation)
# ---------------------------------------------------------------------------

def oracle_sinr(power, gains, noise_w):
    n_rus, n_rbs, n_ues = gains.shape
    out = np.zeros((n_rus, n_rbs, n_ues))
    for n in range(n_rus):
        for m in range(n_rbs):
            for u in range(n_ues):
                interference = 0.0
                for t in range(n_rus):
                    if t != n:
                        interference += power[t][m] * gains[t][m][u]
                out[n, m, u] = power[n][m] * gains[n][m][u] / (interference + noise_w)
    return out


def oracle_rate_bps(sinr, bandwidth_hz):
    n_rus, n_rbs, n_ues = sinr.shape
    out = np.zeros_like(sinr)
    for n in range(n_rus):
        for m in range(n_rbs):
            for u in range(n_ues):
                out[n, m, u] = bandwidth_hz * math.log2(1.0 + sinr[n, m, u])
    return out


def oracle_f1_mbps(association, rate_bps):
    total = 0.0
    for n, m, u in association:
        total += rate_bps[n, m, u]
    return total / 1e6


def oracle_total_power(power):
    total = 0.0
    for row in power:
        for p in row:
            total += p
    return total


def oracle_f2(association, rate_bps, power):
    return oracle_f1_mbps(association, rate_bps) / oracle_total_power(power)


def oracle_per_ue_rate_mbps(association, rate_bps, n_ues):
    rates = [0.0] * n_ues
    for n, m, u in association:
        rates[u] = rate_bps[n, m, u] / 1e6
    return rates


def oracle_sla_violations(association, rate_bps, n_ues, threshold_mbps):
    rates = oracle_per_ue_rate_mbps(association, rate_bps, n_ues)
    return sum(1 for r in rates if r < threshold_mbps)


def oracle_ee_violations(association, rate_bps, power, n_ues, threshold):
    served = {}
    for n, m, u in association:
        served[u] = (rate_bps[n, m, u] / 1e6, power[n][m])
    count = 0
    for u in range(n_ues):
        if u not in served:
            count += 1
        else:
            rate, pw = served[u]
            if rate / pw < threshold:
                count += 1
    return count


def oracle_sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


def relative_error(a, b):
    denom = max(abs(a), abs(b), 1e-300)
    return abs(a - b) / denom
