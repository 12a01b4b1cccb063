"""System KPIs and SLA-violation counts.

All functions are pure; rates enter in bps and are reported in Mbps.
Unserved UEs have rate 0 and count as violations of both SLA senses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ndt import LinkMetrics, NetworkState


@dataclass
class KpiSnapshot:
    system_rate_mbps: float        # sum rate over served UEs
    system_ee_mbps_per_w: float    # system rate / total transmit power
    total_power_w: float
    per_ue_rate_mbps: np.ndarray   # (U,), zero where unserved
    sla_violations: int
    ee_violations: int


def per_ue_rate_mbps(state: NetworkState, metrics: LinkMetrics) -> np.ndarray:
    rates = np.zeros(state.n_ues)
    for n, m, u in state.association:
        rates[u] = metrics.rate_bps[n, m, u] / 1e6
    return rates


def per_ue_power_w(state: NetworkState) -> np.ndarray:
    """Power of each UE's serving RB; zero where unserved."""
    powers = np.zeros(state.n_ues)
    for n, m, u in state.association:
        powers[u] = state.power_w[n, m]
    return powers


def system_rate_mbps(state: NetworkState, metrics: LinkMetrics) -> float:
    total = 0.0
    for n, m, u in state.association:
        total += metrics.rate_bps[n, m, u]
    return total / 1e6


def total_power_w(state: NetworkState) -> float:
    return float(state.power_w.sum())


def system_ee_mbps_per_w(state: NetworkState, metrics: LinkMetrics) -> float:
    return system_rate_mbps(state, metrics) / total_power_w(state)


def count_sla_violations(per_ue_rate, threshold_mbps) -> int:
    """UEs whose rate falls below the threshold (scalar or per-UE array)."""
    rates = np.asarray(per_ue_rate, dtype=float)
    return int(np.count_nonzero(rates < threshold_mbps))


def count_ee_violations(per_ue_rate, per_ue_power, threshold_mbps_per_w) -> int:
    """UEs whose rate/serving-power ratio falls below the threshold.

    Compares rate < threshold * power to avoid dividing; unserved UEs
    (power 0) always violate.
    """
    rates = np.asarray(per_ue_rate, dtype=float)
    powers = np.asarray(per_ue_power, dtype=float)
    unserved = powers <= 0.0
    short = rates < threshold_mbps_per_w * powers
    return int(np.count_nonzero(unserved | short))


def kpi_snapshot(state: NetworkState, metrics: LinkMetrics,
                 rate_threshold_mbps: float,
                 ee_threshold_mbps_per_w: float) -> KpiSnapshot:
    rates = per_ue_rate_mbps(state, metrics)
    powers = per_ue_power_w(state)
    f1 = float(rates.sum())
    total = total_power_w(state)
    return KpiSnapshot(
        system_rate_mbps=f1,
        system_ee_mbps_per_w=f1 / total,
        total_power_w=total,
        per_ue_rate_mbps=rates,
        sla_violations=count_sla_violations(rates, rate_threshold_mbps),
        ee_violations=count_ee_violations(rates, powers, ee_threshold_mbps_per_w),
    )
