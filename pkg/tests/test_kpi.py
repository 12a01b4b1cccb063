"""KPI computation tests against trivial cases and brute-force oracles."""

import numpy as np
import pytest

from rancmf import kpi
from rancmf.ndt import NetworkConfig, compute_link_metrics, init_network

from helpers import (make_config, make_state, oracle_ee_violations,
                     oracle_f1_mbps, oracle_f2, oracle_sla_violations,
                     oracle_total_power)


def _crafted(rates_mbps_by_triple, power, n_ues):
    """State + metrics with hand-set rates on an explicit association."""
    power = np.asarray(power, dtype=float)
    n_rus, n_rbs = power.shape
    cfg = make_config(n_rus=n_rus, n_rbs=n_rbs, n_ues=n_ues,
                      max_ru_power_w=100.0)
    state = make_state(power, np.full((n_rus, n_rbs, n_ues), 1e-9),
                       association=set(rates_mbps_by_triple))
    metrics = compute_link_metrics(state, cfg)
    for (n, m, u), mbps in rates_mbps_by_triple.items():
        metrics.rate_bps[n, m, u] = mbps * 1e6
    return state, metrics


def test_system_rate_zero_without_associations():
    state, metrics = _crafted({}, [[1.0, 1.0]], 2)
    assert kpi.system_rate_mbps(state, metrics) == 0.0


def test_system_rate_sums_served_rates():
    state, metrics = _crafted({(0, 0, 0): 3.0, (0, 1, 1): 4.0},
                              [[1.0, 1.0]], 2)
    assert kpi.system_rate_mbps(state, metrics) == pytest.approx(7.0)


def test_system_ee_is_rate_over_power():
    state, metrics = _crafted({(0, 0, 0): 6.0, (0, 1, 1): 4.0},
                              [[2.0, 3.0]], 2)
    assert kpi.system_ee_mbps_per_w(state, metrics) == pytest.approx(2.0)


def test_system_ee_zero_when_rate_zero():
    state, metrics = _crafted({}, [[2.0, 3.0]], 0)
    assert kpi.system_ee_mbps_per_w(state, metrics) == 0.0


def test_total_power_reference_values():
    cfg = NetworkConfig()
    state = init_network(cfg, 1)
    state.power_w[:] = 0.1
    assert kpi.total_power_w(state) == pytest.approx(2.4)
    state.power_w[0, :] = 10.0   # one RU at its 80 W budget
    state.power_w[1:, :] = 0.3   # the others at 2.4 W per RU
    assert kpi.total_power_w(state) == pytest.approx(84.8)


def test_count_sla_violations():
    assert kpi.count_sla_violations([1.0, 3.0], 2.0) == 1
    assert kpi.count_sla_violations([2.0, 3.0, 5.0], 2.0) == 0
    assert kpi.count_sla_violations(np.zeros(12), 2.0) == 12  # nobody served
    # per-UE demand thresholds broadcast elementwise
    assert kpi.count_sla_violations([1.0, 3.0], np.array([0.5, 4.0])) == 1


def test_count_ee_violations():
    assert kpi.count_ee_violations([5.0], [2.0], 2.0) == 0   # ratio 2.5
    assert kpi.count_ee_violations([1.0], [1.0], 2.0) == 1
    assert kpi.count_ee_violations([4.0, 0.0], [2.0, 0.0], 2.0) == 1  # unserved


def test_kpis_match_bruteforce_oracles_on_random_networks():
    cfg = NetworkConfig()
    for seed in range(6):
        state = init_network(cfg, seed)
        metrics = compute_link_metrics(state, cfg)
        snap = kpi.kpi_snapshot(state, metrics, cfg.sla_rate_mbps,
                                cfg.sla_ee_mbps_per_w)
        assoc = state.association
        rate = metrics.rate_bps
        assert snap.system_rate_mbps == pytest.approx(
            oracle_f1_mbps(assoc, rate), rel=1e-9)
        assert snap.total_power_w == pytest.approx(
            oracle_total_power(state.power_w), rel=1e-9)
        assert snap.system_ee_mbps_per_w == pytest.approx(
            oracle_f2(assoc, rate, state.power_w), rel=1e-9)
        assert snap.sla_violations == oracle_sla_violations(
            assoc, rate, state.n_ues, cfg.sla_rate_mbps)
        assert snap.ee_violations == oracle_ee_violations(
            assoc, rate, state.power_w, state.n_ues, cfg.sla_ee_mbps_per_w)


def test_ee_times_power_recovers_rate():
    cfg = NetworkConfig()
    for seed in range(5):
        state = init_network(cfg, seed + 100)
        metrics = compute_link_metrics(state, cfg)
        f1 = kpi.system_rate_mbps(state, metrics)
        f2 = kpi.system_ee_mbps_per_w(state, metrics)
        assert f2 * kpi.total_power_w(state) == pytest.approx(f1, rel=1e-9)


def test_scaling_rates_scales_f1_and_f2_linearly():
    cfg = NetworkConfig()
    state = init_network(cfg, 17)
    metrics = compute_link_metrics(state, cfg)
    f1 = kpi.system_rate_mbps(state, metrics)
    f2 = kpi.system_ee_mbps_per_w(state, metrics)
    metrics.rate_bps = metrics.rate_bps * 3.0
    assert kpi.system_rate_mbps(state, metrics) == pytest.approx(3.0 * f1, rel=1e-12)
    assert kpi.system_ee_mbps_per_w(state, metrics) == pytest.approx(3.0 * f2, rel=1e-12)


def test_violation_counts_never_increase_when_rates_rise():
    rng = np.random.default_rng(0)
    for _ in range(50):
        rates = rng.uniform(0.0, 5.0, size=8)
        powers = rng.uniform(0.5, 4.0, size=8)
        bumped = rates + rng.uniform(0.0, 2.0, size=8)
        assert (kpi.count_sla_violations(bumped, 2.0)
                <= kpi.count_sla_violations(rates, 2.0))
        assert (kpi.count_ee_violations(bumped, powers, 2.0)
                <= kpi.count_ee_violations(rates, powers, 2.0))


def test_snapshot_total_power_respects_the_floor():
    cfg = NetworkConfig()
    state = init_network(cfg, 3)
    metrics = compute_link_metrics(state, cfg)
    snap = kpi.kpi_snapshot(state, metrics, 2.0, 2.0)
    assert snap.total_power_w >= cfg.n_rus * cfg.n_rbs * cfg.min_rb_power_w
