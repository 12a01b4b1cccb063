"""Digital-twin unit tests: channel math, association, actions, mobility."""

import numpy as np
import pytest

from rancmf.ndt import (ConfigurationError, NetworkConfig, VariationMatrix,
                        _reflect, apply_power_action, associate_ues,
                        clone_for_whatif, compute_link_metrics, derive_rng,
                        init_network, path_loss_db, ru_site_positions,
                        sinr_to_cqi, states_equal, step_mobility)

from helpers import (make_config, make_state, oracle_rate_bps, oracle_sinr,
                     relative_error)


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------

def test_default_config_matches_reference_setup():
    cfg = NetworkConfig()
    assert (cfg.n_rus, cfg.n_rbs, cfg.n_ues) == (3, 8, 12)
    assert cfg.max_ru_power_w == 80.0
    assert cfg.min_rb_power_w == 0.1
    assert cfg.qos_coefficient == 0.8
    assert cfg.demand_range_mbps == (1, 10)
    assert cfg.ue_velocity_mps == 5.0
    assert cfg.ue_move_prob == 0.5


@pytest.mark.parametrize("overrides,needle", [
    (dict(n_rus=0), "n_rus"),
    (dict(n_rbs=0), "n_rbs"),
    (dict(n_ues=-1), "n_ues"),
    (dict(min_rb_power_w=0.0), "min_rb_power_w"),
    (dict(min_rb_power_w=11.0), "max_ru_power_w"),
    (dict(qos_coefficient=1.5), "qos_coefficient"),
    (dict(ue_move_prob=-0.1), "ue_move_prob"),
    (dict(ue_arrival_prob=2.0), "ue_arrival_prob"),
])
def test_invalid_config_names_the_violated_bound(overrides, needle):
    with pytest.raises(ConfigurationError, match=needle):
        NetworkConfig(**overrides)


def test_config_json_roundtrip_and_unknown_key():
    cfg = NetworkConfig.from_dict({"n_ues": 4, "ue_move_prob": 0.0})
    assert cfg.n_ues == 4 and cfg.n_rus == 3  # unstated keys keep defaults
    with pytest.raises(ConfigurationError, match="unknown"):
        NetworkConfig.from_dict({"n_ue": 4})


# ---------------------------------------------------------------------------
# path loss
# ---------------------------------------------------------------------------

def test_path_loss_reference_points():
    assert path_loss_db(1000.0) == pytest.approx(128.1, abs=1e-12)
    assert path_loss_db(100.0) == pytest.approx(90.5, abs=1e-9)
    assert path_loss_db(1.0) == pytest.approx(52.9, abs=1e-9)  # clamped at 10 m


def test_path_loss_accepts_arrays():
    out = path_loss_db(np.array([1000.0, 100.0]))
    assert out == pytest.approx([128.1, 90.5], abs=1e-9)


def test_ru_sites_form_a_500m_triangle_inside_the_area():
    sites = ru_site_positions(3, 1000.0)
    assert sites.shape == (3, 2)
    assert np.all((sites >= 0) & (sites <= 1000.0))
    for i in range(3):
        for j in range(i + 1, 3):
            assert np.linalg.norm(sites[i] - sites[j]) == pytest.approx(500.0)


# ---------------------------------------------------------------------------
# init
# ---------------------------------------------------------------------------

def test_init_network_reference_bounds():
    cfg = NetworkConfig()
    state = init_network(cfg, seed=42)
    assert state.power_w.shape == (3, 8)
    assert np.all(state.power_w >= 0.1) and np.all(state.power_w <= 10.0)
    assert len(state.ue_positions) == 12
    assert np.all((state.ue_positions >= 0) & (state.ue_positions <= 1000.0))
    assert set(np.unique(state.demands_mbps)) <= set(range(1, 11))
    assert len(state.association) == 12  # 12 UEs, 24 slots


def test_init_network_is_deterministic():
    cfg = NetworkConfig()
    assert states_equal(init_network(cfg, 7), init_network(cfg, 7))
    assert not states_equal(init_network(cfg, 7), init_network(cfg, 8))


def test_init_network_without_ues():
    cfg = NetworkConfig(n_ues=0)
    state = init_network(cfg, seed=1)
    assert state.association == set()
    metrics = compute_link_metrics(state, cfg)
    assert np.all(metrics.cqi == -1)


# ---------------------------------------------------------------------------
# link metrics
# ---------------------------------------------------------------------------

def test_single_ru_sinr_has_no_interference_term():
    # bandwidth 10**6.5 Hz with a 9 dB noise figure puts the noise at 1e-13 W
    cfg = make_config(n_rus=1, n_rbs=1, n_ues=1, rb_bandwidth_hz=10 ** 6.5,
                      noise_figure_db=9.0, max_ru_power_w=80.0)
    assert cfg.noise_power_w() == pytest.approx(1e-13, rel=1e-12)
    state = make_state([[1.0]], np.full((1, 1, 1), 1e-10),
                       association={(0, 0, 0)})
    metrics = compute_link_metrics(state, cfg)
    assert metrics.sinr_linear[0, 0, 0] == pytest.approx(1000.0, rel=1e-9)


def test_two_equal_rus_give_unit_sinr_and_rate_of_one_bandwidth():
    cfg = make_config(n_rus=2, n_rbs=1, n_ues=1, rb_bandwidth_hz=1e6,
                      max_ru_power_w=80.0)
    gains = np.full((2, 1, 1), 1e-6)
    state = make_state([[5.0], [5.0]], gains, association={(0, 0, 0)})
    metrics = compute_link_metrics(state, cfg)
    # received powers are equal and dwarf the noise
    assert metrics.sinr_linear[0, 0, 0] == pytest.approx(1.0, rel=1e-6)
    assert metrics.rate_bps[0, 0, 0] == pytest.approx(1e6, rel=1e-6)


def test_link_metrics_match_bruteforce_oracle():
    cfg = NetworkConfig()
    for seed in range(5):
        state = init_network(cfg, seed)
        metrics = compute_link_metrics(state, cfg)
        want_sinr = oracle_sinr(state.power_w, state.gains_linear,
                                cfg.noise_power_w())
        want_rate = oracle_rate_bps(want_sinr, cfg.rb_bandwidth_hz)
        assert np.allclose(metrics.sinr_linear, want_sinr, rtol=1e-9, atol=0)
        assert np.allclose(metrics.rate_bps, want_rate, rtol=1e-9, atol=0)


def test_sinr_monotone_in_own_power_and_antitone_in_interference():
    cfg = NetworkConfig()
    state = init_network(cfg, 3)
    metrics = compute_link_metrics(state, cfg)
    bumped = clone_for_whatif(state)
    bumped.power_w[1, 4] += 2.0
    metrics2 = compute_link_metrics(bumped, cfg)
    assert np.all(metrics2.sinr_linear[1, 4, :] > metrics.sinr_linear[1, 4, :])
    for other in (0, 2):
        assert np.all(metrics2.sinr_linear[other, 4, :]
                      <= metrics.sinr_linear[other, 4, :])
    # other RBs untouched
    assert np.allclose(metrics2.sinr_linear[:, :4, :], metrics.sinr_linear[:, :4, :])


# ---------------------------------------------------------------------------
# CQI quantizer
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("sinr,want", [
    (0.0, 0),
    (10 ** (-2.0), 0),   # -20 dB, below the lowest bin edge
    (1.0, 4),            # 0 dB
    (10 ** 4.0, 15),     # 40 dB, clamped at the top
    (10 ** (-0.79), 0),  # just below -7.9 dB -> floor(0.05) = 0
    (10 ** 0.21, 5),     # 2.1 dB -> floor(5.05) = 5
])
def test_sinr_to_cqi(sinr, want):
    assert sinr_to_cqi(sinr) == want


# ---------------------------------------------------------------------------
# association
# ---------------------------------------------------------------------------

def _metrics_from_rates(state, cfg, rate_bps):
    metrics = compute_link_metrics(state, cfg)
    metrics.rate_bps = np.asarray(rate_bps, dtype=float)
    return metrics


def test_association_picks_the_best_rate_for_a_single_ue():
    cfg = make_config(n_rus=1, n_rbs=2, n_ues=1, max_ru_power_w=80.0)
    state = make_state([[1.0, 1.0]], np.full((1, 2, 1), 1e-9))
    metrics = _metrics_from_rates(state, cfg, [[[5e6], [4e6]]])
    assert associate_ues(state, metrics) == {(0, 0, 0)}


def test_association_greedy_order_forces_second_ue_to_second_slot():
    cfg = make_config(n_rus=1, n_rbs=2, n_ues=2, max_ru_power_w=80.0)
    state = make_state([[1.0, 1.0]], np.full((1, 2, 2), 1e-9))
    # slot a: UE1 5, UE2 4.5; slot b: UE1 4, UE2 3
    rates = [[[5e6, 4.5e6], [4e6, 3e6]]]
    metrics = _metrics_from_rates(state, cfg, rates)
    assert associate_ues(state, metrics) == {(0, 0, 0), (0, 1, 1)}


def test_association_caps_at_slot_capacity():
    cfg = NetworkConfig(n_ues=30)
    state = init_network(cfg, 0)
    assert len(state.association) == 24
    ues = [u for _, _, u in state.association]
    assert len(set(ues)) == len(ues)


def test_association_tie_break_is_lexicographic():
    cfg = make_config(n_rus=2, n_rbs=1, n_ues=2, max_ru_power_w=80.0)
    state = make_state([[1.0], [1.0]], np.full((2, 1, 2), 1e-9))
    rates = np.full((2, 1, 2), 7e6)
    metrics = _metrics_from_rates(state, cfg, rates)
    # all rates equal: lowest (ru, rb, ue) triples win in order
    assert associate_ues(state, metrics) == {(0, 0, 0), (1, 0, 1)}


# ---------------------------------------------------------------------------
# power actions
# ---------------------------------------------------------------------------

def test_noop_action_is_identity():
    cfg = NetworkConfig()
    state = init_network(cfg, 5)
    out = apply_power_action(state, VariationMatrix.noop(3, 8), cfg)
    assert np.array_equal(out.power_w, state.power_w)


def test_in_budget_increment_is_plain_addition():
    cfg = NetworkConfig()
    state = init_network(cfg, 5)
    state.power_w[0, :] = 5.0  # row sum 40, far below the 80 W budget
    delta = np.zeros((3, 8))
    delta[0, 0] = 3.0
    out = apply_power_action(state, VariationMatrix(delta), cfg)
    assert out.power_w[0, 0] == pytest.approx(8.0)
    assert np.array_equal(out.power_w[1:], state.power_w[1:])


def test_decrement_clamps_at_the_rb_floor():
    cfg = NetworkConfig()
    state = init_network(cfg, 5)
    state.power_w[0, 0] = 0.2
    delta = np.zeros((3, 8))
    delta[0, 0] = -3.0
    out = apply_power_action(state, VariationMatrix(delta), cfg)
    assert out.power_w[0, 0] == pytest.approx(0.1)


def test_over_budget_increment_lands_exactly_on_budget():
    cfg = NetworkConfig()
    state = init_network(cfg, 5)
    state.power_w[1, :] = 79.0 / 8.0  # row sum 79
    delta = np.zeros((3, 8))
    delta[1, 2] = 3.0
    out = apply_power_action(state, VariationMatrix(delta), cfg)
    assert out.power_w[1].sum() == pytest.approx(80.0, abs=1e-9)
    assert out.power_w[1, 2] == pytest.approx(79.0 / 8.0 + 1.0, abs=1e-9)


def test_variation_matrix_validation():
    bad = VariationMatrix(np.array([[3.0, 3.0], [0.0, 0.0]]))
    with pytest.raises(ValueError, match="nonzero"):
        bad.validate(3.0)
    wrong_step = VariationMatrix(np.array([[2.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(ValueError, match="magnitude"):
        wrong_step.validate(3.0)
    VariationMatrix(np.array([[3.0, 0.0], [0.0, -3.0]])).validate(3.0)


def test_constraints_hold_over_random_action_chains():
    cfg = NetworkConfig()
    rng = np.random.default_rng(123)
    state = init_network(cfg, 11)
    for _ in range(500):
        delta = np.zeros((3, 8))
        for n in range(3):
            delta[n, rng.integers(8)] = rng.choice([-3.0, 3.0])
        state = apply_power_action(state, VariationMatrix(delta), cfg)
        assert np.all(state.power_w.sum(axis=1) <= cfg.max_ru_power_w + 1e-9)
        assert np.all(state.power_w >= cfg.min_rb_power_w - 1e-12)


# ---------------------------------------------------------------------------
# mobility
# ---------------------------------------------------------------------------

def test_zero_velocity_leaves_positions_unchanged():
    cfg = NetworkConfig(ue_velocity_mps=0.0, ue_arrival_prob=0.0)
    state = init_network(cfg, 2)
    moved = step_mobility(state, cfg, derive_rng(2, 1))
    assert np.allclose(moved.ue_positions, state.ue_positions)


def test_forced_move_displaces_every_ue_by_velocity_times_slot():
    cfg = NetworkConfig(ue_move_prob=1.0, ue_velocity_mps=5.0,
                        slot_duration_s=1.0, ue_arrival_prob=0.0)
    state = init_network(cfg, 4)
    # keep everybody far from the borders so no reflection happens
    state.ue_positions = np.full_like(state.ue_positions, 500.0)
    moved = step_mobility(state, cfg, derive_rng(4, 1))
    dists = np.linalg.norm(moved.ue_positions - state.ue_positions, axis=1)
    assert np.allclose(dists, 5.0)


def test_reflection_folds_positions_back_into_the_area():
    out = _reflect(np.array([[-4.5, 500.0]]), 1000.0)
    assert np.allclose(out, [[4.5, 500.0]])
    out = _reflect(np.array([[1003.0, -1.0]]), 1000.0)
    assert np.allclose(out, [[997.0, 1.0]])


def test_arrivals_spawn_on_the_boundary_and_respect_the_cap():
    cfg = NetworkConfig(ue_arrival_prob=1.0, ue_move_prob=0.0, n_ues=22)
    state = init_network(cfg, 9)
    rng = derive_rng(9, 1)
    state = step_mobility(state, cfg, rng)
    assert state.n_ues == 23
    newcomer = state.ue_positions[-1]
    assert newcomer[0] in (0.0, 1000.0) or newcomer[1] in (0.0, 1000.0)
    assert len(state.demands_mbps) == 23
    state = step_mobility(state, cfg, rng)
    assert state.n_ues == 24
    state = step_mobility(state, cfg, rng)
    assert state.n_ues == 24  # capped at n_rus * n_rbs


def test_mobility_refreshes_gains_and_association():
    cfg = NetworkConfig(ue_move_prob=1.0, ue_arrival_prob=0.0)
    state = init_network(cfg, 6)
    moved = step_mobility(state, cfg, derive_rng(6, 1))
    assert not np.array_equal(moved.gains_linear, state.gains_linear)
    assert len(moved.association) == min(moved.n_ues, 24)


# ---------------------------------------------------------------------------
# cloning
# ---------------------------------------------------------------------------

def test_clone_is_independent_of_the_source():
    cfg = NetworkConfig()
    state = init_network(cfg, 8)
    before = state.power_w.copy()
    twin = clone_for_whatif(state)
    assert states_equal(twin, state)
    delta = np.zeros((3, 8))
    delta[0, 0] = 3.0
    _ = apply_power_action(twin, VariationMatrix(delta), cfg)
    twin.power_w[0, 0] = 999.0
    twin.association.add((0, 0, 99))
    assert np.array_equal(state.power_w, before)
    assert (0, 0, 99) not in state.association


def test_clone_of_clone_equals_clone():
    state = init_network(NetworkConfig(), 8)
    twin = clone_for_whatif(state)
    assert states_equal(clone_for_whatif(twin), twin)


def test_trajectory_is_a_pure_function_of_config_and_seed():
    cfg = NetworkConfig()

    def run(seed):
        state = init_network(cfg, seed)
        rng = derive_rng(seed, 1)
        arng = derive_rng(seed, 2)
        for _ in range(20):
            delta = np.zeros((3, 8))
            for n in range(3):
                delta[n, arng.integers(8)] = arng.choice([-3.0, 3.0])
            state = apply_power_action(state, VariationMatrix(delta), cfg)
            state = step_mobility(state, cfg, rng)
        return state

    assert states_equal(run(31), run(31))
