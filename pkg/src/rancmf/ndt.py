"""Network digital twin for multi-cell, multi-channel downlink power control.

Models N radio units (RUs), each transmitting on M resource blocks (RBs),
serving mobile UEs in a square area.  States are value-like: any state can be
cloned and evolved independently, and a whole trajectory is a pure function
of (config, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

THERMAL_NOISE_DBM_PER_HZ = -174.0
PATH_LOSS_MIN_DISTANCE_M = 10.0
RU_SITE_SPACING_M = 500.0


class ConfigurationError(ValueError):
    """A NetworkConfig bound was violated; the message names the bound."""


@dataclass
class NetworkConfig:
    """Static parameters of the simulated RAN.

    Defaults are the reference desk setup: 3 urban macro RUs with 8 RBs of
    5 MHz each, 12 UEs with 1..10 Mbps demands, 80 W per-RU budget and a
    0.1 W per-RB floor.
    """

    n_rus: int = 3
    n_rbs: int = 8
    n_ues: int = 12
    rb_bandwidth_hz: float = 5e6
    max_ru_power_w: float = 80.0        # per-RU sum-power budget
    min_rb_power_w: float = 0.1         # per-RB floor (RBs never sleep fully)
    power_step_w: float = 3.0
    demand_range_mbps: tuple = (1, 10)
    qos_coefficient: float = 0.8        # demand relaxation factor for the EE objective
    area_m: float = 1000.0
    ue_velocity_mps: float = 5.0
    ue_move_prob: float = 0.5
    ue_arrival_prob: float = 0.1
    slot_duration_s: float = 1.0
    noise_figure_db: float = 9.0
    sla_rate_mbps: float = 2.0
    sla_ee_mbps_per_w: float = 2.0

    def __post_init__(self):
        self.demand_range_mbps = tuple(self.demand_range_mbps)
        self.validate()

    def validate(self):
        if self.n_rus < 1:
            raise ConfigurationError(f"n_rus must be >= 1, got {self.n_rus}")
        if self.n_rbs < 1:
            raise ConfigurationError(f"n_rbs must be >= 1, got {self.n_rbs}")
        if self.n_ues < 0:
            raise ConfigurationError(f"n_ues must be >= 0, got {self.n_ues}")
        if self.rb_bandwidth_hz <= 0:
            raise ConfigurationError(
                f"rb_bandwidth_hz must be > 0, got {self.rb_bandwidth_hz}")
        if self.min_rb_power_w <= 0:
            raise ConfigurationError(
                f"min_rb_power_w must be > 0, got {self.min_rb_power_w}")
        if self.min_rb_power_w * self.n_rbs > self.max_ru_power_w:
            raise ConfigurationError(
                "min_rb_power_w * n_rbs must not exceed max_ru_power_w "
                f"({self.min_rb_power_w} * {self.n_rbs} > {self.max_ru_power_w})")
        if self.power_step_w <= 0:
            raise ConfigurationError(
                f"power_step_w must be > 0, got {self.power_step_w}")
        lo, hi = self.demand_range_mbps
        if not (0 <= lo <= hi):
            raise ConfigurationError(
                f"demand_range_mbps must satisfy 0 <= min <= max, got {lo, hi}")
        if not 0.0 <= self.qos_coefficient <= 1.0:
            raise ConfigurationError(
                f"qos_coefficient must be in [0, 1], got {self.qos_coefficient}")
        for name in ("ue_move_prob", "ue_arrival_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigurationError(f"{name} must be in [0, 1], got {p}")
        if self.area_m <= 0:
            raise ConfigurationError(f"area_m must be > 0, got {self.area_m}")
        if self.ue_velocity_mps < 0:
            raise ConfigurationError(
                f"ue_velocity_mps must be >= 0, got {self.ue_velocity_mps}")
        if self.slot_duration_s <= 0:
            raise ConfigurationError(
                f"slot_duration_s must be > 0, got {self.slot_duration_s}")
        if self.sla_rate_mbps <= 0 or self.sla_ee_mbps_per_w <= 0:
            raise ConfigurationError("SLA thresholds must be > 0")

    def noise_power_w(self) -> float:
        """Receiver noise floor over one RB, in watts."""
        noise_dbm = (THERMAL_NOISE_DBM_PER_HZ
                     + 10.0 * math.log10(self.rb_bandwidth_hz)
                     + self.noise_figure_db)
        return 10.0 ** ((noise_dbm - 30.0) / 10.0)

    def to_dict(self) -> dict:
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d["demand_range_mbps"] = list(self.demand_range_mbps)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class NetworkState:
    """Full snapshot of the simulated RAN at one slot."""

    ru_positions: np.ndarray    # (N, 2) meters
    ue_positions: np.ndarray    # (U, 2) meters
    power_w: np.ndarray         # (N, M) watts
    demands_mbps: np.ndarray    # (U,) integer Mbps
    association: set            # {(ru, rb, ue)}; each UE and each (ru, rb) at most once
    gains_linear: np.ndarray    # (N, M, U) linear power gains <= 1
    rng_seed: int = 0

    @property
    def n_ues(self) -> int:
        return len(self.ue_positions)


@dataclass
class VariationMatrix:
    """Per-slot power-change action: at most one signed step per RU row."""

    delta_w: np.ndarray  # (N, M); nonzeros are +/- one power step

    def validate(self, power_step_w: float):
        for n, row in enumerate(self.delta_w):
            nz = row[row != 0.0]
            if len(nz) > 1:
                raise ValueError(f"row {n} has {len(nz)} nonzero entries, at most 1 allowed")
            if len(nz) == 1 and not math.isclose(abs(float(nz[0])), power_step_w):
                raise ValueError(
                    f"row {n} step magnitude {abs(float(nz[0]))} != {power_step_w}")

    @staticmethod
    def noop(n_rus: int, n_rbs: int) -> "VariationMatrix":
        return VariationMatrix(np.zeros((n_rus, n_rbs)))


@dataclass
class LinkMetrics:
    """Per-link channel quantities for every (RU, RB, UE) combination."""

    sinr_linear: np.ndarray  # (N, M, U)
    rate_bps: np.ndarray     # (N, M, U) Shannon rate
    cqi: np.ndarray          # (N, M) int, -1 where the RB serves nobody
    noise_w: float


def path_loss_db(distance_m):
    """Urban macro path loss, distance clamped below at 10 m.

    Accepts a scalar or an array, returns the same shape.
    """
    d = np.maximum(np.asarray(distance_m, dtype=float), PATH_LOSS_MIN_DISTANCE_M)
    return 128.1 + 37.6 * np.log10(d / 1000.0)


def ru_site_positions(n_rus: int, area_m: float,
                      spacing_m: float = RU_SITE_SPACING_M) -> np.ndarray:
    """Fixed RU sites: n_rus points on a circle around the area center.

    The circle radius is chosen so adjacent sites are spacing_m apart; for
    three RUs this is an equilateral triangle with 500 m inter-site distance.
    A single RU sits at the center.
    """
    cx = cy = area_m / 2.0
    if n_rus == 1:
        return np.array([[cx, cy]])
    radius = spacing_m / (2.0 * math.sin(math.pi / n_rus))
    angles = math.pi / 2.0 + 2.0 * math.pi * np.arange(n_rus) / n_rus
    return np.column_stack([cx + radius * np.cos(angles),
                            cy + radius * np.sin(angles)])


def channel_gains(ru_positions: np.ndarray, ue_positions: np.ndarray,
                  n_rbs: int) -> np.ndarray:
    """Linear power gains (N, M, U) from deterministic path loss.

    Gains carry no per-RB frequency selectivity, so every RB row is the
    per-(RU, UE) gain broadcast M times.
    """
    n_rus = len(ru_positions)
    n_ues = len(ue_positions)
    if n_ues == 0:
        return np.zeros((n_rus, n_rbs, 0))
    dist = np.linalg.norm(ru_positions[:, None, :] - ue_positions[None, :, :], axis=2)
    gain = 10.0 ** (-path_loss_db(dist) / 10.0)  # (N, U)
    return np.broadcast_to(gain[:, None, :], (n_rus, n_rbs, n_ues)).copy()


def sinr_tensor(power_w: np.ndarray, gains_linear: np.ndarray,
                noise_w: float) -> np.ndarray:
    """SINR of every (RU, RB, UE) link under full frequency reuse.

    Interference on RB m comes from every other RU transmitting on m.
    """
    received = power_w[:, :, None] * gains_linear          # (N, M, U)
    total_per_rb = received.sum(axis=0, keepdims=True)     # (1, M, U)
    interference = total_per_rb - received
    return received / (interference + noise_w)


def sinr_to_cqi(sinr_linear: float) -> int:
    """Quantize a linear SINR into the 16-level CQI scale (2 dB bins from -8 dB)."""
    if sinr_linear <= 0.0:
        return 0
    level = math.floor((10.0 * math.log10(sinr_linear) + 8.0) / 2.0)
    return int(min(15, max(0, level)))


def _cqi_matrix(sinr: np.ndarray, association: set, shape) -> np.ndarray:
    cqi = np.full(shape, -1, dtype=int)
    for n, m, u in association:
        cqi[n, m] = sinr_to_cqi(float(sinr[n, m, u]))
    return cqi


def compute_link_metrics(state: NetworkState, config: NetworkConfig) -> LinkMetrics:
    """SINR, Shannon rate and CQI for the current powers, gains and association."""
    noise = config.noise_power_w()
    sinr = sinr_tensor(state.power_w, state.gains_linear, noise)
    rate = config.rb_bandwidth_hz * np.log2(1.0 + sinr)
    cqi = _cqi_matrix(sinr, state.association, state.power_w.shape)
    return LinkMetrics(sinr_linear=sinr, rate_bps=rate, cqi=cqi, noise_w=noise)


def associate_ues(state: NetworkState, metrics: LinkMetrics) -> set:
    """Greedy max-rate matching of UEs to (RU, RB) slots.

    All (ru, rb, ue) triples are visited in descending rate order (ties by
    lowest (ru, rb, ue)); a triple is accepted iff the UE is still unserved
    and the (ru, rb) slot is still free.
    """
    rate = metrics.rate_bps
    n_rus, n_rbs, n_ues = rate.shape
    if n_ues == 0:
        return set()
    order = np.argsort(-rate, axis=None, kind="stable")
    association = set()
    ue_taken = np.zeros(n_ues, dtype=bool)
    slot_taken = np.zeros((n_rus, n_rbs), dtype=bool)
    remaining = min(n_ues, n_rus * n_rbs)
    for flat in order:
        n, m, u = np.unravel_index(flat, rate.shape)
        if ue_taken[u] or slot_taken[n, m]:
            continue
        association.add((int(n), int(m), int(u)))
        ue_taken[u] = True
        slot_taken[n, m] = True
        remaining -= 1
        if remaining == 0:
            break
    return association


def _refresh(state: NetworkState, config: NetworkConfig) -> NetworkState:
    """Recompute the greedy association for the current powers and gains."""
    noise = config.noise_power_w()
    sinr = sinr_tensor(state.power_w, state.gains_linear, noise)
    rate = config.rb_bandwidth_hz * np.log2(1.0 + sinr)
    probe = LinkMetrics(sinr_linear=sinr, rate_bps=rate,
                        cqi=np.full(state.power_w.shape, -1, dtype=int),
                        noise_w=noise)
    state.association = associate_ues(state, probe)
    return state


def init_network(config: NetworkConfig, seed: int) -> NetworkState:
    """Fresh random network instance; identical (config, seed) gives identical state."""
    config.validate()
    rng = np.random.default_rng(seed)
    n, m, u = config.n_rus, config.n_rbs, config.n_ues
    ru_pos = ru_site_positions(n, config.area_m)
    ue_pos = rng.uniform(0.0, config.area_m, size=(u, 2))
    power = rng.uniform(config.min_rb_power_w, config.max_ru_power_w / m, size=(n, m))
    lo, hi = config.demand_range_mbps
    demands = rng.integers(lo, hi + 1, size=u)
    state = NetworkState(
        ru_positions=ru_pos,
        ue_positions=ue_pos,
        power_w=power,
        demands_mbps=demands,
        association=set(),
        gains_linear=channel_gains(ru_pos, ue_pos, m),
        rng_seed=int(seed),
    )
    return _refresh(state, config)


def apply_power_action(state: NetworkState, action: VariationMatrix,
                       config: NetworkConfig) -> NetworkState:
    """Apply a power variation, keeping every power legal.

    Entries are clamped below at the RB floor; if a row then exceeds the RU
    budget, the incremented entry is reduced so the row sum lands exactly on
    the budget.  Every action index is therefore always applicable.
    """
    delta = action.delta_w
    power = np.maximum(state.power_w + delta, config.min_rb_power_w)
    over = power.sum(axis=1) - config.max_ru_power_w
    for n in np.nonzero(over > 0.0)[0]:
        j = int(np.argmax(delta[n]))  # the (unique) incremented entry
        power[n, j] -= over[n]
    return replace(state, power_w=power, association=set(state.association))


def _reflect(coords: np.ndarray, area_m: float) -> np.ndarray:
    """Fold coordinates back into [0, area] by mirror reflection at the borders."""
    folded = np.mod(coords, 2.0 * area_m)
    return np.where(folded > area_m, 2.0 * area_m - folded, folded)


def _boundary_point(edge_offset: float, area_m: float) -> np.ndarray:
    """Map a perimeter offset in [0, 4*area) to a point on the square border."""
    side, off = divmod(edge_offset, area_m)
    if side == 0:
        return np.array([off, 0.0])
    if side == 1:
        return np.array([area_m, off])
    if side == 2:
        return np.array([area_m - off, area_m])
    return np.array([0.0, area_m - off])


def step_mobility(state: NetworkState, config: NetworkConfig,
                  rng: np.random.Generator) -> NetworkState:
    """One slot of UE dynamics: random-walk moves, boundary arrivals, re-association.

    Each UE independently moves velocity*slot_duration in a uniform random
    direction with probability ue_move_prob, reflecting off the area borders.
    With probability ue_arrival_prob one new UE enters from the border, as
    long as the UE count stays within the N*M serving capacity.
    """
    u = state.n_ues
    positions = state.ue_positions.copy()
    demands = state.demands_mbps.copy()
    if u > 0:
        moving = rng.random(u) < config.ue_move_prob
        angles = rng.uniform(0.0, 2.0 * math.pi, u)
        step = config.ue_velocity_mps * config.slot_duration_s
        disp = step * np.column_stack([np.cos(angles), np.sin(angles)])
        positions = _reflect(positions + disp * moving[:, None], config.area_m)
    if rng.random() < config.ue_arrival_prob and u < config.n_rus * config.n_rbs:
        spawn = _boundary_point(float(rng.uniform(0.0, 4.0 * config.area_m)),
                                config.area_m)
        lo, hi = config.demand_range_mbps
        positions = np.vstack([positions, spawn[None, :]]) if u else spawn[None, :]
        demands = np.append(demands, rng.integers(lo, hi + 1))
    new_state = replace(
        state,
        ue_positions=positions,
        demands_mbps=demands,
        gains_linear=channel_gains(state.ru_positions, positions, config.n_rbs),
        association=set(),
    )
    return _refresh(new_state, config)


def clone_for_whatif(state: NetworkState) -> NetworkState:
    """Deep, independent copy for what-if evaluation on the twin."""
    return NetworkState(
        ru_positions=state.ru_positions.copy(),
        ue_positions=state.ue_positions.copy(),
        power_w=state.power_w.copy(),
        demands_mbps=state.demands_mbps.copy(),
        association=set(state.association),
        gains_linear=state.gains_linear.copy(),
        rng_seed=state.rng_seed,
    )


def states_equal(a: NetworkState, b: NetworkState) -> bool:
    """Bit-exact state comparison (used by what-if isolation checks)."""
    return (np.array_equal(a.ru_positions, b.ru_positions)
            and np.array_equal(a.ue_positions, b.ue_positions)
            and np.array_equal(a.power_w, b.power_w)
            and np.array_equal(a.demands_mbps, b.demands_mbps)
            and a.association == b.association
            and np.array_equal(a.gains_linear, b.gains_linear)
            and a.rng_seed == b.rng_seed)


def derive_rng(seed: int, stream: int) -> np.random.Generator:
    """Independent, reproducible generator for a named stream of one seed."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                        spawn_key=(stream,)))
