"""Deep-Q power-control agents.

Two antagonistic agents share the same state and action spaces: one is
rewarded by the slot-to-slot change in system rate ("drm"), the other by the
change in system energy efficiency ("ee").  The state is the CQI grid, the
action picks one RB per RU and nudges its power by a fixed step.

The Q-network is a small dense MLP trained with plain SGD on the squared
TD error, with uniform experience replay and a periodically synced target
network.  Everything is seeded and CPU-deterministic.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kpi
from .ndt import (NetworkConfig, NetworkState, VariationMatrix,
                  apply_power_action, compute_link_metrics, derive_rng,
                  init_network, step_mobility)

OBJECTIVES = ("drm", "ee")

WEIGHTS_MAGIC = b"RCMFW1\n"


@dataclass
class AgentConfig:
    objective: str
    learning_rate: float
    discount: float
    power_step_w: float
    episodes: int = 2000
    steps_per_episode: int = 200
    batch_size: int = 32
    replay_capacity: int = 5000
    target_update_every_episodes: int = 6
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    hidden_sizes: tuple = (128, 128)

    def __post_init__(self):
        self.hidden_sizes = tuple(self.hidden_sizes)
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount must be in [0, 1), got {self.discount}")
        if self.power_step_w <= 0:
            raise ValueError(f"power_step_w must be > 0, got {self.power_step_w}")

    def to_dict(self) -> dict:
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d["hidden_sizes"] = list(self.hidden_sizes)
        return d


def drm_config(**overrides) -> AgentConfig:
    """Throughput-maximizing agent defaults (lr 1e-3, discount 0.5, 3 W step)."""
    base = dict(objective="drm", learning_rate=1e-3, discount=0.5, power_step_w=3.0)
    base.update(overrides)
    return AgentConfig(**base)


def ee_config(**overrides) -> AgentConfig:
    """Energy-efficiency agent defaults (lr 1e-4, discount 0.3, 11 W step)."""
    base = dict(objective="ee", learning_rate=1e-4, discount=0.3, power_step_w=11.0)
    base.update(overrides)
    return AgentConfig(**base)


def agent_config(objective: str, **overrides) -> AgentConfig:
    if objective == "drm":
        return drm_config(**overrides)
    if objective == "ee":
        return ee_config(**overrides)
    raise ValueError(f"objective must be one of {OBJECTIVES}, got {objective!r}")


# ---------------------------------------------------------------------------
# state / action codecs
# ---------------------------------------------------------------------------

def encode_state(cqi: np.ndarray) -> np.ndarray:
    """Flatten the CQI grid to [0, 1]: unserved (-1) -> 0, CQI c -> (c+1)/16."""
    return ((np.asarray(cqi, dtype=float) + 1.0) / 16.0).ravel()


def action_space_size(n_rus: int, n_rbs: int) -> int:
    return (2 * n_rbs) ** n_rus


def decode_action(index: int, n_rus: int, n_rbs: int,
                  power_step_w: float) -> VariationMatrix:
    """Expand a joint action index into a power variation matrix.

    The index is read in base 2M, one digit per RU (RU 0 is the least
    significant digit).  Digit d selects RB d mod M; the step is +P_s for
    d < M and -P_s otherwise.
    """
    size = action_space_size(n_rus, n_rbs)
    if not 0 <= index < size:
        raise ValueError(f"action index {index} outside [0, {size})")
    delta = np.zeros((n_rus, n_rbs))
    rest = int(index)
    for n in range(n_rus):
        digit = rest % (2 * n_rbs)
        rest //= 2 * n_rbs
        rb = digit % n_rbs
        delta[n, rb] = power_step_w if digit < n_rbs else -power_step_w
    return VariationMatrix(delta)


def encode_action(action: VariationMatrix, power_step_w: float) -> int:
    """Inverse of decode_action; requires one signed step per RU row."""
    n_rus, n_rbs = action.delta_w.shape
    index = 0
    for n in reversed(range(n_rus)):
        row = action.delta_w[n]
        nz = np.nonzero(row)[0]
        if len(nz) != 1:
            raise ValueError(f"row {n} must have exactly one nonzero entry")
        rb = int(nz[0])
        digit = rb if row[rb] > 0 else rb + n_rbs
        if not math.isclose(abs(float(row[rb])), power_step_w):
            raise ValueError(f"row {n} step magnitude != {power_step_w}")
        index = index * (2 * n_rbs) + digit
    return index


def reward_drm(f1_now_mbps: float, f1_prev_mbps: float) -> float:
    """System-rate change caused by the last action (Mbps)."""
    return f1_now_mbps - f1_prev_mbps


def reward_ee(f2_now: float, f2_prev: float) -> float:
    """System-EE change caused by the last action (Mbps/W)."""
    return f2_now - f2_prev


def select_action(q_values: np.ndarray, epsilon: float,
                  rng: np.random.Generator) -> int:
    """Epsilon-greedy pick; greedy ties resolve to the lowest index."""
    if rng.random() < epsilon:
        return int(rng.integers(len(q_values)))
    return int(np.argmax(q_values))


# ---------------------------------------------------------------------------
# Q-network
# ---------------------------------------------------------------------------

class Mlp:
    """Dense ReLU network with a linear head, held as plain numpy arrays."""

    def __init__(self, sizes, rng: np.random.Generator, dtype=np.float32):
        self.sizes = tuple(int(s) for s in sizes)
        self.dtype = np.dtype(dtype)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            w = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
            self.weights.append(w.astype(self.dtype))
            self.biases.append(np.zeros(fan_out, dtype=self.dtype))

    def q_values(self, x: np.ndarray) -> np.ndarray:
        a = np.asarray(x, dtype=self.dtype)
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.maximum(a @ w + b, 0.0)
        return a @ self.weights[-1] + self.biases[-1]

    def copy(self) -> "Mlp":
        dup = Mlp.__new__(Mlp)
        dup.sizes = self.sizes
        dup.dtype = self.dtype
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        return dup

    def parameters(self):
        """Flat parameter list alternating weight, bias per layer."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def equal(self, other: "Mlp") -> bool:
        return (self.sizes == other.sizes
                and all(np.array_equal(a, b) for a, b in
                        zip(self.parameters(), other.parameters())))


def loss_and_grads(net: Mlp, states, actions, targets):
    """Mean-squared TD loss on the taken actions, with dense gradients.

    Reference implementation used by the gradient checks; gradient_step is
    the fused fast path and must stay numerically equivalent.
    """
    x = np.asarray(states, dtype=net.dtype)
    actions = np.asarray(actions, dtype=int)
    y = np.asarray(targets, dtype=net.dtype)
    acts = [x]
    zs = []
    a = x
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        z = a @ w + b
        zs.append(z)
        a = np.maximum(z, 0.0)
        acts.append(a)
    q = a @ net.weights[-1] + net.biases[-1]
    rows = np.arange(len(actions))
    err = q[rows, actions] - y
    loss = float(np.mean(err.astype(np.float64) ** 2))
    dq = np.zeros_like(q)
    dq[rows, actions] = 2.0 * err / len(actions)
    grads = [None] * (2 * len(net.weights))
    grads[-2] = acts[-1].T @ dq
    grads[-1] = dq.sum(axis=0)
    da = dq @ net.weights[-1].T
    for i in reversed(range(len(zs))):
        dz = da * (zs[i] > 0)
        grads[2 * i] = acts[i].T @ dz
        grads[2 * i + 1] = dz.sum(axis=0)
        if i > 0:
            da = dz @ net.weights[i].T
    return loss, grads


def gradient_step(net: Mlp, states, actions, targets, lr: float) -> float:
    """One SGD step on the squared TD error of the taken actions.

    Fused with the backward pass: only the taken output columns are gathered
    and updated, which keeps the wide action head cheap.
    """
    x = np.asarray(states, dtype=net.dtype)
    actions = np.asarray(actions, dtype=int)
    y = np.asarray(targets, dtype=net.dtype)
    acts = [x]
    zs = []
    a = x
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        z = a @ w + b
        zs.append(z)
        a = np.maximum(z, 0.0)
        acts.append(a)
    w_out, b_out = net.weights[-1], net.biases[-1]
    cols = w_out[:, actions]                       # (H, B) snapshot, pre-update
    err = np.einsum("bh,hb->b", a, cols) + b_out[actions] - y
    loss = float(np.mean(err.astype(np.float64) ** 2))
    g = (2.0 / len(actions)) * err                 # dLoss/dq of each taken action
    da = (cols * g).T
    np.add.at(w_out.T, actions, (-lr * g)[:, None] * a)
    np.add.at(b_out, actions, -lr * g)
    for i in reversed(range(len(zs))):
        dz = da * (zs[i] > 0)
        if i > 0:
            da = dz @ net.weights[i].T             # before this layer updates
        net.weights[i] -= lr * (acts[i].T @ dz)
        net.biases[i] -= lr * dz.sum(axis=0)
    return loss


# ---------------------------------------------------------------------------
# replay memory
# ---------------------------------------------------------------------------

class ReplayBuffer:
    """Fixed-capacity ring of (state, action, reward, next state); oldest out first."""

    def __init__(self, capacity: int, state_dim: int, dtype=np.float32):
        self.capacity = int(capacity)
        self.states = np.zeros((capacity, state_dim), dtype=dtype)
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity, dtype=np.float64)
        self.next_states = np.zeros((capacity, state_dim), dtype=dtype)
        self.pos = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, state, action, reward, next_state):
        i = self.pos
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch_size: int):
        idx = rng.integers(0, self.size, size=batch_size)
        return (self.states[idx], self.actions[idx],
                self.rewards[idx], self.next_states[idx])


# ---------------------------------------------------------------------------
# agent
# ---------------------------------------------------------------------------

class QAgent:
    """One trainable power-control agent: online net, target net, replay, epsilon."""

    def __init__(self, config: AgentConfig, n_rus: int, n_rbs: int,
                 seed: int = 0, dtype=np.float32):
        self.config = config
        self.n_rus = n_rus
        self.n_rbs = n_rbs
        self.rng = derive_rng(seed, 2)
        state_dim = n_rus * n_rbs
        sizes = [state_dim, *config.hidden_sizes, action_space_size(n_rus, n_rbs)]
        self.online = Mlp(sizes, self.rng, dtype)
        self.target = self.online.copy()
        self.replay = ReplayBuffer(config.replay_capacity, state_dim, dtype)
        self.epsilon = config.epsilon_start

    def sync_target(self):
        self.target = self.online.copy()

    def q_for(self, state_vec: np.ndarray) -> np.ndarray:
        return self.online.q_values(state_vec[None, :])[0]

    def act(self, state_vec: np.ndarray) -> int:
        return select_action(self.q_for(state_vec), self.epsilon, self.rng)

    def greedy_index(self, cqi: np.ndarray) -> int:
        return int(np.argmax(self.q_for(encode_state(cqi))))

    def greedy_action(self, cqi: np.ndarray) -> VariationMatrix:
        return decode_action(self.greedy_index(cqi), self.n_rus, self.n_rbs,
                             self.config.power_step_w)


def train_step(agent: QAgent):
    """One replay update; no-op (returns None) until a full batch is buffered."""
    cfg = agent.config
    if len(agent.replay) < cfg.batch_size:
        return None
    states, actions, rewards, next_states = agent.replay.sample(agent.rng,
                                                                cfg.batch_size)
    q_next = agent.target.q_values(next_states).max(axis=1)
    targets = rewards + cfg.discount * q_next
    return gradient_step(agent.online, states, actions, targets,
                         cfg.learning_rate)


def objective_value(objective: str, state: NetworkState, metrics) -> float:
    if objective == "drm":
        return kpi.system_rate_mbps(state, metrics)
    return kpi.system_ee_mbps_per_w(state, metrics)


def run_episode(agent: QAgent, env_state: NetworkState, net_config: NetworkConfig,
                mobility_rng: np.random.Generator, train: bool = True):
    """Roll one episode, storing transitions and training after every slot.

    Returns (transitions, episode_reward); rewards telescope so the episode
    reward equals the objective KPI at the end minus at the start.
    """
    cfg = agent.config
    state = env_state
    metrics = compute_link_metrics(state, net_config)
    f_prev = objective_value(cfg.objective, state, metrics)
    transitions = []
    total = 0.0
    for _ in range(cfg.steps_per_episode):
        state_vec = encode_state(metrics.cqi)
        action_idx = agent.act(state_vec)
        action = decode_action(action_idx, agent.n_rus, agent.n_rbs,
                               cfg.power_step_w)
        state = apply_power_action(state, action, net_config)
        state = step_mobility(state, net_config, mobility_rng)
        metrics = compute_link_metrics(state, net_config)
        f_now = objective_value(cfg.objective, state, metrics)
        if cfg.objective == "drm":
            reward = reward_drm(f_now, f_prev)
        else:
            reward = reward_ee(f_now, f_prev)
        f_prev = f_now
        next_vec = encode_state(metrics.cqi)
        agent.replay.push(state_vec, action_idx, reward, next_vec)
        transitions.append((state_vec, action_idx, reward, next_vec))
        if train:
            train_step(agent)
        total += reward
    return transitions, total


def epsilon_at(config: AgentConfig, episode: int) -> float:
    """Linear decay from epsilon_start to epsilon_end over the first half of training."""
    half = max(1, config.episodes // 2)
    frac = min(1.0, episode / half)
    return config.epsilon_start + (config.epsilon_end - config.epsilon_start) * frac


def train_xapp(objective: str, net_config: NetworkConfig,
               config: AgentConfig | None = None, seed: int = 0,
               dtype=np.float32, episode_callback=None):
    """Train one agent for config.episodes episodes on fresh seeded networks.

    Episode e runs on init_network(net_config, seed + e) with its own
    mobility stream, so any episode can be replayed in isolation.  Returns
    (agent, per-episode reward curve).  episode_callback(episode, agent), if
    given, fires after each episode and before any target sync.
    """
    cfg = config if config is not None else agent_config(objective)
    if cfg.objective != objective:
        raise ValueError(f"config objective {cfg.objective!r} != {objective!r}")
    agent = QAgent(cfg, net_config.n_rus, net_config.n_rbs, seed, dtype)
    curve = []
    for episode in range(cfg.episodes):
        agent.epsilon = epsilon_at(cfg, episode)
        state = init_network(net_config, seed + episode)
        mobility_rng = derive_rng(seed + episode, 1)
        _, episode_reward = run_episode(agent, state, net_config, mobility_rng)
        curve.append(episode_reward)
        if episode_callback is not None:
            episode_callback(episode, agent)
        if (episode + 1) % cfg.target_update_every_episodes == 0:
            agent.sync_target()
    return agent, np.asarray(curve)


# ---------------------------------------------------------------------------
# weight files: magic, JSON header, raw little-endian arrays
# ---------------------------------------------------------------------------

def save_agent(agent: QAgent, path):
    """Write the online network to a deterministic flat binary file."""
    path = Path(path)
    arrays = agent.online.parameters()
    header = {
        "objective": agent.config.objective,
        "n_rus": agent.n_rus,
        "n_rbs": agent.n_rbs,
        "hidden_sizes": list(agent.config.hidden_sizes),
        "power_step_w": agent.config.power_step_w,
        "dtype": agent.online.dtype.name,
        "shapes": [list(a.shape) for a in arrays],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(WEIGHTS_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for a in arrays:
            fh.write(np.ascontiguousarray(a).astype(a.dtype.newbyteorder("<")).tobytes())


def load_agent(path) -> QAgent:
    """Rebuild an inference-ready agent (empty replay, epsilon 0) from a weight file."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(WEIGHTS_MAGIC))
        if magic != WEIGHTS_MAGIC:
            raise ValueError(f"{path}: not a weight file (bad magic)")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen))
        dtype = np.dtype(header["dtype"])
        arrays = []
        for shape in header["shapes"]:
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * dtype.itemsize)
            arrays.append(np.frombuffer(buf, dtype=dtype.newbyteorder("<"))
                          .astype(dtype).reshape(shape))
    cfg = agent_config(header["objective"],
                       power_step_w=header["power_step_w"],
                       hidden_sizes=tuple(header["hidden_sizes"]))
    agent = QAgent(cfg, header["n_rus"], header["n_rbs"], seed=0, dtype=dtype)
    for param, loaded in zip(agent.online.parameters(), arrays):
        param[...] = loaded
    agent.sync_target()
    agent.epsilon = 0.0
    return agent
