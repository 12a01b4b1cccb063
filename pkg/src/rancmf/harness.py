"""Experiment orchestration: training runs, policy-comparison validation,
the conflict-detection demo, and CSV/JSON report emission.

Every run is a pure function of (config, seed): episode e of a validation
uses network seed `seed + e` plus derived per-episode streams for mobility
and for the conflict-free coin flip, so single episodes can be re-run in
isolation and whole reports reproduce byte-identically.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kpi
from .agent import (AgentConfig, QAgent, agent_config, epsilon_at, load_agent,
                    save_agent, train_xapp)
from .detector import (AssociationMatrix, XAppManifest, apply_kpi_alert,
                       detect, load_alerts, load_manifests)
from .ndt import (ConfigurationError, NetworkConfig, apply_power_action,
                  clone_for_whatif, compute_link_metrics, derive_rng,
                  init_network, step_mobility)
from .resolver import ResolutionPolicy, resolve

XAPP_IDS = ("drm", "ee")
POLICY_CHOICES = ("maxts", "minps", "ees", "tvs", "eevs", "cmf_free")
STEP_CSV_FIELDS = ("episode", "step", "policy", "F1", "F2", "total_power",
                   "sla_violations", "ee_violations", "chosen_xapp")


@dataclass
class ExperimentConfig:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    drm_agent: AgentConfig = field(default_factory=lambda: agent_config("drm"))
    ee_agent: AgentConfig = field(default_factory=lambda: agent_config("ee"))
    drm_weights: str | None = None
    ee_weights: str | None = None
    policy: str = "maxts"
    episodes: int = 200
    steps_per_episode: int = 100
    seed: int = 0
    output_dir: str = "out"

    def __post_init__(self):
        if self.policy not in POLICY_CHOICES:
            raise ConfigurationError(
                f"policy must be one of {POLICY_CHOICES}, got {self.policy!r}")
        if self.episodes < 1 or self.steps_per_episode < 1:
            raise ConfigurationError("episodes and steps_per_episode must be >= 1")

    def to_dict(self) -> dict:
        return {
            "network": self.network.to_dict(),
            "drm_agent": self.drm_agent.to_dict(),
            "ee_agent": self.ee_agent.to_dict(),
            "drm_weights": self.drm_weights,
            "ee_weights": self.ee_weights,
            "policy": self.policy,
            "episodes": self.episodes,
            "steps_per_episode": self.steps_per_episode,
            "seed": self.seed,
            "output_dir": str(self.output_dir),
        }


def experiment_config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown experiment config keys: {sorted(unknown)}")
    if "network" in data:
        data["network"] = NetworkConfig.from_dict(data["network"])
    for key, objective in (("drm_agent", "drm"), ("ee_agent", "ee")):
        if key in data:
            overrides = dict(data[key])
            overrides.pop("objective", None)
            data[key] = agent_config(objective, **overrides)
    return ExperimentConfig(**data)


def load_experiment_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    return experiment_config_from_dict(data)


@dataclass
class ValidationReport:
    policy: str
    episodes: int
    steps_per_episode: int
    seed: int
    rows: list
    f1_mean: float
    f1_std: float
    power_mean: float
    power_std: float
    ee_mean: float
    ee_std: float
    selection_counts: dict
    state_trace: list = field(default_factory=list, repr=False)

    def summary_dict(self) -> dict:
        return {
            "policy": self.policy,
            "episodes": self.episodes,
            "steps_per_episode": self.steps_per_episode,
            "seed": self.seed,
            "f1_mean_mbps": self.f1_mean,
            "f1_std_mbps": self.f1_std,
            "total_power_mean_w": self.power_mean,
            "total_power_std_w": self.power_std,
            "ee_mean_mbps_per_w": self.ee_mean,
            "ee_std_mbps_per_w": self.ee_std,
            "xapp_selection_counts": dict(sorted(self.selection_counts.items())),
        }


def power_control_manifests(config: NetworkConfig):
    """The two power-control xApps: same CP set, different target KPIs."""
    cps = frozenset(f"ru{n}_rb{m}_power"
                    for n in range(config.n_rus) for m in range(config.n_rbs))
    manifests = [
        XAppManifest(xapp_id="drm", cps=cps, kpis=frozenset({"system_rate_mbps"})),
        XAppManifest(xapp_id="ee", cps=cps, kpis=frozenset({"system_ee_mbps_per_w"})),
    ]
    matrix = AssociationMatrix(tuple(sorted(cps)),
                               ("system_ee_mbps_per_w", "system_rate_mbps"))
    matrix.entries[:, :] = 1  # every RB power moves both system KPIs
    return manifests, matrix


def _agent_from(source, label: str) -> QAgent:
    if isinstance(source, QAgent):
        return source
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.exists():
            raise FileNotFoundError(f"{label} weights file not found: {path}")
        return load_agent(path)
    raise ConfigurationError(
        f"{label} agent for validation must be a QAgent or a weights path")


def run_validation(config: ExperimentConfig, drm_agent=None, ee_agent=None,
                   capture_states: bool = False) -> ValidationReport:
    """Greedy two-xApp inference with per-step conflict handling.

    Every episode starts from a fresh random network.  Each step, both
    agents propose an action on the shared state; the detector routes the
    (direct) conflict to the resolver under the configured policy, or, for
    the conflict-free baseline, a fair coin picks one action.  The winning
    action is applied live, UEs move, and one KPI row is recorded.
    """
    net = config.network
    drm = _agent_from(drm_agent if drm_agent is not None else config.drm_weights, "drm")
    ee = _agent_from(ee_agent if ee_agent is not None else config.ee_weights, "ee")
    policy = None
    if config.policy != "cmf_free":
        policy = ResolutionPolicy(config.policy, net.sla_rate_mbps,
                                  net.sla_ee_mbps_per_w)
    manifests, matrix = power_control_manifests(net)
    rows = []
    counts = {xapp: 0 for xapp in XAPP_IDS}
    trace = []
    for episode in range(config.episodes):
        state = init_network(net, config.seed + episode)
        mobility_rng = derive_rng(config.seed + episode, 1)
        coin_rng = derive_rng(config.seed + episode, 3)
        metrics = compute_link_metrics(state, net)
        for step in range(config.steps_per_episode):
            candidates = [(xapp.xapp_id, agent.greedy_action(metrics.cqi))
                          for xapp, agent in zip(manifests, (drm, ee))]
            if policy is None:
                pick = int(coin_rng.integers(len(candidates)))
                winner_id, winning_action = candidates[pick]
            else:
                graph = detect(manifests, matrix)
                to_resolve = [c for c in candidates
                              if c[0] in graph.forwarded_to_resolver]
                for xapp_id, action in candidates:
                    if xapp_id in graph.forwarded_to_action_taker:
                        state = apply_power_action(state, action, net)
                winner_id, winning_action = "", None
                if to_resolve:
                    winner_id, winning_action, _ = resolve(state, to_resolve,
                                                           policy, net)
            if winning_action is not None:
                state = apply_power_action(state, winning_action, net)
            state = step_mobility(state, net, mobility_rng)
            metrics = compute_link_metrics(state, net)
            snapshot = kpi.kpi_snapshot(state, metrics, net.sla_rate_mbps,
                                        net.sla_ee_mbps_per_w)
            if winner_id:
                counts[winner_id] += 1
            rows.append({
                "episode": episode,
                "step": step,
                "policy": config.policy,
                "F1": snapshot.system_rate_mbps,
                "F2": snapshot.system_ee_mbps_per_w,
                "total_power": snapshot.total_power_w,
                "sla_violations": snapshot.sla_violations,
                "ee_violations": snapshot.ee_violations,
                "chosen_xapp": winner_id,
            })
            if capture_states:
                trace.append(clone_for_whatif(state))
    f1 = np.array([r["F1"] for r in rows])
    power = np.array([r["total_power"] for r in rows])
    eff = np.array([r["F2"] for r in rows])
    return ValidationReport(
        policy=config.policy,
        episodes=config.episodes,
        steps_per_episode=config.steps_per_episode,
        seed=config.seed,
        rows=rows,
        f1_mean=float(f1.mean()), f1_std=float(f1.std()),
        power_mean=float(power.mean()), power_std=float(power.std()),
        ee_mean=float(eff.mean()), ee_std=float(eff.std()),
        selection_counts=counts,
        state_trace=trace,
    )


# ---------------------------------------------------------------------------
# training runs
# ---------------------------------------------------------------------------

def write_learning_curve(curve, agent_cfg: AgentConfig, path):
    """Per-episode CSV: episode index, mean per-step reward, epsilon used."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "mean_reward", "epsilon"])
        for episode, total in enumerate(curve):
            writer.writerow([episode, total / agent_cfg.steps_per_episode,
                             epsilon_at(agent_cfg, episode)])


def run_training(objective: str, net_config: NetworkConfig,
                 agent_cfg: AgentConfig, seed: int, out_dir,
                 tag: str = "") -> dict:
    """Train one agent and persist its weights and learning curve."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    agent, curve = train_xapp(objective, net_config, agent_cfg, seed)
    suffix = f"_{tag}" if tag else ""
    weights_path = out_dir / f"weights_{objective}{suffix}.bin"
    curve_path = out_dir / f"curve_{objective}{suffix}.csv"
    save_agent(agent, weights_path)
    write_learning_curve(curve, agent_cfg, curve_path)
    return {"weights": str(weights_path), "curve": str(curve_path),
            "episode_rewards": [float(x) for x in curve]}


SWEEP_PARAMS = {
    "power_step": "power_step_w",
    "learning_rate": "learning_rate",
    "discount": "discount",
}


def run_sweep(objective: str, net_config: NetworkConfig,
              agent_cfg: AgentConfig, param: str, values, seed: int,
              out_dir) -> list:
    """Re-train the same agent across one hyperparameter axis."""
    if param not in SWEEP_PARAMS:
        raise ConfigurationError(
            f"sweep param must be one of {sorted(SWEEP_PARAMS)}, got {param!r}")
    attr = SWEEP_PARAMS[param]
    results = []
    for value in values:
        overrides = agent_cfg.to_dict()
        overrides.pop("objective")
        overrides[attr] = value
        cfg = agent_config(objective, **overrides)
        tag = f"{param}_{value:g}"
        results.append(run_training(objective, net_config, cfg, seed, out_dir,
                                    tag=tag))
    return results


# ---------------------------------------------------------------------------
# conflict-detection demo
# ---------------------------------------------------------------------------

def run_cd_demo(manifests_path, alerts_path=None) -> dict:
    """Detect conflicts for a manifest file, before and after KPI alerts."""
    manifests, matrix = load_manifests(manifests_path)
    result = {"pre_alert": detect(manifests, matrix).to_dict()}
    if alerts_path is not None:
        alerts = load_alerts(alerts_path)
        amended = matrix
        for alert in alerts:
            amended = apply_kpi_alert(amended, alert)
        result["alerts_applied"] = [
            {"kpi": a.kpi, "suspect_cp": a.suspect_cp,
             "observed_drop_fraction": a.observed_drop_fraction}
            for a in alerts]
        result["post_alert"] = detect(manifests, amended).to_dict()
    return result


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------

def export_report(report: ValidationReport, config: ExperimentConfig,
                  out_dir) -> dict:
    """Write steps.csv, summary.json and config.json; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    steps_path = out_dir / "steps.csv"
    with open(steps_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=STEP_CSV_FIELDS)
        writer.writeheader()
        for row in report.rows:
            writer.writerow(row)
    summary_path = out_dir / "summary.json"
    with open(summary_path, "w") as fh:
        json.dump(report.summary_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    config_path = out_dir / "config.json"
    with open(config_path, "w") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"steps": str(steps_path), "summary": str(summary_path),
            "config": str(config_path)}
