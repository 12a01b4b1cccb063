"""What-if scoring of conflicting candidate actions on twin clones.

Each candidate power action is applied to an independent clone of the live
state; the twin re-associates UEs, recomputes the KPIs and scores the
outcome under the active resolution policy.  The candidate with the highest
score wins; exact ties go to the lowest xApp id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import kpi
from .ndt import (NetworkConfig, NetworkState, VariationMatrix, _refresh,
                  apply_power_action, clone_for_whatif, compute_link_metrics)

POLICY_KINDS = ("maxts", "minps", "ees", "tvs", "eevs")


@dataclass
class ResolutionPolicy:
    kind: str
    sla_rate_mbps: float = 2.0        # per-UE throughput floor for tvs
    sla_ee_mbps_per_w: float = 2.0    # per-UE rate/power floor for eevs

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"policy kind must be one of {POLICY_KINDS}, got {self.kind!r}")
        if self.sla_rate_mbps <= 0 or self.sla_ee_mbps_per_w <= 0:
            raise ValueError("policy thresholds must be > 0")


@dataclass
class CandidateEvaluation:
    xapp_id: str
    score: float
    resulting_kpis: kpi.KpiSnapshot


def sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def score_maxts(post_action_kpis: kpi.KpiSnapshot) -> float:
    """Throughput-first score: the system rate itself."""
    return post_action_kpis.system_rate_mbps


def score_minps(post_action_state: NetworkState) -> float:
    """Power-first score: negated total transmit power."""
    return -kpi.total_power_w(post_action_state)


def score_ees(post_action_kpis: kpi.KpiSnapshot) -> float:
    """Efficiency-first score: the system rate / power ratio."""
    return post_action_kpis.system_ee_mbps_per_w


def score_tvs(post_action_kpis: kpi.KpiSnapshot,
              policy: ResolutionPolicy) -> float:
    """Negated SLA-throughput violation count, with a sigmoid power tiebreaker.

    The sigmoid of the total power lies in (0, 1), so it can only separate
    candidates with equal violation counts, preferring the thriftier one.
    """
    return (-float(post_action_kpis.sla_violations)
            - sigmoid(post_action_kpis.total_power_w))


def score_eevs(post_action_kpis: kpi.KpiSnapshot,
               policy: ResolutionPolicy) -> float:
    """Negated per-UE EE violation count, with the same sigmoid tiebreaker."""
    return (-float(post_action_kpis.ee_violations)
            - sigmoid(post_action_kpis.total_power_w))


def _score(policy: ResolutionPolicy, state: NetworkState,
           snapshot: kpi.KpiSnapshot) -> float:
    if policy.kind == "maxts":
        return score_maxts(snapshot)
    if policy.kind == "minps":
        return score_minps(state)
    if policy.kind == "ees":
        return score_ees(snapshot)
    if policy.kind == "tvs":
        return score_tvs(snapshot, policy)
    return score_eevs(snapshot, policy)


def evaluate_candidate(live_state: NetworkState, action: VariationMatrix,
                       policy: ResolutionPolicy,
                       config: NetworkConfig) -> tuple:
    """Apply one candidate on a clone and return (score, resulting snapshot)."""
    twin = clone_for_whatif(live_state)
    twin = apply_power_action(twin, action, config)
    twin = _refresh(twin, config)
    metrics = compute_link_metrics(twin, config)
    snapshot = kpi.kpi_snapshot(twin, metrics, policy.sla_rate_mbps,
                                policy.sla_ee_mbps_per_w)
    return _score(policy, twin, snapshot), snapshot


def select_winner(evaluations) -> CandidateEvaluation:
    """Highest score wins; exact ties resolve to the lowest xApp id."""
    return min(evaluations, key=lambda ev: (-ev.score, ev.xapp_id))


def resolve(live_state: NetworkState, candidates, policy: ResolutionPolicy,
            config: NetworkConfig):
    """Score every (xapp_id, action) candidate on its own clone and pick one.

    The live state is never touched.  Returns (winner_id, winning_action,
    evaluations) with evaluations in candidate order.
    """
    if not candidates:
        raise ValueError("resolve() needs at least one candidate action")
    evaluations = []
    for xapp_id, action in candidates:
        score, snapshot = evaluate_candidate(live_state, action, policy, config)
        evaluations.append(CandidateEvaluation(xapp_id=xapp_id, score=score,
                                               resulting_kpis=snapshot))
    winner = select_winner(evaluations)
    winner_idx = next(i for i, ev in enumerate(evaluations) if ev is winner)
    return winner.xapp_id, candidates[winner_idx][1], evaluations
