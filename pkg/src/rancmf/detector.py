"""Generalized conflict detection between control applications (xApps).

Each xApp declares the control parameters (CPs) it writes and the KPIs it
targets.  A separate association matrix records which CP is known to affect
which KPI; its KPI clusters grow over time as the reactive notifier
attributes unexpected KPI drops to previously unlinked CPs.

Two xApps are in *direct* conflict when they write a common CP.  An
*indirect* conflict is flagged when one xApp's CP sits in the cluster of a
KPI the other xApp declares.  Pairs are scanned in ascending id order and a
pair is skipped once both members are already marked conflicted, so the
reported edges are the minimal set that fixes the routing decision; a direct
edge always supersedes an indirect one for the same pair.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ManifestError(ValueError):
    """Malformed or duplicated xApp manifest."""


class AlertError(ValueError):
    """KPI alert referencing an unknown CP or KPI."""


@dataclass
class XAppManifest:
    xapp_id: str
    cps: frozenset
    kpis: frozenset
    proposed_action: object = None

    def __post_init__(self):
        self.cps = frozenset(self.cps)
        self.kpis = frozenset(self.kpis)


@dataclass
class KpiAlert:
    kpi: str
    suspect_cp: str
    observed_drop_fraction: float

    def __post_init__(self):
        if not 0.0 < self.observed_drop_fraction <= 1.0:
            raise ValueError(
                f"drop fraction must be in (0, 1], got {self.observed_drop_fraction}")


class AssociationMatrix:
    """Binary CP x KPI impact matrix; rows are CPs, columns are KPIs."""

    def __init__(self, cp_ids, kpi_ids, entries=None):
        self.cp_ids = tuple(cp_ids)
        self.kpi_ids = tuple(kpi_ids)
        self._cp_index = {c: i for i, c in enumerate(self.cp_ids)}
        self._kpi_index = {k: j for j, k in enumerate(self.kpi_ids)}
        if len(self._cp_index) != len(self.cp_ids):
            raise ValueError("duplicate CP ids")
        if len(self._kpi_index) != len(self.kpi_ids):
            raise ValueError("duplicate KPI ids")
        if entries is None:
            self.entries = np.zeros((len(self.cp_ids), len(self.kpi_ids)), dtype=np.int8)
        else:
            self.entries = np.asarray(entries, dtype=np.int8)
            if self.entries.shape != (len(self.cp_ids), len(self.kpi_ids)):
                raise ValueError("entries shape does not match id lists")

    def affects(self, cp: str, kpi: str) -> bool:
        return bool(self.entries[self._cp_index[cp], self._kpi_index[kpi]])

    def set_affects(self, cp: str, kpi: str):
        if cp not in self._cp_index:
            raise AlertError(f"unknown CP id {cp!r}")
        if kpi not in self._kpi_index:
            raise AlertError(f"unknown KPI id {kpi!r}")
        self.entries[self._cp_index[cp], self._kpi_index[kpi]] = 1

    def copy(self) -> "AssociationMatrix":
        return AssociationMatrix(self.cp_ids, self.kpi_ids, self.entries.copy())

    @classmethod
    def from_affects_map(cls, affects: dict, kpi_ids=None) -> "AssociationMatrix":
        """Build from {cp: [affected kpis]}; KPI order is sorted unless given."""
        cp_ids = tuple(affects.keys())
        if kpi_ids is None:
            kpi_ids = sorted({k for kpis in affects.values() for k in kpis})
        mat = cls(cp_ids, tuple(kpi_ids))
        for cp, kpis in affects.items():
            for k in kpis:
                mat.set_affects(cp, k)
        return mat

    def to_dict(self) -> dict:
        return {cp: [k for k in self.kpi_ids if self.affects(cp, k)]
                for cp in self.cp_ids}


@dataclass
class ConflictGraph:
    direct_edges: list = field(default_factory=list)    # ((id_a, id_b), shared CPs)
    indirect_edges: list = field(default_factory=list)  # ((id_a, id_b), shared KPIs)
    forwarded_to_resolver: set = field(default_factory=set)
    forwarded_to_action_taker: set = field(default_factory=set)

    def conflicted_ids(self) -> set:
        ids = set()
        for pair, _ in self.direct_edges:
            ids.update(pair)
        for pair, _ in self.indirect_edges:
            ids.update(pair)
        return ids

    def to_dict(self) -> dict:
        return {
            "nodes": sorted(self.forwarded_to_resolver | self.forwarded_to_action_taker),
            "direct_edges": [
                {"xapps": list(pair), "shared_cps": sorted(cps)}
                for pair, cps in self.direct_edges],
            "indirect_edges": [
                {"xapps": list(pair), "shared_kpis": sorted(kpis)}
                for pair, kpis in self.indirect_edges],
            "routing": {
                "to_conflict_resolver": sorted(self.forwarded_to_resolver),
                "to_action_taker": sorted(self.forwarded_to_action_taker),
            },
        }


# ---------------------------------------------------------------------------
# detection pipeline
# ---------------------------------------------------------------------------

def extract_cp_kpi(manifests):
    """Union CP/KPI universes plus the per-xApp declared subsets."""
    per_cps = {}
    per_kpis = {}
    for man in manifests:
        if man.xapp_id in per_cps:
            raise ManifestError(f"duplicate xapp_id {man.xapp_id!r}")
        per_cps[man.xapp_id] = frozenset(man.cps)
        per_kpis[man.xapp_id] = frozenset(man.kpis)
    all_cps = frozenset().union(*per_cps.values()) if per_cps else frozenset()
    all_kpis = frozenset().union(*per_kpis.values()) if per_kpis else frozenset()
    return all_cps, all_kpis, per_cps, per_kpis


def detect_direct(per_xapp_cps: dict) -> list:
    """Every xApp pair writing at least one common CP, labeled by the overlap."""
    ids = sorted(per_xapp_cps)
    edges = []
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            shared = per_xapp_cps[a] & per_xapp_cps[b]
            if shared:
                edges.append(((a, b), frozenset(shared)))
    return edges


def build_clusters(association: AssociationMatrix) -> dict:
    """Cluster of each KPI: the set of CPs known to affect it."""
    return {kpi: frozenset(cp for cp in association.cp_ids
                           if association.affects(cp, kpi))
            for kpi in association.kpi_ids}


def _cluster_overlap(a, b, per_cps, per_kpis, clusters) -> frozenset:
    """KPIs declared by one xApp whose cluster contains a CP of the other."""
    shared = set()
    for kpi in per_kpis[a]:
        if clusters.get(kpi, frozenset()) & per_cps[b]:
            shared.add(kpi)
    for kpi in per_kpis[b]:
        if clusters.get(kpi, frozenset()) & per_cps[a]:
            shared.add(kpi)
    return frozenset(shared)


def detect_indirect(clusters: dict, per_xapp_cps: dict, per_xapp_kpis: dict,
                    direct_edges: list) -> list:
    """Indirect conflicts: a CP of one xApp inside the cluster of a KPI the
    other declares.

    Pairs are scanned in ascending id order; a pair whose members are both
    already conflicted (directly or by an earlier indirect edge) is skipped,
    and direct pairs are never re-reported.
    """
    ids = sorted(per_xapp_cps)
    direct_pairs = {pair for pair, _ in direct_edges}
    conflicted = set()
    for pair in direct_pairs:
        conflicted.update(pair)
    edges = []
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            if (a, b) in direct_pairs:
                continue
            if a in conflicted and b in conflicted:
                continue
            shared = _cluster_overlap(a, b, per_xapp_cps, per_xapp_kpis, clusters)
            if shared:
                edges.append(((a, b), shared))
                conflicted.update((a, b))
    return edges


def route_actions(manifests, graph: ConflictGraph):
    """Split manifests into the resolver batch and the direct-apply batch."""
    conflicted = graph.conflicted_ids()
    resolver = [m for m in manifests if m.xapp_id in conflicted]
    action_taker = [m for m in manifests if m.xapp_id not in conflicted]
    return resolver, action_taker


def detect(manifests, association: AssociationMatrix) -> ConflictGraph:
    """Full pipeline: extraction, direct check, clustering, indirect check, routing."""
    _, _, per_cps, per_kpis = extract_cp_kpi(manifests)
    direct = detect_direct(per_cps)
    clusters = build_clusters(association)
    indirect = detect_indirect(clusters, per_cps, per_kpis, direct)
    graph = ConflictGraph(direct_edges=direct, indirect_edges=indirect)
    conflicted = graph.conflicted_ids()
    graph.forwarded_to_resolver = {m.xapp_id for m in manifests
                                   if m.xapp_id in conflicted}
    graph.forwarded_to_action_taker = {m.xapp_id for m in manifests
                                       if m.xapp_id not in conflicted}
    return graph


def apply_kpi_alert(association: AssociationMatrix,
                    alert: KpiAlert) -> AssociationMatrix:
    """Grow the degraded KPI's cluster by the suspect CP (idempotent)."""
    amended = association.copy()
    amended.set_affects(alert.suspect_cp, alert.kpi)
    return amended


def monitor_kpi_series(history: dict, recent_cp_changes,
                       association: AssociationMatrix,
                       drop_threshold: float = 0.2,
                       window: int = 5) -> list:
    """Reactive notifier: flag unexpected KPI drops following CP changes.

    history maps KPI id -> sequence of values per slot; recent_cp_changes is
    a sequence of (slot, cp) events.  An alert is raised when a KPI falls by
    more than drop_threshold (relative to its value at the change slot)
    within `window` slots after a change of a CP outside that KPI's cluster.
    When several CPs qualify for the same drop, the most recent change is
    blamed; one alert is emitted per (kpi, cp) pair.
    """
    alerts = []
    seen = set()
    changes = sorted(recent_cp_changes)
    for kpi, series in history.items():
        values = list(series)
        for t in range(1, len(values)):
            candidates = [(slot, cp) for slot, cp in changes
                          if 0 <= slot < t <= slot + window
                          and not association.affects(cp, kpi)]
            if not candidates:
                continue
            slot, cp = max(candidates)
            baseline = values[slot]
            if baseline <= 0:
                continue
            drop = 1.0 - values[t] / baseline
            if drop > drop_threshold and (kpi, cp) not in seen:
                seen.add((kpi, cp))
                alerts.append(KpiAlert(kpi=kpi, suspect_cp=cp,
                                       observed_drop_fraction=min(drop, 1.0)))
    return alerts


# ---------------------------------------------------------------------------
# JSON interchange
# ---------------------------------------------------------------------------

def manifests_from_dict(data: dict):
    """Parse {"xapps": [...], "association": {cp: [kpis]}} into objects."""
    manifests = [XAppManifest(xapp_id=x["xapp_id"],
                              cps=frozenset(x["cps"]),
                              kpis=frozenset(x["kpis"]),
                              proposed_action=x.get("proposed_action"))
                 for x in data.get("xapps", [])]
    affects = data.get("association", {})
    all_cps = set(affects) | {c for m in manifests for c in m.cps}
    all_kpis = set()
    for kpis in affects.values():
        all_kpis.update(kpis)
    all_kpis |= {k for m in manifests for k in m.kpis}
    matrix = AssociationMatrix(tuple(sorted(all_cps)), tuple(sorted(all_kpis)))
    for cp, kpis in affects.items():
        for k in kpis:
            matrix.set_affects(cp, k)
    return manifests, matrix


def load_manifests(path):
    path = Path(path)
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    return manifests_from_dict(data)


def load_alerts(path):
    path = Path(path)
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise AlertError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    return [KpiAlert(kpi=a["kpi"], suspect_cp=a["suspect_cp"],
                     observed_drop_fraction=a.get("observed_drop_fraction", 1.0))
            for a in data]
