"""Conflict-managed multi-cell power control lab.

A seeded RAN digital twin, two antagonistic DQN power-control agents,
a generalized conflict detector, a twin-evaluated conflict resolver, and
an experiment harness with a CLI.
"""

from .ndt import (ConfigurationError, LinkMetrics, NetworkConfig,
                  NetworkState, VariationMatrix, apply_power_action,
                  associate_ues, clone_for_whatif, compute_link_metrics,
                  init_network, path_loss_db, sinr_to_cqi, step_mobility)
from .kpi import (KpiSnapshot, count_ee_violations, count_sla_violations,
                  kpi_snapshot, system_ee_mbps_per_w, system_rate_mbps,
                  total_power_w)
from .agent import (AgentConfig, QAgent, agent_config, decode_action,
                    encode_action, encode_state, load_agent, reward_drm,
                    reward_ee, save_agent, select_action, train_step,
                    train_xapp)
from .detector import (AssociationMatrix, ConflictGraph, KpiAlert,
                       XAppManifest, apply_kpi_alert, build_clusters, detect,
                       detect_direct, detect_indirect, extract_cp_kpi,
                       monitor_kpi_series, route_actions)
from .resolver import (CandidateEvaluation, ResolutionPolicy, resolve,
                       score_ees, score_eevs, score_maxts, score_minps,
                       score_tvs, select_winner)
from .harness import (ExperimentConfig, ValidationReport, export_report,
                      load_experiment_config, run_cd_demo, run_sweep,
                      run_training, run_validation)

__version__ = "0.1.0"
