"""Freshness-driven release-offset synthesis and EDF simulation for periodic task graphs."""

from .analysis import (DemandCurve, TestVerdict, dbf_async, dbf_sync, demand_curve, dominance_check,
                       offset_aware_test, utilization)
from .derivation import (DegeneratePeriodWarning, DerivationError, DominantChain, critical_predecessor,
                         derive_periods, dominant_chain)
from .graphio import load_graph, parse_graph, serialize_graph
from .model import (DependencyEdge, GraphError, Job, LinkSpec, PlatformSpec, Role, TaskGraph, TaskSpec,
                    ValidationReport, release_time, validate, wccl)
from .simulator import (AgeAnchor, ConsumptionInstant, Policy, SimulationConfig, SimulationTrace, compare_policies,
                        freshness_audit, hyperperiod, simulate)
from .synthesis import (FreshnessWindow, Mode, SubTask, SynthesisError, SynthesisResult, anchor_time,
                        assign_offsets, consensus_search, effective_deadlines, hyperperiod_decompose,
                        latest_safe_start, propagate_shift, search_offset)

__version__ = "0.1.0"
