"""Adaptive link-reliability-aware clustering for wireless sensor networks,
with a deterministic discrete-event simulator, an id-based baseline, and an
experiment harness."""

from .messages import BROADCAST, Message, MsgKind, Power, SINK_ID
from .metric import (
    CandidateProfile,
    EnergyState,
    ImpactFactors,
    IsolatedNodeError,
    MetricError,
    chcv_election,
    chcv_join,
    chcv_multihop,
    compute_elr,
    compute_mlr,
    compute_ndi,
    compute_rei,
    estimate_prr,
)
from .protocol import (
    EnergyParams,
    NodeState,
    NodeStatus,
    ProtocolParams,
    SinkState,
    make_node,
    sink_step,
    step,
)
from .baseline import baseline_step, make_baseline_node
from .simnet import (
    EventLog,
    LinkModel,
    MetricsRecord,
    SimConfig,
    SimResult,
    Simulation,
    SimulationError,
    check_invariants,
    generate_topology,
    run_sim,
)

__version__ = "0.1.0"

__all__ = [
    "BROADCAST",
    "Message",
    "MsgKind",
    "Power",
    "SINK_ID",
    "CandidateProfile",
    "EnergyState",
    "ImpactFactors",
    "IsolatedNodeError",
    "MetricError",
    "chcv_election",
    "chcv_join",
    "chcv_multihop",
    "compute_elr",
    "compute_mlr",
    "compute_ndi",
    "compute_rei",
    "estimate_prr",
    "EnergyParams",
    "NodeState",
    "NodeStatus",
    "ProtocolParams",
    "SinkState",
    "make_node",
    "sink_step",
    "step",
    "baseline_step",
    "make_baseline_node",
    "EventLog",
    "LinkModel",
    "MetricsRecord",
    "SimConfig",
    "SimResult",
    "Simulation",
    "SimulationError",
    "check_invariants",
    "generate_topology",
    "run_sim",
    "__version__",
]
