"""Analytical performance, memory, and data-movement energy model for
LLM and embedding workloads on GPU clusters and shared-memory fabric
appliances."""

__version__ = "0.1.0"

from .errors import (
    BatchTooLargeError,
    ConfigError,
    InfeasiblePlanError,
    ValidationError,
)
from .workload import (
    DECODE,
    PREFILL,
    CostBreakdown,
    DlrmSpec,
    ModelSpec,
    WorkloadShape,
    arithmetic_intensity,
    arithmetic_intensity_curve,
    dlrm_pooling_bytes,
    kv_bytes_per_sequence,
    layer_bytes,
    layer_flops,
    param_count,
)
from .system import (
    EfficiencyCurve,
    MemoryTier,
    NetworkSpec,
    ProcessorSpec,
    SystemSpec,
    effective_bandwidth,
    effective_flops,
    ridge_intensity,
    roofline_time,
)
from .parallel import (
    ParallelismPlan,
    TrafficLedger,
    allreduce_time,
    p2p_time,
    pipeline_time,
    shard_sizes,
    traffic_ledger,
)
from .inference import (
    InferenceResult,
    TimingBreakdown,
    max_batch,
    run_inference,
    speedup_matrix,
    tp_overhead_curve,
)
from .training import (
    SearchConstraints,
    TrainMemoryBreakdown,
    TrainStepResult,
    offload_volume,
    search_plan,
    train_memory,
    train_step_time,
)
from .energy import (
    EnergyParams,
    PathProfile,
    ScenarioMix,
    expected_per_bit,
    path_energy,
    scenario_profile,
    workload_energy,
)
from .dlrm import DlrmPlacement, pooling_time, required_devices
from .report import MeasurementSet, RunReport, emit, mape, r_squared

__all__ = [
    "BatchTooLargeError", "ConfigError", "InfeasiblePlanError",
    "ValidationError",
    "DECODE", "PREFILL",
    "CostBreakdown", "DlrmSpec", "ModelSpec", "WorkloadShape",
    "arithmetic_intensity", "arithmetic_intensity_curve",
    "dlrm_pooling_bytes", "kv_bytes_per_sequence", "layer_bytes",
    "layer_flops", "param_count",
    "EfficiencyCurve", "MemoryTier", "NetworkSpec", "ProcessorSpec",
    "SystemSpec", "effective_bandwidth", "effective_flops",
    "ridge_intensity", "roofline_time",
    "ParallelismPlan", "TrafficLedger", "allreduce_time", "p2p_time",
    "pipeline_time", "shard_sizes", "traffic_ledger",
    "InferenceResult", "TimingBreakdown", "max_batch", "run_inference",
    "speedup_matrix", "tp_overhead_curve",
    "SearchConstraints", "TrainMemoryBreakdown", "TrainStepResult",
    "offload_volume", "search_plan", "train_memory", "train_step_time",
    "EnergyParams", "PathProfile", "ScenarioMix", "expected_per_bit",
    "path_energy", "scenario_profile", "workload_energy",
    "DlrmPlacement", "pooling_time", "required_devices",
    "MeasurementSet", "RunReport", "emit", "mape", "r_squared",
]
