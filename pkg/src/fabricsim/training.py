"""Training-step timing, memory sizing, and plan search.

A step is m microbatches through a one-forward-one-backward pipeline;
backward costs twice the forward, optimizer state follows the usual
mixed-precision byte counts, and memory that exceeds the serving tier
spills to the overflow tier, moving 2x the excess per step. The plan
search exhaustively scores every valid (tp, pp, dp, microbatch) split
and keeps the highest-MFU plan with a deterministic tie-break.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InfeasiblePlanError, ValidationError, require
from .parallel import (
    TRAIN,
    TRAIN_TP_PASSES,
    ParallelismPlan,
    TrafficLedger,
    allreduce_time,
    p2p_time,
    pipeline_time,
    tp_allreduce_payload_bytes,
    traffic_ledger,
    validate_plan,
)
from .system import FABRIC_SHARED, SystemSpec, roofline_time
from .inference import _layer_group_times  # shared per-layer kernel costing
from .workload import (
    PREFILL,
    ModelSpec,
    WorkloadShape,
    layer_flops,
    logits_costs,
    param_count,
    total_weight_bytes,
)

MIXED_PRECISION_OPTIMIZER_BYTES = 12  # fp32 master copy + two moments
FULL_PRECISION_OPTIMIZER_BYTES = 8


@dataclass(frozen=True)
class TrainMemoryBreakdown:
    """Per-device training footprint in bytes."""

    params: float
    gradients: float
    optimizer_states: float
    activations: float

    @property
    def total(self) -> float:
        return (self.params + self.gradients + self.optimizer_states
                + self.activations)


@dataclass(frozen=True)
class TrainStepResult:
    step_time: float
    mfu: float
    bubble_fraction: float
    memory: TrainMemoryBreakdown
    offload_bytes_per_step: float
    ledger: TrafficLedger


def _layer_activation_bytes(model: ModelSpec, microbatch: int, seq_len: int,
                            recompute: bool) -> float:
    """Stored activation bytes of one layer for one microbatch.

    Without recomputation this is the usual transformer estimate
    (34*s*b*h plus the 5*a*s^2*b attention term, stated for 2-byte
    activations); with recomputation only the layer-boundary input
    survives to backward.
    """
    b, s, h = microbatch, seq_len, model.hidden_size
    if recompute:
        return float(b * s * h * model.activation_dtype_bytes)
    elems_x2 = 34 * s * b * h + 5 * model.num_heads * b * s * s
    return elems_x2 * (model.activation_dtype_bytes / 2.0)


def train_memory(model: ModelSpec, plan: ParallelismPlan, seq_len: int,
                 recompute_activations: bool = False,
                 mixed_precision: bool = True) -> TrainMemoryBreakdown:
    """Params, grads, optimizer state, and activations on one device."""
    require(seq_len >= 1, "seq_len must be >= 1")
    validate_plan(model, plan)
    shard = plan.tp * plan.pp
    p = param_count(model)
    opt_per_param = (MIXED_PRECISION_OPTIMIZER_BYTES if mixed_precision
                     else FULL_PRECISION_OPTIMIZER_BYTES)
    per_layer = _layer_activation_bytes(model, plan.microbatch, seq_len,
                                        recompute_activations)
    in_flight = min(plan.pp, plan.num_microbatches)
    activations = (model.num_layers // plan.pp) * per_layer / plan.tp * in_flight
    return TrainMemoryBreakdown(
        params=p * model.weight_dtype_bytes / shard,
        gradients=p * model.weight_dtype_bytes / shard,
        optimizer_states=p * opt_per_param / shard,
        activations=activations,
    )


def offload_volume(model: ModelSpec, plan: ParallelismPlan,
                   system: SystemSpec, seq_len: int,
                   recompute_activations: bool = False,
                   mixed_precision: bool = True) -> tuple[float, str | None]:
    """(bytes moved per step, destination tier role) for memory overflow.

    Excess over the serving tier spills to the fabric tier when present,
    else host memory, and crosses the boundary twice per step. Overflow
    with no overflow tier is an error.
    """
    memory = train_memory(model, plan, seq_len, recompute_activations,
                          mixed_precision)
    excess = memory.total - system.serving_tier.capacity
    if excess <= 0:
        return 0.0, None
    tier = system.overflow_tier
    if tier is None:
        raise ValidationError(
            f"training footprint {memory.total:.3e} B exceeds device "
            f"capacity {system.serving_tier.capacity:.3e} B and the system "
            "has no offload tier")
    if excess > tier.capacity:
        raise ValidationError(
            f"training footprint overflows by {excess:.3e} B, more than "
            f"the {tier.role} tier's {tier.capacity:.3e} B")
    return 2.0 * excess, tier.role


def _train_logits_time(model: ModelSpec, system: SystemSpec, tp: int,
                       microbatch: int, seq_len: int,
                       dtype: str) -> tuple[float, float]:
    """(forward seconds, forward matrix FLOPs) of the all-position head."""
    cost = logits_costs(model, microbatch, positions=seq_len)
    t = roofline_time(cost.logits_flops / tp,
                      (cost.weight_bytes + cost.activation_bytes) / tp,
                      dtype, system)
    return t, float(cost.logits_flops)


def train_step_time(model: ModelSpec, system: SystemSpec,
                    plan: ParallelismPlan, seq_len: int, compute_dtype: str,
                    global_batch: int | None = None,
                    recompute_activations: bool = False,
                    mixed_precision: bool = True,
                    attention_scratch_passes: int = 2) -> TrainStepResult:
    """One optimizer step: pipeline of fwd+bwd microbatches plus the
    gradient all-reduce (skipped from the critical path when overlapped).
    """
    require(seq_len >= 1, "seq_len must be >= 1")
    validate_plan(model, plan)
    require(plan.device_count <= system.processor.count,
            "plan exceeds the system's processor count")
    if global_batch is not None:
        require(global_batch == plan.global_batch,
                f"global_batch {global_batch} != dp*m*microbatch "
                f"({plan.global_batch})")
    if plan.tp > 1 or plan.pp > 1 or plan.dp > 1:
        require(system.network is not None, "multi-device training needs a "
                "network")

    micro_shape = WorkloadShape(batch=plan.microbatch, input_len=seq_len)
    t_gemm, t_attn, t_norm = _layer_group_times(
        model, system, plan.tp, PREFILL, micro_shape, compute_dtype,
        attention_scratch_passes)
    layer_fwd = t_gemm + t_attn + t_norm

    ar_unit = 0.0
    if plan.tp > 1:
        payload = tp_allreduce_payload_bytes(model,
                                             plan.microbatch * seq_len)
        ar_unit = allreduce_time(payload, plan.tp, system.network)

    layers_per_stage = model.num_layers // plan.pp
    stage = layers_per_stage * (3.0 * layer_fwd + 2 * TRAIN_TP_PASSES * ar_unit)
    t_logits, logits_flops = _train_logits_time(
        model, system, plan.tp, plan.microbatch, seq_len, compute_dtype)
    # The last stage carries the LM head and is the pipeline bottleneck.
    stage += 3.0 * t_logits
    if plan.pp > 1:
        boundary = (plan.microbatch * seq_len * model.hidden_size
                    * model.activation_dtype_bytes)
        stage += 2.0 * p2p_time(boundary, system.network)

    pipe = pipeline_time(stage, plan.pp, plan.num_microbatches)
    step_time = pipe.total_time
    if plan.dp > 1 and not plan.dp_overlap:
        grad_shard = (total_weight_bytes(model) / (plan.tp * plan.pp))
        step_time += allreduce_time(grad_shard, plan.dp, system.network)

    offload_bytes, _ = offload_volume(model, plan, system, seq_len,
                                      recompute_activations, mixed_precision)
    memory = train_memory(model, plan, seq_len, recompute_activations,
                          mixed_precision)
    tokens = plan.global_batch * seq_len
    ledger = traffic_ledger(model, plan, tokens, TRAIN,
                            offload_tray_bytes=offload_bytes)

    fwd_gemm = float(layer_flops(model, PREFILL, micro_shape).gemm_flops)
    useful = 3.0 * plan.dp * plan.num_microbatches * (
        model.num_layers * fwd_gemm + logits_flops)
    peak = system.processor.matrix_peak(compute_dtype)
    mfu = useful / (step_time * peak * plan.device_count)

    return TrainStepResult(
        step_time=step_time,
        mfu=mfu,
        bubble_fraction=pipe.bubble_fraction,
        memory=memory,
        offload_bytes_per_step=offload_bytes,
        ledger=ledger,
    )


# ---------------------------------------------------------------------------
# plan search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SearchConstraints:
    global_batch: int
    seq_len: int
    compute_dtype: str
    max_tp: int | None = None
    recompute_activations: bool = False
    mixed_precision: bool = True
    allow_offload: bool = True

    def __post_init__(self):
        require(self.global_batch >= 1, "global_batch must be >= 1")
        require(self.seq_len >= 1, "seq_len must be >= 1")


def _divisors(n: int) -> list[int]:
    return [d for d in range(1, n + 1) if n % d == 0]


def search_plan(model: ModelSpec, system: SystemSpec, device_budget: int,
                constraints: SearchConstraints,
                ) -> tuple[ParallelismPlan, TrainStepResult]:
    """Exhaustive search for the highest-MFU plan on `device_budget`
    devices.

    Every (tp, pp, dp) factorization of the budget is scored with every
    microbatch split of the local batch. Ties break toward smaller tp,
    then pp, then microbatch. Raises with the rejection tally when
    nothing is feasible.
    """
    require(device_budget >= 1, "device_budget must be >= 1")
    require(device_budget <= system.processor.count,
            "device_budget exceeds the system's processor count")
    max_tp = constraints.max_tp
    if max_tp is None:
        max_tp = (system.network.gpus_per_tray if system.network is not None
                  else 1)

    reasons: dict[str, int] = {}

    def reject(reason: str) -> None:
        reasons[reason] = reasons.get(reason, 0) + 1

    best_key = None
    best: tuple[ParallelismPlan, TrainStepResult] | None = None
    capacity = system.serving_tier.capacity
    overflow = system.overflow_tier
    overflow_room = overflow.capacity if overflow is not None else 0.0

    for tp in _divisors(device_budget):
        if tp > max_tp:
            reject("tp_exceeds_tray_size")
            continue
        if model.num_heads % tp != 0:
            reject("tp_does_not_divide_heads")
            continue
        for pp in _divisors(device_budget // tp):
            if pp > model.num_layers or model.num_layers % pp != 0:
                reject("pp_does_not_divide_layers")
                continue
            dp = device_budget // (tp * pp)
            if constraints.global_batch % dp != 0:
                reject("dp_does_not_divide_global_batch")
                continue
            local_batch = constraints.global_batch // dp
            for microbatch in _divisors(local_batch):
                plan = ParallelismPlan(
                    tp=tp, pp=pp, dp=dp, microbatch=microbatch,
                    num_microbatches=local_batch // microbatch)
                memory = train_memory(
                    model, plan, constraints.seq_len,
                    constraints.recompute_activations,
                    constraints.mixed_precision)
                if memory.total > capacity and not (
                        constraints.allow_offload
                        and memory.total - capacity <= overflow_room):
                    reject("exceeds_device_memory")
                    continue
                result = train_step_time(
                    model, system, plan, constraints.seq_len,
                    constraints.compute_dtype,
                    recompute_activations=constraints.recompute_activations,
                    mixed_precision=constraints.mixed_precision)
                key = (-result.mfu, tp, pp, microbatch)
                if best_key is None or key < best_key:
                    best_key = key
                    best = (plan, result)

    if best is None:
        summary = ", ".join(f"{k} x{v}" for k, v in sorted(reasons.items()))
        raise InfeasiblePlanError(
            f"no feasible plan for budget {device_budget}: {summary}",
            reasons)
    return best
