"""Static-batch inference timing: prefill plus step-by-step decode.

Each transformer layer is costed as three kernel groups (GEMMs,
attention, norm/residual vector work) through the roofline, tensor
parallelism shards GEMM and attention work while replicating layer
activations on every rank, and each decode step re-reads the KV cache
at its current length. Communication rides the collective models from
the parallel module.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .errors import BatchTooLargeError, require
from .parallel import (
    ParallelismPlan,
    allreduce_time,
    p2p_time,
    tp_allreduce_payload_bytes,
    validate_plan,
)
from .system import SystemSpec, roofline_time
from .workload import (
    DECODE,
    PREFILL,
    ModelSpec,
    WorkloadShape,
    kv_bytes_per_sequence,
    layer_bytes,
    layer_flops,
    layer_weight_elements,
    logits_costs,
    total_weight_bytes,
)


@dataclass(frozen=True)
class TimingBreakdown:
    """Seconds spent per cost category; total is their exact sum."""

    gemm: float = 0.0
    attention: float = 0.0
    norm_residual_other: float = 0.0
    tp_comm: float = 0.0
    pp_comm: float = 0.0
    memory_offload: float = 0.0

    @property
    def total(self) -> float:
        return (self.gemm + self.attention + self.norm_residual_other
                + self.tp_comm + self.pp_comm + self.memory_offload)

    def __add__(self, other: "TimingBreakdown") -> "TimingBreakdown":
        return TimingBreakdown(
            gemm=self.gemm + other.gemm,
            attention=self.attention + other.attention,
            norm_residual_other=self.norm_residual_other + other.norm_residual_other,
            tp_comm=self.tp_comm + other.tp_comm,
            pp_comm=self.pp_comm + other.pp_comm,
            memory_offload=self.memory_offload + other.memory_offload,
        )

    def as_dict(self) -> dict[str, float]:
        return {
            "gemm": self.gemm,
            "attention": self.attention,
            "norm_residual_other": self.norm_residual_other,
            "tp_comm": self.tp_comm,
            "pp_comm": self.pp_comm,
            "memory_offload": self.memory_offload,
        }


@dataclass(frozen=True)
class InferenceResult:
    prefill_time: float
    decode_time: float
    e2e_latency: float
    throughput: float
    mfu: float
    max_batch: int
    breakdown: TimingBreakdown


def max_batch(model: ModelSpec, system: SystemSpec, plan: ParallelismPlan,
              shape: WorkloadShape, reserve_fraction: float = 0.0,
              activation_bytes_per_seq: float = 0.0) -> int:
    """Largest batch whose weights plus full-context KV fit one device."""
    require(0.0 <= reserve_fraction < 1.0,
            "reserve_fraction must be in [0, 1)")
    require(activation_bytes_per_seq >= 0,
            "activation_bytes_per_seq must be >= 0")
    validate_plan(model, plan)
    shard = plan.tp * plan.pp
    capacity = system.serving_tier.capacity * (1.0 - reserve_fraction)
    weights = total_weight_bytes(model) / shard
    context = shape.input_len + shape.output_len
    kv_per_seq = kv_bytes_per_sequence(model, context) / shard
    headroom = capacity - weights
    if headroom < 0:
        return 0
    return int(headroom // (kv_per_seq + activation_bytes_per_seq))


def _network_for(system: SystemSpec, plan: ParallelismPlan):
    if plan.tp > 1 or plan.pp > 1:
        require(system.network is not None,
                "tensor or pipeline parallelism needs a network")
    return system.network


@dataclass(frozen=True)
class _PhaseCost:
    breakdown: TimingBreakdown
    matrix_flops: float  # global useful FLOPs, for MFU


def _layer_group_times(model: ModelSpec, system: SystemSpec, tp: int,
                       phase: str, shape: WorkloadShape, dtype: str,
                       scratch_passes: int) -> tuple[float, float, float]:
    """(gemm, attention, norm) seconds for one layer on one rank."""
    flops = layer_flops(model, phase, shape)
    bytes_ = layer_bytes(model, phase, shape, scratch_passes)

    norm_weight_elems = 2 * model.hidden_size * (2 if model.norm_has_bias else 1)
    gemm_weight_bytes = ((layer_weight_elements(model) - norm_weight_elems)
                         * model.weight_dtype_bytes)

    t_gemm = roofline_time(
        (flops.qkv_flops + flops.out_flops + flops.ffn_flops) / tp,
        gemm_weight_bytes / tp, dtype, system)
    t_attn = roofline_time(
        flops.attention_flops / tp,
        (bytes_.kv_bytes + bytes_.scratch_bytes) / tp, dtype, system)
    # Norms and residuals run on full replicated activations per rank.
    norm_bytes = (bytes_.activation_bytes
                  + norm_weight_elems * model.weight_dtype_bytes)
    t_norm = roofline_time(flops.norm_residual_flops, norm_bytes, dtype,
                           system, use_vector_peak=True)
    return t_gemm, t_attn, t_norm


def _logits_time(model: ModelSpec, system: SystemSpec, tp: int, batch: int,
                 dtype: str) -> tuple[float, float]:
    """(seconds, global matrix FLOPs) of the final-position LM head."""
    cost = logits_costs(model, batch, positions=1)
    act = (batch * model.hidden_size
           + batch * model.vocab_size / tp) * model.activation_dtype_bytes
    t = roofline_time(cost.logits_flops / tp,
                      cost.weight_bytes / tp + act, dtype, system)
    return t, float(cost.logits_flops)


def _prefill_cost(model: ModelSpec, system: SystemSpec, plan: ParallelismPlan,
                  shape: WorkloadShape, dtype: str,
                  scratch_passes: int) -> _PhaseCost:
    net = _network_for(system, plan)
    layers = model.num_layers
    t_gemm, t_attn, t_norm = _layer_group_times(
        model, system, plan.tp, PREFILL, shape, dtype, scratch_passes)

    tp_time = 0.0
    if plan.tp > 1:
        payload = tp_allreduce_payload_bytes(model,
                                             shape.batch * shape.input_len)
        tp_time = 2 * layers * allreduce_time(payload, plan.tp, net)
    pp_time = 0.0
    if plan.pp > 1:
        boundary = (shape.batch * shape.input_len * model.hidden_size
                    * model.activation_dtype_bytes)
        pp_time = (plan.pp - 1) * p2p_time(boundary, net)

    t_logits, logit_flops = _logits_time(model, system, plan.tp, shape.batch,
                                         dtype)
    flops = layer_flops(model, PREFILL, shape)
    useful = layers * float(flops.gemm_flops) + logit_flops
    return _PhaseCost(
        breakdown=TimingBreakdown(
            gemm=layers * t_gemm + t_logits,
            attention=layers * t_attn,
            norm_residual_other=layers * t_norm,
            tp_comm=tp_time,
            pp_comm=pp_time,
        ),
        matrix_flops=useful,
    )


def _decode_cost(model: ModelSpec, system: SystemSpec, plan: ParallelismPlan,
                 shape: WorkloadShape, dtype: str,
                 scratch_passes: int) -> _PhaseCost:
    """Sum of per-step costs; the KV context grows one token per step."""
    net = _network_for(system, plan)
    layers = model.num_layers
    steps = shape.output_len
    if steps == 0:
        return _PhaseCost(TimingBreakdown(), 0.0)

    # Everything except attention is context-independent; cost it once.
    step_shape = shape.at_kv_len(shape.input_len)
    t_gemm, _, t_norm = _layer_group_times(
        model, system, plan.tp, DECODE, step_shape, dtype, scratch_passes)
    t_logits, logit_flops = _logits_time(model, system, plan.tp, shape.batch,
                                         dtype)
    tp_step = 0.0
    if plan.tp > 1:
        payload = tp_allreduce_payload_bytes(model, shape.batch)
        tp_step = 2 * layers * allreduce_time(payload, plan.tp, net)
    pp_step = 0.0
    if plan.pp > 1:
        boundary = (shape.batch * model.hidden_size
                    * model.activation_dtype_bytes)
        pp_step = (plan.pp - 1) * p2p_time(boundary, net)

    flops_fixed = layer_flops(model, DECODE, step_shape)
    per_step_fixed_flops = float(flops_fixed.gemm_flops
                                 - flops_fixed.attention_flops)

    attn_time = 0.0
    attn_flops = 0.0
    for step in range(steps):
        ctx_shape = shape.at_kv_len(shape.input_len + step)
        f = layer_flops(model, DECODE, ctx_shape)
        b = layer_bytes(model, DECODE, ctx_shape, scratch_passes)
        attn_time += roofline_time(
            f.attention_flops / plan.tp,
            (b.kv_bytes + b.scratch_bytes) / plan.tp, dtype, system)
        attn_flops += float(f.attention_flops)

    useful = (layers * (steps * per_step_fixed_flops + attn_flops)
              + steps * logit_flops)
    return _PhaseCost(
        breakdown=TimingBreakdown(
            gemm=steps * (layers * t_gemm + t_logits),
            attention=layers * attn_time,
            norm_residual_other=steps * layers * t_norm,
            tp_comm=steps * tp_step,
            pp_comm=steps * pp_step,
        ),
        matrix_flops=useful,
    )


def run_inference(model: ModelSpec, system: SystemSpec, plan: ParallelismPlan,
                  shape: WorkloadShape, compute_dtype: str,
                  reserve_fraction: float = 0.0,
                  attention_scratch_passes: int = 2) -> InferenceResult:
    """End-to-end latency, throughput, and MFU for one static batch.

    The batch must fit in device memory; violations raise with the
    feasible maximum attached. Data parallelism replicates the engine,
    multiplying throughput, with latency unchanged.
    """
    validate_plan(model, plan)
    require(plan.device_count <= system.processor.count,
            "plan exceeds the system's processor count")
    feasible = max_batch(model, system, plan, shape, reserve_fraction)
    if shape.batch > feasible:
        raise BatchTooLargeError(shape.batch, feasible)

    prefill = _prefill_cost(model, system, plan, shape, compute_dtype,
                            attention_scratch_passes)
    decode = _decode_cost(model, system, plan, shape, compute_dtype,
                          attention_scratch_passes)
    breakdown = prefill.breakdown + decode.breakdown
    e2e = breakdown.total

    throughput = 0.0
    if shape.output_len > 0:
        throughput = plan.dp * shape.batch * shape.output_len / e2e
    peak = system.processor.matrix_peak(compute_dtype)
    useful = plan.dp * (prefill.matrix_flops + decode.matrix_flops)
    mfu = useful / (e2e * peak * plan.device_count)

    return InferenceResult(
        prefill_time=prefill.breakdown.total,
        decode_time=decode.breakdown.total,
        e2e_latency=e2e,
        throughput=throughput,
        mfu=mfu,
        max_batch=feasible,
        breakdown=breakdown,
    )


# ---------------------------------------------------------------------------
# comparison sweeps
# ---------------------------------------------------------------------------

def scale_compute(system: SystemSpec, factor: float) -> SystemSpec:
    """Same system with every matrix peak multiplied by `factor`."""
    require(factor > 0, "compute scale factor must be > 0")
    proc = system.processor
    scaled = dataclasses.replace(
        proc,
        peak_matrix_flops={k: v * factor
                           for k, v in proc.peak_matrix_flops.items()},
    )
    return dataclasses.replace(system, processor=scaled)


@dataclass(frozen=True)
class SpeedupRow:
    compute_scale: float
    input_len: int
    output_len: int
    baseline_throughput: float
    candidate_throughput: float
    throughput_ratio: float
    latency_ratio: float
    baseline_mfu: float
    candidate_mfu: float


def speedup_matrix(model: ModelSpec,
                   baseline: tuple[SystemSpec, ParallelismPlan],
                   candidate: tuple[SystemSpec, ParallelismPlan],
                   shapes: list[tuple[int, int]],
                   compute_scales: list[float],
                   compute_dtype: str) -> list[SpeedupRow]:
    """Throughput (at each system's max batch) and single-request latency
    ratios of candidate over baseline, per shape and compute scale."""
    require(len(shapes) > 0, "shapes must be non-empty")
    require(len(compute_scales) > 0, "compute_scales must be non-empty")
    base_sys, base_plan = baseline
    cand_sys, cand_plan = candidate
    rows = []
    for scale in compute_scales:
        scaled = scale_compute(cand_sys, scale)
        for input_len, output_len in shapes:
            probe = WorkloadShape(batch=1, input_len=input_len,
                                  output_len=output_len)
            base_b = max_batch(model, base_sys, base_plan, probe)
            cand_b = max_batch(model, scaled, cand_plan, probe)
            require(base_b >= 1 and cand_b >= 1,
                    f"no feasible batch at shape ({input_len}, {output_len})")
            base = run_inference(model, base_sys, base_plan,
                                 dataclasses.replace(probe, batch=base_b),
                                 compute_dtype)
            cand = run_inference(model, scaled, cand_plan,
                                 dataclasses.replace(probe, batch=cand_b),
                                 compute_dtype)
            base_lat = run_inference(model, base_sys, base_plan, probe,
                                     compute_dtype)
            cand_lat = run_inference(model, scaled, cand_plan, probe,
                                     compute_dtype)
            rows.append(SpeedupRow(
                compute_scale=scale,
                input_len=input_len,
                output_len=output_len,
                baseline_throughput=base.throughput,
                candidate_throughput=cand.throughput,
                throughput_ratio=cand.throughput / base.throughput,
                latency_ratio=base_lat.e2e_latency / cand_lat.e2e_latency,
                baseline_mfu=base.mfu,
                candidate_mfu=cand.mfu,
            ))
    return rows


@dataclass(frozen=True)
class OverheadRow:
    tp: int
    decode_time: float
    overhead_pct: float
    allreduce_share: float


def tp_overhead_curve(model: ModelSpec, system: SystemSpec,
                      shape: WorkloadShape, tp_list: list[int],
                      compute_dtype: str,
                      attention_scratch_passes: int = 2) -> list[OverheadRow]:
    """Decode-time overhead of tensor parallelism versus ideal scaling.

    overhead% at tp is (t(tp) - t(1)/tp) / (t(1)/tp) * 100; the
    all-reduce share is the fraction of that overhead spent in
    tensor-parallel collectives. tp=1 must be present as the baseline.
    """
    require(1 in tp_list, "tp_list must include 1 as the baseline")
    costs = {}
    for tp in sorted(set(tp_list)):
        plan = ParallelismPlan(tp=tp)
        validate_plan(model, plan)
        costs[tp] = _decode_cost(model, system, plan, shape, compute_dtype,
                                 attention_scratch_passes)
    base_time = costs[1].breakdown.total
    rows = []
    for tp in sorted(set(tp_list)):
        t = costs[tp].breakdown.total
        ideal = base_time / tp
        overhead = t - ideal
        rows.append(OverheadRow(
            tp=tp,
            decode_time=t,
            overhead_pct=100.0 * overhead / ideal,
            allreduce_share=(costs[tp].breakdown.tp_comm / overhead
                             if overhead > 0 else 0.0),
        ))
    return rows
