"""Parallelism plans, collective timing, and the traffic ledger.

Collective costs use the standard ring model; pipeline timing follows
the one-forward-one-backward schedule. The traffic ledger counts bits
moved per class so the energy model can price each class by its
interconnect path.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import require
from .system import NetworkSpec
from .workload import (
    DECODE,
    PREFILL,
    ModelSpec,
    WorkloadShape,
    kv_bytes_per_sequence,
    total_weight_bytes,
)

TRAIN = "train"
LEDGER_PHASES = (TRAIN, PREFILL, DECODE)

# Backward re-traverses the tensor-parallel layer twice (input grads and
# weight grads), so training moves 3 forward-equivalent volumes.
TRAIN_TP_PASSES = 3


@dataclass(frozen=True)
class ParallelismPlan:
    """Tensor/pipeline/data split plus microbatching."""

    tp: int = 1
    pp: int = 1
    dp: int = 1
    microbatch: int = 1
    num_microbatches: int = 1
    sequence_parallel: bool = False
    dp_overlap: bool = False

    def __post_init__(self):
        for name in ("tp", "pp", "dp", "microbatch", "num_microbatches"):
            require(getattr(self, name) >= 1, f"{name} must be >= 1")

    @property
    def device_count(self) -> int:
        return self.tp * self.pp * self.dp

    @property
    def global_batch(self) -> int:
        return self.dp * self.num_microbatches * self.microbatch


def validate_plan(model: ModelSpec, plan: ParallelismPlan,
                  device_count: int | None = None,
                  gpus_per_tray: int | None = None) -> None:
    """Divisibility and budget checks shared by inference and training."""
    require(model.num_heads % plan.tp == 0,
            f"num_heads ({model.num_heads}) not divisible by tp ({plan.tp})")
    require(model.num_layers % plan.pp == 0,
            f"num_layers ({model.num_layers}) not divisible by pp ({plan.pp})")
    if device_count is not None:
        require(plan.device_count == device_count,
                f"plan uses {plan.device_count} devices, system has "
                f"{device_count}")
    if gpus_per_tray is not None:
        require(plan.tp <= gpus_per_tray,
                f"tp ({plan.tp}) exceeds gpus_per_tray ({gpus_per_tray})")


@dataclass(frozen=True)
class ShardSizes:
    """Per-device memory footprint of a sharded inference model."""

    weight_bytes: float
    kv_bytes_per_sequence: float
    activation_bytes: float
    replicated_activation_bytes: float


def shard_sizes(model: ModelSpec, plan: ParallelismPlan,
                shape: WorkloadShape) -> ShardSizes:
    """Weight, KV, and activation bytes landing on one device.

    Weights and KV divide across tp*pp; layer input/output activations
    are replicated at full size on every tensor-parallel rank, so the
    cluster-wide copy count grows with tp.
    """
    validate_plan(model, plan)
    model_shard = plan.tp * plan.pp
    context = shape.kv_len if shape.kv_len is not None else (
        shape.input_len + shape.output_len)
    act = 2 * shape.batch * shape.input_len * model.hidden_size \
        * model.activation_dtype_bytes
    return ShardSizes(
        weight_bytes=total_weight_bytes(model) / model_shard,
        kv_bytes_per_sequence=kv_bytes_per_sequence(model, context) / model_shard,
        activation_bytes=act,
        replicated_activation_bytes=act * plan.tp,
    )


# ---------------------------------------------------------------------------
# collective and pipeline timing
# ---------------------------------------------------------------------------

def allreduce_time(payload_bytes: float, group_size: int,
                   network: NetworkSpec) -> float:
    """Ring all-reduce: reduce-scatter plus all-gather.

    Each rank moves 2(n-1) messages of payload/n bytes, so the wire
    term is 2(n-1)/n * payload / bandwidth plus one latency per message.
    Composed as messages x per-message time to mirror a step-by-step
    schedule exactly.
    """
    require(payload_bytes >= 0, "payload_bytes must be >= 0")
    require(group_size >= 1, "group_size must be >= 1")
    if group_size == 1:
        return 0.0
    n = group_size
    messages = 2 * (n - 1)
    per_message = payload_bytes / n / network.link_bandwidth
    return messages * per_message + messages * network.per_message_latency


def p2p_time(payload_bytes: float, network: NetworkSpec) -> float:
    """Single point-to-point transfer."""
    require(payload_bytes >= 0, "payload_bytes must be >= 0")
    return payload_bytes / network.link_bandwidth + network.per_message_latency


@dataclass(frozen=True)
class PipelineTiming:
    total_time: float
    bubble_fraction: float


def pipeline_time(stage_time: float, pp: int,
                  num_microbatches: int) -> PipelineTiming:
    """One-forward-one-backward schedule over identical stages.

    Fill and drain cost (pp - 1) extra stage slots; the bubble fraction
    is idle slots over busy slots per stage, (pp - 1) / m.
    """
    require(stage_time >= 0, "stage_time must be >= 0")
    require(pp >= 1, "pp must be >= 1")
    require(num_microbatches >= 1, "num_microbatches must be >= 1")
    m = num_microbatches
    return PipelineTiming(
        total_time=(m + pp - 1) * stage_time,
        bubble_fraction=(pp - 1) / m,
    )


# ---------------------------------------------------------------------------
# traffic ledger
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrafficLedger:
    """Bits moved per traffic class during one phase or step."""

    tp_comm: float = 0.0
    pp_comm: float = 0.0
    dp_comm: float = 0.0
    offload_tray: float = 0.0
    offload_external: float = 0.0

    def __post_init__(self):
        for name in ("tp_comm", "pp_comm", "dp_comm", "offload_tray",
                     "offload_external"):
            require(getattr(self, name) >= 0, f"{name} must be >= 0")

    @property
    def total_bits(self) -> float:
        return (self.tp_comm + self.pp_comm + self.dp_comm
                + self.offload_tray + self.offload_external)

    def __add__(self, other: "TrafficLedger") -> "TrafficLedger":
        return TrafficLedger(
            tp_comm=self.tp_comm + other.tp_comm,
            pp_comm=self.pp_comm + other.pp_comm,
            dp_comm=self.dp_comm + other.dp_comm,
            offload_tray=self.offload_tray + other.offload_tray,
            offload_external=self.offload_external + other.offload_external,
        )

    def as_dict(self) -> dict[str, float]:
        return {
            "tp_comm": self.tp_comm,
            "pp_comm": self.pp_comm,
            "dp_comm": self.dp_comm,
            "offload_tray": self.offload_tray,
            "offload_external": self.offload_external,
        }


def tp_allreduce_payload_bytes(model: ModelSpec, tokens: int) -> int:
    """Payload of one tensor-parallel all-reduce over `tokens` tokens."""
    return tokens * model.hidden_size * model.activation_dtype_bytes


def traffic_ledger(model: ModelSpec, plan: ParallelismPlan,
                   tokens_processed: int, phase: str,
                   offload_tray_bytes: float = 0.0,
                   offload_external_bytes: float = 0.0) -> TrafficLedger:
    """Bits per traffic class for `tokens_processed` tokens in one phase.

    Tensor-parallel traffic counts 2 all-reduce payloads per layer per
    forward-equivalent pass (3 passes when training). Pipeline traffic
    counts the boundary activations over each of the pp-1 edges, doubled
    in training for the backward gradients. Data-parallel traffic counts
    every rank's gradient shard once per step. Sequence parallelism
    re-shapes tensor-parallel collectives without changing their volume,
    so the ledger is unaffected by that flag.
    """
    require(phase in LEDGER_PHASES, f"phase must be one of {LEDGER_PHASES}")
    require(tokens_processed >= 0, "tokens_processed must be >= 0")
    require(offload_tray_bytes >= 0, "offload_tray_bytes must be >= 0")
    require(offload_external_bytes >= 0, "offload_external_bytes must be >= 0")

    training = phase == TRAIN
    act_bytes = tokens_processed * model.hidden_size * model.activation_dtype_bytes

    tp_bits = 0.0
    if plan.tp > 1:
        passes = TRAIN_TP_PASSES if training else 1
        tp_bits = 2 * model.num_layers * act_bytes * passes * 8

    pp_bits = 0.0
    if plan.pp > 1:
        pp_bits = (plan.pp - 1) * act_bytes * (2 if training else 1) * 8

    dp_bits = 0.0
    if training and plan.dp > 1:
        dp_bits = plan.dp * total_weight_bytes(model) * 8

    return TrafficLedger(
        tp_comm=tp_bits,
        pp_comm=pp_bits,
        dp_comm=dp_bits,
        offload_tray=offload_tray_bytes * 8,
        offload_external=offload_external_bytes * 8,
    )
