"""Transformer and embedding-table workload cost accounting.

Analytical FLOP and byte counts for decoder-only transformer layers in
prefill and decode phases, plus pooled embedding-lookup volumes for
recommendation models. Conventions, applied uniformly:

  * a fused multiply-add counts as 2 FLOPs
  * weights are charged once per kernel invocation, no cache reuse
  * attention cost is 4 * batch * new_tokens * context * hidden
    (QK^T plus score*V), with no causal-mask discount
  * norm/residual work is charged separately as a vector-op category
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import ValidationError, require

PREFILL = "prefill"
DECODE = "decode"
PHASES = (PREFILL, DECODE)

_DTYPE_WIDTHS = (1, 2, 4)


@dataclass(frozen=True)
class ModelSpec:
    """Decoder-only transformer architecture description.

    ffn_mat_count is 2 for a plain MLP (up, down) and 3 for gated
    variants (gate, up, down). Grouped-query attention is expressed by
    num_kv_heads < num_heads.
    """

    hidden_size: int
    num_layers: int
    num_heads: int
    num_kv_heads: int
    head_dim: int
    ffn_size: int
    vocab_size: int
    ffn_mat_count: int = 2
    weight_dtype_bytes: int = 2
    activation_dtype_bytes: int = 2
    kv_dtype_bytes: int = 2
    norm_has_bias: bool = False
    tied_embeddings: bool = False

    def __post_init__(self):
        for name in ("hidden_size", "num_layers", "num_heads", "num_kv_heads",
                     "head_dim", "ffn_size", "vocab_size"):
            require(getattr(self, name) >= 1, f"{name} must be >= 1")
        require(self.ffn_mat_count in (2, 3), "ffn_mat_count must be 2 or 3")
        require(self.hidden_size == self.num_heads * self.head_dim,
                "hidden_size must equal num_heads * head_dim")
        require(self.num_heads % self.num_kv_heads == 0,
                "num_kv_heads must divide num_heads")
        for name in ("weight_dtype_bytes", "activation_dtype_bytes",
                     "kv_dtype_bytes"):
            require(getattr(self, name) in _DTYPE_WIDTHS,
                    f"{name} must be one of {_DTYPE_WIDTHS}")


@dataclass(frozen=True)
class WorkloadShape:
    """Request shape: batch, input length, output length, KV context."""

    batch: int
    input_len: int
    output_len: int = 0
    kv_len: int | None = None

    def __post_init__(self):
        require(self.batch >= 1, "batch must be >= 1")
        require(self.input_len >= 1, "input_len must be >= 1")
        require(self.output_len >= 0, "output_len must be >= 0")
        if self.kv_len is not None:
            require(self.kv_len >= self.input_len,
                    "kv_len must be >= input_len when decoding")

    def at_kv_len(self, kv_len: int) -> "WorkloadShape":
        return replace(self, kv_len=kv_len)


@dataclass(frozen=True)
class CostBreakdown:
    """Per-category FLOP and byte counts for one kernel group.

    FLOP categories follow the transformer block structure; byte
    categories separate weight reads, activation traffic, KV-cache
    traffic, and attention scratch (score/softmax materialization).
    """

    qkv_flops: int = 0
    attention_flops: int = 0
    out_flops: int = 0
    ffn_flops: int = 0
    logits_flops: int = 0
    norm_residual_flops: int = 0
    weight_bytes: int = 0
    activation_bytes: int = 0
    kv_bytes: int = 0
    scratch_bytes: int = 0

    @property
    def gemm_flops(self) -> int:
        """Matrix-op FLOPs: projections, attention, FFN, logits."""
        return (self.qkv_flops + self.attention_flops + self.out_flops
                + self.ffn_flops + self.logits_flops)

    @property
    def total_flops(self) -> int:
        return self.gemm_flops + self.norm_residual_flops

    @property
    def total_bytes(self) -> int:
        return (self.weight_bytes + self.activation_bytes + self.kv_bytes
                + self.scratch_bytes)

    def __add__(self, other: "CostBreakdown") -> "CostBreakdown":
        return CostBreakdown(
            qkv_flops=self.qkv_flops + other.qkv_flops,
            attention_flops=self.attention_flops + other.attention_flops,
            out_flops=self.out_flops + other.out_flops,
            ffn_flops=self.ffn_flops + other.ffn_flops,
            logits_flops=self.logits_flops + other.logits_flops,
            norm_residual_flops=self.norm_residual_flops + other.norm_residual_flops,
            weight_bytes=self.weight_bytes + other.weight_bytes,
            activation_bytes=self.activation_bytes + other.activation_bytes,
            kv_bytes=self.kv_bytes + other.kv_bytes,
            scratch_bytes=self.scratch_bytes + other.scratch_bytes,
        )

    def scaled(self, factor: int) -> "CostBreakdown":
        return CostBreakdown(
            qkv_flops=self.qkv_flops * factor,
            attention_flops=self.attention_flops * factor,
            out_flops=self.out_flops * factor,
            ffn_flops=self.ffn_flops * factor,
            logits_flops=self.logits_flops * factor,
            norm_residual_flops=self.norm_residual_flops * factor,
            weight_bytes=self.weight_bytes * factor,
            activation_bytes=self.activation_bytes * factor,
            kv_bytes=self.kv_bytes * factor,
            scratch_bytes=self.scratch_bytes * factor,
        )


@dataclass(frozen=True)
class DlrmSpec:
    """Embedding-pooling workload: tables, pooled lookups, row geometry."""

    num_tables: int
    rows_per_table: int
    embedding_dim: int
    pooling_factor: int
    batch: int
    dtype_bytes: int = 2

    def __post_init__(self):
        for name in ("num_tables", "rows_per_table", "embedding_dim",
                     "pooling_factor", "batch"):
            require(getattr(self, name) >= 1, f"{name} must be >= 1")
        require(self.dtype_bytes in _DTYPE_WIDTHS,
                f"dtype_bytes must be one of {_DTYPE_WIDTHS}")

    @property
    def table_bytes(self) -> int:
        """Total embedding-table footprint in bytes."""
        return (self.num_tables * self.rows_per_table * self.embedding_dim
                * self.dtype_bytes)


# ---------------------------------------------------------------------------
# parameter counts
# ---------------------------------------------------------------------------

def embedding_elements(model: ModelSpec) -> int:
    return model.vocab_size * model.hidden_size


def layer_weight_elements(model: ModelSpec) -> int:
    """Weight elements of one transformer layer (projections, FFN, norms)."""
    qkv = model.hidden_size * (
        model.hidden_size + 2 * model.num_kv_heads * model.head_dim)
    out = model.hidden_size * model.hidden_size
    ffn = model.ffn_mat_count * model.hidden_size * model.ffn_size
    norm = 2 * model.hidden_size
    if model.norm_has_bias:
        norm *= 2
    return qkv + out + ffn + norm


def param_count(model: ModelSpec) -> int:
    """Total parameter count: embeddings, layers, final norm, LM head."""
    total = embedding_elements(model)
    total += model.num_layers * layer_weight_elements(model)
    total += model.hidden_size * (2 if model.norm_has_bias else 1)
    if not model.tied_embeddings:
        total += embedding_elements(model)
    return total


def total_weight_bytes(model: ModelSpec) -> int:
    return param_count(model) * model.weight_dtype_bytes


def kv_bytes_per_token_layer(model: ModelSpec) -> int:
    """K plus V bytes for one token in one layer."""
    return 2 * model.num_kv_heads * model.head_dim * model.kv_dtype_bytes


def kv_bytes_per_sequence(model: ModelSpec, context_len: int) -> int:
    """Full-model KV-cache bytes for one sequence at a given context."""
    require(context_len >= 1, "context_len must be >= 1")
    return model.num_layers * kv_bytes_per_token_layer(model) * context_len


# ---------------------------------------------------------------------------
# per-layer costs
# ---------------------------------------------------------------------------

def _phase_dims(phase: str, shape: WorkloadShape) -> tuple[int, int]:
    """New-token count s and attention context ctx for the phase."""
    if phase == PREFILL:
        return shape.input_len, shape.input_len
    if phase == DECODE:
        require(shape.kv_len is not None,
                "decode costs need shape.kv_len (current cache length)")
        return 1, shape.kv_len
    raise ValidationError(f"phase must be one of {PHASES}, got {phase!r}")


def layer_flops(model: ModelSpec, phase: str, shape: WorkloadShape,
                norm_flops_coeff: int = 8) -> CostBreakdown:
    """Forward FLOPs of one transformer layer.

    Categories: qkv projection, attention (QK^T and score*V), output
    projection, FFN, and norm/residual vector work charged at
    norm_flops_coeff FLOPs per token-element.
    """
    s, ctx = _phase_dims(phase, shape)
    b, h = shape.batch, model.hidden_size
    kv_width = 2 * model.num_kv_heads * model.head_dim
    return CostBreakdown(
        qkv_flops=2 * b * s * h * (h + kv_width),
        attention_flops=4 * b * s * ctx * h,
        out_flops=2 * b * s * h * h,
        ffn_flops=2 * b * s * h * model.ffn_size * model.ffn_mat_count,
        norm_residual_flops=norm_flops_coeff * b * s * h,
    )


def layer_bytes(model: ModelSpec, phase: str, shape: WorkloadShape,
                attention_scratch_passes: int = 2) -> CostBreakdown:
    """Forward bytes of one transformer layer.

    Weights are read once; activations are the layer input and output
    tensors; KV traffic is the cache write (prefill) or full cache read
    (decode); attention scratch covers score-matrix materialization,
    attention_scratch_passes=0 models a fused attention kernel.
    """
    require(attention_scratch_passes >= 0,
            "attention_scratch_passes must be >= 0")
    s, ctx = _phase_dims(phase, shape)
    b, h = shape.batch, model.hidden_size
    kv_token = kv_bytes_per_token_layer(model)
    if phase == PREFILL:
        kv = kv_token * b * s
    else:
        kv = kv_token * b * ctx
    return CostBreakdown(
        weight_bytes=layer_weight_elements(model) * model.weight_dtype_bytes,
        activation_bytes=2 * b * s * h * model.activation_dtype_bytes,
        kv_bytes=kv,
        scratch_bytes=(attention_scratch_passes * b * model.num_heads * s * ctx
                       * model.activation_dtype_bytes),
    )


def layer_costs(model: ModelSpec, phase: str, shape: WorkloadShape,
                attention_scratch_passes: int = 2,
                norm_flops_coeff: int = 8) -> CostBreakdown:
    """FLOPs and bytes of one layer merged into a single breakdown."""
    return (layer_flops(model, phase, shape, norm_flops_coeff)
            + layer_bytes(model, phase, shape, attention_scratch_passes))


def logits_costs(model: ModelSpec, batch: int, positions: int) -> CostBreakdown:
    """LM-head GEMM for `positions` positions per sequence."""
    require(positions >= 1, "positions must be >= 1")
    tokens = batch * positions
    h, v = model.hidden_size, model.vocab_size
    return CostBreakdown(
        logits_flops=2 * tokens * h * v,
        weight_bytes=h * v * model.weight_dtype_bytes,
        activation_bytes=tokens * (h + v) * model.activation_dtype_bytes,
    )


# ---------------------------------------------------------------------------
# arithmetic intensity
# ---------------------------------------------------------------------------

def arithmetic_intensity(model: ModelSpec, phase: str, batch: int, length: int,
                         attention_scratch_passes: int = 2,
                         norm_flops_coeff: int = 8,
                         include_embeddings: bool = False) -> float:
    """Model-level FLOPs per byte at one grid point.

    `length` is the prompt length in prefill and the KV-cache length in
    decode. Embedding-table reads are excluded unless requested.
    """
    if phase == PREFILL:
        shape = WorkloadShape(batch=batch, input_len=length)
    else:
        shape = WorkloadShape(batch=batch, input_len=1, kv_len=length)
    per_layer = layer_costs(model, phase, shape, attention_scratch_passes,
                            norm_flops_coeff)
    total = per_layer.scaled(model.num_layers)
    flops = total.total_flops
    bytes_ = total.total_bytes
    if include_embeddings:
        s, _ = _phase_dims(phase, shape)
        bytes_ += batch * s * model.hidden_size * model.weight_dtype_bytes
    if bytes_ == 0:
        raise ValidationError("zero bytes at this grid point (malformed spec)")
    return flops / bytes_


def arithmetic_intensity_curve(model: ModelSpec, phase: str,
                               batch_grid: list[int], length_grid: list[int],
                               attention_scratch_passes: int = 2,
                               norm_flops_coeff: int = 8,
                               ) -> list[tuple[int, int, float]]:
    """Table of (batch, length, FLOPs/byte) over a Cartesian grid."""
    require(len(batch_grid) > 0, "batch_grid must be non-empty")
    require(len(length_grid) > 0, "length_grid must be non-empty")
    rows = []
    for b in batch_grid:
        for length in length_grid:
            rows.append((b, length, arithmetic_intensity(
                model, phase, b, length, attention_scratch_passes,
                norm_flops_coeff)))
    return rows


# ---------------------------------------------------------------------------
# embedding pooling
# ---------------------------------------------------------------------------

def dlrm_pooling_bytes(spec: DlrmSpec) -> int:
    """Bytes gathered for one pooled-embedding forward pass."""
    return (spec.batch * spec.num_tables * spec.pooling_factor
            * spec.embedding_dim * spec.dtype_bytes)
