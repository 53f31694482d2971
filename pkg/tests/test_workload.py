"""Tests for model shapes, per-layer costs, and arithmetic intensity.

Parameter counts are checked against an independent tensor-shape
enumeration; FLOP/byte values for the small fixture are frozen by hand.
"""
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fabricsim import (
    DECODE,
    PREFILL,
    DlrmSpec,
    ModelSpec,
    ValidationError,
    WorkloadShape,
    arithmetic_intensity,
    arithmetic_intensity_curve,
    dlrm_pooling_bytes,
    kv_bytes_per_sequence,
    layer_bytes,
    layer_flops,
    param_count,
)
from fabricsim.workload import (
    kv_bytes_per_token_layer,
    layer_costs,
    layer_weight_elements,
    logits_costs,
    total_weight_bytes,
)

from _builders import dense_70b, dense_405b, tiny_model


def enumerate_param_shapes(model):
    """Oracle: explicit list of weight-tensor shapes, summed elementwise.

    Walks the architecture tensor by tensor instead of using the closed
    form, so the two can disagree if either is wrong.
    """
    shapes = []
    h = model.hidden_size
    kv_dim = model.num_kv_heads * model.head_dim
    shapes.append((model.vocab_size, h))              # input embedding
    for _ in range(model.num_layers):
        shapes.append((h, model.num_heads * model.head_dim))   # Q
        shapes.append((h, kv_dim))                             # K
        shapes.append((h, kv_dim))                             # V
        shapes.append((model.num_heads * model.head_dim, h))   # output proj
        for _ in range(model.ffn_mat_count):
            shapes.append((h, model.ffn_size))
        shapes.append((h,))                                    # attn norm
        shapes.append((h,))                                    # ffn norm
        if model.norm_has_bias:
            shapes.append((h,))
            shapes.append((h,))
    shapes.append((h,))                                        # final norm
    if model.norm_has_bias:
        shapes.append((h,))
    if not model.tied_embeddings:
        shapes.append((model.vocab_size, h))                   # LM head
    return sum(math.prod(s) for s in shapes)


# Hand-countable fixture used for the frozen FLOP/byte values below:
# h=4, 2 heads of dim 2 (no GQA), ffn 8 with 2 mats, vocab 16, 2 layers.
def example_model():
    return ModelSpec(hidden_size=4, num_layers=2, num_heads=2,
                     num_kv_heads=2, head_dim=2, ffn_size=8, vocab_size=16,
                     ffn_mat_count=2)


class TestParamCount:
    def test_tiny_matches_shape_enumeration(self):
        model = tiny_model()
        assert enumerate_param_shapes(model) == 372
        assert param_count(model) == 372

    def test_example_matches_shape_enumeration(self):
        model = example_model()
        assert param_count(model) == enumerate_param_shapes(model)

    def test_70b_total(self):
        model = dense_70b()
        count = param_count(model)
        assert count == enumerate_param_shapes(model)
        assert count == 70_553_706_496
        # published figure for this architecture class
        assert abs(count - 70.6e9) / 70.6e9 < 0.01

    def test_405b_total(self):
        model = dense_405b()
        count = param_count(model)
        assert count == enumerate_param_shapes(model)
        assert abs(count - 405e9) / 405e9 < 0.02

    def test_tied_embeddings_drop_head(self):
        base = tiny_model()
        tied = ModelSpec(**{**base.__dict__, "tied_embeddings": True})
        assert param_count(base) - param_count(tied) == 16 * 4

    def test_norm_bias_adds_vectors(self):
        base = tiny_model()
        biased = ModelSpec(**{**base.__dict__, "norm_has_bias": True})
        # one extra h-vector per norm: 2 per layer plus the final norm
        assert param_count(biased) - param_count(base) == (2 * 2 + 1) * 4
        assert param_count(biased) == enumerate_param_shapes(biased)

    @given(st.data())
    @settings(max_examples=60, deadline=None)
    def test_random_architectures_match_enumeration(self, data):
        heads = data.draw(st.integers(1, 8), label="heads")
        kv_heads = data.draw(
            st.sampled_from([d for d in range(1, heads + 1) if heads % d == 0]),
            label="kv_heads")
        head_dim = data.draw(st.integers(1, 8), label="hd")
        model = ModelSpec(
            hidden_size=heads * head_dim,
            num_layers=data.draw(st.integers(1, 6), label="layers"),
            num_heads=heads,
            num_kv_heads=kv_heads,
            head_dim=head_dim,
            ffn_size=data.draw(st.integers(1, 64), label="ffn"),
            vocab_size=data.draw(st.integers(1, 512), label="vocab"),
            ffn_mat_count=data.draw(st.sampled_from([2, 3]), label="mats"),
            norm_has_bias=data.draw(st.booleans(), label="bias"),
            tied_embeddings=data.draw(st.booleans(), label="tied"),
        )
        assert param_count(model) == enumerate_param_shapes(model)

    def test_weight_bytes_scale_with_dtype(self):
        m2 = tiny_model()
        m1 = ModelSpec(**{**m2.__dict__, "weight_dtype_bytes": 1})
        assert total_weight_bytes(m2) == 2 * total_weight_bytes(m1)
        assert total_weight_bytes(m1) == param_count(m1)


class TestModelSpecValidation:
    def test_hidden_size_must_factor(self):
        with pytest.raises(ValidationError):
            ModelSpec(hidden_size=5, num_layers=1, num_heads=2,
                      num_kv_heads=1, head_dim=2, ffn_size=4, vocab_size=8)

    def test_kv_heads_must_divide(self):
        with pytest.raises(ValidationError):
            ModelSpec(hidden_size=6, num_layers=1, num_heads=3,
                      num_kv_heads=2, head_dim=2, ffn_size=4, vocab_size=8)

    def test_dtype_widths(self):
        with pytest.raises(ValidationError):
            ModelSpec(hidden_size=4, num_layers=1, num_heads=2,
                      num_kv_heads=2, head_dim=2, ffn_size=4, vocab_size=8,
                      weight_dtype_bytes=3)

    def test_decode_needs_kv_len(self):
        with pytest.raises(ValidationError):
            layer_flops(example_model(), DECODE,
                        WorkloadShape(batch=1, input_len=1))

    def test_unknown_phase(self):
        with pytest.raises(ValidationError):
            layer_flops(example_model(), "training",
                        WorkloadShape(batch=1, input_len=1))

    def test_kv_len_below_input_rejected(self):
        with pytest.raises(ValidationError):
            WorkloadShape(batch=1, input_len=8, kv_len=4)


class TestLayerFlops:
    def test_example_prefill_categories(self):
        flops = layer_flops(example_model(), PREFILL,
                            WorkloadShape(batch=1, input_len=2))
        assert flops.qkv_flops == 192
        assert flops.attention_flops == 64
        assert flops.out_flops == 64
        assert flops.ffn_flops == 256
        assert flops.gemm_flops == 576
        # vector work is tracked apart from the GEMMs
        assert flops.norm_residual_flops == 8 * 1 * 2 * 4
        assert flops.total_flops == 576 + 64

    def test_example_decode_attention(self):
        flops = layer_flops(example_model(), DECODE,
                            WorkloadShape(batch=1, input_len=1, kv_len=8))
        assert flops.attention_flops == 4 * 1 * 1 * 8 * 4 == 128

    @pytest.mark.parametrize("batch", [2, 3, 7])
    def test_linear_in_batch(self, batch):
        model = dense_70b()
        one = layer_flops(model, PREFILL, WorkloadShape(batch=1, input_len=64))
        many = layer_flops(model, PREFILL,
                           WorkloadShape(batch=batch, input_len=64))
        assert many == one.scaled(batch)

    def test_attention_quadratic_in_prefill_length(self):
        model = dense_70b()
        f1 = layer_flops(model, PREFILL, WorkloadShape(batch=1, input_len=128))
        f2 = layer_flops(model, PREFILL, WorkloadShape(batch=1, input_len=256))
        assert f2.attention_flops == 4 * f1.attention_flops
        assert f2.qkv_flops == 2 * f1.qkv_flops
        assert f2.ffn_flops == 2 * f1.ffn_flops

    def test_decode_attention_linear_in_cache(self):
        model = dense_70b()
        shape = WorkloadShape(batch=4, input_len=1, kv_len=1000)
        f1 = layer_flops(model, DECODE, shape)
        f2 = layer_flops(model, DECODE, shape.at_kv_len(3000))
        assert f2.attention_flops == 3 * f1.attention_flops
        assert f2.qkv_flops == f1.qkv_flops

    def test_gqa_shrinks_only_qkv(self):
        mha = dense_70b()
        gqa = ModelSpec(**{**mha.__dict__, "num_kv_heads": 64})
        shape = WorkloadShape(batch=1, input_len=32)
        a = layer_flops(mha, PREFILL, shape)
        b = layer_flops(gqa, PREFILL, shape)
        assert a.qkv_flops < b.qkv_flops
        assert a.attention_flops == b.attention_flops
        assert a.ffn_flops == b.ffn_flops

    def test_norm_coefficient_scales_vector_term(self):
        model = example_model()
        shape = WorkloadShape(batch=1, input_len=2)
        base = layer_flops(model, PREFILL, shape, norm_flops_coeff=8)
        doubled = layer_flops(model, PREFILL, shape, norm_flops_coeff=16)
        assert doubled.norm_residual_flops == 2 * base.norm_residual_flops
        assert doubled.gemm_flops == base.gemm_flops


class TestLayerBytes:
    def test_example_kv_cache_bytes(self):
        model = example_model()
        assert kv_bytes_per_token_layer(model) == 2 * 2 * 2 * 2
        assert kv_bytes_per_sequence(model, 8) == 256

    def test_prefill_writes_new_tokens_only(self):
        model = example_model()
        b = layer_bytes(model, PREFILL, WorkloadShape(batch=3, input_len=5))
        assert b.kv_bytes == kv_bytes_per_token_layer(model) * 3 * 5

    def test_decode_reads_whole_cache(self):
        model = example_model()
        b = layer_bytes(model, DECODE,
                        WorkloadShape(batch=3, input_len=1, kv_len=40))
        assert b.kv_bytes == kv_bytes_per_token_layer(model) * 3 * 40

    def test_weight_bytes_are_one_layer(self):
        model = example_model()
        b = layer_bytes(model, PREFILL, WorkloadShape(batch=1, input_len=1))
        assert b.weight_bytes == layer_weight_elements(model) * 2

    def test_activation_bytes(self):
        model = example_model()
        b = layer_bytes(model, PREFILL, WorkloadShape(batch=2, input_len=3))
        # input plus output tensor, 2 bytes per element
        assert b.activation_bytes == 2 * 2 * 3 * 4 * 2

    def test_fused_attention_drops_scratch(self):
        model = dense_70b()
        shape = WorkloadShape(batch=2, input_len=128)
        fused = layer_bytes(model, PREFILL, shape, attention_scratch_passes=0)
        mat = layer_bytes(model, PREFILL, shape, attention_scratch_passes=2)
        assert fused.scratch_bytes == 0
        assert mat.scratch_bytes == 2 * 2 * 64 * 128 * 128 * 2

    def test_layer_costs_merges_flops_and_bytes(self):
        model = example_model()
        shape = WorkloadShape(batch=1, input_len=2)
        merged = layer_costs(model, PREFILL, shape)
        assert merged.gemm_flops == 576
        assert merged.total_bytes == layer_bytes(model, PREFILL,
                                                 shape).total_bytes


class TestLogits:
    def test_flops_and_bytes(self):
        model = example_model()
        c = logits_costs(model, batch=3, positions=2)
        assert c.logits_flops == 2 * 6 * 4 * 16
        assert c.weight_bytes == 4 * 16 * 2
        assert c.activation_bytes == 6 * (4 + 16) * 2
        assert c.gemm_flops == c.logits_flops

    def test_positions_must_be_positive(self):
        with pytest.raises(ValidationError):
            logits_costs(example_model(), batch=1, positions=0)


class TestArithmeticIntensity:
    def test_prefill_unimodal_over_length(self):
        model = dense_70b()
        lengths = [512, 1024, 2048, 2720, 4096, 8192, 16384, 32768]
        ai = [arithmetic_intensity(model, PREFILL, 1, s) for s in lengths]
        peak = ai.index(max(ai))
        assert lengths[peak] == 2720
        assert all(x < y for x, y in zip(ai[:peak], ai[1:peak + 1]))
        assert all(x > y for x, y in zip(ai[peak:], ai[peak + 1:]))

    def test_decode_grows_with_batch(self):
        model = dense_70b()
        ai = [arithmetic_intensity(model, DECODE, b, 4096)
              for b in (1, 8, 16, 32, 64, 128)]
        assert all(x < y for x, y in zip(ai, ai[1:]))

    def test_decode_shrinks_with_cache_length(self):
        model = dense_70b()
        ai = [arithmetic_intensity(model, DECODE, 32, kv)
              for kv in (1024, 2048, 4096, 8192, 16384, 32768)]
        assert all(x > y for x, y in zip(ai, ai[1:]))

    def test_matches_cost_ratio(self):
        model = dense_70b()
        shape = WorkloadShape(batch=4, input_len=512)
        costs = layer_costs(model, PREFILL, shape).scaled(model.num_layers)
        expected = costs.total_flops / costs.total_bytes
        assert arithmetic_intensity(model, PREFILL, 4, 512) == pytest.approx(
            expected, rel=1e-12)

    def test_embedding_reads_lower_intensity(self):
        model = dense_70b()
        without = arithmetic_intensity(model, PREFILL, 1, 512)
        with_emb = arithmetic_intensity(model, PREFILL, 1, 512,
                                        include_embeddings=True)
        assert with_emb < without

    def test_curve_covers_grid(self):
        rows = arithmetic_intensity_curve(dense_70b(), DECODE,
                                          [16, 32], [1024, 2048, 4096])
        assert len(rows) == 6
        assert rows[0][:2] == (16, 1024)
        assert all(ai > 0 for _, _, ai in rows)

    def test_empty_grid_rejected(self):
        with pytest.raises(ValidationError):
            arithmetic_intensity_curve(dense_70b(), DECODE, [], [128])


class TestDlrm:
    def test_pooling_bytes_example(self):
        spec = DlrmSpec(num_tables=64, rows_per_table=1_000_000,
                        embedding_dim=32, pooling_factor=32, batch=128,
                        dtype_bytes=2)
        assert dlrm_pooling_bytes(spec) == 128 * 64 * 32 * 32 * 2
        assert dlrm_pooling_bytes(spec) == 16_777_216

    def test_table_bytes(self):
        spec = DlrmSpec(num_tables=4, rows_per_table=10, embedding_dim=8,
                        pooling_factor=2, batch=1, dtype_bytes=4)
        assert spec.table_bytes == 4 * 10 * 8 * 4

    def test_validation(self):
        with pytest.raises(ValidationError):
            DlrmSpec(num_tables=0, rows_per_table=1, embedding_dim=1,
                     pooling_factor=1, batch=1)
