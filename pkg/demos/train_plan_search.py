"""Pick a training layout for 70B on 64 GPUs, then price its traffic.

search_plan walks every (tp, pp, dp, microbatch) factorization of the
device budget and keeps the highest-MFU plan that fits in memory. The
step's traffic ledger then gets priced two ways: electrical switching
at every hop, and photonic links end to end.
"""

from fabricsim import (
    EnergyParams,
    MemoryTier,
    ModelSpec,
    NetworkSpec,
    ProcessorSpec,
    ScenarioMix,
    SystemSpec,
    workload_energy,
)
from fabricsim.training import SearchConstraints, search_plan

MODEL_70B = ModelSpec(
    hidden_size=8192, num_layers=80, num_heads=64, num_kv_heads=8,
    head_dim=128, ffn_size=28672, vocab_size=128256, ffn_mat_count=3)

CLUSTER = SystemSpec(
    processor=ProcessorSpec(
        peak_matrix_flops={"bf16": 989e12, "fp16": 989e12},
        peak_vector_flops=60e12, count=64),
    memory_tiers=(
        MemoryTier(role="local-hbm", capacity=80e9, bandwidth=3350e9),
        MemoryTier(role="host-ddr", capacity=200e9, bandwidth=64e9,
                   fixed_latency=5e-6),
    ),
    network=NetworkSpec(link_bandwidth=900e9, per_message_latency=5e-6,
                        gpus_per_tray=8, trays_per_rack=1, racks=8),
    name="h100-cluster-64")


def main():
    constraints = SearchConstraints(global_batch=128, seq_len=4096,
                                    compute_dtype="bf16",
                                    recompute_activations=True)
    plan, result = search_plan(MODEL_70B, CLUSTER, 64, constraints)

    print("best layout on 64 devices, global batch 128, sequence 4096:")
    print(f"  tp={plan.tp} pp={plan.pp} dp={plan.dp} "
          f"microbatch={plan.microbatch} x{plan.num_microbatches}")
    print(f"  step time       {result.step_time:8.2f} s")
    print(f"  mfu             {result.mfu:8.3f}")
    print(f"  bubble fraction {result.bubble_fraction:8.3f}")
    mem = result.memory
    gib = 1 / 2**30
    print(f"  memory/device   params {mem.params * gib:.1f} GiB, "
          f"grads {mem.gradients * gib:.1f} GiB,")
    print(f"                  optimizer {mem.optimizer_states * gib:.1f} GiB, "
          f"activations {mem.activations * gib:.1f} GiB")
    if result.offload_bytes_per_step:
        print(f"  offload/step    {result.offload_bytes_per_step * gib:.1f} "
              "GiB over the host link")

    print("\ndata movement per step, priced per technology")
    rows = workload_energy(result.ledger, ScenarioMix.default(),
                           EnergyParams(), EnergyParams())
    print(f"{'class':>18} {'bits':>12} {'elec J':>10} {'photonic J':>11} "
          f"{'saved':>7}")
    for row in rows:
        if row.bits == 0:
            continue
        print(f"{row.traffic_class:>18} {row.bits:>12.3e} "
              f"{row.baseline_joules:>10.2f} {row.photonic_joules:>11.2f} "
              f"{row.savings_fraction:>6.1%}")
    total_e = sum(r.baseline_joules for r in rows)
    total_p = sum(r.photonic_joules for r in rows)
    print(f"{'total':>18} {'':>12} {total_e:>10.2f} {total_p:>11.2f} "
          f"{1 - total_p / total_e:>6.1%}")


if __name__ == "__main__":
    main()
