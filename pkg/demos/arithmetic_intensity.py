"""Where does a dense 70B transformer sit on the roofline?

Prints arithmetic intensity (flops per byte moved) for prefill as the
prompt grows, and for decode as the batch and KV history grow, next to
the ridge point of an H100-class device. Intensity above the ridge
means the GPU is compute bound; below it, HBM bandwidth is the wall.
"""

from fabricsim import ModelSpec, arithmetic_intensity
from fabricsim.workload import DECODE, PREFILL

H100_RIDGE = 989e12 / 3350e9  # fp16 tensor peak over HBM3 bandwidth

LLAMA_70B = ModelSpec(
    hidden_size=8192,
    num_layers=80,
    num_heads=64,
    num_kv_heads=8,
    head_dim=128,
    ffn_size=28672,
    vocab_size=128256,
    ffn_mat_count=3,
)


def show(title, rows):
    print(f"\n{title}")
    print(f"{'point':>12}  {'flops/byte':>12}  regime")
    for label, ai in rows:
        regime = "compute bound" if ai >= H100_RIDGE else "memory bound"
        print(f"{label:>12}  {ai:12.1f}  {regime}")


def main():
    print(f"ridge intensity of the reference GPU: {H100_RIDGE:.1f} flops/byte")

    lengths = [512, 1024, 2048, 2720, 4096, 8192, 16384, 32768]
    show("prefill, batch 1, by prompt length",
         [(str(s), arithmetic_intensity(LLAMA_70B, PREFILL, 1, s))
          for s in lengths])

    batches = [1, 2, 4, 8, 16, 32, 64, 128]
    show("decode at kv history 4096, by batch",
         [(str(b), arithmetic_intensity(LLAMA_70B, DECODE, b, 4096))
          for b in batches])

    kv_lens = [1024, 2048, 4096, 8192, 16384, 32768]
    show("decode at batch 32, by kv history",
         [(str(kv), arithmetic_intensity(LLAMA_70B, DECODE, 32, kv))
          for kv in kv_lens])

    # the punchline: prefill passes the ridge, decode almost never does
    peak_len = max(lengths,
                   key=lambda s: arithmetic_intensity(LLAMA_70B, PREFILL, 1, s))
    print(f"\nprefill intensity peaks near {peak_len} tokens; decode stays")
    print("memory bound until the batch is large, which is exactly what")
    print("the KV-cache capacity of a single GPU makes hard to reach.")


if __name__ == "__main__":
    main()
