"""Roofline timing under flat and calibrated efficiency curves.

A kernel's time is max(flops / achievable_flops, bytes / achievable_bw)
plus the tier's fixed latency. Achievable rates come from size-dependent
efficiency curves; this script compares the flat (identity) curves with
the calibration knots shipped in fixtures/calibration/.
"""

import os

from fabricsim import (
    EfficiencyCurve,
    MemoryTier,
    ProcessorSpec,
    SystemSpec,
    ridge_intensity,
    roofline_time,
)

CAL = os.path.join(os.path.dirname(__file__), "..", "fixtures", "calibration")


def h100(flops_curve, bandwidth_curve):
    return SystemSpec(
        processor=ProcessorSpec(
            peak_matrix_flops={"fp16": 989e12, "fp8": 1979e12},
            peak_vector_flops=60e12,
            count=1,
        ),
        memory_tiers=(
            MemoryTier(role="local-hbm", capacity=80e9, bandwidth=3350e9),
        ),
        flops_curve=flops_curve,
        bandwidth_curve=bandwidth_curve,
        name="h100",
    )


def main():
    flat = h100(EfficiencyCurve.identity(), EfficiencyCurve.identity())
    calibrated = h100(
        EfficiencyCurve.from_csv(os.path.join(CAL, "gemm_efficiency.csv")),
        EfficiencyCurve.from_csv(os.path.join(CAL, "hbm_efficiency.csv")),
    )

    print("kernel sweep, fp16 (flops, bytes) -> seconds")
    print(f"{'flops':>10} {'bytes':>10} {'flat':>12} {'calibrated':>12} "
          f"{'slowdown':>9}")
    kernels = [
        (1e9, 1e6),     # small GEMM, latency floor territory
        (1e11, 1e8),    # medium
        (1e13, 1e9),    # large, compute bound
        (1e10, 1e10),   # bandwidth bound
    ]
    for flops, data in kernels:
        t0 = roofline_time(flops, data, "fp16", flat)
        t1 = roofline_time(flops, data, "fp16", calibrated)
        print(f"{flops:10.0e} {data:10.0e} {t0:12.3e} {t1:12.3e} "
              f"{t1 / t0:8.2f}x")

    print("\nridge intensity (flops/byte at the compute/memory boundary)")
    for name, system in (("flat", flat), ("calibrated", calibrated)):
        for dtype in ("fp16", "fp8"):
            print(f"  {name:>10} {dtype}: {ridge_intensity(system, dtype):8.1f}")
    print("\nderating flops more than bandwidth moves the ridge left:")
    print("smaller kernels fall out of the compute-bound region sooner.")


if __name__ == "__main__":
    main()
