"""Embedding-table placement and pooled-lookup timing.

Compares row-sharded tables gathered over a device interconnect against
tables resident in a shared memory fabric where every lookup runs at
fabric bandwidth with a single access latency.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ValidationError, require
from .system import FABRIC_SHARED, SystemSpec, blended_bandwidth
from .workload import DlrmSpec, dlrm_pooling_bytes

DISTRIBUTED = "distributed"
SHARED_FABRIC = "shared_fabric"
PLACEMENT_MODES = (DISTRIBUTED, SHARED_FABRIC)

NVLINK_BANDWIDTH = 900e9
PCIE_BANDWIDTH = 64e9
NVLINK_LATENCY = 2e-6
PCIE_LATENCY = 5e-6


@dataclass(frozen=True)
class DlrmPlacement:
    """Where the tables live and what gathers cross."""

    mode: str
    device_count: int = 1
    interconnect: str = "nvlink"
    interconnect_bandwidth: float = NVLINK_BANDWIDTH
    per_message_latency: float = NVLINK_LATENCY

    def __post_init__(self):
        require(self.mode in PLACEMENT_MODES,
                f"mode must be one of {PLACEMENT_MODES}")
        require(self.device_count >= 1, "device_count must be >= 1")
        require(self.interconnect_bandwidth > 0,
                "interconnect_bandwidth must be > 0")
        require(self.per_message_latency >= 0,
                "per_message_latency must be >= 0")

    @classmethod
    def nvlink(cls, device_count: int) -> "DlrmPlacement":
        return cls(mode=DISTRIBUTED, device_count=device_count,
                   interconnect="nvlink",
                   interconnect_bandwidth=NVLINK_BANDWIDTH,
                   per_message_latency=NVLINK_LATENCY)

    @classmethod
    def pcie(cls, device_count: int) -> "DlrmPlacement":
        return cls(mode=DISTRIBUTED, device_count=device_count,
                   interconnect="pcie",
                   interconnect_bandwidth=PCIE_BANDWIDTH,
                   per_message_latency=PCIE_LATENCY)

    @classmethod
    def shared_fabric(cls) -> "DlrmPlacement":
        return cls(mode=SHARED_FABRIC, device_count=1)


def _next_power_of_two(n: int) -> int:
    return 1 << (n - 1).bit_length()


def required_devices(spec: DlrmSpec, per_device_capacity: float,
                     pad_to_power_of_two: bool = True) -> int:
    """Devices needed to hold the tables, padded for 2^k row sharding."""
    require(per_device_capacity > 0, "per_device_capacity must be > 0")
    raw = -(-spec.table_bytes // int(per_device_capacity))
    devices = max(1, int(raw))
    if pad_to_power_of_two:
        devices = _next_power_of_two(devices)
    return devices


@dataclass(frozen=True)
class PoolingResult:
    seconds: float
    speedup: float | None = None


def pooling_time(spec: DlrmSpec, placement: DlrmPlacement, system: SystemSpec,
                 coalescing_factor: int = 1,
                 reference: float | None = None) -> PoolingResult:
    """Forward pooled-lookup time for one batch.

    Row-sharded tables read the local 1/N of the bytes at device memory
    bandwidth and gather the rest over the interconnect, paying one
    message latency per remote (table, sample) gather, divided by the
    coalescing factor. Shared-fabric placement streams all bytes at
    fabric bandwidth with a single access latency. When `reference` (a
    baseline time) is given, the result carries reference/seconds.
    """
    require(coalescing_factor >= 1, "coalescing_factor must be >= 1")
    volume = dlrm_pooling_bytes(spec)

    if placement.mode == SHARED_FABRIC:
        tier = system.tier(FABRIC_SHARED)
        if tier is None:
            raise ValidationError(
                "shared_fabric placement needs a fabric-shared tier")
        seconds = volume / blended_bandwidth(system, tier) + tier.fixed_latency
    else:
        n = placement.device_count
        local_bw = system.serving_tier.bandwidth
        remote_fraction = 1.0 - 1.0 / n
        local = (volume / n) / local_bw
        remote = remote_fraction * volume / placement.interconnect_bandwidth
        messages = (spec.batch * spec.num_tables * remote_fraction
                    / coalescing_factor)
        seconds = local + remote + messages * placement.per_message_latency

    speedup = None if reference is None else reference / seconds
    return PoolingResult(seconds=seconds, speedup=speedup)
