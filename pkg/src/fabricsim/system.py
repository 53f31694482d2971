"""Hardware description and roofline timing.

Processors carry per-dtype peak matrix FLOP/s plus a vector-op peak;
memory tiers carry capacity, bandwidth, a fixed per-transfer latency,
and (for shared fabric tiers) a cache hit rate that blends fabric and
host bandwidth. Efficiency curves map transfer or GEMM size to a
utilization fraction, log-linearly interpolated between calibration
knots.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

from .errors import ValidationError, require

LOCAL_HBM = "local-hbm"
FABRIC_SHARED = "fabric-shared"
HOST_DDR = "host-ddr"
TIER_ROLES = (LOCAL_HBM, FABRIC_SHARED, HOST_DDR)


@dataclass(frozen=True)
class EfficiencyCurve:
    """Size -> utilization lookup with log-linear interpolation.

    Sizes below the first knot clamp to the first utilization and sizes
    above the last knot clamp to the last; `floor` is a lower bound on
    the returned utilization.
    """

    points: tuple[tuple[float, float], ...]
    floor: float = 0.0

    def __post_init__(self):
        require(len(self.points) >= 1, "curve needs at least one knot")
        last_size = 0.0
        for size, util in self.points:
            require(size > last_size, "knot sizes must be ascending and > 0")
            require(0.0 < util <= 1.0, "utilization must be in (0, 1]")
            last_size = size
        require(0.0 <= self.floor <= 1.0, "floor must be in [0, 1]")

    @classmethod
    def identity(cls) -> "EfficiencyCurve":
        return cls(points=((1.0, 1.0),))

    @classmethod
    def from_csv(cls, path: str, floor: float = 0.0) -> "EfficiencyCurve":
        """Load knots from a two-column CSV: size, utilization.

        A header row is required; sizes must be ascending integers.
        """
        points = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
        require(len(rows) >= 2, f"{path}: need a header row plus knots")
        for row in rows[1:]:
            if not row or all(not cell.strip() for cell in row):
                continue
            require(len(row) >= 2, f"{path}: rows need size and utilization")
            try:
                size = int(row[0])
                util = float(row[1])
            except ValueError as exc:
                raise ValidationError(f"{path}: bad knot row {row!r}") from exc
            points.append((float(size), util))
        return cls(points=tuple(points), floor=floor)

    def __call__(self, size: float) -> float:
        pts = self.points
        if size <= pts[0][0]:
            util = pts[0][1]
        elif size >= pts[-1][0]:
            util = pts[-1][1]
        else:
            util = pts[-1][1]
            for (s0, u0), (s1, u1) in zip(pts, pts[1:]):
                if size <= s1:
                    frac = math.log(size / s0) / math.log(s1 / s0)
                    util = u0 + (u1 - u0) * frac
                    break
        return max(util, self.floor)


@dataclass(frozen=True)
class MemoryTier:
    """One addressable memory level: role, capacity (B), bandwidth (B/s)."""

    role: str
    capacity: float
    bandwidth: float
    fixed_latency: float = 0.0
    cache_hit_rate: float = 1.0

    def __post_init__(self):
        require(self.role in TIER_ROLES, f"role must be one of {TIER_ROLES}")
        require(self.capacity > 0, "capacity must be > 0")
        require(self.bandwidth > 0, "bandwidth must be > 0")
        require(self.fixed_latency >= 0, "fixed_latency must be >= 0")
        require(0.0 <= self.cache_hit_rate <= 1.0,
                "cache_hit_rate must be in [0, 1]")


@dataclass(frozen=True)
class ProcessorSpec:
    """Peak rates of one processor and how many the system has."""

    peak_matrix_flops: dict[str, float]
    peak_vector_flops: float
    count: int = 1

    def __post_init__(self):
        require(len(self.peak_matrix_flops) > 0,
                "peak_matrix_flops needs at least one dtype entry")
        for dtype, peak in self.peak_matrix_flops.items():
            require(peak > 0, f"peak_matrix_flops[{dtype!r}] must be > 0")
        require(self.peak_vector_flops > 0, "peak_vector_flops must be > 0")
        require(self.count >= 1, "count must be >= 1")

    def matrix_peak(self, dtype: str) -> float:
        if dtype not in self.peak_matrix_flops:
            known = sorted(self.peak_matrix_flops)
            raise ValidationError(
                f"unknown compute dtype {dtype!r}; processor defines {known}")
        return self.peak_matrix_flops[dtype]


@dataclass(frozen=True)
class NetworkSpec:
    """Scale-up interconnect: per-link bandwidth, message latency, topology."""

    link_bandwidth: float
    per_message_latency: float = 0.0
    gpus_per_tray: int = 8
    trays_per_rack: int = 1
    racks: int = 1

    def __post_init__(self):
        require(self.link_bandwidth > 0, "link_bandwidth must be > 0")
        require(self.per_message_latency >= 0,
                "per_message_latency must be >= 0")
        for name in ("gpus_per_tray", "trays_per_rack", "racks"):
            require(getattr(self, name) >= 1, f"{name} must be >= 1")

    @property
    def device_count(self) -> int:
        return self.gpus_per_tray * self.trays_per_rack * self.racks


@dataclass(frozen=True)
class SystemSpec:
    """A processor pool, its memory tiers, and an optional network."""

    processor: ProcessorSpec
    memory_tiers: tuple[MemoryTier, ...]
    network: NetworkSpec | None = None
    bandwidth_curve: EfficiencyCurve = field(
        default_factory=EfficiencyCurve.identity)
    flops_curve: EfficiencyCurve = field(
        default_factory=EfficiencyCurve.identity)
    name: str = "system"

    def __post_init__(self):
        require(len(self.memory_tiers) >= 1, "need at least one memory tier")
        seen = set()
        for tier in self.memory_tiers:
            require(tier.role not in seen,
                    f"duplicate memory tier role {tier.role!r}")
            seen.add(tier.role)
        require(LOCAL_HBM in seen or FABRIC_SHARED in seen,
                "need a local-hbm or fabric-shared tier to serve compute")
        if self.network is not None:
            require(self.network.device_count == self.processor.count,
                    "network topology device count must equal processor count")

    def tier(self, role: str) -> MemoryTier | None:
        for tier in self.memory_tiers:
            if tier.role == role:
                return tier
        return None

    @property
    def serving_tier(self) -> MemoryTier:
        """Tier that feeds compute: local HBM if present, else the fabric."""
        tier = self.tier(LOCAL_HBM) or self.tier(FABRIC_SHARED)
        assert tier is not None  # guaranteed by __post_init__
        return tier

    @property
    def overflow_tier(self) -> MemoryTier | None:
        """Destination for capacity overflow: fabric first, then host."""
        if self.serving_tier.role == FABRIC_SHARED:
            return self.tier(HOST_DDR)
        return self.tier(FABRIC_SHARED) or self.tier(HOST_DDR)

    @property
    def device_count(self) -> int:
        return self.processor.count


# ---------------------------------------------------------------------------
# effective rates and roofline
# ---------------------------------------------------------------------------

def blended_bandwidth(system: SystemSpec, tier: MemoryTier) -> float:
    """Raw tier bandwidth with fabric cache-hit blending applied."""
    if tier.role == FABRIC_SHARED and tier.cache_hit_rate < 1.0:
        backing = system.tier(HOST_DDR)
        if backing is None:
            raise ValidationError(
                "fabric tier with cache_hit_rate < 1 needs a host-ddr tier")
        hit = tier.cache_hit_rate
        return hit * tier.bandwidth + (1.0 - hit) * backing.bandwidth
    return tier.bandwidth


def effective_bandwidth(system: SystemSpec, tier: MemoryTier,
                        transfer_bytes: float) -> float:
    """Tier bandwidth derated by the calibration curve at this size."""
    require(transfer_bytes > 0, "transfer_bytes must be > 0")
    return blended_bandwidth(system, tier) * system.bandwidth_curve(transfer_bytes)


def effective_flops(system: SystemSpec, dtype: str, gemm_flops: float) -> float:
    """Per-processor matrix rate derated by the GEMM-size curve."""
    require(gemm_flops > 0, "gemm_flops must be > 0")
    return system.processor.matrix_peak(dtype) * system.flops_curve(gemm_flops)


def roofline_time(flops: float, bytes_: float, dtype: str, system: SystemSpec,
                  tier: MemoryTier | None = None,
                  use_vector_peak: bool = False) -> float:
    """max(compute, memory) time plus the tier's fixed latency.

    Vector kernels (norms, residuals) use the processor's vector peak
    without GEMM-size derating.
    """
    require(flops >= 0, "flops must be >= 0")
    require(bytes_ >= 0, "bytes must be >= 0")
    if flops == 0 and bytes_ == 0:
        raise ValidationError("roofline_time needs nonzero flops or bytes")
    tier = tier if tier is not None else system.serving_tier
    compute = 0.0
    if flops > 0:
        if use_vector_peak:
            rate = system.processor.peak_vector_flops
        else:
            rate = effective_flops(system, dtype, flops)
        compute = flops / rate
    memory = 0.0
    if bytes_ > 0:
        memory = bytes_ / effective_bandwidth(system, tier, bytes_)
    return max(compute, memory) + tier.fixed_latency


def ridge_intensity(system: SystemSpec, dtype: str,
                    tier: MemoryTier | None = None,
                    gemm_flops: float = float("inf"),
                    transfer_bytes: float = float("inf")) -> float:
    """FLOPs/byte at which compute time equals memory time.

    Defaults evaluate both curves at their upper clamp, which with
    identity curves is simply peak FLOP/s over tier bandwidth.
    """
    tier = tier if tier is not None else system.serving_tier
    return (effective_flops(system, dtype, gemm_flops)
            / effective_bandwidth(system, tier, transfer_bytes))
