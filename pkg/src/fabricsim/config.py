"""Run-config parsing: JSON files into simulator objects.

One self-contained config file describes a run; calibration curves are
referenced as CSV paths relative to the config file. Unknown keys are
rejected so typos fail loudly. The full schema is documented in
docs/config-schema.md.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Any

from .dlrm import (
    DISTRIBUTED,
    NVLINK_BANDWIDTH,
    NVLINK_LATENCY,
    PCIE_BANDWIDTH,
    PCIE_LATENCY,
    SHARED_FABRIC,
    DlrmPlacement,
)
from .energy import EnergyParams, ScenarioMix
from .errors import ConfigError
from .parallel import ParallelismPlan
from .system import (
    EfficiencyCurve,
    MemoryTier,
    NetworkSpec,
    ProcessorSpec,
    SystemSpec,
)
from .workload import DlrmSpec, ModelSpec, WorkloadShape

MODES = ("infer", "train", "power", "dlrm", "validate", "sweep")


@dataclass(frozen=True)
class RunConfig:
    """Parsed config: the mode, the raw dict, and its directory."""

    mode: str
    raw: dict
    base_dir: str


def _check_keys(section: dict, allowed: set[str], context: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(
            f"{context}: unknown keys {sorted(unknown)}; "
            f"allowed keys are {sorted(allowed)}")


def _require_keys(section: dict, needed: set[str], context: str) -> None:
    missing = needed - set(section)
    if missing:
        raise ConfigError(f"{context}: missing required keys {sorted(missing)}")


def build_model(section: dict) -> ModelSpec:
    allowed = {
        "hidden_size", "num_layers", "num_heads", "num_kv_heads", "head_dim",
        "ffn_size", "vocab_size", "ffn_mat_count", "weight_dtype_bytes",
        "activation_dtype_bytes", "kv_dtype_bytes", "norm_has_bias",
        "tied_embeddings",
    }
    _check_keys(section, allowed, "model")
    _require_keys(section, {"hidden_size", "num_layers", "num_heads",
                            "num_kv_heads", "head_dim", "ffn_size",
                            "vocab_size"}, "model")
    return ModelSpec(**section)


def build_curve(value: Any, base_dir: str, context: str) -> EfficiencyCurve:
    if value is None or value == "identity":
        return EfficiencyCurve.identity()
    if isinstance(value, str):
        return EfficiencyCurve.from_csv(os.path.join(base_dir, value))
    if isinstance(value, list):
        return EfficiencyCurve(points=tuple((float(s), float(u))
                                            for s, u in value))
    if isinstance(value, dict):
        _check_keys(value, {"csv", "points", "floor"}, context)
        floor = float(value.get("floor", 0.0))
        if "csv" in value:
            return EfficiencyCurve.from_csv(
                os.path.join(base_dir, value["csv"]), floor=floor)
        return EfficiencyCurve(points=tuple((float(s), float(u))
                                            for s, u in value["points"]),
                               floor=floor)
    raise ConfigError(f"{context}: cannot interpret curve {value!r}")


def build_system(section: dict, base_dir: str, name: str = "system") -> SystemSpec:
    allowed = {"name", "processor", "memory_tiers", "network",
               "bandwidth_curve", "flops_curve"}
    _check_keys(section, allowed, "system")
    _require_keys(section, {"processor", "memory_tiers"}, "system")

    proc = dict(section["processor"])
    _check_keys(proc, {"peak_matrix_flops", "peak_vector_flops", "count"},
                "system.processor")
    processor = ProcessorSpec(
        peak_matrix_flops={k: float(v)
                           for k, v in proc["peak_matrix_flops"].items()},
        peak_vector_flops=float(proc["peak_vector_flops"]),
        count=int(proc.get("count", 1)),
    )

    tiers = []
    for i, tier in enumerate(section["memory_tiers"]):
        _check_keys(tier, {"role", "capacity", "bandwidth", "fixed_latency",
                           "cache_hit_rate"}, f"system.memory_tiers[{i}]")
        tiers.append(MemoryTier(
            role=tier["role"],
            capacity=float(tier["capacity"]),
            bandwidth=float(tier["bandwidth"]),
            fixed_latency=float(tier.get("fixed_latency", 0.0)),
            cache_hit_rate=float(tier.get("cache_hit_rate", 1.0)),
        ))

    network = None
    if section.get("network") is not None:
        net = dict(section["network"])
        _check_keys(net, {"link_bandwidth", "per_message_latency",
                          "gpus_per_tray", "trays_per_rack", "racks"},
                    "system.network")
        network = NetworkSpec(
            link_bandwidth=float(net["link_bandwidth"]),
            per_message_latency=float(net.get("per_message_latency", 0.0)),
            gpus_per_tray=int(net.get("gpus_per_tray", 8)),
            trays_per_rack=int(net.get("trays_per_rack", 1)),
            racks=int(net.get("racks", 1)),
        )

    return SystemSpec(
        processor=processor,
        memory_tiers=tuple(tiers),
        network=network,
        bandwidth_curve=build_curve(section.get("bandwidth_curve"), base_dir,
                                    "system.bandwidth_curve"),
        flops_curve=build_curve(section.get("flops_curve"), base_dir,
                                "system.flops_curve"),
        name=section.get("name", name),
    )


def build_plan(section: dict) -> ParallelismPlan:
    allowed = {"tp", "pp", "dp", "microbatch", "num_microbatches",
               "sequence_parallel", "dp_overlap"}
    _check_keys(section, allowed, "plan")
    return ParallelismPlan(**section)


def build_shape(section: dict) -> tuple[WorkloadShape, bool]:
    """Returns the shape and whether batch was requested as "max"."""
    allowed = {"batch", "input_len", "output_len", "kv_len"}
    _check_keys(section, allowed, "workload")
    _require_keys(section, {"batch", "input_len"}, "workload")
    batch = section["batch"]
    batch_is_max = batch == "max"
    shape = WorkloadShape(
        batch=1 if batch_is_max else int(batch),
        input_len=int(section["input_len"]),
        output_len=int(section.get("output_len", 0)),
        kv_len=section.get("kv_len"),
    )
    return shape, batch_is_max


def build_energy_params(section: dict | None) -> EnergyParams:
    if not section:
        return EnergyParams()
    allowed = {"adapter", "switch", "nvlink_intra_tray",
               "photonic_transceiver", "photonic_switch",
               "photonic_intra_tray"}
    _check_keys(section, allowed, "energy params")
    return EnergyParams(**{k: float(v) for k, v in section.items()})


def build_scenario_mix(section: dict | None) -> ScenarioMix:
    if not section:
        return ScenarioMix.default()
    return ScenarioMix(weights={
        cls: {scenario: float(w) for scenario, w in mix.items()}
        for cls, mix in section.items()})


def build_dlrm_spec(section: dict) -> DlrmSpec:
    allowed = {"num_tables", "rows_per_table", "embedding_dim",
               "pooling_factor", "batch", "dtype_bytes"}
    _check_keys(section, allowed, "dlrm.spec")
    return DlrmSpec(**section)


def build_placement(section: dict, device_count: int) -> DlrmPlacement:
    allowed = {"mode", "interconnect", "device_count", "bandwidth",
               "per_message_latency"}
    _check_keys(section, allowed, "dlrm placement")
    mode = section.get("mode", DISTRIBUTED)
    if mode == SHARED_FABRIC:
        return DlrmPlacement.shared_fabric()
    kind = section.get("interconnect", "nvlink")
    defaults = {
        "nvlink": (NVLINK_BANDWIDTH, NVLINK_LATENCY),
        "pcie": (PCIE_BANDWIDTH, PCIE_LATENCY),
    }
    bw, lat = defaults.get(kind, (None, None))
    if "bandwidth" in section:
        bw = float(section["bandwidth"])
    if "per_message_latency" in section:
        lat = float(section["per_message_latency"])
    if bw is None or lat is None:
        raise ConfigError(
            f"dlrm placement with interconnect {kind!r} needs explicit "
            "bandwidth and per_message_latency")
    return DlrmPlacement(mode=DISTRIBUTED, device_count=device_count,
                         interconnect=kind, interconnect_bandwidth=bw,
                         per_message_latency=lat)


# ---------------------------------------------------------------------------
# file parsing and overrides
# ---------------------------------------------------------------------------

def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply KEY=VALUE overrides with dotted paths into nested dicts."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not KEY=VALUE")
        path, _, text = item.partition("=")
        keys = path.split(".")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = raw
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(
                    f"override {item!r}: {key!r} is not a section")
        node[keys[-1]] = value
    return raw


def parse_config(path: str, overrides: list[str] | None = None,
                 mode: str | None = None) -> RunConfig:
    """Load, override, and minimally validate one run config."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")

    raw = apply_overrides(raw, overrides or [])
    cfg_mode = mode or raw.get("mode")
    if cfg_mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {cfg_mode!r}")
    if raw.get("mode") is not None and mode is not None and raw["mode"] != mode:
        raise ConfigError(
            f"config declares mode {raw['mode']!r} but was invoked as {mode!r}")
    return RunConfig(mode=cfg_mode, raw=raw,
                     base_dir=os.path.dirname(os.path.abspath(path)))


# ---------------------------------------------------------------------------
# sweep expansion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    config_id: str
    section_index: int
    batch: int | str
    input_len: int
    output_len: int


def expand_sweep(raw: dict) -> list[SweepPoint]:
    """Flatten sweep sections into the full list of grid points."""
    sweep = raw.get("sweep")
    if not sweep or "sections" not in sweep:
        raise ConfigError("sweep mode needs a sweep.sections list")
    points = []
    for index, section in enumerate(sweep["sections"]):
        _check_keys(section, {"id", "system", "plan", "batch", "input_len",
                              "output_len", "compute_dtype"},
                    f"sweep.sections[{index}]")
        _require_keys(section, {"id", "batch", "input_len", "output_len"},
                      f"sweep.sections[{index}]")
        prefix = section["id"]
        for batch in section["batch"]:
            for input_len in section["input_len"]:
                for output_len in section["output_len"]:
                    points.append(SweepPoint(
                        config_id=(f"{prefix}/b{batch}/i{input_len}"
                                   f"/o{output_len}"),
                        section_index=index,
                        batch=batch,
                        input_len=int(input_len),
                        output_len=int(output_len),
                    ))
    if not points:
        raise ConfigError("sweep expanded to zero grid points")
    ids = [p.config_id for p in points]
    if len(set(ids)) != len(ids):
        raise ConfigError("sweep grid points have duplicate config ids")
    return points
