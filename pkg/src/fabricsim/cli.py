"""Command-line front end.

Subcommands: infer, train, power, dlrm, validate, sweep. Every run takes
a JSON config (--config), optional dotted-path overrides, and emits a
deterministic JSON or CSV report to --output or stdout. Exit codes:
0 success, 1 validation/config error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor

from . import __version__
from .config import (
    MODES,
    RunConfig,
    build_dlrm_spec,
    build_energy_params,
    build_model,
    build_placement,
    build_plan,
    build_scenario_mix,
    build_shape,
    build_system,
    expand_sweep,
    parse_config,
)
from .dlrm import pooling_time, required_devices
from .energy import workload_energy
from .errors import ConfigError, ValidationError
from .inference import max_batch, run_inference
from .parallel import ParallelismPlan
from .report import (
    MeasurementRow,
    MeasurementSet,
    RunReport,
    emit,
    mape,
    r_squared,
)
from .training import SearchConstraints, search_plan, train_step_time
from .workload import WorkloadShape

TOOL_NAME = "fabricsim"


def _new_report(config: RunConfig) -> RunReport:
    return RunReport(tool=TOOL_NAME, version=__version__, mode=config.mode,
                     config=config.raw)


def _inference_row(config_id, model, system, plan, shape, dtype,
                   reserve) -> dict:
    result = run_inference(model, system, plan, shape, dtype,
                           reserve_fraction=reserve)
    row = {
        "config_id": config_id,
        "system": system.name,
        "tp": plan.tp,
        "pp": plan.pp,
        "dp": plan.dp,
        "batch": shape.batch,
        "input_len": shape.input_len,
        "output_len": shape.output_len,
        "max_batch": result.max_batch,
        "prefill_s": result.prefill_time,
        "decode_s": result.decode_time,
        "e2e_s": result.e2e_latency,
        "throughput_tok_s": result.throughput,
        "mfu": result.mfu,
    }
    for key, value in result.breakdown.as_dict().items():
        row[f"t_{key}_s"] = value
    return row


def _resolve_batch(shape, batch_is_max, model, system, plan, reserve):
    if not batch_is_max:
        return shape
    best = max_batch(model, system, plan, shape, reserve)
    if best < 1:
        raise ValidationError(
            "workload.batch is \"max\" but not even batch 1 fits")
    return WorkloadShape(batch=best, input_len=shape.input_len,
                         output_len=shape.output_len, kv_len=shape.kv_len)


def _run_infer(config: RunConfig, jobs: int) -> RunReport:
    raw = config.raw
    model = build_model(raw["model"])
    system = build_system(raw["system"], config.base_dir)
    plan = build_plan(raw.get("plan", {}))
    shape, batch_is_max = build_shape(raw["workload"])
    dtype = raw.get("compute_dtype", "fp16")
    reserve = float(raw.get("reserve_fraction", 0.0))
    shape = _resolve_batch(shape, batch_is_max, model, system, plan, reserve)
    report = _new_report(config)
    report.rows = [_inference_row("infer", model, system, plan, shape,
                                  dtype, reserve)]
    return report


def _train_rows(config: RunConfig) -> list[dict]:
    raw = config.raw
    model = build_model(raw["model"])
    system = build_system(raw["system"], config.base_dir)
    section = raw.get("train")
    if not section:
        raise ConfigError("train/power mode needs a train section")
    seq_len = int(section["seq_len"])
    dtype = raw.get("compute_dtype", "fp16")
    recompute = bool(section.get("recompute_activations", False))
    mixed = bool(section.get("mixed_precision", True))

    if "search" in section:
        search = section["search"]
        budget = int(search.get("device_budget", system.processor.count))
        constraints = SearchConstraints(
            global_batch=int(section["global_batch"]),
            seq_len=seq_len,
            compute_dtype=dtype,
            max_tp=search.get("max_tp"),
            recompute_activations=recompute,
            mixed_precision=mixed,
        )
        plan, result = search_plan(model, system, budget, constraints)
    else:
        plan = build_plan(section.get("plan", {}))
        result = train_step_time(
            model, system, plan, seq_len, dtype,
            global_batch=section.get("global_batch"),
            recompute_activations=recompute, mixed_precision=mixed)

    row = {
        "config_id": "train",
        "system": system.name,
        "tp": plan.tp,
        "pp": plan.pp,
        "dp": plan.dp,
        "microbatch": plan.microbatch,
        "num_microbatches": plan.num_microbatches,
        "seq_len": seq_len,
        "global_batch": plan.global_batch,
        "step_time_s": result.step_time,
        "mfu": result.mfu,
        "bubble_fraction": result.bubble_fraction,
        "mem_params_bytes": result.memory.params,
        "mem_gradients_bytes": result.memory.gradients,
        "mem_optimizer_bytes": result.memory.optimizer_states,
        "mem_activations_bytes": result.memory.activations,
        "offload_bytes_per_step": result.offload_bytes_per_step,
    }
    for cls, bits in result.ledger.as_dict().items():
        row[f"bits_{cls}"] = bits
    return [row]


def _run_train(config: RunConfig, jobs: int) -> RunReport:
    report = _new_report(config)
    report.rows = _train_rows(config)
    return report


def _run_power(config: RunConfig, jobs: int) -> RunReport:
    raw = config.raw
    model = build_model(raw["model"])
    system = build_system(raw["system"], config.base_dir)
    section = raw.get("train")
    if not section:
        raise ConfigError("power mode derives its ledger from a train section")
    plan = build_plan(section.get("plan", {}))
    result = train_step_time(
        model, system, plan, int(section["seq_len"]),
        raw.get("compute_dtype", "fp16"),
        global_batch=section.get("global_batch"),
        recompute_activations=bool(section.get("recompute_activations", False)),
        mixed_precision=bool(section.get("mixed_precision", True)))

    energy_cfg = raw.get("energy", {})
    params_base = build_energy_params(energy_cfg.get("params_baseline"))
    params_photonic = build_energy_params(energy_cfg.get("params_photonic"))
    mix = build_scenario_mix(energy_cfg.get("mix"))
    overrides = {k: int(v)
                 for k, v in energy_cfg.get("switch_overrides", {}).items()}

    report = _new_report(config)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rows = workload_energy(result.ledger, mix, params_base,
                               params_photonic, overrides or None)
    report.warnings = [str(w.message) for w in caught]
    report.rows = [{
        "config_id": f"power/{row.traffic_class}",
        "traffic_class": row.traffic_class,
        "bits": row.bits,
        "baseline_pj_per_bit": row.baseline_pj_per_bit,
        "photonic_pj_per_bit": row.photonic_pj_per_bit,
        "baseline_joules": row.baseline_joules,
        "photonic_joules": row.photonic_joules,
        "percent_of_baseline": row.percent_of_baseline,
        "savings_fraction": row.savings_fraction,
    } for row in rows]
    report.metrics = {
        "step_time_s": result.step_time,
        "baseline_joules_total": sum(r.baseline_joules for r in rows),
        "photonic_joules_total": sum(r.photonic_joules for r in rows),
    }
    return report


def _run_dlrm(config: RunConfig, jobs: int) -> RunReport:
    raw = config.raw
    section = raw.get("dlrm")
    if not section:
        raise ConfigError("dlrm mode needs a dlrm section")
    spec = build_dlrm_spec(section["spec"])
    system = build_system(raw["system"], config.base_dir)
    capacity = section.get("per_device_capacity")
    coalescing = int(section.get("coalescing_factor", 1))

    auto_devices = None
    if capacity is not None:
        auto_devices = required_devices(spec, float(capacity))

    rows = []
    baseline_seconds = None
    for index, placement_cfg in enumerate(section.get("placements", [])):
        count = placement_cfg.get("device_count", "auto")
        if count == "auto":
            if auto_devices is None:
                raise ConfigError(
                    "placement device_count \"auto\" needs "
                    "dlrm.per_device_capacity")
            count = auto_devices
        placement = build_placement(placement_cfg, int(count))
        result = pooling_time(spec, placement, system, coalescing,
                              reference=baseline_seconds)
        if baseline_seconds is None:
            baseline_seconds = result.seconds  # first placement is baseline
        label = placement_cfg.get("mode", "distributed")
        if placement.mode == "distributed":
            label = f"{placement.interconnect}x{placement.device_count}"
        rows.append({
            "config_id": f"dlrm/{index:02d}_{label}",
            "placement": label,
            "mode": placement.mode,
            "device_count": placement.device_count,
            "pooling_bytes": spec.batch * spec.num_tables
            * spec.pooling_factor * spec.embedding_dim * spec.dtype_bytes,
            "seconds": result.seconds,
            "speedup_vs_first": result.speedup if result.speedup is not None
            else 1.0,
        })
    if not rows:
        raise ConfigError("dlrm mode needs at least one placement")

    report = _new_report(config)
    report.rows = rows
    if auto_devices is not None:
        report.metrics = {"required_devices": auto_devices,
                          "table_bytes": spec.table_bytes}
    return report


def _sweep_rows(config: RunConfig, jobs: int) -> list[dict]:
    raw = config.raw
    points = expand_sweep(raw)
    sections = raw["sweep"]["sections"]
    default_dtype = raw.get("compute_dtype", "fp16")
    reserve = float(raw.get("reserve_fraction", 0.0))

    cache = {}

    def section_objects(index: int):
        if index not in cache:
            section = sections[index]
            system_cfg = section.get("system", raw.get("system"))
            if system_cfg is None:
                raise ConfigError(
                    f"sweep.sections[{index}] has no system and the config "
                    "has no top-level system")
            if isinstance(system_cfg, str):
                named = raw.get("systems", {})
                if system_cfg not in named:
                    raise ConfigError(
                        f"sweep.sections[{index}] names system "
                        f"{system_cfg!r} but top-level systems has no "
                        "such entry")
                system_cfg = named[system_cfg]
            system = build_system(system_cfg, config.base_dir)
            plan = build_plan(section.get("plan", raw.get("plan", {})))
            dtype = section.get("compute_dtype", default_dtype)
            cache[index] = (system, plan, dtype)
        return cache[index]

    model = build_model(raw["model"])
    for index in range(len(sections)):
        section_objects(index)  # build eagerly so config errors are early

    def evaluate(point):
        system, plan, dtype = cache[point.section_index]
        shape = WorkloadShape(batch=1 if point.batch == "max"
                              else int(point.batch),
                              input_len=point.input_len,
                              output_len=point.output_len)
        shape = _resolve_batch(shape, point.batch == "max", model, system,
                               plan, reserve)
        return _inference_row(point.config_id, model, system, plan, shape,
                              dtype, reserve)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(evaluate, points))
    return [evaluate(point) for point in points]


def _run_sweep(config: RunConfig, jobs: int) -> RunReport:
    report = _new_report(config)
    report.rows = _sweep_rows(config, jobs)
    return report


def _run_validate(config: RunConfig, jobs: int) -> RunReport:
    raw = config.raw
    section = raw.get("validate")
    if not section or "measurements" not in section:
        raise ConfigError("validate mode needs validate.measurements (a CSV)")
    measured = MeasurementSet.from_csv(
        os.path.join(config.base_dir, section["measurements"]))
    predicted_rows = {row["config_id"]: row
                      for row in _sweep_rows(config, jobs)}

    joined = []
    rows = []
    for m in measured.rows:
        if m.config_id not in predicted_rows:
            continue
        predicted = predicted_rows[m.config_id]["e2e_s"]
        joined.append(MeasurementRow(m.config_id, predicted, m.measured))
        rows.append({
            "config_id": m.config_id,
            "predicted_s": predicted,
            "measured_s": m.measured,
            "abs_pct_err": abs(predicted - m.measured) / m.measured,
        })
    if not joined:
        raise ConfigError(
            "no measurement config_id matched the sweep grid")
    joined_set = MeasurementSet(rows=tuple(joined))

    report = _new_report(config)
    report.rows = rows
    report.metrics = {
        "mape": mape(joined_set),
        "r_squared": r_squared(joined_set),
        "matched_points": len(joined),
    }
    return report


_RUNNERS = {
    "infer": _run_infer,
    "train": _run_train,
    "power": _run_power,
    "dlrm": _run_dlrm,
    "validate": _run_validate,
    "sweep": _run_sweep,
}


def run(config: RunConfig, jobs: int = 1) -> RunReport:
    """Execute one parsed config and return its report."""
    return _RUNNERS[config.mode](config, jobs)


class _Parser(argparse.ArgumentParser):
    """argparse reports usage errors via sys.exit(2); this tool reserves
    exit status 2 for runtime failures, so remap bad flags to the same
    path as bad configs."""

    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog=TOOL_NAME,
        description="Analytical performance and data-movement energy model "
                    "for LLM and embedding workloads.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode, help=f"run a {mode} config")
        p.add_argument("--config", required=True, help="JSON run config")
        p.add_argument("--output", default=None,
                       help="report path (stdout when omitted)")
        p.add_argument("--format", default="json", choices=["json", "csv"])
        p.add_argument("--jobs", type=int, default=1,
                       help="worker threads for sweep evaluation")
        p.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="dotted-path config override, repeatable")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = parse_config(args.config, overrides=args.override,
                              mode=args.mode)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        report = run(config, jobs=args.jobs)
        payload = emit(report, args.format)
    except (ValidationError, ConfigError) as exc:
        print(f"{TOOL_NAME}: invalid input: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - runtime failures exit 2
        print(f"{TOOL_NAME}: run failed: {exc}", file=sys.stderr)
        return 2
    try:
        if args.output:
            with open(args.output, "wb") as fh:
                fh.write(payload)
        else:
            sys.stdout.write(payload.decode())
    except OSError as exc:
        print(f"{TOOL_NAME}: run failed: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
