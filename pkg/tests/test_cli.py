"""End-to-end CLI tests: config parsing, every subcommand, exit codes,
and byte-level determinism of emitted reports."""

import json
import os

import pytest

from fabricsim.cli import build_parser, main
from fabricsim.config import (
    apply_overrides,
    build_plan,
    build_shape,
    expand_sweep,
    parse_config,
)
from fabricsim.errors import ConfigError

FIXTURES = os.path.join(os.path.dirname(__file__), "..", "fixtures")


def fixture(name):
    return os.path.join(FIXTURES, name)


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def tiny_infer_config():
    return {
        "mode": "infer",
        "compute_dtype": "fp16",
        "model": {
            "hidden_size": 256,
            "num_layers": 4,
            "num_heads": 8,
            "num_kv_heads": 8,
            "head_dim": 32,
            "ffn_size": 1024,
            "vocab_size": 512,
        },
        "system": {
            "processor": {
                "peak_matrix_flops": {"fp16": 1e15},
                "peak_vector_flops": 5e13,
                "count": 8,
            },
            "memory_tiers": [
                {"role": "local-hbm", "capacity": 8e10, "bandwidth": 3e12},
            ],
            "network": {"link_bandwidth": 9e11, "per_message_latency": 5e-6},
        },
        "plan": {"tp": 2},
        "workload": {"batch": 4, "input_len": 64, "output_len": 16},
    }


class TestParseConfig:
    def test_missing_file_is_config_error(self):
        with pytest.raises(ConfigError):
            parse_config("/nonexistent/nowhere.json")

    def test_bad_json_is_config_error(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            parse_config(str(path))

    def test_top_level_must_be_object(self, tmp_path):
        path = tmp_path / "list.json"
        path.write_text("[1, 2]")
        with pytest.raises(ConfigError):
            parse_config(str(path))

    def test_mode_required_somewhere(self, tmp_path):
        path = write_config(tmp_path, {"model": {}})
        with pytest.raises(ConfigError, match="mode"):
            parse_config(path)

    def test_mode_cross_check(self, tmp_path):
        path = write_config(tmp_path, {"mode": "train"})
        with pytest.raises(ConfigError, match="declares mode"):
            parse_config(path, mode="infer")

    def test_subcommand_may_supply_mode(self, tmp_path):
        cfg = tiny_infer_config()
        del cfg["mode"]
        path = write_config(tmp_path, cfg)
        assert parse_config(path, mode="infer").mode == "infer"

    def test_base_dir_is_config_directory(self, tmp_path):
        path = write_config(tmp_path, tiny_infer_config())
        assert parse_config(path).base_dir == str(tmp_path)


class TestOverrides:
    def test_dotted_path_sets_nested_value(self):
        raw = {"plan": {"tp": 2}}
        apply_overrides(raw, ["plan.tp=8"])
        assert raw["plan"]["tp"] == 8

    def test_json_values_are_decoded(self):
        raw = {}
        apply_overrides(raw, ["workload.batch=32", "flag=true",
                              "name=plain-text"])
        assert raw["workload"]["batch"] == 32
        assert raw["flag"] is True
        assert raw["name"] == "plain-text"

    def test_missing_equals_rejected(self):
        with pytest.raises(ConfigError):
            apply_overrides({}, ["no-equals-sign"])

    def test_scalar_in_path_rejected(self):
        with pytest.raises(ConfigError):
            apply_overrides({"plan": 3}, ["plan.tp=8"])

    def test_override_through_main(self, tmp_path, capsys):
        path = write_config(tmp_path, tiny_infer_config())
        assert main(["infer", "--config", path,
                     "--override", "plan.tp=4"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["rows"][0]["tp"] == 4


class TestBuilders:
    def test_unknown_model_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown keys"):
            apply = dict(tiny_infer_config()["model"])
            apply["hidden_dim"] = 1
            from fabricsim.config import build_model
            build_model(apply)

    def test_plan_accepts_known_keys_only(self):
        with pytest.raises(ConfigError):
            build_plan({"tp": 2, "zp": 4})

    def test_shape_max_batch_sentinel(self):
        shape, is_max = build_shape({"batch": "max", "input_len": 8})
        assert is_max and shape.batch == 1
        shape, is_max = build_shape({"batch": 3, "input_len": 8})
        assert not is_max and shape.batch == 3


class TestSweepExpansion:
    def test_validation_fixture_expands_to_grid(self):
        raw = json.load(open(fixture("sweep_70b_validation.json")))
        points = expand_sweep(raw)
        assert len(points) == 180
        assert len({p.config_id for p in points}) == 180

    def test_duplicate_ids_rejected(self):
        section = {"id": "a", "batch": [1], "input_len": [2],
                   "output_len": [3]}
        raw = {"sweep": {"sections": [section, dict(section)]}}
        with pytest.raises(ConfigError, match="duplicate"):
            expand_sweep(raw)

    def test_empty_sweep_rejected(self):
        with pytest.raises(ConfigError):
            expand_sweep({"sweep": {"sections": []}})


class TestMainExitCodes:
    def test_success_is_zero(self, tmp_path, capsys):
        path = write_config(tmp_path, tiny_infer_config())
        assert main(["infer", "--config", path]) == 0
        assert json.loads(capsys.readouterr().out)["mode"] == "infer"

    def test_bad_config_is_one(self, tmp_path, capsys):
        cfg = tiny_infer_config()
        cfg["model"]["hidden_size"] = -5
        path = write_config(tmp_path, cfg)
        assert main(["infer", "--config", path]) == 1
        assert "invalid input" in capsys.readouterr().err

    def test_missing_config_file_is_one(self, capsys):
        assert main(["infer", "--config", "/nonexistent.json"]) == 1

    def test_bad_flag_is_one(self, capsys):
        assert main(["infer", "--config", "x.json", "--formatt", "csv"]) == 1

    def test_unknown_subcommand_is_one(self, capsys):
        assert main(["fly", "--config", "x.json"]) == 1

    def test_mode_mismatch_is_one(self, tmp_path, capsys):
        path = write_config(tmp_path, tiny_infer_config())
        assert main(["train", "--config", path]) == 1

    def test_batch_too_large_is_one(self, tmp_path, capsys):
        cfg = tiny_infer_config()
        cfg["workload"]["batch"] = 10**9
        path = write_config(tmp_path, cfg)
        assert main(["infer", "--config", path]) == 1

    def test_jobs_below_one_is_one(self, tmp_path, capsys):
        path = write_config(tmp_path, tiny_infer_config())
        assert main(["infer", "--config", path, "--jobs", "0"]) == 1

    def test_unwritable_output_is_two(self, tmp_path, capsys):
        path = write_config(tmp_path, tiny_infer_config())
        assert main(["infer", "--config", path,
                     "--output", str(tmp_path)]) == 2
        assert "run failed" in capsys.readouterr().err

    def test_help_exits_zero(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0
        assert "infer" in capsys.readouterr().out


class TestSubcommands:
    def test_infer_fixture(self, capsys):
        assert main(["infer", "--config",
                     fixture("infer_405b_dgx.json")]) == 0
        report = json.loads(capsys.readouterr().out)
        row = report["rows"][0]
        assert row["batch"] == row["max_batch"] > 0
        assert row["e2e_s"] > 0 and 0 < row["mfu"] < 1

    def test_train_search_fixture(self, capsys):
        assert main(["train", "--config",
                     fixture("train_70b_search.json")]) == 0
        row = json.loads(capsys.readouterr().out)["rows"][0]
        assert row["tp"] * row["pp"] * row["dp"] <= 64
        assert row["step_time_s"] > 0 and 0 < row["mfu"] < 1
        assert row["global_batch"] == 128

    def test_power_fixture(self, capsys):
        assert main(["power", "--config", fixture("power_70b.json")]) == 0
        report = json.loads(capsys.readouterr().out)
        rows = {r["traffic_class"]: r for r in report["rows"]}
        assert rows["tp_comm"]["savings_fraction"] == pytest.approx(0.80)
        assert report["metrics"]["photonic_joules_total"] < \
            report["metrics"]["baseline_joules_total"]

    def test_dlrm_fixture(self, capsys):
        assert main(["dlrm", "--config", fixture("dlrm_10tb.json")]) == 0
        report = json.loads(capsys.readouterr().out)
        by_mode = {r["placement"]: r for r in report["rows"]}
        assert report["metrics"]["required_devices"] == 128
        assert by_mode["shared_fabric"]["speedup_vs_first"] > 10
        assert by_mode["pciex128"]["seconds"] > by_mode["nvlinkx128"]["seconds"]

    def test_sweep_fixture_row_count(self, capsys):
        assert main(["sweep", "--config",
                     fixture("sweep_70b_validation.json")]) == 0
        report = json.loads(capsys.readouterr().out)
        assert len(report["rows"]) == 180
        ids = [r["config_id"] for r in report["rows"]]
        assert ids == sorted(ids)

    def test_validate_fixture_metrics(self, capsys):
        assert main(["validate", "--config",
                     fixture("validate_70b.json")]) == 0
        metrics = json.loads(capsys.readouterr().out)["metrics"]
        assert metrics["matched_points"] == 36
        assert 0 < metrics["mape"] < 0.10
        assert metrics["r_squared"] > 0.9


class TestOutputs:
    def test_output_file_csv(self, tmp_path, capsys):
        out = tmp_path / "report.csv"
        path = write_config(tmp_path, tiny_infer_config())
        assert main(["infer", "--config", path, "--format", "csv",
                     "--output", str(out)]) == 0
        text = out.read_text()
        assert text.startswith("config_id,")
        assert capsys.readouterr().out == ""

    def test_json_stdout_round_trips(self, tmp_path, capsys):
        path = write_config(tmp_path, tiny_infer_config())
        assert main(["infer", "--config", path]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["tool"] == "fabricsim"

    def test_reports_are_byte_identical(self, tmp_path):
        path = write_config(tmp_path, tiny_infer_config())
        outs = []
        for i in range(2):
            out = tmp_path / f"r{i}.json"
            assert main(["infer", "--config", path,
                         "--output", str(out)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_sweep_jobs_do_not_change_bytes(self, tmp_path):
        outs = []
        for i, jobs in enumerate(("1", "4")):
            out = tmp_path / f"sweep{i}.csv"
            assert main(["sweep", "--config",
                         fixture("sweep_70b_validation.json"),
                         "--format", "csv", "--jobs", jobs,
                         "--output", str(out)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


def test_parser_lists_all_modes():
    parser = build_parser()
    text = parser.format_help()
    for mode in ("infer", "train", "power", "dlrm", "validate", "sweep"):
        assert mode in text
