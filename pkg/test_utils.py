"""
Tests for the run audit log, JSON/CSV serialization, canned scenarios and environment settings
"""

import math

import pytest

from src.maxident.config.settings import Settings
from src.maxident.exceptions import ConfigurationError, InputError
from src.maxident.models.config import RunConfig
from src.maxident.models.specs import DistributionSpec, GeneratorSpec
from src.maxident.testing.scenarios import example_candidates, example_configs, write_example_configs
from src.maxident.utils.logger import RunLogger
from src.maxident.utils.serialization import (
    config_hash,
    dumps,
    format_float,
    load_model,
    load_model_list,
    read_json,
    read_samples_csv,
    report_envelope,
    write_json,
    write_samples_csv,
)


@pytest.fixture
def run_logger(tmp_path):
    return RunLogger(str(tmp_path / "runs.db"))


class TestRunLogger:
    def test_healthy(self, run_logger):
        assert run_logger.is_healthy()

    def test_successful_run(self, run_logger):
        run_logger.log_run_start("run-1", "recover", {"config": "c.json"}, config_hash="abc", seed=3)
        record = run_logger.get_run("run-1")
        assert record["status"] == "in_progress"
        assert record["arguments"] == {"config": "c.json"}
        assert record["seed"] == 3

        run_logger.log_run_success("run-1", 0, {"method": "kotlarski", "sup_residual": 1e-12})
        record = run_logger.get_run("run-1")
        assert record["status"] == "completed"
        assert record["exit_code"] == 0
        assert record["execution_time_ms"] >= 0
        assert record["result_summary"].startswith("Recovery via kotlarski")

    def test_failed_run(self, run_logger):
        run_logger.log_run_start("run-2", "cdf", {})
        run_logger.log_run_error("run-2", 2, "cannot read probes.csv")
        record = run_logger.get_run("run-2")
        assert record["status"] == "failed"
        assert record["exit_code"] == 2
        assert record["error_message"] == "cannot read probes.csv"

    def test_result_summaries(self, run_logger):
        assert run_logger._generate_result_summary({"rows": 9}) == "Wrote 9 rows"
        assert run_logger._generate_result_summary({"summary": "4 candidates"}) == "4 candidates"
        assert run_logger._generate_result_summary({}) == "Run finished"

    def test_stats(self, run_logger):
        for run_id, code in (("a", 0), ("b", 4), ("c", 1)):
            run_logger.log_run_start(run_id, "diagnose", {})
            if code == 1:
                run_logger.log_run_error(run_id, code, "bad config")
            else:
                run_logger.log_run_success(run_id, code, {"rows": 1})
        stats = run_logger.get_run_stats(hours=1)
        assert stats["total_runs"] == 3
        assert stats["completed_runs"] == 2
        assert stats["failed_runs"] == 1
        assert stats["success_percentage"] == pytest.approx(66.67)
        assert stats["time_period_hours"] == 1

    def test_unknown_run(self, run_logger):
        assert run_logger.get_run("missing") is None

    def test_config_hash_added_after_start(self, run_logger):
        run_logger.log_run_start("run-3", "simulate", {"seed": 9}, seed=9)
        assert run_logger.get_run("run-3")["config_hash"] is None
        run_logger.log_run_config("run-3", "f" * 64, seed=1)
        record = run_logger.get_run("run-3")
        assert record["config_hash"] == "f" * 64
        assert record["seed"] == 9

    def test_recent_runs_newest_first(self, run_logger):
        for run_id in ("first", "second", "third"):
            run_logger.log_run_start(run_id, "cdf", {})
        assert [r["run_id"] for r in run_logger.get_recent_runs(limit=2)] == ["third", "second"]


class TestSerialization:
    def test_config_hash(self):
        configs = example_configs()
        first = config_hash(configs["positive_exponential"])
        assert first == config_hash(example_configs()["positive_exponential"])
        assert len(first) == 64
        assert first != config_hash(configs["positive_exponential"].model_copy(update={"seed": 7}))

    def test_infinite_values_survive_json(self, tmp_path):
        path = tmp_path / "report.json"
        write_json(str(path), {"upper": math.inf, "values": [0.5, 1.0]})
        assert "Infinity" in path.read_text()
        assert read_json(str(path)) == {"upper": math.inf, "values": [0.5, 1.0]}

    def test_dumps_is_sorted(self):
        assert dumps({"b": 1, "a": 2}, indent=None) == '{"a": 2, "b": 1}'

    def test_format_float(self):
        assert format_float(1.0) == "1"
        assert format_float(math.inf) == "inf"
        assert float(format_float(0.1 + 0.2)) == 0.1 + 0.2

    def test_samples_csv(self, tmp_path):
        path = tmp_path / "samples.csv"
        assert write_samples_csv(str(path), [[0.25, 1.5], [2.0, 0.125]]) == 2
        assert path.read_text() == "u,v\n0.25,1.5\n2,0.125\n"
        assert read_samples_csv(str(path)).tolist() == [[0.25, 1.5], [2.0, 0.125]]

    @pytest.mark.parametrize("content", ["x,y\n1,2\n", "u,v\n", "u,v\n1,abc\n", "u,v\n1,2,3\n"])
    def test_malformed_samples(self, tmp_path, content):
        path = tmp_path / "samples.csv"
        path.write_text(content)
        with pytest.raises(InputError):
            read_samples_csv(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            read_json(str(tmp_path / "missing.json"))

    def test_load_model_schema_error(self, tmp_path):
        path = tmp_path / "spec.json"
        path.write_text('{"family": "exponential"}')
        with pytest.raises(ConfigurationError):
            load_model(str(path), DistributionSpec)

    def test_load_model_list_forms(self, tmp_path):
        bare, wrapped = tmp_path / "bare.json", tmp_path / "wrapped.json"
        write_json(str(bare), example_candidates())
        write_json(str(wrapped), {"candidates": example_candidates()})
        expected = [s.model_dump() for s in example_candidates()]
        assert [s.model_dump() for s in load_model_list(str(bare), DistributionSpec)] == expected
        assert [s.model_dump() for s in load_model_list(str(wrapped), DistributionSpec)] == expected

    @pytest.mark.parametrize("content", ["[]", '{"items": []}', "[1, 2", "3"])
    def test_load_model_list_malformed(self, tmp_path, content):
        path = tmp_path / "candidates.json"
        path.write_text(content)
        with pytest.raises(InputError):
            load_model_list(str(path), DistributionSpec)

    def test_load_model_list_schema_error(self, tmp_path):
        path = tmp_path / "candidates.json"
        path.write_text('[{"family": "exponential", "rate": 1.0}, {"family": "nope"}]')
        with pytest.raises(ConfigurationError):
            load_model_list(str(path), DistributionSpec)

    @pytest.mark.parametrize("content", ['[{"family": "fgm"}]', '"fgm"', '{"family": "fgm", '])
    def test_load_model_needs_a_json_object(self, tmp_path, content):
        path = tmp_path / "generator.json"
        path.write_text(content)
        with pytest.raises(InputError):
            load_model(str(path), GeneratorSpec)

    def test_report_envelope(self):
        envelope = report_envelope("cdf", "1.0.0", "abc", {"rows": 3})
        assert envelope == {"command": "cdf", "tool_version": "1.0.0", "config_hash": "abc", "result": {"rows": 3}}


class TestExampleConfigs:
    def test_written_files_load_back(self, tmp_path):
        written = write_example_configs(str(tmp_path / "configs"))
        assert len(written) == 9
        for name, config in example_configs().items():
            loaded = load_model(str(tmp_path / "configs" / f"{name}.json"), RunConfig)
            assert config_hash(loaded) == config_hash(config)
        assert len(load_model_list(str(tmp_path / "configs" / "candidates_exponential.json"), DistributionSpec)) == 4
        generator = load_model(str(tmp_path / "configs" / "generator_fgm_invalid.json"), GeneratorSpec)
        assert generator.alpha == -1.5


class TestSettings:
    def test_defaults(self, monkeypatch):
        for key in ("MAXIDENT_CDF_FLOOR", "MAXIDENT_GENERATOR_LATTICE", "MAXIDENT_RUN_LOG_DB", "MAXIDENT_ENVIRONMENT"):
            monkeypatch.delenv(key, raising=False)
        settings = Settings()
        assert settings.cdf_floor == 1e-12
        assert settings.generator_lattice_points == 7
        assert settings.run_log_enabled()
        assert not settings.is_production()

    def test_environment_overrides(self, monkeypatch):
        monkeypatch.setenv("MAXIDENT_CDF_FLOOR", "1e-10")
        monkeypatch.setenv("MAXIDENT_EQUIVALENCE_LATTICE", "32")
        monkeypatch.setenv("MAXIDENT_ENVIRONMENT", "production")
        monkeypatch.setenv("MAXIDENT_RUN_LOG_DB", "")
        settings = Settings()
        assert settings.cdf_floor == 1e-10
        assert settings.equivalence_lattice_points == 32
        assert settings.is_production()
        assert not settings.run_log_enabled()
        assert settings.as_dict()["equivalence_lattice_points"] == 32

    def test_invalid_values_reset(self, monkeypatch):
        monkeypatch.setenv("MAXIDENT_CDF_FLOOR", "0.5")
        monkeypatch.setenv("MAXIDENT_GENERATOR_LATTICE", "1")
        monkeypatch.setenv("MAXIDENT_MAX_WORKERS", "many")
        settings = Settings()
        assert settings.cdf_floor == 1e-12
        assert settings.generator_lattice_points == 7
        assert settings.max_workers == 4
