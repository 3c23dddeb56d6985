"""
Tests for the command-line front-end: outputs, exit codes and the run audit log
"""

import json

import numpy as np
import pytest

from src.maxident.config.settings import settings
from src.maxident.identification.solver import recover_positive_general
from src.maxident.main import main
from src.maxident.max_model.joint import joint_cdf
from src.maxident.models.config import RecoverySettings, RunConfig
from src.maxident.models.specs import GridSpec
from src.maxident.testing.scenarios import (
    bumped,
    example_candidates,
    example_configs,
    exponential,
    exponential_system,
    fgm_generator,
    mixed,
    point_mass,
    point_mass_system,
    positive,
    quantile_grid,
)
from src.maxident.utils.logger import RunLogger
from src.maxident.utils.serialization import config_hash, read_json, write_json


@pytest.fixture(autouse=True)
def run_log(tmp_path, monkeypatch):
    db = tmp_path / "runs.db"
    monkeypatch.setattr(settings, "run_log_db", str(db))
    return db


def write_config(tmp_path, name, config):
    path = tmp_path / f"{name}.json"
    write_json(str(path), config)
    return str(path)


def run(command, config, out, *extra):
    return main([command, "--config", config, "--out", str(out), *extra])


def read_rows(path):
    lines = path.read_text().splitlines()
    return lines[0], [line.split(",") for line in lines[1:]]


class TestSimulate:
    def test_point_mass_rows(self, tmp_path):
        config = RunConfig(
            system=point_mass_system(1.0), coefficients=positive(1, 1, 1, 1),
            grid=GridSpec(nodes=[0.5, 1.0, 2.0]), sample_size=5,
        )
        out = tmp_path / "samples.csv"
        assert run("simulate", write_config(tmp_path, "point", config), out) == 0
        assert out.read_text() == "u,v\n" + "1,1\n" * 5

    def test_reruns_are_byte_identical(self, tmp_path):
        config = example_configs()["positive_weibull"].model_copy(update={"sample_size": 200})
        path = write_config(tmp_path, "weibull", config)
        first, second, other = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
        assert run("simulate", path, first) == 0
        assert run("simulate", path, second) == 0
        assert run("simulate", path, other, "--seed", "99") == 0
        assert first.read_bytes() == second.read_bytes()
        assert first.read_bytes() != other.read_bytes()

    def test_summary_on_stdout(self, tmp_path, capsys):
        config = example_configs()["positive_exponential"].model_copy(update={"sample_size": 10})
        assert run("simulate", write_config(tmp_path, "exp", config), tmp_path / "s.csv") == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["n"] == 10
        assert summary["seed"] == 1
        assert summary["regime"] == "all_positive"


class TestCdf:
    def test_infinite_evaluation_point(self, tmp_path):
        probes = tmp_path / "probes.csv"
        probes.write_text("t1,t2\ninf,inf\n0.5,1\n")
        config = example_configs()["positive_exponential"]
        out = tmp_path / "cdf.csv"
        assert run("cdf", write_config(tmp_path, "exp", config), out, "--probes", str(probes)) == 0
        header, rows = read_rows(out)
        assert header == "t1,t2,g"
        assert rows[0] == ["inf", "inf", "1"]
        assert float(rows[1][2]) == pytest.approx(joint_cdf(config.system, config.coefficients, 0.5, 1.0), abs=1e-15)

    def test_lattice_matches_library(self, tmp_path):
        config = RunConfig(system=exponential_system(), coefficients=positive(1, 3, 2, 1), grid=GridSpec(nodes=[0.5, 1.0, 2.0]))
        out = tmp_path / "cdf.csv"
        assert run("cdf", write_config(tmp_path, "exp", config), out) == 0
        _, rows = read_rows(out)
        assert len(rows) == 9
        values = np.array([[float(x) for x in row] for row in rows])
        expected = joint_cdf(config.system, config.coefficients, values[:, 0], values[:, 1])
        assert np.allclose(values[:, 2], expected, atol=1e-15, rtol=0)

    def test_regime_flag_mismatch(self, tmp_path):
        path = write_config(tmp_path, "exp", example_configs()["positive_exponential"])
        assert run("cdf", path, tmp_path / "cdf.csv", "--regime", "mixed_sign") == 1

    def test_malformed_point_file(self, tmp_path):
        probes = tmp_path / "probes.csv"
        probes.write_text("x,y\n1,2\n")
        path = write_config(tmp_path, "exp", example_configs()["positive_exponential"])
        assert run("cdf", path, tmp_path / "cdf.csv", "--probes", str(probes)) == 2


class TestRecover:
    def kotlarski_config(self, count=20, lower=0.05, upper=0.95, sample_size=1000):
        return RunConfig(
            system=exponential_system(), coefficients=positive(1, 1, 1, 1), grid=quantile_grid(count, lower, upper),
            seed=1, sample_size=sample_size, recovery=RecoverySettings(kotlarski_collapse=True),
        )

    def test_kotlarski_analytic(self, tmp_path):
        out = tmp_path / "recovery.json"
        assert run("recover", write_config(tmp_path, "kot", self.kotlarski_config()), out) == 0
        report = read_json(str(out))
        assert report["command"] == "recover"
        assert len(report["config_hash"]) == 64
        assert report["result"]["method"] == "kotlarski"
        assert max(report["result"]["truth_errors"].values()) <= 1e-9

    def test_kotlarski_from_simulated_samples(self, tmp_path):
        path = write_config(tmp_path, "kot", self.kotlarski_config(15, 0.25, 0.95, 200000))
        samples = tmp_path / "samples.csv"
        assert run("simulate", path, samples) == 0
        out = tmp_path / "recovery.json"
        assert run("recover", path, out, "--samples", str(samples)) == 0
        report = read_json(str(out))
        assert max(report["result"]["truth_errors"].values()) <= 0.05

    def test_region_quotient_method(self, tmp_path):
        config = example_configs()["positive_exponential"].model_copy(
            update={"grid": quantile_grid(20, 0.05, 0.95), "recovery": RecoverySettings(method="region_quotient")}
        )
        out = tmp_path / "recovery.json"
        assert run("recover", write_config(tmp_path, "rq", config), out) == 0
        report = read_json(str(out))
        assert report["result"]["method"] == "region_quotient"
        assert max(report["result"]["truth_errors"].values()) <= 1e-9

    def test_atom_in_shock_names_the_violated_hypothesis(self, tmp_path, capsys):
        system = exponential_system().with_components(fz1=bumped(exponential(), point_mass(1.0), 0.3))
        config = RunConfig(system=system, coefficients=positive(1, 3, 2, 1), grid=quantile_grid(10, 0.05, 0.95))
        out = tmp_path / "recovery.json"
        code = run("recover", write_config(tmp_path, "atom", config), out)
        report = read_json(str(out))
        assert code == (3 if report["result"]["ambiguous"] else 0)
        assert any("uniqueness hypothesis is violated" in note for note in report["result"]["notes"])
        assert json.loads(capsys.readouterr().out)["notes"] == report["result"]["notes"]

    def test_disagreeing_multistarts_exit_3(self, tmp_path, monkeypatch, capsys):
        def disagreeing(*args, **kwargs):
            result = recover_positive_general(*args, **kwargs)
            result.solver_report.agreement = 0.5
            result.solver_report.agreed = False
            result.ambiguous = True
            return result

        monkeypatch.setattr("src.maxident.main.recover_positive_general", disagreeing)
        config = example_configs()["positive_exponential"].model_copy(update={"grid": quantile_grid(8, 0.05, 0.95)})
        out = tmp_path / "recovery.json"
        assert run("recover", write_config(tmp_path, "exp", config), out) == 3
        assert read_json(str(out))["result"]["ambiguous"]
        assert json.loads(capsys.readouterr().out)["ambiguous"]

    def test_mixed_sign_is_a_config_error(self, tmp_path):
        path = write_config(tmp_path, "mixed", example_configs()["mixed_exponential"])
        assert run("recover", path, tmp_path / "recovery.json") == 1

    def test_malformed_samples(self, tmp_path):
        samples = tmp_path / "samples.csv"
        samples.write_text("u,v\n1.0,abc\n")
        path = write_config(tmp_path, "kot", self.kotlarski_config())
        assert run("recover", path, tmp_path / "recovery.json", "--samples", str(samples)) == 2


class TestDiagnose:
    def test_identical_systems(self, tmp_path):
        config = example_configs()["positive_exponential"].model_copy(update={"grid": quantile_grid(10, 0.05, 0.95)})
        path = write_config(tmp_path, "exp", config)
        out = tmp_path / "diag.csv"
        assert run("diagnose", path, out, "--compare", path) == 0
        header, rows = read_rows(out)
        assert header == "t,eta1,eta2,eta3,zeta,antiperiodic_residual"
        assert len(rows) == 10
        assert (tmp_path / "diag_pairs.csv").exists()

    def test_perturbed_system_fails_the_check(self, tmp_path):
        configs = example_configs()
        grid = quantile_grid(10, 0.05, 0.95)
        base = write_config(tmp_path, "exp", configs["positive_exponential"].model_copy(update={"grid": grid}))
        other = write_config(tmp_path, "pert", configs["perturbed_exponential"].model_copy(update={"grid": grid}))
        assert run("diagnose", base, tmp_path / "diag.csv", "--compare", other) == 4

    def test_needs_compare(self, tmp_path):
        path = write_config(tmp_path, "exp", example_configs()["positive_exponential"])
        assert run("diagnose", path, tmp_path / "diag.csv") == 1


class TestCounterexample:
    def test_candidate_sweep(self, tmp_path, capsys):
        candidates = tmp_path / "candidates.json"
        write_json(str(candidates), example_candidates())
        path = write_config(tmp_path, "mixed", example_configs()["mixed_exponential"])
        out = tmp_path / "candidates_report.json"
        assert run("counterexample", path, out, "--candidates", str(candidates)) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["valid"] == 2
        assert summary["equivalent"] == 1
        report = read_json(str(out))
        assert len(report["result"]["candidates"]) == 4

    def test_defaults_to_identity(self, tmp_path):
        path = write_config(tmp_path, "mixed", example_configs()["mixed_exponential"])
        out = tmp_path / "report.json"
        assert run("counterexample", path, out) == 0
        report = read_json(str(out))
        assert report["result"]["candidates"][0]["is_identity"]

    def test_positive_coefficients_rejected(self, tmp_path):
        path = write_config(tmp_path, "exp", example_configs()["positive_exponential"])
        assert run("counterexample", path, tmp_path / "report.json") == 1

    def test_malformed_candidates(self, tmp_path):
        candidates = tmp_path / "candidates.json"
        candidates.write_text('{"not": "a list"}')
        path = write_config(tmp_path, "mixed", example_configs()["mixed_exponential"])
        assert run("counterexample", path, tmp_path / "report.json", "--candidates", str(candidates)) == 2

    def test_schema_invalid_candidates(self, tmp_path):
        candidates = tmp_path / "candidates.json"
        candidates.write_text('[{"family": "exponential", "rate": -1.0}]')
        path = write_config(tmp_path, "mixed", example_configs()["mixed_exponential"])
        assert run("counterexample", path, tmp_path / "report.json", "--candidates", str(candidates)) == 1


class TestValidateGenerator:
    def test_config_generator_passes(self, tmp_path):
        path = write_config(tmp_path, "fgm", example_configs()["maxind_fgm"])
        out = tmp_path / "gen.json"
        assert run("validate-generator", path, out) == 0
        assert read_json(str(out))["result"]["passed"]

    def test_invalid_generator_fails(self, tmp_path):
        generator = tmp_path / "gen_bad.json"
        write_json(str(generator), fgm_generator(-1.5))
        path = write_config(tmp_path, "fgm", example_configs()["maxind_fgm"])
        out = tmp_path / "gen.json"
        assert run("validate-generator", path, out, "--generator", str(generator)) == 4
        assert read_json(str(out))["result"]["range_witness"] == [0.0, 0.0, 0.0, 0.0]

    def test_missing_generator_file(self, tmp_path):
        path = write_config(tmp_path, "fgm", example_configs()["maxind_fgm"])
        assert run("validate-generator", path, tmp_path / "gen.json", "--generator", str(tmp_path / "nope.json")) == 2

    @pytest.mark.parametrize("content, code", [
        ('{"family": "fgm", "alpha": ', 2),
        ('[{"family": "fgm", "alpha": -0.5}]', 2),
        ('{"family": "nope"}', 1),
    ])
    def test_generator_file_errors(self, tmp_path, content, code):
        generator = tmp_path / "gen.json"
        generator.write_text(content)
        path = write_config(tmp_path, "fgm", example_configs()["maxind_fgm"])
        assert run("validate-generator", path, tmp_path / "report.json", "--generator", str(generator)) == code

    def test_independent_config_without_generator(self, tmp_path):
        path = write_config(tmp_path, "exp", example_configs()["positive_exponential"])
        assert run("validate-generator", path, tmp_path / "gen.json") == 1


class TestConfigErrors:
    def test_missing_config(self, tmp_path):
        assert run("simulate", str(tmp_path / "missing.json"), tmp_path / "s.csv") == 2

    def test_invalid_config(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"system": {}, "coefficients": {}, "grid": {}}))
        assert run("simulate", str(path), tmp_path / "s.csv") == 1

    def test_inconsistent_coefficients(self, tmp_path):
        data = json.loads(example_configs()["positive_exponential"].model_dump_json())
        data["coefficients"] = mixed(1, -1, 1, -1).model_dump(mode="json")
        data["coefficients"]["regime"] = "all_positive"
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(data))
        assert run("cdf", str(path), tmp_path / "cdf.csv") == 1


class TestRunLog:
    def test_runs_are_recorded(self, tmp_path, run_log):
        path = write_config(tmp_path, "exp", example_configs()["positive_exponential"].model_copy(update={"sample_size": 10}))
        assert run("simulate", path, tmp_path / "s.csv") == 0
        assert run("recover", path.replace("exp.json", "missing.json"), tmp_path / "r.json") == 2
        stats = RunLogger(str(run_log)).get_run_stats()
        assert stats["total_runs"] == 2
        assert stats["completed_runs"] == 1
        assert stats["failed_runs"] == 1

    def test_config_hash_and_seed_recorded(self, tmp_path, run_log):
        config = example_configs()["positive_exponential"].model_copy(update={"sample_size": 10})
        path = write_config(tmp_path, "exp", config)
        assert run("simulate", path, tmp_path / "s.csv") == 0
        assert run("simulate", path, tmp_path / "t.csv", "--seed", "5") == 0
        latest, earlier = RunLogger(str(run_log)).get_recent_runs(limit=2)
        assert earlier["config_hash"] == latest["config_hash"] == config_hash(config)
        assert earlier["seed"] == 1
        assert latest["seed"] == 5

    def test_disabled_run_log(self, tmp_path, monkeypatch, run_log):
        monkeypatch.setattr(settings, "run_log_db", "")
        path = write_config(tmp_path, "exp", example_configs()["positive_exponential"].model_copy(update={"sample_size": 10}))
        assert run("simulate", path, tmp_path / "s.csv") == 0
        assert not run_log.exists()
