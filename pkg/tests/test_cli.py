"""Experiment runner CLI: presets, configs, manifests, determinism."""

import hashlib
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from prefutil.cli import (
    BO_VARIANT_X0,
    ConfigError,
    main,
    reproduce_table,
    run_experiment,
    table_preset,
)

TINY_SIMILARITY = {
    "kind": "similarity",
    "problems": ["ZDT3"],
    "spaces": ["linear"],
    "estimators": ["mean", "dist"],
    "n_examples": [5],
    "trials": 1,
    "n_eval": 200,
    "dist_size": 50,
    "mcmc": {"n_chains": 2, "round_size": 200, "max_total_samples": 2000},
    "seed": 0,
    "artifacts": True,
}

TINY_BO = {
    "kind": "bo",
    "problems": ["ZDT3"],
    "spaces": ["linear"],
    "sample_modes": ["random"],
    "n_examples": 5,
    "trials": 1,
    "iterations": 2,
    "manual_m": 1000,
    "dist_size": 50,
    "mcmc": {"n_chains": 2, "round_size": 200, "max_total_samples": 2000},
    "seed": 0,
}


def _hash_tree(root: Path) -> dict:
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


class TestTablePreset:
    def test_similarity_tables(self):
        for table_id, mode in ((3, "random"), (4, "random"), (5, "biased"), (6, "biased")):
            doc = table_preset(table_id)
            assert doc["kind"] == "similarity"
            assert doc["sample_mode"] == mode

    def test_table_7_is_bo(self):
        doc = table_preset(7, scale="desk")
        assert doc["kind"] == "bo"
        assert doc["spaces"] == ["informed"]
        assert doc["x0"] == BO_VARIANT_X0
        paper = table_preset(7, scale="paper")
        assert paper["iterations"] == 800
        assert set(paper["sample_modes"]) == {"random", "biased"}

    def test_scale_budgets(self):
        assert table_preset(3, "desk")["mcmc"]["max_total_samples"] == 100_000
        assert table_preset(3, "paper")["mcmc"]["max_total_samples"] == 1_000_000

    def test_invalid_args(self):
        with pytest.raises(ConfigError):
            table_preset(2)
        with pytest.raises(ConfigError):
            table_preset(3, scale="galactic")


class TestRunExperiment:
    def test_similarity_run_writes_outputs_and_manifest(self, tmp_path):
        code = run_experiment(dict(TINY_SIMILARITY), tmp_path)
        assert code == 0
        for name in ("results.csv", "aggregated.csv", "manifest.json"):
            assert (tmp_path / name).exists()
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["seed"] == 0
        assert manifest["failures"] == []
        # manifest completeness: every output file is listed, hashes match
        expected = {
            k: v for k, v in _hash_tree(tmp_path).items() if k != "manifest.json"
        }
        assert manifest["files"] == expected
        # artifacts for the single trial-0 cell exist
        art = tmp_path / "artifacts"
        assert any(p.suffix == ".csv" for p in art.iterdir())
        assert any(p.suffix == ".json" for p in art.iterdir())

    def test_rerun_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run_experiment(dict(TINY_SIMILARITY), a)
        run_experiment(dict(TINY_SIMILARITY), b)
        ha, hb = _hash_tree(a), _hash_tree(b)
        # wall time differs inside the manifest; all data files must match
        del ha["manifest.json"], hb["manifest.json"]
        assert ha == hb

    def test_workers_do_not_change_results(self, tmp_path):
        doc = dict(TINY_SIMILARITY, trials=2, artifacts=False)
        run_experiment(dict(doc), tmp_path / "w1", workers=1)
        run_experiment(dict(doc), tmp_path / "w2", workers=2)
        assert (tmp_path / "w1" / "results.csv").read_bytes() == (
            tmp_path / "w2" / "results.csv"
        ).read_bytes()

    def test_bo_run(self, tmp_path):
        code = run_experiment(dict(TINY_BO), tmp_path)
        assert code == 0
        assert (tmp_path / "results.csv").exists()
        assert list((tmp_path / "artifacts").glob("*_history.csv"))

    def test_validation_happens_before_any_work(self, tmp_path):
        out = tmp_path / "never"
        with pytest.raises(ConfigError):
            run_experiment(dict(TINY_SIMILARITY, estimators=["median"]), out)
        with pytest.raises(ConfigError):
            run_experiment(dict(TINY_SIMILARITY, kind="mystery"), out)
        with pytest.raises(ConfigError):
            run_experiment(dict(TINY_BO, sample_modes=["greedy"]), out)
        assert not out.exists()

    def test_partial_failure_exit_code(self, tmp_path):
        # one degenerate cell (N below the generator minimum) fails, the rest run
        doc = dict(TINY_SIMILARITY, n_examples=[1, 5], artifacts=False)
        code = run_experiment(doc, tmp_path)
        assert code == 2
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["failures"]


class TestReproduceTable:
    OVERRIDES = {
        "problems": ["ZDT3"],
        "spaces": ["linear"],
        "estimators": ["dist"],
        "n_examples": [10],
        "trials": 1,
        "n_eval": 200,
        "dist_size": 50,
        "artifacts": False,
        "mcmc": {"n_chains": 2, "round_size": 200, "max_total_samples": 2000},
    }

    def test_comparison_report(self, tmp_path):
        code = reproduce_table(3, out_dir=tmp_path, overrides=dict(self.OVERRIDES))
        assert code == 0
        rows = list(
            __import__("csv").DictReader((tmp_path / "comparison.csv").open())
        )
        assert len(rows) == 1
        row = rows[0]
        assert row["reference"] == "0.55"
        assert float(row["obtained"]) == pytest.approx(
            float(row["reference"]) + float(row["delta"])
        )
        # manifest re-hashed after the comparison file is added
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert "comparison.csv" in manifest["files"]

    def test_unknown_table(self, tmp_path):
        with pytest.raises(ConfigError):
            reproduce_table(12, out_dir=tmp_path)


class TestCommandLine:
    def test_run_command(self, tmp_path):
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps(TINY_SIMILARITY))
        out = tmp_path / "out"
        result = CliRunner().invoke(
            main, ["run", "--config", str(cfg), "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        assert (out / "manifest.json").exists()

    def test_run_command_seed_override(self, tmp_path):
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps(dict(TINY_SIMILARITY, artifacts=False)))
        out = tmp_path / "out"
        result = CliRunner().invoke(
            main, ["run", "--config", str(cfg), "--out", str(out), "--seed", "9"]
        )
        assert result.exit_code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 9

    def test_bad_config_exits_one(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text("{not json")
        result = CliRunner().invoke(
            main, ["run", "--config", str(cfg), "--out", str(tmp_path / "o")]
        )
        assert result.exit_code == 1
        cfg.write_text(json.dumps(dict(TINY_SIMILARITY, sample_mode="greedy")))
        result = CliRunner().invoke(
            main, ["run", "--config", str(cfg), "--out", str(tmp_path / "o")]
        )
        assert result.exit_code == 1

    def test_table_command_unknown_table_exits_one(self, tmp_path):
        result = CliRunner().invoke(
            main, ["table", "--table", "99", "--out", str(tmp_path / "o")]
        )
        assert result.exit_code == 1
