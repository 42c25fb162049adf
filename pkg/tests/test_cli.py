import json

import numpy as np
import pytest

from ergocert.cli import (ConfigError, ExperimentConfig, build_cost,
                          build_grid_spec, build_weight, list_models, main,
                          run_experiment)
from ergocert.kernels import MODEL_DEFAULTS


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig.from_dict({"model": {"model": "two_state"}})
        assert cfg.eps is None
        assert cfg.iota == 0.5
        assert cfg.horizon == 30
        assert cfg.seed == 0

    def test_roundtrip(self):
        raw = {"model": {"model": "arcsine", "n": 50}, "eps": 0.6,
               "iota": 0.5, "r_sweep": [3.0, 9.0, 5], "horizon": 25,
               "seed": 3, "out_dir": None, "label": "a"}
        cfg = ExperimentConfig.from_dict(raw)
        assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown config"):
            ExperimentConfig.from_dict({"model": {"model": "two_state"}, "foo": 1})

    def test_missing_model(self):
        with pytest.raises(ConfigError, match="model"):
            ExperimentConfig.from_dict({})

    def test_bad_r_sweep(self):
        for bad in ([2.0, 1.0, 5], [1.0, 2.0, 0], [1.0, 2.0]):
            with pytest.raises(ConfigError):
                ExperimentConfig.from_dict({"model": {"model": "two_state"},
                                            "r_sweep": bad})

    def test_short_horizon(self):
        with pytest.raises(ConfigError, match="horizon"):
            ExperimentConfig.from_dict({"model": {"model": "two_state"},
                                        "horizon": 2})


class TestSpecBuilders:
    def test_grid_spec(self):
        g = build_grid_spec({"kind": "open_interval", "a": 0, "b": 1, "n": 8})
        assert g.n == 8
        with pytest.raises(ConfigError):
            build_grid_spec({"kind": "triangle", "n": 8})

    def test_weight_specs(self):
        g = build_grid_spec({"kind": "open_interval", "a": -1, "b": 1, "n": 6})
        poly = build_weight({"kind": "poly", "p": 2}, g)
        np.testing.assert_allclose(poly.values, 0.5 + np.abs(g.x) ** 2)
        const = build_weight({"kind": "const", "value": 2.0}, g)
        np.testing.assert_allclose(const.values, 2.0)
        with pytest.raises(ConfigError):
            build_weight({"kind": "spline"}, g)
        with pytest.raises(ConfigError):
            build_weight(None, g)  # no natural weight supplied

    def test_cost_specs(self):
        g = build_grid_spec({"kind": "open_interval", "a": 0, "b": 1, "n": 5})
        phi0 = build_cost(None, g)
        assert phi0.label == "phi0"
        pw = build_cost({"kind": "power", "p": 2}, g)
        assert pw.power == 2.0
        rho = build_cost({"kind": "phi_rho", "rho": 0.3,
                          "V": {"kind": "const", "value": 1.0}}, g)
        assert rho.evaluate(0, 1) == pytest.approx(2 * (0.5 + 0.3))
        with pytest.raises(ConfigError):
            build_cost({"kind": "mystery"}, g)


class TestRunExperiment:
    def test_full_pipeline_two_state(self, tmp_path):
        cfg = ExperimentConfig.from_dict({
            "model": {"model": "two_state"}, "eps": 0.4, "horizon": 15,
            "out_dir": str(tmp_path)})
        rep = run_experiment(cfg)
        assert rep.ok(), rep.errors
        assert set(rep.stages) == {"build", "certify", "bounds", "beta",
                                   "decay", "wasserstein", "invariant"}
        assert rep.stages["beta"]["all_valid"]
        for name in ("report.json", "alpha.csv", "bounds.csv", "decay.csv",
                     "wasserstein.csv", "invariant.csv", "decay.png", "alpha.png"):
            assert (tmp_path / name).exists(), name
        assert (tmp_path / "decay.png").read_bytes()[:4] == b"\x89PNG"
        header = (tmp_path / "decay.csv").read_text().splitlines()[0]
        assert header == "n,d_phi,d_V,theorem_bound"
        payload = json.loads((tmp_path / "report.json").read_text())
        assert payload["config"]["model"] == {"model": "two_state"}
        assert payload["errors"] == {}

    def test_stage_isolation(self):
        cfg = ExperimentConfig.from_dict({
            "model": {"model": "two_state"}, "eps": 0.5,
            "r_sweep": [1.05, 1.9, 4], "horizon": 10})
        rep = run_experiment(cfg)
        assert "bounds" in rep.errors
        assert rep.errors["beta"].startswith("skipped")
        assert "decay" in rep.stages and "invariant" in rep.stages
        assert not rep.ok()

    def test_deterministic_outputs(self, tmp_path):
        outs = []
        for tag in ("a", "b"):
            d = tmp_path / tag
            cfg = ExperimentConfig.from_dict({
                "model": {"model": "arcsine", "n": 30}, "horizon": 12,
                "seed": 11, "out_dir": str(d)})
            rep = run_experiment(cfg)
            assert rep.ok()
            outs.append({f.name: f.read_bytes()
                         for f in sorted(d.glob("*.csv"))})
        assert outs[0] == outs[1]

    def test_gibbs_pair_route(self):
        cfg = ExperimentConfig.from_dict({
            "model": {"model": "gibbs", "n": 24}, "horizon": 12})
        rep = run_experiment(cfg)
        assert rep.ok(), rep.errors
        assert rep.stages["certify"]["pair"]
        assert rep.stages["certify"]["combined_eps"] == pytest.approx(
            rep.stages["certify"]["eps0"] ** 2)
        assert rep.stages["beta"]["all_valid"]


class TestListModels:
    def test_catalog(self):
        cat = list_models()
        assert set(cat) == set(MODEL_DEFAULTS)
        assert json.loads(json.dumps(cat)) == cat
        for entry in cat.values():
            assert set(entry) == {"description", "defaults"}


class TestMainExitCodes:
    def test_list_models(self, capsys):
        assert main(["list-models"]) == 0
        cat = json.loads(capsys.readouterr().out)
        assert "two_state" in cat

    def test_bad_json_is_config_error(self, capsys):
        assert main(["certify", "--model", "{not json"]) == 2
        assert "config error" in capsys.readouterr().err

    def test_unknown_model_is_config_error(self):
        assert main(["run", "--model", '{"model": "nope"}']) == 2

    def test_stage_failure_is_3(self, tmp_path):
        cfg = {"model": {"model": "two_state"}, "eps": 0.5,
               "r_sweep": [1.05, 1.9, 4], "horizon": 10}
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        assert main(["run", "--config", str(path)]) == 3

    def test_good_run_is_0(self, tmp_path, capsys):
        assert main(["run", "--model", '{"model": "two_state"}',
                     "--out", str(tmp_path)]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["errors"] == {}

    def test_transport_oracle(self, capsys):
        code = main(["transport",
                     "--grid", '{"kind": "open_interval", "a": 0, "b": 1, "n": 4}',
                     "--w1", "1,0,0,1", "--w2", "0,1,1,0",
                     "--cost", '{"kind": "power", "p": 1}'])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        # move 1/2 mass one cell (0.25) in each tail
        assert out["value"] == pytest.approx(0.25, abs=1e-12)

    def test_transport_length_mismatch(self):
        assert main(["transport",
                     "--grid", '{"kind": "open_interval", "a": 0, "b": 1, "n": 4}',
                     "--w1", "1,0", "--w2", "0,1,1,0"]) == 2

    def test_beta_two_state(self, capsys):
        assert main(["beta", "--model", '{"model": "two_state"}']) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["beta"] == pytest.approx(0.7, abs=1e-12)

    def test_bounds_reference(self, capsys):
        assert main(["bounds", "--eps", "0.5", "--r", "4", "--alpha", "0.5"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["bound_re3"] == pytest.approx(0.975, abs=1e-15)

    def test_bounds_alpha_file(self, tmp_path, capsys):
        f = tmp_path / "alpha.csv"
        f.write_text("r,alpha\n3.0,0.4\n5.0,0.3\n")
        assert main(["bounds", "--eps", "0.5", "--r", "4",
                     "--alpha-file", str(f)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["alpha"] == 0.3  # first level at or above r = 4
        assert main(["bounds", "--eps", "0.5", "--r", "6",
                     "--alpha-file", str(f)]) == 2

    def test_bounds_needs_alpha(self):
        assert main(["bounds", "--eps", "0.5", "--r", "4"]) == 2

    def test_bounds_bad_r_is_config_error(self):
        assert main(["bounds", "--eps", "0.5", "--r", "1.5", "--alpha", "0.5"]) == 2

    def test_certify_subcommand(self, capsys):
        assert main(["certify", "--model", '{"model": "two_state"}',
                     "--eps", "0.4", "--r-sweep", "2:4:1"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["eps"] == 0.4
        assert [row["alpha"] for row in out["alpha_sweep"]] == pytest.approx(
            [0.3, 0.3, 0.3])

    def test_decay_subcommand(self, tmp_path, capsys):
        out_csv = tmp_path / "decay.csv"
        assert main(["decay", "--model", '{"model": "two_state"}',
                     "--n", "10", "--out", str(out_csv)]) == 0
        assert out_csv.exists()
        assert out_csv.with_suffix(".png").exists()
        summary = json.loads(capsys.readouterr().out)
        assert summary["lambda_fit"] == pytest.approx(0.7, abs=1e-6)

    def test_invariant_subcommand(self, capsys):
        assert main(["invariant", "--model", '{"model": "two_state"}']) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["pi_head"][0] == pytest.approx(2 / 3, abs=1e-9)

    def test_fixpoint_subcommand(self, capsys):
        assert main(["fixpoint", "--f", '{"kind": "affine", "a": 0.5, "b": 1}',
                     "--y0", "0"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["y_star"] == pytest.approx(2.0, abs=1e-9)

    def test_kernel_export(self, tmp_path, capsys):
        out = tmp_path / "k.csv"
        assert main(["kernel", "--model", '{"model": "two_state"}',
                     "--out", str(out)]) == 0
        rows = np.loadtxt(out, delimiter=",")
        np.testing.assert_allclose(rows, [[0.9, 0.1], [0.2, 0.8]])
