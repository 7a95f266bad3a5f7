import json

import numpy as np
import pytest

import zigzag.cli as cli
from zigzag.simulate import ThinningBoundError

STD1 = '{"family": "gaussian", "precision": [[1.0]]}'
COUPLED = '{"family": "gaussian", "precision": [[6.0, 3.0], [3.0, 2.0]]}'
RIDGE = '{"family": "ridge", "alpha": 0.75}'
POWER2 = '{"family": "powerlaw", "alpha": 2.0, "dim": 2}'
POWER1 = '{"family": "powerlaw", "alpha": 1.0, "dim": 2}'


def run(*argv):
    return cli.main(list(argv))


class TestSample:
    def test_writes_csv_and_manifest(self, tmp_path, capsys):
        out = tmp_path / "run.csv"
        code = run("sample", "--target", STD1, "--T", "50", "--seed", "4",
                   "--out", str(out))
        assert code == 0
        assert "wrote" in capsys.readouterr().out
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "t,i,x1,th1"
        assert len(lines) > 10
        manifest = json.loads((tmp_path / "run.csv.manifest.json").read_text())
        assert manifest["command"] == "sample"
        assert manifest["seed"] == 4
        assert manifest["config"]["sim"]["method"] == "auto"

    def test_same_seed_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            assert run("sample", "--target", COUPLED, "--T", "200",
                       "--seed", "11", "--init=-2,1", "--init-theta=1,-1",
                       "--out", str(out)) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_manifest_digest_matches_output(self, tmp_path):
        out = tmp_path / "run.csv"
        assert run("sample", "--target", STD1, "--T", "20", "--seed", "1",
                   "--out", str(out)) == 0
        manifest = json.loads((tmp_path / "run.csv.manifest.json").read_text())
        import hashlib
        assert manifest["outputs"]["run.csv"] == \
            hashlib.sha256(out.read_bytes()).hexdigest()

    def test_ridge_diagonal_start_never_switches(self, tmp_path):
        out = tmp_path / "ridge.csv"
        assert run("sample", "--target", RIDGE, "--T", "1000", "--seed", "0",
                   "--method", "thinning", "--out", str(out)) == 0
        lines = out.read_text().strip().split("\n")
        assert len(lines) == 3                 # header + start + horizon
        assert lines[-1] == "1000.0,0,1000.0,1000.0,1,1"

    def test_exact_method_rejects_ridge(self, tmp_path, capsys):
        out = tmp_path / "ridge.csv"
        code = run("sample", "--target", RIDGE, "--T", "10", "--method",
                   "exact", "--out", str(out))
        assert code == 2
        assert "target gradient not affine" in capsys.readouterr().err
        assert not out.exists()

    def test_thinning_bound_violation_exits_3(self, tmp_path, capsys,
                                              monkeypatch):
        def explode(*a, **k):
            raise ThinningBoundError(1, 0.5, 4.0, 2.0)
        monkeypatch.setattr(cli, "simulate_skeleton", explode)
        code = run("sample", "--target", STD1, "--T", "10",
                   "--out", str(tmp_path / "x.csv"))
        assert code == 3
        assert "numerical fault" in capsys.readouterr().err

    def test_bad_init_length_exits_2(self, tmp_path, capsys):
        code = run("sample", "--target", COUPLED, "--T", "10",
                   "--init", "1,2,3", "--out", str(tmp_path / "x.csv"))
        assert code == 2
        assert "dimension" in capsys.readouterr().err

    def test_negative_gamma_exits_2(self, tmp_path):
        assert run("sample", "--target", STD1, "--T", "10", "--gamma", "-1",
                   "--out", str(tmp_path / "x.csv")) == 2

    def test_bad_target_json_exits_2(self, tmp_path, capsys):
        code = run("sample", "--target", '{"family": "gaussian"', "--T", "10",
                   "--out", str(tmp_path / "x.csv"))
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_missing_target_file_exits_2(self, tmp_path):
        assert run("sample", "--target", "@" + str(tmp_path / "no.json"),
                   "--T", "10", "--out", str(tmp_path / "x.csv")) == 2

    def test_target_file_loading(self, tmp_path):
        cfg = tmp_path / "target.json"
        cfg.write_text(STD1)
        assert run("sample", "--target", "@" + str(cfg), "--T", "10",
                   "--out", str(tmp_path / "x.csv")) == 0


class TestReach:
    def build(self, tmp_path, out_name="ctrl.json"):
        out = tmp_path / out_name
        code = run("reach", "--target", COUPLED, "--from=-2,1",
                   "--from-theta=1,-1", "--to=0.5,-0.25", "--to-theta=-1,1",
                   "--out", str(out))
        return code, out

    def test_end_to_end(self, tmp_path):
        code, out = self.build(tmp_path)
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["admissible"] is True
        assert doc["endpoint_error"] < 1e-8
        assert doc["min_switch_rate"] > 0.0
        assert np.allclose(doc["endpoint_x"], [0.5, -0.25], atol=1e-8)
        assert doc["endpoint_theta"] == [-1, 1]

    def test_check_mode_verifies_emitted_control(self, tmp_path, capsys):
        _, out = self.build(tmp_path)
        verdict = tmp_path / "verdict.json"
        code = run("reach", "--target", COUPLED, "--from=-2,1",
                   "--from-theta=1,-1", "--to=0.5,-0.25", "--to-theta=-1,1",
                   "--check", str(out), "--out", str(verdict))
        assert code == 0
        doc = json.loads(verdict.read_text())
        assert doc["admissible"] is True
        assert doc["endpoint_error"] < 1e-8

    def test_check_mode_reports_wrong_control(self, tmp_path):
        _, out = self.build(tmp_path)
        doc = json.loads(out.read_text())
        doc["times"][0] += 0.5
        tampered = tmp_path / "tampered.json"
        tampered.write_text(json.dumps(doc))
        verdict = tmp_path / "verdict.json"
        assert run("reach", "--target", COUPLED, "--from=-2,1",
                   "--from-theta=1,-1", "--to=0.5,-0.25", "--to-theta=-1,1",
                   "--check", str(tampered), "--out", str(verdict)) == 0
        assert json.loads(verdict.read_text())["endpoint_error"] > 0.1

    def test_check_mode_requires_control_fields(self, tmp_path, capsys):
        bogus = tmp_path / "bogus.json"
        bogus.write_text('{"speed": 3}')
        code = run("reach", "--target", COUPLED, "--from=-2,1",
                   "--from-theta=1,-1", "--to=0.5,-0.25", "--to-theta=-1,1",
                   "--check", str(bogus), "--out", str(tmp_path / "v.json"))
        assert code == 2
        assert "times/indices" in capsys.readouterr().err

    def test_non_spd_precision_exits_2(self, tmp_path):
        singular = '{"family": "gaussian", "precision": [[1.0, 2.0], [2.0, 1.0]]}'
        assert run("reach", "--target", singular, "--from=0,0",
                   "--from-theta=1,1", "--to=1,1", "--to-theta=1,1",
                   "--out", str(tmp_path / "v.json")) == 2

    def test_non_gaussian_target_exits_2(self, tmp_path, capsys):
        code = run("reach", "--target", RIDGE, "--from=0,0", "--from-theta=1,1",
                   "--to=1,1", "--to-theta=1,1", "--out", str(tmp_path / "v.json"))
        assert code == 2
        assert "gaussian" in capsys.readouterr().err

    def test_reach_is_deterministic(self, tmp_path):
        _, a = self.build(tmp_path, "a.json")
        _, b = self.build(tmp_path, "b.json")
        assert a.read_bytes() == b.read_bytes()


class TestDrift:
    def test_powerlaw_certificate(self, tmp_path, capsys):
        out = tmp_path / "drift.json"
        code = run("drift", "--target", POWER2, "--alpha", "0.5",
                   "--delta", "0.5", "--r-min", "5", "--r-max", "100",
                   "--n-radial", "6", "--n-angular", "8", "--out", str(out))
        assert code == 0
        assert "epsilon=" in capsys.readouterr().out
        doc = json.loads(out.read_text())
        assert doc["epsilon"] > 0.0
        assert doc["k_radius"] is not None
        grid = (tmp_path / "drift.grid.csv").read_text().strip().split("\n")
        assert grid[0] == "radius,x1,x2,th1,th2,ratio,bound,log_v"
        assert len(grid) == 1 + doc["n_probes"]

    def test_ridge_has_no_certificate(self, tmp_path):
        out = tmp_path / "drift.json"
        assert run("drift", "--target", RIDGE, "--alpha", "0.5",
                   "--delta", "0.5", "--r-min", "1", "--r-max", "20",
                   "--n-radial", "4", "--n-angular", "8", "--out", str(out)) == 0
        doc = json.loads(out.read_text())
        assert doc["epsilon"] is None

    def test_invalid_params_exit_2(self, tmp_path):
        assert run("drift", "--target", POWER2, "--alpha", "1.5",
                   "--delta", "0.5", "--r-min", "1", "--r-max", "10",
                   "--out", str(tmp_path / "d.json")) == 2


class TestGrowth:
    def test_linear_tail_flagged_inconsistent(self, tmp_path, capsys):
        out = tmp_path / "growth.json"
        code = run("growth", "--target", POWER1, "--radii", "4,8,16,32,64",
                   "--out", str(out))
        assert code == 0
        assert "gc3_consistent=False" in capsys.readouterr().out
        doc = json.loads(out.read_text())
        assert doc["gc3_consistent"] is False

    def test_quadratic_tail_consistent(self, tmp_path):
        out = tmp_path / "growth.json"
        assert run("growth", "--target", POWER2, "--radii", "4,8,16,32,64",
                   "--out", str(out)) == 0
        assert json.loads(out.read_text())["gc3_consistent"] is True

    def test_bad_radii_exit_2(self, tmp_path):
        assert run("growth", "--target", POWER2, "--radii", "8,4",
                   "--out", str(tmp_path / "g.json")) == 2


class TestEstimate:
    def test_single_replicate_interval(self, tmp_path):
        out = tmp_path / "est.json"
        code = run("estimate", "--target", STD1, "--T", "2000", "--seed", "3",
                   "--observable", "x1", "--n-batches", "20", "--out", str(out))
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["ci_low"] < 0.0 < doc["ci_high"]
        assert doc["n_batches"] == 20
        batches = (tmp_path / "est.batches.csv").read_text().strip().split("\n")
        assert batches[0] == "replicate,batch,value"
        assert len(batches) == 21

    def test_rerun_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            assert run("estimate", "--target", STD1, "--T", "500", "--seed",
                       "9", "--observable", "x1^2", "--out", str(out)) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_replicates_aggregate_coverage(self, tmp_path):
        out = tmp_path / "multi.json"
        assert run("estimate", "--target", STD1, "--T", "400", "--seed", "5",
                   "--observable", "x1", "--replicates", "3",
                   "--n-batches", "10", "--out", str(out)) == 0
        doc = json.loads(out.read_text())
        assert doc["n_replicates"] == 3
        assert len(doc["replicates"]) == 3
        assert doc["replicates"][0]["seed"] == 5
        assert 0.0 <= doc["zero_coverage"] <= 1.0

    def test_worker_count_does_not_change_results(self, tmp_path):
        outs = []
        for name, workers in (("serial.json", "1"), ("pool.json", "2")):
            out = tmp_path / name
            assert run("estimate", "--target", STD1, "--T", "300", "--seed",
                       "2", "--observable", "x1", "--replicates", "2",
                       "--workers", workers, "--out", str(out)) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_bad_observable_exits_2(self, tmp_path, capsys):
        code = run("estimate", "--target", STD1, "--T", "100",
                   "--observable", "x9", "--out", str(tmp_path / "e.json"))
        assert code == 2
        assert "out of range" in capsys.readouterr().err
