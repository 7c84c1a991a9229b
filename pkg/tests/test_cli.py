import json
from pathlib import Path

import numpy as np
import pytest

from nvhyper import cli
from nvhyper.cavity import ScatteringCoeffs
from nvhyper.circuit import ProtocolResult
from nvhyper.hilbert import PhotonInputSpec, StateVector

import oracles

GOLDEN = Path(__file__).parent / "golden" / "simulate_stages.json"


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv, "--json")
    assert code == 0
    return json.loads(out)


def spec_flag(pairs):
    return ",".join(f"{float(v.real)!r},{float(v.imag)!r}" for pair in pairs for v in pair)


class TestCoeffs:
    def test_preset_endpoint(self, capsys):
        d = run_json(capsys, "coeffs", "--preset", "realistic", "--ks-over-k", "0")
        assert d["r"]["re"] == pytest.approx(0.9454, abs=1e-4)
        assert d["cooperativity"] == pytest.approx(8.654, abs=1e-3)

    def test_cold_cavity(self, capsys):
        d = run_json(capsys, "coeffs", "--g", "0", "--ks-over-k", "0", "--resonant")
        assert d["r0"] == {"re": 0.0, "im": 0.0}
        assert d["t0"]["re"] == -1 and d["t0"]["im"] == 0

    def test_strong_coupling_limit(self, capsys):
        d = run_json(capsys, "coeffs", "--cooperativity", "1e6", "--ks-over-k", "0",
                     "--resonant")
        assert abs(d["r"]["re"] - 1) < 1e-5

    def test_default_headline_factors(self, capsys):
        d = run_json(capsys, "coeffs")
        assert d["coupled_factor"]["re"] == pytest.approx(0.8911, abs=1e-4)
        assert d["uncoupled_factor"]["re"] == pytest.approx(-0.90476, abs=1e-5)

    def test_text_output(self, capsys):
        code, out, _ = run(capsys, "coeffs")
        assert code == 0
        assert out.splitlines()[0].startswith("  r = +0.945")
        assert "g^2/(kappa*gamma) = 8.65385" in out

    def test_json_round_trip(self, capsys):
        d = run_json(capsys, "coeffs")
        c = ScatteringCoeffs.from_json(d)
        assert ScatteringCoeffs.from_json(c.to_json()) == c
        assert json.loads(json.dumps(d)) == d

    @pytest.mark.parametrize("argv, word", [
        (["--kappa", "0"], "kappa > 0"), (["--g", "-1"], "g >= 0"),
        (["--gamma", "-2"], "gamma > 0"), (["--ks-over-k", "-0.1"], "kappa_s >= 0")])
    def test_invalid_parameters_exit_2(self, capsys, argv, word):
        code, _, err = run(capsys, "coeffs", *argv)
        assert code == 2
        assert word in err

    def test_usage_error_exit_2(self, capsys):
        code, _, _ = run(capsys, "coeffs", "--no-such-flag")
        assert code == 2

    def test_units_kappa(self, capsys):
        a = run_json(capsys, "coeffs", "--units", "kappa")
        b = run_json(capsys, "coeffs")
        assert a["r"]["re"] == pytest.approx(b["r"]["re"], abs=1e-12)


class TestConfig:
    def write(self, tmp_path, data):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(data))
        return str(p)

    def test_unknown_key_rejected(self, capsys, tmp_path):
        path = self.write(tmp_path, {"cavty": {"g": 1}})
        code, _, err = run(capsys, "coeffs", "--config", path)
        assert code == 2 and "cavty" in err

    def test_unknown_cavity_key_rejected(self, capsys, tmp_path):
        path = self.write(tmp_path, {"cavity": {"kapa": 1}})
        code, _, err = run(capsys, "coeffs", "--config", path)
        assert code == 2 and "kapa" in err

    def test_string_complex_rejected(self, capsys, tmp_path):
        path = self.write(tmp_path, {"coeffs": {"r": "1", "t": "0", "r0": "0", "t0": "-1"}})
        code, _, _ = run(capsys, "coeffs", "--config", path)
        assert code == 2

    def test_file_values_used(self, capsys, tmp_path):
        path = self.write(tmp_path, {"units": "kappa", "cavity": {
            "g": 0.0, "kappa": 1.0, "kappa_s": 0.0, "gamma": 1.0}})
        d = run_json(capsys, "coeffs", "--config", path)
        assert d["t0"]["re"] == pytest.approx(-1) and d["r"]["re"] == pytest.approx(0)

    def test_flags_override_file(self, capsys, tmp_path):
        path = self.write(tmp_path, {"units": "kappa", "cavity": {"g": 0.0, "kappa": 1.0}})
        d = run_json(capsys, "coeffs", "--config", path, "--g", "10")
        assert d["r"]["re"] > 0.9

    def test_merged_values_revalidated(self, capsys, tmp_path):
        path = self.write(tmp_path, {"cavity": {"kappa": 1.0}})
        code, _, err = run(capsys, "coeffs", "--config", path, "--kappa", "-1")
        assert code == 2 and "kappa > 0" in err

    def test_global_flags_before_command(self, capsys, tmp_path):
        path = self.write(tmp_path, {"seed": 11})
        code, out, _ = run(capsys, "--json", "--config", path, "coeffs")
        assert code == 0 and "cooperativity" in json.loads(out)

    def test_bad_seed(self, capsys):
        code, _, _ = run(capsys, "parity", "--seed", "-1")
        assert code == 2


class TestTruthTable:
    def test_pass(self, capsys):
        code, out, _ = run(capsys, "truth-table")
        lines = out.splitlines()
        assert code == 0
        assert lines[-1] == "PASS: matches CPF x CPF x CPF"
        assert len(lines) == 1 + 64 + 1

    def test_rows(self, capsys):
        d = run_json(capsys, "truth-table")
        phases = {(r["input_a"], r["input_b"]): r["phase"]["re"] for r in d["rows"]}
        assert phases[("w2,m2,s", "w2,m2,s")] == pytest.approx(-1)
        assert phases[("w1,m1,l", "w2,m2,s")] == pytest.approx(1)
        assert d["pass"] and len(d["rows"]) == 64

    def test_fail_exit_1(self, capsys, monkeypatch):
        monkeypatch.setattr(cli, "cpf_phase", lambda a, b: 1)
        code, out, _ = run(capsys, "truth-table")
        assert code == 1
        assert out.splitlines()[-1].startswith("FAIL")


class TestParity:
    @pytest.mark.parametrize("outcome, parity", [("+++", "even"), ("---", "odd")])
    def test_forced_outcome(self, capsys, outcome, parity):
        d = run_json(capsys, "parity", "--force-outcome", outcome, "--random-specs",
                     "--seed", "21")
        assert d["outcome"] == outcome
        assert d["parity_triple"] == [parity] * 3
        pa = [tuple(complex(c["re"], c["im"]) for c in d["photon_a"][k]) for k in cli.PHOTON_KEYS]
        pb = [tuple(complex(c["re"], c["im"]) for c in d["photon_b"][k]) for k in cli.PHOTON_KEYS]
        state = StateVector.from_json(d["final_state"])
        spins = 0 if outcome == "+++" else 7
        got = state.amplitudes[:, :, spins]
        # the odd factors leave feed-forward in even form with photon b's DOFs flipped
        if outcome == "---":
            pb = [pair[::-1] for pair in pb]
        expected = oracles.parity_collapse(pa, pb, "+++")
        assert oracles.same_up_to_phase(got, expected) < 1e-10

    def test_specs_from_flags(self, capsys):
        rng = np.random.default_rng(3)
        pa, pb = oracles.random_pairs(rng), oracles.random_pairs(rng)
        d = run_json(capsys, "parity", "--force-outcome", "++-", "--spec-a", spec_flag(pa),
                     "--spec-b", spec_flag(pb))
        assert d["parity_triple"] == ["even", "even", "odd"]
        got = StateVector.from_json(d["final_state"]).amplitudes[:, :, 4]
        # feed-forward flips photon b's time-bin so the odd factor takes even form
        expected = oracles.parity_collapse(pa, [pb[0], pb[1], pb[2][::-1]], "+++")
        assert oracles.same_up_to_phase(got, expected) < 1e-10

    def test_shot_frequencies(self, capsys):
        d = run_json(capsys, "parity", "--shots", "100000", "--seed", "5")
        assert sum(d["frequencies"].values()) == pytest.approx(1)
        for f in d["frequencies"].values():
            assert abs(f - 0.125) <= 0.005

    def test_seeded_sampling_deterministic(self, capsys):
        a = run(capsys, "parity", "--random-specs", "--seed", "9")
        b = run(capsys, "parity", "--random-specs", "--seed", "9")
        assert a == b

    def test_text_report(self, capsys):
        code, out, _ = run(capsys, "parity", "--force-outcome", "-++")
        assert code == 0
        assert "outcome: -++" in out
        assert "parity (freq, spatial, time-bin): odd, even, even" in out
        assert "branch probability: 0.125" in out

    def test_dash_leading_values(self, capsys):
        code, out, _ = run(capsys, "parity", "--force-outcome", "-+-", "--spec-b",
                           "-1,0,0,0,1,0,0,0,0,0,1,0")
        assert code == 0 and "outcome: -+-" in out

    def test_bad_outcome(self, capsys):
        code, _, _ = run(capsys, "parity", "--force-outcome", "+x+")
        assert code == 2


class TestBlockMetrics:
    def test_preset(self, capsys):
        d = run_json(capsys, "block-metrics")
        assert abs(d["quadrature"]["avg_fidelity"] - 0.9999) <= 5e-4
        assert abs(d["quadrature"]["avg_efficiency"] - 0.6601) <= 5e-4
        assert abs(d["closed_form"]["avg_efficiency"] - 0.6601) <= 5e-4

    def test_ideal(self, capsys):
        d = run_json(capsys, "block-metrics", "--ideal")
        assert d["quadrature"]["avg_fidelity"] == pytest.approx(1, abs=1e-12)
        assert d["quadrature"]["avg_efficiency"] == pytest.approx(1, abs=1e-12)
        assert d["closed_form"]["avg_efficiency"] == 1

    def test_monte_carlo_seed_7_within_3_sigma(self, capsys):
        d = run_json(capsys, "block-metrics", "--method", "monte-carlo", "--samples", "100000",
                     "--seed", "7")
        mc = d["monte_carlo"]
        assert mc["z_fidelity"] <= 3, mc
        assert mc["z_efficiency"] <= 3, mc

    def test_monte_carlo_other_seed(self, capsys):
        d = run_json(capsys, "block-metrics", "--method", "monte-carlo", "--seed", "3")
        assert d["monte_carlo"]["agrees_3sigma"]


class TestSweep:
    def test_single_point(self, capsys, tmp_path):
        out = tmp_path / "one.csv"
        code, text, _ = run(capsys, "sweep", "--grid", "ks=0.1 coop=8.654", "--output", str(out))
        assert code == 0
        assert text.strip() == f"wrote 1 rows to {out}"
        lines = out.read_text().splitlines()
        assert len(lines) == 2
        ks, coop, f, eta = (float(v) for v in lines[1].split(","))
        assert (ks, coop) == (0.1, 8.654)
        assert abs(f - 0.9999) <= 5e-4 and abs(eta - 0.6601) <= 5e-4

    def test_repeat_is_byte_identical(self, capsys, tmp_path):
        paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
        for p in paths:
            assert run(capsys, "sweep", "--grid", "ks=0:0.5:4 coop=0.5:30:3", "--nodes", "32",
                       "--output", str(p), "--seed", "4")[0] == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_default_grid_contains_realistic_point(self):
        grid = cli.parse_grid(None)
        assert 0.1 in grid.ks_over_k and 8.654 in grid.cooperativity
        assert len(grid.ks_over_k) == 26 and len(grid.cooperativity) == 61

    @pytest.mark.parametrize("text", ["ks=0:1:3", "ks=0:1:0 coop=1", "kz=1 coop=1",
                                      "ks=0.2,0.1 coop=1"])
    def test_bad_grid(self, capsys, tmp_path, text):
        code, _, _ = run(capsys, "sweep", "--grid", text, "--output", str(tmp_path / "x.csv"))
        assert code == 2


class TestSimulate:
    def test_ideal_basis_success(self, capsys):
        d = json.loads(run(capsys, "simulate", "--spec-a", "1,0,0,0,1,0,0,0,0,0,1,0")[1])
        assert d["success_probability"] == pytest.approx(1, abs=1e-12)

    def test_lossy_success_below_one(self, capsys):
        d = json.loads(run(capsys, "simulate", "--lossy")[1])
        assert d["success_probability"] < 1

    @pytest.mark.parametrize("mode", ["cpf", "parity"])
    def test_intermediate_labels_match_golden(self, capsys, mode):
        d = json.loads(run(capsys, "simulate", "--mode", mode, "--record-intermediates")[1])
        labels = [s["stage"] for s in d["intermediates"]]
        assert labels == json.loads(GOLDEN.read_text())[mode]

    def test_json_round_trip(self, capsys, tmp_path):
        out = tmp_path / "run.json"
        code, _, _ = run(capsys, "simulate", "--mode", "parity", "--random-specs", "--seed", "8",
                         "--record-intermediates", "--output", str(out))
        assert code == 0
        data = json.loads(out.read_text())
        assert ProtocolResult.from_json(data).to_json() == data

    def test_deterministic_given_seed(self, capsys):
        a = run(capsys, "simulate", "--random-specs", "--seed", "2")
        b = run(capsys, "simulate", "--random-specs", "--seed", "2")
        assert a == b
