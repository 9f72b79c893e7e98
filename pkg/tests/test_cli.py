import csv
import json
from pathlib import Path

import pytest

from pfr.cli import fmt, main
from pfr.config import ConfigError, parse_config, signal_from_config, signal_to_config
from pfr.signal import PiecewiseConstant, Sinusoid, Steady
from pfr.strategy import InfeasibleSpecError

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def write(tmp_path, text, name="s.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestConfig:
    def test_defaults_are_case_study(self):
        cfg = parse_config("")
        assert (cfg.params.n, cfg.params.k, cfg.params.L, cfg.params.v) == (2.0, 0.001, 1.0, 0.01)
        assert cfg.spec.tau == 100.0 and cfg.spec.two_input
        assert cfg.control == PiecewiseConstant(100.0, (0.0, 50.0), (1.5, 0.5))
        assert cfg.flow is None and cfg.run_type == "evaluate" and cfg.threads == 1

    def test_error_names_line_and_key(self):
        with pytest.raises(ConfigError) as e:
            parse_config("[reactor]\nn = 2\nk = fast\n")
        assert e.value.line == 3 and e.value.where == "reactor.k"
        assert str(e.value).startswith("line 3, reactor.k:")

    def test_unknown_key_and_section(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config("[reactor]\nspeed = 1\n")
        with pytest.raises(ConfigError, match="unknown section"):
            parse_config("[plot]\n")

    def test_invalid_values(self):
        with pytest.raises(ConfigError):
            parse_config("[reactor]\nk = -1\n")
        with pytest.raises(ConfigError):
            parse_config("[run]\ntype = dance\n")
        with pytest.raises(ConfigError):
            parse_config("[control]\nkind = piecewise\nbreakpoints = 0, 50\nvalues = 1\n")
        with pytest.raises(ConfigError):
            parse_config("[sweep]\nalphas = 0.5, 1.0\n")
        with pytest.raises(ConfigError):
            parse_config("[pde]\ncfl = 2\n")

    def test_infeasible(self):
        with pytest.raises(InfeasibleSpecError):
            parse_config("[constraint]\nc_mean = 3\n")

    def test_kinds(self):
        cfg = parse_config("[control]\nkind = sinusoid\namplitude = 0.5  ; inline comment\n"
                           "[flow]\nkind = steady\n")
        assert cfg.control == Sinusoid(100.0, 1.0, 0.5, 0.0)
        assert cfg.flow == Steady(100.0, 0.01)
        cfg = parse_config("[control]\nkind = bang_pair\nswitchings = 2\n")
        assert cfg.flow is not None and len(cfg.control.breakpoints) == 4

    @pytest.mark.parametrize("sig", [
        Steady(100.0, 1.25),
        Sinusoid(100.0, 1.0, 0.3, 0.1),
        PiecewiseConstant(100.0, (0.0, 1 / 3, 50.0), (0.1, 0.7, 1.9)),
    ])
    def test_signal_roundtrip(self, sig):
        assert signal_from_config(signal_to_config(sig), 100.0) == sig


def test_fmt():
    assert fmt(1 / 110) == "9.09090909091e-03"
    assert fmt(0) == "0.00000000000e+00"


class TestRun:
    def test_case_study_table(self, tmp_path, capsys):
        assert main(["run", str(SCENARIOS / "case_study.cfg"), "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        for s in ("9.0909", "8.9968", "8.9027", "6.8323"):
            assert s in out
        summary = json.loads((tmp_path / "case_study_summary.json").read_text())
        ids = {d["id"] for d in summary["deviations"]}
        assert {"two_input_schedule_flux_residual", "single_input_max_improvement"} <= ids
        assert summary["J"]["steady"] == pytest.approx(1 / 110, rel=1e-11)

    def test_sweep_single_csv(self, tmp_path):
        assert main(["run", str(SCENARIOS / "sweep_single.cfg"), "--out", str(tmp_path), "--check"]) == 0
        rows = list(csv.reader((tmp_path / "sweep_single.csv").open()))
        assert rows[0] == ["alpha", "J", "P"]
        assert len(rows) == 51

    def test_trial_check(self, tmp_path):
        assert main(["run", str(SCENARIOS / "trial.cfg"), "--check", "--out", str(tmp_path)]) == 0
        rows = list(csv.reader((tmp_path / "trial.csv").open()))
        assert rows[0] == ["sample", "J", "gap"] and len(rows) == 201

    def test_byte_reproducible(self, tmp_path, monkeypatch):
        cfg = SCENARIOS / "sweep_pair.cfg"
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["run", str(cfg), "--out", str(a)]) == 0
        monkeypatch.setenv("PFR_THREADS", "4")
        assert main(["run", str(cfg), "--out", str(b)]) == 0
        for name in ("sweep_pair.csv", "sweep_pair_summary.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_exit_codes(self, tmp_path, monkeypatch):
        assert main(["run", str(write(tmp_path, "[reactor]\nk = x\n"))]) == 2
        assert main(["run", str(tmp_path / "missing.cfg")]) == 2
        assert main(["run", str(write(tmp_path, "[constraint]\nc_mean = 3\n"))]) == 3
        bad = write(tmp_path, f"[control]\nkind = steady\nvalue = 1.2\n[output]\ndir = {tmp_path}\n")
        assert main(["run", str(bad)]) == 0
        assert main(["run", str(bad), "--check"]) == 4
        monkeypatch.setenv("PFR_THREADS", "many")
        assert main(["run", str(bad)]) == 2

    def test_infeasible_pair_at_runtime(self, tmp_path):
        cfg = write(tmp_path, "[reactor]\nL = 3\n[run]\ntype = trial\n[trial]\ntwo_input = true\nsamples = 2\n")
        assert main(["run", str(cfg), "--out", str(tmp_path)]) == 3

    def test_validate(self, capsys):
        assert main(["validate", str(SCENARIOS / "pde_check.cfg")]) == 0
        assert "run.type=pde_check" in capsys.readouterr().out

    def test_pde_check(self, tmp_path):
        cfg = write(tmp_path, "[control]\nkind = bang\n[pde]\nnx = 128\nresolutions = 64, 128\n[run]\ntype = pde_check\n",
                    name="pde.cfg")
        assert main(["run", str(cfg), "--out", str(tmp_path), "--check"]) == 0
        rows = list(csv.reader((tmp_path / "pde_outlet.csv").open()))
        assert rows[0] == ["t", "C_sim", "C_exact"]
