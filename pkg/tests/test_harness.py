import json

import pytest

from ransim.cli import EXIT_CONFIG, EXIT_OK, main
from ransim.harness import (ScenarioError, load_scenario, parse_vary,
                            report_run_dir, run_scenario, scenario_from_dict,
                            sweep_scenario)


def base_config(**overrides):
    cfg = {
        "duration_s": 3.0,
        "seed": 5,
        "ran": {
            "prb_total": 100, "tti_ms": 0.5, "tdd_pattern": "DDDSU",
            "bler": 0.0,
            "trace": {"kind": "constant", "bytes_per_prb": 30.0},
        },
        "flows": [
            {"controller": "choir", "wired_nd_ms": 1.0}
        ],
    }
    cfg.update(overrides)
    return cfg


def write_scenario(tmp_path, cfg, name="scn.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


class TestScenarioValidation:
    def test_minimal_valid(self):
        scn = scenario_from_dict(base_config())
        assert scn.duration_s == 3.0
        assert scn.flows[0].controller == "choir"

    def test_unknown_controller(self):
        cfg = base_config()
        cfg["flows"][0]["controller"] = "bbr"
        with pytest.raises(ScenarioError, match="unknown controller"):
            scenario_from_dict(cfg)

    def test_missing_duration(self):
        cfg = base_config()
        del cfg["duration_s"]
        with pytest.raises(ScenarioError, match="duration_s"):
            scenario_from_dict(cfg)

    def test_nonpositive_duration(self):
        with pytest.raises(ScenarioError, match="positive"):
            scenario_from_dict(base_config(duration_s=0))

    def test_empty_flows(self):
        with pytest.raises(ScenarioError):
            scenario_from_dict(base_config(flows=[]))

    def test_duplicate_flow_ids(self):
        cfg = base_config()
        cfg["flows"] = [{"controller": "choir", "flow_id": 3},
                        {"controller": "scone", "flow_id": 3}]
        with pytest.raises(ScenarioError, match="duplicate"):
            scenario_from_dict(cfg)

    def test_unknown_trace_kind(self):
        cfg = base_config()
        cfg["ran"]["trace"] = {"kind": "sawtooth"}
        with pytest.raises(ScenarioError, match="unknown kind"):
            scenario_from_dict(cfg)

    def test_bad_ran_values(self):
        cfg = base_config()
        cfg["ran"]["bler"] = 1.5
        with pytest.raises(ScenarioError, match="ran"):
            scenario_from_dict(cfg)

    def test_missing_trace_file(self, tmp_path):
        cfg = base_config(trace_path=str(tmp_path / "absent.csv"))
        with pytest.raises(ScenarioError, match="cannot open"):
            scenario_from_dict(cfg)

    def test_trace_path_overrides_inline(self, tmp_path):
        trace = tmp_path / "t.csv"
        trace.write_text("tti_index,bytes_per_prb\n0,12.5\n")
        cfg = base_config(trace_path=str(trace))
        scn = scenario_from_dict(cfg)
        assert scn.ran.schedule.bytes_per_prb(0) == 12.5

    def test_invalid_json_file(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(ScenarioError, match="invalid JSON"):
            load_scenario(p)


class TestRunScenario:
    def test_run_produces_outputs(self, tmp_path):
        scn = scenario_from_dict(base_config())
        out = tmp_path / "run1"
        metrics = run_scenario(scn, out_dir=out)
        assert (out / "metrics.csv").exists()
        assert (out / "frames.csv").exists()
        assert (out / "events.log").exists()
        assert metrics.flow(0).frames > 0
        header = (out / "metrics.csv").read_text().splitlines()[0]
        assert header == "flow_id,avg_delay_ms,p95_ms,p999_ms,avg_mbps,jain"

    def test_frame_count_matches_cadence(self):
        scn = scenario_from_dict(base_config(duration_s=3.0))
        metrics = run_scenario(scn)
        f = metrics.flow(0)
        # 3 s at 60 fps minus the 2 s warm-up window
        expected = int(1000 / 16.6)
        assert abs((f.frames + f.undelivered) - expected) <= 2

    def test_report_recomputes_identically(self, tmp_path):
        scn = scenario_from_dict(base_config())
        out = tmp_path / "run2"
        direct = run_scenario(scn, out_dir=out)
        again = report_run_dir(out)
        for fid in direct.flows:
            assert again.flow(fid).avg_delay_ms == \
                direct.flow(fid).avg_delay_ms
            assert again.flow(fid).avg_mbps == direct.flow(fid).avg_mbps

    def test_determinism_byte_identical_csvs(self, tmp_path):
        scn = scenario_from_dict(base_config(seed=9))
        out1, out2 = tmp_path / "a", tmp_path / "b"
        run_scenario(scn, out_dir=out1)
        run_scenario(scn, out_dir=out2)
        for name in ("metrics.csv", "frames.csv", "events.log"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


class TestSweep:
    def test_parse_vary(self):
        key, values = parse_vary("wired_nd=1,10,20")
        assert key == "wired_nd_ms"
        assert values == [1.0, 10.0, 20.0]

    def test_parse_vary_rejects_unknown(self):
        with pytest.raises(ScenarioError):
            parse_vary("bler=0.1,0.2")

    def test_sweep_applies_value(self, tmp_path):
        scn = scenario_from_dict(base_config())
        results = sweep_scenario(scn, "wired_nd_ms", [1.0, 5.0],
                                 out_dir=tmp_path)
        assert set(results) == {1.0, 5.0}
        assert (tmp_path / "wired_nd_ms=1" / "metrics.csv").exists()
        assert results[5.0].flow(0).avg_delay_ms > \
            results[1.0].flow(0).avg_delay_ms


class TestCli:
    def test_run_ok(self, tmp_path, capsys):
        p = write_scenario(tmp_path, base_config())
        code = main(["run", str(p), "--out", str(tmp_path / "out")])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "flow_id,avg_delay_ms" in out

    def test_config_error_exit_code(self, tmp_path, capsys):
        cfg = base_config()
        cfg["flows"][0]["controller"] = "bbr"
        p = write_scenario(tmp_path, cfg)
        assert main(["run", str(p)]) == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_missing_scenario_file(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "none.json")]) == EXIT_CONFIG

    def test_seed_override_changes_nothing_without_loss(self, tmp_path):
        p = write_scenario(tmp_path, base_config())
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        assert main(["run", str(p), "--seed", "1",
                     "--out", str(out1)]) == EXIT_OK
        assert main(["run", str(p), "--seed", "2",
                     "--out", str(out2)]) == EXIT_OK
        # bler = 0: the seed draws nothing, runs must coincide
        assert (out1 / "metrics.csv").read_bytes() == \
            (out2 / "metrics.csv").read_bytes()

    def test_sweep_and_report(self, tmp_path, capsys):
        p = write_scenario(tmp_path, base_config())
        out = tmp_path / "sweep"
        assert main(["sweep", str(p), "--vary", "wired_nd=1,5",
                     "--out", str(out)]) == EXIT_OK
        capsys.readouterr()
        assert main(["report", str(out)]) == EXIT_OK
        report = capsys.readouterr().out
        assert "wired_nd_ms=1" in report
        assert "wired_nd_ms=5" in report

    def test_report_empty_dir(self, tmp_path, capsys):
        assert main(["report", str(tmp_path)]) == EXIT_CONFIG
