import json

import pytest

from windfreq.cli import main
from windfreq.grid import governor_dc_gain_total
from windfreq.presets import PRESET_NAMES, load_preset, preset_checksum
from windfreq.scenario import gas_governor, hydro_governor, scenario_from_dict, \
    scenario_to_dict
from windfreq.simulator import ScenarioError


class TestPresets:
    def test_catalog(self):
        assert PRESET_NAMES == ("multi_machine", "two_machine")

    def test_unknown_name_lists_available(self):
        with pytest.raises(KeyError, match="multi_machine, two_machine"):
            load_preset("nope")

    def test_two_machine_values(self):
        doc = load_preset("two_machine")
        sc = scenario_from_dict(doc)
        assert governor_dc_gain_total(sc.governors, sc.grid.s_base_mva) == pytest.approx(17.0)
        assert sc.grid.load_pu * sc.grid.s_base_mva == pytest.approx(150.0)
        ev = sc.events[0]
        assert ev.magnitude_pu * sc.grid.s_base_mva == pytest.approx(15.0)
        assert ev.magnitude_pu == pytest.approx(0.1 * sc.grid.load_pu)

    def test_presets_validate(self):
        for name in PRESET_NAMES:
            sc = scenario_from_dict(load_preset(name))
            assert sc.validate() == []

    def test_checksum_stable(self):
        assert preset_checksum("two_machine") == preset_checksum("two_machine")
        assert preset_checksum("two_machine") != preset_checksum("multi_machine")

    def test_mutating_a_copy_is_safe(self):
        doc = load_preset("two_machine")
        doc["grid"]["inertia_s"] = 99.0
        assert load_preset("two_machine")["grid"]["inertia_s"] == 4.2


class TestSchema:
    def test_round_trip(self):
        for name in PRESET_NAMES:
            sc = scenario_from_dict(load_preset(name))
            doc = scenario_to_dict(sc)
            again = scenario_from_dict(json.loads(json.dumps(doc)))
            assert again == sc

    def test_unknown_key_rejected_with_location(self):
        doc = load_preset("two_machine")
        doc["grid"]["mystery"] = 1.0
        with pytest.raises(ScenarioError, match=r"\$\.grid\.mystery: unknown key"):
            scenario_from_dict(doc)

    def test_unknown_nested_key(self):
        doc = load_preset("two_machine")
        doc["turbines"][0]["spec"]["blade_count"] = 3
        with pytest.raises(ScenarioError, match=r"\$\.turbines\[0\]\.spec"):
            scenario_from_dict(doc)

    def test_missing_required_key(self):
        doc = load_preset("two_machine")
        del doc["grid"]["inertia_s"]
        with pytest.raises(ScenarioError, match=r"\$\.grid\.inertia_s: missing"):
            scenario_from_dict(doc)

    def test_multiple_errors_reported_together(self):
        doc = load_preset("two_machine")
        doc["governors"][0]["params"]["bogus"] = 1
        doc["events"][0]["oops"] = 2
        with pytest.raises(ScenarioError) as err:
            scenario_from_dict(doc)
        msg = str(err.value)
        assert "bogus" in msg and "oops" in msg

    def test_unknown_governor_kind(self):
        doc = load_preset("two_machine")
        doc["governors"][0]["kind"] = "steam_magic"
        with pytest.raises(ScenarioError, match="steam_magic"):
            scenario_from_dict(doc)

    def test_surrogate_governor_gains(self):
        hydro = hydro_governor(0.05, 0.38, 5.0, rated_mva=800.0, name="G3")
        assert hydro.dc_gain == pytest.approx(-20.0)
        gas = gas_governor(0.05, 1.0, rated_mva=700.0, name="G4")
        assert gas.dc_gain == pytest.approx(-20.0)
        # transient droop: the fast gain is the temporary-droop one
        fast = hydro.num[0] / hydro.den[0]
        assert fast == pytest.approx(-1.0 / 0.38, rel=1e-12)


class TestCli:
    def test_dump_preset(self, tmp_path, capsys):
        rc = main(["--dump-preset", "two_machine", "--out", str(tmp_path)])
        assert rc == 0
        written = json.loads((tmp_path / "two_machine.json").read_text())
        assert written["grid"]["s_base_mva"] == 200.0

    def test_solve_on_file_scenario(self, tmp_path):
        doc = load_preset("two_machine")
        doc["solver"]["nodes"] = 30
        path = tmp_path / "sc.json"
        path.write_text(json.dumps(doc))
        rc = main(["solve", "--scenario", str(path), "--out", str(tmp_path / "out")])
        assert rc == 0
        metrics = json.loads((tmp_path / "out" / "solve_metrics.json").read_text())
        assert metrics["alpha"] == pytest.approx(1.19, abs=0.01)
        trace = (tmp_path / "out" / "trajectory.csv").read_text().splitlines()
        assert trace[0] == "t_s,df_pu,dpe_pu,denergy_pu_s,dpm_pu"
        assert len(trace) == 3002

    def test_validation_exit_code(self, tmp_path, capsys):
        doc = load_preset("two_machine")
        doc["grid"]["mystery"] = 1.0
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        rc = main(["solve", "--scenario", str(path), "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "mystery" in capsys.readouterr().err

    def test_missing_file_exit_code(self, tmp_path):
        rc = main(["simulate", "--scenario", str(tmp_path / "ghost.json"),
                   "--out", str(tmp_path / "o")])
        assert rc == 2

    def test_outputs_byte_reproducible(self, tmp_path):
        doc = load_preset("two_machine")
        doc["solver"]["nodes"] = 24
        path = tmp_path / "sc.json"
        path.write_text(json.dumps(doc))
        for d in ("a", "b"):
            rc = main(["solve", "--scenario", str(path), "--out", str(tmp_path / d)])
            assert rc == 0
        assert (tmp_path / "a" / "trajectory.csv").read_bytes() == \
            (tmp_path / "b" / "trajectory.csv").read_bytes()
        assert (tmp_path / "a" / "solve_metrics.json").read_bytes() == \
            (tmp_path / "b" / "solve_metrics.json").read_bytes()

    def test_synthesize_reports_gain(self, tmp_path):
        rc = main(["synthesize", "--preset", "two_machine",
                   "--out", str(tmp_path / "o"), "--nodes", "40"])
        assert rc == 0
        doc = json.loads((tmp_path / "o" / "controller.json").read_text())
        assert -14.6 < doc["gain_kw"] < -13.6
        assert doc["allocation"] == [1.0]
        assert len(doc["mirror"]["a"]) == 1
