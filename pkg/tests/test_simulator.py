from dataclasses import replace

import numpy as np
import pytest

from windfreq import simulator as sim
from windfreq.simulator import DisturbanceEvent, ScenarioError, coi_frequency, metrics, run


@pytest.fixture(scope="module")
def base_result(two_machine_scenario, two_machine_solution):
    return run(two_machine_scenario, alpha_override=two_machine_solution.alpha)


class TestRun:
    def test_no_disturbance_flat(self, two_machine_scenario):
        sc = replace(two_machine_scenario, events=(),
                     sim=replace(two_machine_scenario.sim, duration_s=40.0))
        res = run(sc, alpha_override=1.19)
        assert np.max(np.abs(res.df_pu)) == 0.0
        assert np.max(np.abs(res.dpe_pu)) == 0.0
        for j in range(res.n_wt):
            assert np.ptp(res.wt_omega_rad_s[:, j]) == 0.0

    def test_no_support_initial_rocof(self, two_machine_scenario):
        sc = replace(
            two_machine_scenario,
            turbines=tuple(replace(t, controller="none")
                           for t in two_machine_scenario.turbines))
        res = run(sc)
        window = (res.t >= 0) & (res.t <= 0.1)
        expected = -0.075 / (2.0 * sc.grid.inertia_s)
        # peak slope in the first 100 ms is the initial rate of decline
        measured = res.dfdot_pu_s[window].min()
        assert abs(measured - expected) <= 0.005 * abs(expected)

    def test_step_halving_agreement(self, two_machine_scenario, base_result):
        fine = replace(two_machine_scenario,
                       sim=replace(two_machine_scenario.sim, step_s=0.005))
        res5 = run(fine, alpha_override=base_result.alpha)
        n10, n5 = base_result.df_pu.min(), res5.df_pu.min()
        assert abs(n10 - n5) / abs(n10) < 1e-4

    def test_determinism(self, two_machine_scenario, base_result):
        again = run(two_machine_scenario, alpha_override=base_result.alpha)
        assert np.array_equal(base_result.df_pu, again.df_pu)
        assert np.array_equal(base_result.wt_pe_mw, again.wt_pe_mw)
        assert base_result.exit_events == again.exit_events

    def test_swing_residual_every_step(self, two_machine_scenario, base_result):
        rec = metrics(base_result)
        assert rec.max_swing_residual <= 1e-8

    def test_validation_collects_all_problems(self, two_machine_scenario):
        bad = replace(
            two_machine_scenario,
            events=(DisturbanceEvent(time_s=0.0037, kind="load_surge", magnitude_pu=-1.0),
                    DisturbanceEvent(time_s=999.0, kind="generation_trip", unit="nope")),
            sim=replace(two_machine_scenario.sim, step_s=0.5),
        )
        with pytest.raises(ScenarioError) as err:
            run(bad)
        msg = str(err.value)
        assert "step_s" in msg
        assert "magnitude_pu" in msg
        assert "nope" in msg
        assert "outside the simulation window" in msg


class TestExitBehavior:
    def test_power_cross_exit_smooth(self, base_result):
        assert len(base_result.exit_events) == 1
        ev = base_result.exit_events[0]
        assert ev["kind"] == "power_cross"
        assert ev["power_step_pu"] <= 1e-6
        rec = metrics(base_result)
        assert not rec.secondary_dip

    def test_rotor_recovers_after_exit(self, two_machine_scenario, base_result):
        long = replace(two_machine_scenario,
                       sim=replace(two_machine_scenario.sim, duration_s=240.0))
        res = run(long, alpha_override=base_result.alpha)
        t_e = res.exit_events[0]["t_e_s"]
        i = np.searchsorted(res.t, min(t_e + 200.0, res.t[-1]))
        omega_ratio = res.wt_omega_rad_s[min(i, len(res.t) - 1), 0] / res.wt_omega0[0]
        assert abs(omega_ratio - 1.0) <= 0.01

    def test_horizon_exit_blend(self, two_machine_scenario, base_result):
        # a deficit deep enough that the command never re-crosses the sagged
        # tracking curve: the window closes the support instead
        ev = (DisturbanceEvent(time_s=0.0, kind="load_surge",
                               magnitude_pu=0.15 * two_machine_scenario.grid.load_pu),)
        sc = replace(two_machine_scenario, events=ev,
                     sim=replace(two_machine_scenario.sim, duration_s=240.0))
        res = run(sc, alpha_override=base_result.alpha)
        kinds = [e["kind"] for e in res.exit_events]
        assert kinds == ["horizon"]
        assert 0.0 < res.exit_events[0]["gamma"] < 1.0
        assert res.exit_events[0]["power_step_pu"] <= 1e-6
        rec = metrics(res)
        assert not rec.secondary_dip
        # monotone convergence back to the tracking equilibrium
        t_e = res.exit_events[0]["t_e_s"]
        post = res.wt_omega_rad_s[res.t >= t_e, 0]
        gaps = np.abs(post - res.wt_omega0[0])
        assert np.all(np.diff(gaps) <= 1e-9)

    def test_floor_exit_on_extreme_deficit(self, two_machine_scenario, base_result):
        ev = (DisturbanceEvent(time_s=0.0, kind="load_surge",
                               magnitude_pu=0.4 * two_machine_scenario.grid.load_pu),)
        sc = replace(two_machine_scenario, events=ev)
        res = run(sc, alpha_override=base_result.alpha)
        assert any(e["kind"] == "speed_floor" for e in res.exit_events)
        floor = sc.turbines[0].spec.floor_speed_rad
        assert np.min(res.wt_omega_rad_s) >= floor - 1e-9


class TestEvents:
    def test_trip_removes_governor_share(self, two_machine_scenario):
        sc = replace(
            two_machine_scenario,
            turbines=tuple(replace(t, controller="none")
                           for t in two_machine_scenario.turbines),
            events=(DisturbanceEvent(time_s=0.0, kind="generation_trip",
                                     unit="G1", fraction=0.25),),
            sim=replace(two_machine_scenario.sim, duration_s=120.0),
        )
        res = run(sc)
        # late-time deviation settles at -P_d / (D + 0.75 K_g)
        p_d = res.p_d_pu[-1]
        expected = -p_d / (1.0 + 0.75 * 17.0)
        assert res.df_pu[-1] == pytest.approx(expected, rel=0.02)

    def test_trip_magnitude_from_dispatch(self, two_machine_scenario):
        sc = replace(
            two_machine_scenario,
            events=(DisturbanceEvent(time_s=0.0, kind="generation_trip",
                                     unit="G1", fraction=0.1),))
        res = run(sc, alpha_override=1.19)
        wind_mw = res.wt_p_e0_mw.sum()
        expected = 0.1 * (150.0 - wind_mw) / 200.0
        assert res.p_d_pu[-1] == pytest.approx(expected, rel=1e-9)

    def test_event_mid_run(self, two_machine_scenario, base_result):
        sc = replace(
            two_machine_scenario,
            events=(DisturbanceEvent(time_s=5.0, kind="load_surge",
                                     magnitude_pu=0.075),),
            sim=replace(two_machine_scenario.sim, duration_s=60.0))
        res = run(sc, alpha_override=base_result.alpha)
        before = res.t < 5.0
        assert np.max(np.abs(res.df_pu[before])) == 0.0
        assert res.df_pu.min() == pytest.approx(base_result.df_pu.min(), rel=1e-6)


class TestMetrics:
    def test_flat_trace_degenerate(self, two_machine_scenario):
        sc = replace(two_machine_scenario, events=(),
                     sim=replace(two_machine_scenario.sim, duration_s=40.0))
        rec = metrics(run(sc, alpha_override=1.19), nadir_ref_pu=-0.005)
        assert rec.degenerate
        assert rec.e_r_pct == -100.0

    def test_reference_match_zero_degradation(self, base_result, two_machine_solution):
        rec = metrics(base_result, nadir_ref_pu=two_machine_solution.nadir_pu)
        assert abs(rec.e_r_pct) < 0.5

    def test_strategy_ordering_two_machine(self, two_machine_scenario):
        out = sim.compare_strategies(two_machine_scenario)
        n = out["none"][1].nadir_hz
        v = out["classic_vic"][1].nadir_hz
        a = out["optimal_aapc"][1].nadir_hz
        assert abs(a) < abs(v) < abs(n)


class TestCoiFrequency:
    def test_identical_traces(self):
        traces = np.tile(np.linspace(50.0, 49.5, 11)[:, None], (1, 3))
        out = coi_frequency(traces, [4.0, 5.0, 6.0], [100.0, 200.0, 300.0])
        np.testing.assert_allclose(out, traces[:, 0])

    def test_equal_weight_mean(self):
        traces = np.column_stack([np.full(5, 50.0), np.full(5, 49.0)])
        out = coi_frequency(traces, [4.0, 4.0], [100.0, 100.0])
        np.testing.assert_allclose(out, 49.5)

    def test_weight_scaling_invariance(self):
        rng = np.random.default_rng(0)
        traces = 50.0 + 0.1 * rng.normal(size=(20, 4))
        h = rng.uniform(2.0, 6.0, 4)
        s = rng.uniform(100.0, 900.0, 4)
        np.testing.assert_allclose(coi_frequency(traces, h, s),
                                   coi_frequency(traces, 10.0 * h, 10.0 * s))

    def test_mismatched_lengths(self):
        with pytest.raises(ValueError):
            coi_frequency(np.zeros((5, 3)), [4.0, 5.0], [100.0, 200.0])

    def test_csv_ingestion(self, tmp_path):
        path = tmp_path / "machines.csv"
        path.write_text("t_s,g1_hz,g2_hz\n0.0,50.0,49.8\n0.1,49.9,49.7\n")
        t, cols, names = sim.read_frequency_csv(path)
        np.testing.assert_allclose(t, [0.0, 0.1])
        assert cols.shape == (2, 2)
        assert names == ["g1_hz", "g2_hz"]
        out = coi_frequency(cols, [4.0, 4.0], [1.0, 1.0])
        np.testing.assert_allclose(out, [49.9, 49.8])


class TestInsensitivitySweep:
    def test_in_band_and_degraded(self, two_machine_scenario, two_machine_solution):
        load = two_machine_scenario.grid.load_pu
        p_list = [0.04 * load, 0.10 * load, 0.40 * load]
        rows, p_d_max = sim.insensitivity_sweep(
            two_machine_scenario, p_list, alpha=two_machine_solution.alpha,
            reference_nadir_per_pd=two_machine_solution.nadir_pu / 0.075)
        assert rows[0]["e_r_pct"] <= 2.0
        assert rows[1]["e_r_pct"] <= 2.0
        assert rows[2]["e_r_pct"] > 5.0
        assert p_d_max == pytest.approx(0.10 * load)

    def test_wind_speed_raises_margin(self, two_machine_scenario, two_machine_solution):
        load = two_machine_scenario.grid.load_pu
        p_list = np.array([0.10, 0.20, 0.30, 0.40, 0.50]) * load
        ref = two_machine_solution.nadir_pu / 0.075
        maxima = []
        for v in (8.0, 10.0):
            sc = replace(two_machine_scenario,
                         turbines=(replace(two_machine_scenario.turbines[0],
                                           wind_speed_ms=v),))
            _, p_max = sim.insensitivity_sweep(
                sc, p_list, alpha=two_machine_solution.alpha,
                reference_nadir_per_pd=ref)
            maxima.append(p_max)
        assert maxima[1] >= maxima[0]
