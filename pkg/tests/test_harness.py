import math

import numpy as np
import pytest

from lfpsim import ConfigError, NumericError
from lfpsim.harness import (CSV_MAGIC, SimulationConfig, checksum, convergence_study, dt_study,
                            read_csv, run, summary_dict, timing_report)
from lfpsim.kinetics import ocp, surface_stoichiometry


@pytest.fixture(scope="module")
def short():
    return SimulationConfig.from_dict({"stop": {"t_end": 60.0}})


class TestConfig:
    def test_defaults(self):
        cfg = SimulationConfig.from_dict({})
        assert (cfg.n_sep, cfg.n_cat, cfg.n_modes) == (4, 4, 6)
        assert cfg.integrator.dt == 0.5 and cfg.integrator.Dt == 3.0
        assert cfg.t_end == 3600.0 and cfg.v_window == (2.0, 4.2)
        assert cfg.soc_init == 0.95

    def test_charge_starts_empty(self):
        cfg = SimulationConfig.from_dict({"profile": {"direction": "charge"}})
        assert cfg.soc_init == 0.05

    @pytest.mark.parametrize("data", [
        {"grid": {"N4": 1}},
        {"params": {"nonsense": 1.0}},
        {"grid": {"N3": 0}},
        {"grid": {"N1": 2.5}},
        {"grid": 4},
        {"integrator": {"Dt": 0.1}},
        {"stop": {"v_min": 4.0, "v_max": 3.0}},
        {"profile": {"rate": 0.0}},
        {"model": {"stoich_mode": "none"}},
        {"model": {"soc_init": 1.2}},
        {"params": {"i0": -1.0}},
    ])
    def test_invalid(self, data):
        with pytest.raises(ConfigError):
            SimulationConfig.from_dict(data)

    def test_overrides(self):
        cfg = SimulationConfig.from_dict({}).with_overrides(
            ["grid.N3=8", "params.i0=0.05", "profile.direction=charge", "stop.t_end=10"])
        assert cfg.n_modes == 8 and cfg.params.i0 == 0.05 and cfg.t_end == 10.0
        with pytest.raises(ConfigError):
            cfg.with_overrides(["grid.N3"])
        with pytest.raises(ConfigError):
            cfg.with_overrides(["nosection.x=1"])

    def test_yaml_load(self, tmp_path):
        f = tmp_path / "c.yaml"
        f.write_text("grid:\n  N3: 4\nprofile:\n  kind: schedule\n  steps: [[0, 5.0], [20, 0.0]]\n")
        cfg = SimulationConfig.load(f)
        assert cfg.n_modes == 4 and cfg.t_end == 20.0
        f.write_text("- a\n- b\n")
        with pytest.raises(ConfigError):
            SimulationConfig.load(f)
        with pytest.raises(ConfigError):
            SimulationConfig.load(tmp_path / "absent.yaml")

    def test_relative_schedule_file(self, tmp_path):
        (tmp_path / "sched.csv").write_text("0,3\n10,0\n")
        (tmp_path / "c.yaml").write_text("profile: {kind: schedule, file: sched.csv}\n")
        assert SimulationConfig.load(tmp_path / "c.yaml").profile.steps == ((0.0, 3.0), (10.0, 0.0))


class TestRun:
    def test_csv_round_trip(self, short, tmp_path):
        out = tmp_path / "t.csv"
        res = run(short, output=out)
        text = out.read_text()
        assert text.startswith(CSV_MAGIC) and "\nt_s,I_A_m2,V_V" in text
        back = read_csv(out)
        assert len(back) == len(res.records)
        for a, b in zip(back, res.records):
            assert a.t == b.t and a.V == b.V and a.y_surf == b.y_surf and a.residual == b.residual
            assert a.newton_iters == b.newton_iters and math.isnan(a.wall_clock)
        assert checksum(back) == res.checksum

    def test_wall_clock_column(self, short, tmp_path):
        cfg = short.with_overrides(["output.wall_clock=true"])
        res = run(cfg, output=tmp_path / "w.csv")
        back = read_csv(tmp_path / "w.csv")
        assert [r.wall_clock for r in back] == [r.wall_clock for r in res.records]
        assert np.all(np.diff([r.wall_clock for r in back]) >= 0)

    def test_bit_identical_repeat(self, short, tmp_path):
        run(short, output=tmp_path / "a.csv")
        run(short, output=tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_records_monotone_time(self, short):
        t = [r.t for r in run(short).records]
        assert np.all(np.diff(t) > 0)

    def test_zero_current_flat(self):
        cfg = SimulationConfig.from_dict({"profile": {"rate": 0.0}, "stop": {"t_end": 100.0},
                                          "model": {"soc_init": 0.4}})
        res = run(cfg)
        p = cfg.params
        y = surface_stoichiometry(0.4 * p.c_s_max, p, cfg.saturation)
        U = float(ocp(y, "discharge"))
        assert max(abs(r.V - U) for r in res.records) < 1e-10
        assert max(abs(r.soc - 0.4) for r in res.records) < 1e-12

    def test_summary(self, short):
        res = run(short)
        s = summary_dict(res)
        assert s["stop_reason"] == "time" and s["t_final"] == 60.0
        assert s["total_coulombs"] == pytest.approx(60.0 * short.params.i_1c * short.params.area, rel=1e-12)
        assert s["corrections"] == 20

    def test_partial_output_on_failure(self, tmp_path):
        # far too stiff for the explicit step: blows up and aborts
        cfg = SimulationConfig.from_dict({"params": {"D_solid": 1e-10}, "stop": {"t_end": 60.0}})
        out = tmp_path / "bad.csv"
        with pytest.raises(NumericError):
            run(cfg, output=out)
        text = out.read_text()
        assert text.rstrip().splitlines()[-1].startswith("# diagnostic: NumericError")
        assert len(read_csv(out)) >= 1


class TestStudies:
    def test_dt_study_shares_run_path(self, short):
        rows = dt_study(short, periods=(3.0, 1.0), reference=0.5)
        assert [r["Dt"] for r in rows] == [3.0, 1.0, 0.5]
        assert rows[-1]["max_dV"] == 0.0 and rows[-1]["rms_dV"] == 0.0
        for r in rows:
            alone = run(short.replace(integrator={"Dt": r["Dt"]}))
            assert r["checksum"] == alone.checksum
        with pytest.raises(ConfigError):
            dt_study(short, periods=(3.0,), reference=6.0)

    def test_convergence_reference_row(self, short):
        rows = convergence_study(short, orders=(4,), reference=6)
        assert rows[-1]["rmse_V"] == 0.0 and rows[-1]["rmse_c_e"] == 0.0
        assert rows[0]["rmse_V"] > 0
        assert rows[0]["checksum"] == run(short.replace(grid={"N3": 4})).checksum
        with pytest.raises(ConfigError):
            convergence_study(short, orders=(4, 8), reference=6)

    def test_parallel_workers_match_serial(self, short, tmp_path):
        serial = dt_study(short, periods=(3.0,), reference=1.0)
        par = dt_study(short, periods=(3.0,), reference=1.0, workers=2, out_dir=tmp_path)
        assert [r["checksum"] for r in serial] == [r["checksum"] for r in par]
        assert sorted(p.name for p in tmp_path.iterdir()) == ["Dt_1.csv", "Dt_3.csv"]

    def test_timing_report(self):
        cfgs = [SimulationConfig.from_dict({"stop": {"t_end": T}, "integrator": {"Dt": D}})
                for T, D in ((61.0, 3.0), (100.0, 6.0))]
        rows = timing_report(cfgs, ["a", "b"])
        for r in rows:
            assert abs(r["corrections"] - r["expected_corrections"]) <= 1
            assert r["ratio"] < 1.0


def test_shipped_default_config_matches_defaults():
    from pathlib import Path

    import lfpsim
    path = Path(lfpsim.__file__).parent / "data" / "default_config.yaml"
    assert SimulationConfig.load(path).to_dict() == SimulationConfig.from_dict({}).to_dict()
