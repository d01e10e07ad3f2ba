import pytest

from lfpsim import ConfigError, Direction, ParameterSet
from lfpsim.profiles import ConstantCRate, PiecewiseSchedule, make_profile, profile_eval


def test_one_c_current_density():
    # 2.31 mAh over one hour through 1.202 cm^2
    expected = 2.31e-3 / 1.202e-4
    assert profile_eval(ConstantCRate(1.0), 0.0) == pytest.approx(expected, rel=1e-12)
    assert profile_eval(ConstantCRate(1.0), 0.0) == pytest.approx(19.22, abs=5e-3)


def test_charge_is_negative_and_zero_rate_is_zero():
    assert profile_eval(ConstantCRate(0.5, "charge"), 10.0) == pytest.approx(-0.5 * ParameterSet().i_1c)
    assert profile_eval(ConstantCRate(0.0, Direction.CHARGE), 10.0) == 0.0
    assert ConstantCRate(0.0).end_time() is None
    assert ConstantCRate(0.5).end_time() == 7200.0


def test_schedule_lookup_and_hold():
    s = PiecewiseSchedule(((0, 5), (100, 0)))
    assert profile_eval(s, 50.0) == 5.0
    assert profile_eval(s, 100.0) == 0.0
    assert profile_eval(s, 1e6) == 0.0
    assert s.end_time() == 100.0


@pytest.mark.parametrize("steps", [(), ((1, 5),), ((0, 1), (10, 2), (10, 3)), ((0, float("nan")),)])
def test_schedule_validation(steps):
    with pytest.raises(ConfigError):
        PiecewiseSchedule(steps)


def test_negative_time_rejected():
    with pytest.raises(ConfigError):
        profile_eval(ConstantCRate(1.0), -1.0)


def test_bad_rate_rejected():
    with pytest.raises(ConfigError):
        ConstantCRate(-1.0)


def test_csv_schedule(tmp_path):
    f = tmp_path / "s.csv"
    f.write_text("# comment\nt,I\n0,1.5\n30,-2\n60,0\n")
    s = PiecewiseSchedule.from_csv(f)
    assert s.steps == ((0.0, 1.5), (30.0, -2.0), (60.0, 0.0))
    f.write_text("0,1\nx,2\n")
    with pytest.raises(ConfigError):
        PiecewiseSchedule.from_csv(f)
    with pytest.raises(ConfigError):
        PiecewiseSchedule.from_csv(tmp_path / "missing.csv")


def test_bundled_sample_schedule():
    s = make_profile({"kind": "schedule", "file": "impulsive_schedule.csv"})
    i1c = ParameterSet().i_1c
    currents = {round(i, 6) for _, i in s.steps}
    assert currents <= {round(i1c, 6), 0.0, round(-i1c, 6)}
    assert s.current(0.0) > 0 and min(i for _, i in s.steps) < 0
    assert s.end_time() == 7200.0


def test_make_profile_errors():
    with pytest.raises(ConfigError):
        make_profile({"kind": "sine"})
    with pytest.raises(ConfigError):
        make_profile({"kind": "schedule"})
    with pytest.raises(ConfigError):
        make_profile({"kind": "constant", "direction": "sideways"})
