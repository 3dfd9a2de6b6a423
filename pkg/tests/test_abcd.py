import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from abcd_oracle import FIG2, oracle_step
from abcdpiml.abcd import AbcdFluxes, AbcdParams, AbcdState, simulate, simulate_arrays, step, trajectory_csv
from abcdpiml.timeseries import Forcing, MonthKey

params_st = st.builds(
    AbcdParams,
    a=st.floats(0.05, 1.0),
    b=st.floats(0.5, 2000.0),
    c=st.floats(0.0, 1.0),
    d=st.floats(0.005, 20.0),
)
state_st = st.builds(AbcdState, sm=st.floats(0, 2000), gw=st.floats(0, 2000))
depth_st = st.floats(0, 1500)


def forcing_of(p, pet):
    keys = tuple(MonthKey(2000, 1).shift(i) for i in range(len(p)))
    return Forcing(keys, np.asarray(p, float), np.zeros(len(p)), np.asarray(pet, float))


def test_hand_example_zero_discriminant():
    # W = 2, (W+b)/2a = 2, bW/a = 4: the root vanishes and Y = W
    state, fl = step(AbcdParams(1.0, 2.0, 0.4, 1.5), AbcdState(0.0, 0.0), 2.0, 0.0)
    assert (fl.w, fl.y, fl.et, fl.dr, fl.gr, fl.gd, fl.q) == (2.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    assert state == AbcdState(2.0, 0.0)


def test_no_water_in_none_out():
    state, fl = step(AbcdParams(0.5, 10.0, 0.3, 0.7), AbcdState(0.0, 0.0), 0.0, 0.0)
    assert state == AbcdState(0.0, 0.0)
    assert fl == AbcdFluxes(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def test_fig2_step_matches_golden(golden_step):
    g = golden_step
    inp = g["inputs"]
    state, fl = step(AbcdParams(**g["params"]), AbcdState(inp["sm_prev"], inp["gw_prev"]), inp["p"], inp["pet"])
    got = {"w": fl.w, "y": fl.y, "et": fl.et, "sm": state.sm, "dr": fl.dr, "gr": fl.gr,
           "gw": state.gw, "gd": fl.gd, "q": fl.q}
    for name, expected in g["outputs"].items():
        assert got[name] == pytest.approx(expected, rel=1e-12), name


def test_golden_file_is_oracle_output(golden_step):
    assert golden_step["params"] == FIG2
    assert oracle_step(**FIG2, **golden_step["inputs"]) == golden_step["outputs"]


@given(params_st, state_st, depth_st, depth_st)
def test_step_matches_oracle(params, prev, p, pet):
    state, fl = step(params, prev, p, pet)
    ref = oracle_step(*params.as_tuple(), prev.sm, prev.gw, p, pet)
    scale = max(1.0, prev.sm + p + prev.gw)
    for name, value in (("y", fl.y), ("et", fl.et), ("sm", state.sm), ("gw", state.gw), ("q", fl.q)):
        assert abs(value - ref[name]) <= 1e-9 * scale, name


@given(params_st, state_st, depth_st, depth_st)
def test_step_balances_and_bounds(params, prev, p, pet):
    state, fl = step(params, prev, p, pet)
    assert abs(state.sm + fl.et + fl.dr + fl.gr - prev.sm - p) <= 1e-9
    assert abs(state.gw + fl.gd - prev.gw - fl.gr) <= 1e-9
    assert 0.0 <= fl.y <= fl.w
    assert 0.0 <= fl.et <= fl.y
    assert state.sm == pytest.approx(fl.y - fl.et, rel=1e-12, abs=1e-12)
    assert fl.dr + fl.gr == pytest.approx(fl.w - fl.y, rel=1e-12, abs=1e-12)
    assert fl.q == fl.dr + fl.gd
    for v in (fl.w, fl.y, fl.et, fl.dr, fl.gr, fl.gd, fl.q, state.sm, state.gw):
        assert v >= 0.0
    if fl.w - fl.y > 1e-6:
        assert fl.gr / (fl.w - fl.y) == pytest.approx(params.c, rel=1e-9, abs=1e-12)


@given(params_st, state_st, depth_st, depth_st, st.floats(0, 500))
def test_et_monotone_in_pet(params, prev, p, pet, extra):
    _, lo = step(params, prev, p, pet)
    _, hi = step(params, prev, p, pet + extra)
    assert hi.et >= lo.et


@given(params_st, state_st, depth_st, depth_st)
def test_c_extremes(params, prev, p, pet):
    a, b, _, d = params.as_tuple()
    _, all_gw = step(AbcdParams(a, b, 1.0, d), prev, p, pet)
    _, all_dr = step(AbcdParams(a, b, 0.0, d), prev, p, pet)
    assert all_gw.dr == 0.0
    assert all_dr.gr == 0.0


def test_fig2_d_above_one_allowed():
    AbcdParams(0.93, 5, 0.4, 1.5)
    for bad in [(0.0, 5, 0.4, 1), (1.01, 5, 0.4, 1), (0.5, 0, 0.4, 1), (0.5, 5, 1.2, 1), (0.5, 5, 0.4, 0)]:
        with pytest.raises(ValueError):
            AbcdParams(*bad)


def test_simulate_single_month_equals_step():
    params = AbcdParams(0.9, 150.0, 0.3, 0.4)
    init = AbcdState(40.0, 12.0)
    (state, fl), = simulate(params, init, forcing_of([87.0], [110.0]))
    assert (state, fl) == step(params, init, 87.0, 110.0)


def test_simulate_zero_forcing_zero_state():
    traj = simulate(AbcdParams(0.9, 150.0, 0.3, 0.4), AbcdState(0, 0), forcing_of([0.0] * 12, [0.0] * 12))
    assert all(s == AbcdState(0, 0) and fl == AbcdFluxes(0, 0, 0, 0, 0, 0, 0) for s, fl in traj)


@given(params_st, state_st, st.integers(0, 2**32 - 1))
def test_cumulative_balance_120_months(params, init, seed):
    rng = np.random.default_rng(seed)
    p = rng.gamma(1.5, 80.0, 120)
    pet = rng.uniform(0, 250, 120)
    traj = simulate_arrays(params, init, p, pet)
    lhs = init.sm + init.gw + p.sum()
    rhs = traj["sm"][-1] + traj["gw"][-1] + traj["et"].sum() + traj["q"].sum()
    assert abs(lhs - rhs) <= 1e-7


def test_golden_trajectory(data_dir, bundled_forcing):
    expected = np.genfromtxt(data_dir / "golden_trajectory_fig2.csv", delimiter=",", names=True, dtype=None,
                             encoding="utf-8")
    traj = simulate_arrays(AbcdParams(**FIG2), AbcdState(), bundled_forcing.p_mm, bundled_forcing.pet_mm)
    for name in ("w", "y", "et", "sm", "dr", "gr", "gw", "gd", "q"):
        np.testing.assert_allclose(traj[name], expected[name], rtol=1e-12, atol=1e-12, err_msg=name)


def test_trajectory_csv_layout():
    f = forcing_of([10.0, 0.0], [5.0, 5.0])
    text = trajectory_csv(f.keys, simulate_arrays(AbcdParams(0.9, 100, 0.5, 0.5), AbcdState(0, 0), f.p_mm, f.pet_mm))
    lines = text.splitlines()
    assert lines[0] == "date,w,y,et,sm,dr,gr,gw,gd,q"
    assert lines[1].startswith("2000-01,10.0,")
    assert len(lines) == 3
