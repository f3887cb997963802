"""Rollout machinery and closed-loop clamping, tested with synthetic models.

The steady-state detector is checked against closed forms (constant, linear
ramp, exponential decay); rollout bookkeeping against handcrafted models
whose forecasts are fully controlled through the head bias.
"""

import math

import numpy as np
import pytest

from triloop.errors import ColdStart, NonFinitePrediction, OutOfRange
from triloop.gru import GruModel
from triloop.pipeline import NormStats
from triloop.plant import Simulator
from triloop.twin import (
    ClosedLoopTwin,
    RolloutResult,
    closed_loop_step,
    detect_steady_state,
    rollout,
    speedup_report,
)


def identity_stats():
    return NormStats(in_mean=np.zeros(26), in_std=np.ones(26),
                     out_mean=np.zeros(29), out_std=np.ones(29))


def constant_model(bias_row=None, seed=0):
    """Model whose every forecast row is a fixed 29-vector."""
    m = GruModel.new(d_x=26, d_h=128, layers=1, seed=seed)
    m.head_w[:] = 0.0
    if bias_row is not None:
        m.head_b[:] = np.tile(np.asarray(bias_row, dtype=float), m.t_dec)
    m.norm_stats = identity_stats()
    return m


# ---------------------------------------------------------------------------
# steady-state detector


def test_detector_constant_trajectory():
    traj = np.ones((80, 29))
    ok, step = detect_steady_state(traj, eps=1e-3, window=30)
    assert ok and step == 30


def test_detector_ramp_never_converges():
    traj = np.zeros((200, 29))
    traj[:, 0] = np.arange(200) * 5e-3       # slope above eps
    ok, step = detect_steady_state(traj, eps=1e-3, window=30)
    assert not ok and step == -1


def test_detector_exponential_decay_closed_form():
    tau, amp, eps, window = 40.0, 5.0, 1e-3, 30
    t = np.arange(400)
    traj = np.zeros((400, 29))
    traj[:, 3] = amp * np.exp(-t / tau)
    ok, step = detect_steady_state(traj, eps=eps, window=window)
    t_star = tau * math.log(amp / (eps * tau))   # slope crosses eps here
    assert ok
    assert t_star <= step <= t_star + window + 1


def test_detector_short_trajectory_and_bad_window():
    assert detect_steady_state(np.ones((10, 29)), window=30) == (False, -1)
    with pytest.raises(OutOfRange):
        detect_steady_state(np.ones((50, 29)), window=1)


# ---------------------------------------------------------------------------
# rollout


def test_rollout_fixed_point_converges_with_zero_drift():
    m = constant_model(bias_row=np.zeros(29))
    init = np.zeros((30, 26))
    res = rollout(m, init, demand_kw=0.0, max_steps=200)
    assert res.converged
    assert res.convergence_step == 30
    assert res.steps_run == 31
    drift = np.max(np.abs(res.trajectory[-1] - res.trajectory[0]))
    assert drift < 1e-9


def test_rollout_hits_max_steps_under_strict_tolerance():
    m = constant_model(bias_row=np.zeros(29))
    res = rollout(m, np.zeros((30, 26)), demand_kw=0.0, max_steps=10, eps=0.0)
    assert not res.converged
    assert res.convergence_step == -1
    assert res.steps_run == 10
    assert res.trajectory.shape == (10, 29)


def test_rollout_deterministic_trajectories():
    m = GruModel.new(d_x=26, d_h=128, layers=1, seed=5)
    m.norm_stats = identity_stats()
    rng = np.random.default_rng(3)
    init = rng.normal(size=(30, 26))
    a = rollout(m, init.copy(), demand_kw=1.0, max_steps=50, eps=0.0)
    b = rollout(m, init.copy(), demand_kw=1.0, max_steps=50, eps=0.0)
    np.testing.assert_array_equal(a.trajectory, b.trajectory)


def test_rollout_nonfinite_prediction_raises():
    m = constant_model()
    m.head_b[:] = np.inf
    with pytest.raises(NonFinitePrediction):
        rollout(m, np.zeros((30, 26)), demand_kw=0.0, max_steps=5)


def test_rollout_argument_validation():
    m = constant_model()
    with pytest.raises(OutOfRange):
        rollout(m, np.zeros((29, 26)), demand_kw=0.0)
    with pytest.raises(OutOfRange):
        rollout(m, np.zeros((30, 26)), demand_kw=-1.0)
    bare = GruModel.new(d_x=26, d_h=128, layers=1, seed=0)   # no stats
    with pytest.raises(OutOfRange):
        rollout(bare, np.zeros((30, 26)), demand_kw=0.0)


def test_speedup_report_bookkeeping():
    m = constant_model(bias_row=np.arange(29, dtype=float))
    res = rollout(m, np.zeros((30, 26)), demand_kw=0.0, max_steps=40, eps=0.0)
    rep = speedup_report(res)
    assert set(rep) == {"steps", "converged", "convergence_step",
                       "wall_clock_s", "speedup", "final_values"}
    assert rep["steps"] == res.steps_run == len(res.trajectory)
    assert rep["speedup"] == pytest.approx(res.steps_run / res.wall_clock_s)
    assert len(rep["final_values"]) == 29
    assert rep["final_values"]["TF11"] == pytest.approx(res.trajectory[-1][0])


def test_rollout_simulated_vs_wall_clock_accounting():
    m = constant_model(bias_row=np.zeros(29))
    res = rollout(m, np.zeros((30, 26)), demand_kw=0.0, max_steps=25, eps=0.0)
    # 25 predicted frames at 1 s cadence = 25 simulated seconds
    assert res.steps_run == 25
    assert res.wall_clock_s > 0
    assert res.speedup == pytest.approx(25.0 / res.wall_clock_s)


# ---------------------------------------------------------------------------
# closed loop


def warmed_twin(model, sim, frames=30):
    twin = ClosedLoopTwin(model)
    for _ in range(frames):
        twin.observe(sim.measure())
        sim.advance_seconds(1)
    return twin


def test_closed_loop_cold_start():
    m = constant_model()
    sim = Simulator()
    twin = warmed_twin(m, sim, frames=10)
    with pytest.raises(ColdStart):
        twin.step(sim, demand_kw=0.0)


def test_closed_loop_clamps_ranges_and_slew():
    row = np.zeros(29)
    row[25] = 150.0    # heater % beyond range
    row[26] = 75.0     # pump 1 Hz beyond range
    row[27] = -5.0     # pump 2 negative
    row[28] = 0.0      # rod full withdrawal requested in one step
    m = constant_model(bias_row=row)
    sim = Simulator()
    assert sim.state.rod_position == 100.0
    twin = warmed_twin(m, sim)
    actions = closed_loop_step(sim, twin, demand_kw=1.0)
    assert actions.heater_ao == 100.0
    assert actions.pump1_ao == 60.0
    assert actions.pump2_ao == 0.0
    slew = sim.config.rod_slew_pct_s
    assert actions.cr_ao == pytest.approx(100.0 - slew)
    # commands actually landed on the plant
    assert sim.state.heater_cmd_pct == 100.0
    assert sim.state.pump1_hz == 60.0
    assert sim.state.rod_target == pytest.approx(100.0 - slew)
