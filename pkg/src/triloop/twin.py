"""Surrogate-driven digital twin: fast rollout and closed-loop control.

The rollout advances the trained forecaster autoregressively at 1 s cadence:
predict a 10-step block, keep its first row, append that row (with the demand
input pinned to the target) to the sliding window, repeat.  Windows are
evaluated with the staggered-stream kernels, so each simulated second costs
one batched cell update instead of a full 30-step forward pass — that is
what buys the large faster-than-real-time factor.

Steady state is declared when every measured channel's per-step movement
stays below a normalized threshold across a trailing window.  The closed
loop maps each forecast's actuator row onto the plant's command interface
under range and slew clamps.
"""

import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from ._gru_kernels import StreamedStack
from .channels import OUTPUT_ORDER, pack_input
from .errors import ColdStart, NonFinitePrediction, OutOfRange
from .gru import predict
from .pipeline import D_IN, D_OUT, T_ENC

#: Defaults for the steady-state detector (normalized units per step).
STEADY_EPS = 1e-3
STEADY_WINDOW = 30

N_MEASURED = 25


@dataclass
class RolloutResult:
    """Outcome of an autoregressive rollout (trajectory in physical units)."""

    trajectory: np.ndarray       # (steps_run, 29)
    steps_run: int
    converged: bool
    convergence_step: int        # -1 when not converged
    wall_clock_s: float
    speedup: float               # simulated seconds per wall-clock second


@dataclass
class ControlActions:
    heater_ao: float
    pump1_ao: float
    pump2_ao: float
    cr_ao: float


def detect_steady_state(trajectory, eps: float = STEADY_EPS,
                        window: int = STEADY_WINDOW):
    """First step whose trailing ``window`` per-step deltas are all < eps.

    ``trajectory`` rows are normalized; only the measured channels (the
    first 25 columns) are examined.  Returns ``(converged, step)`` with
    ``step == -1`` when the criterion is never met.
    """
    if window < 2:
        raise OutOfRange(f"detection window must be >= 2, got {window}")
    traj = np.asarray(trajectory, dtype=float)
    if traj.ndim != 2 or traj.shape[0] < window + 1:
        return False, -1
    deltas = np.max(np.abs(np.diff(traj[:, :N_MEASURED], axis=0)), axis=1)
    for t in range(window, traj.shape[0]):
        if np.all(deltas[t - window: t] < eps):
            return True, t
    return False, -1


def _require_stats(model):
    stats = model.norm_stats
    if stats is None:
        raise OutOfRange("model carries no normalization statistics; "
                         "train or load a checkpoint that embeds them")
    return stats


def rollout(model, init_window, demand_kw: float, max_steps: int = 1000, *,
            eps: float = STEADY_EPS, window: int = STEADY_WINDOW) -> RolloutResult:
    """Roll the surrogate forward from a 30-row physical-unit window.

    The demand input is held at ``demand_kw`` throughout.  Stops at steady
    state or after ``max_steps`` predictions; wall-clock time covers the
    prediction loop only (window seeding excluded, matching the idea that a
    deployed twin is already warm).
    """
    stats = _require_stats(model)
    init_window = np.asarray(init_window, dtype=float)
    if init_window.shape != (T_ENC, D_IN):
        raise OutOfRange(f"init window must be ({T_ENC}, {D_IN}), "
                         f"got {init_window.shape}")
    if demand_kw < 0:
        raise OutOfRange(f"demand must be >= 0 kW, got {demand_kw}")
    if max_steps < 1:
        raise OutOfRange("max_steps must be >= 1")

    stack = StreamedStack(model)
    win_norm = (init_window - stats.in_mean) / stats.in_std
    for row in win_norm:
        stack.feed(row)

    in_mean_m = stats.in_mean[:N_MEASURED]
    in_std_m = stats.in_std[:N_MEASURED]
    demand_norm = (demand_kw - stats.in_mean[N_MEASURED]) / stats.in_std[N_MEASURED]

    traj_phys = np.empty((max_steps, D_OUT))
    delta_hist = deque(maxlen=window)
    prev_norm_m = None
    converged = False
    conv_step = -1
    steps = 0
    x_next = np.empty(D_IN)

    t0 = time.perf_counter()
    for k in range(max_steps):
        pred_n = stack.head_output()[0].astype(float)   # first forecast row
        pred_phys = pred_n * stats.out_std + stats.out_mean
        if not np.all(np.isfinite(pred_phys)):
            raise NonFinitePrediction(f"non-finite forecast at rollout step {k}")
        traj_phys[k] = pred_phys
        steps = k + 1

        norm_m = (pred_phys[:N_MEASURED] - in_mean_m) / in_std_m
        if prev_norm_m is not None:
            delta_hist.append(float(np.max(np.abs(norm_m - prev_norm_m))))
            if len(delta_hist) == window and max(delta_hist) < eps:
                converged = True
                conv_step = k
                break
        prev_norm_m = norm_m

        x_next[:N_MEASURED] = norm_m
        x_next[N_MEASURED] = demand_norm
        stack.feed(x_next)
    wall = time.perf_counter() - t0

    return RolloutResult(trajectory=traj_phys[:steps], steps_run=steps,
                         converged=converged, convergence_step=conv_step,
                         wall_clock_s=wall,
                         speedup=steps / wall if wall > 0 else float("inf"))


def speedup_report(result: RolloutResult) -> dict:
    """JSON-ready summary of a rollout (per-channel final values included)."""
    final = result.trajectory[-1] if result.steps_run else np.full(D_OUT, np.nan)
    return {
        "steps": result.steps_run,
        "converged": result.converged,
        "convergence_step": result.convergence_step,
        "wall_clock_s": result.wall_clock_s,
        "speedup": result.speedup,
        "final_values": {ch: float(v) for ch, v in zip(OUTPUT_ORDER, final)},
    }


# ---------------------------------------------------------------------------
# closed loop


#: (low, high) command ranges per actuator channel.
_ACTUATOR_RANGES = {
    "Heater_AO": (0.0, 100.0),
    "Pump1_AO": (0.0, 60.0),
    "Pump2_AO": (0.0, 60.0),
    "CR_AO": (0.0, 100.0),
}


class ClosedLoopTwin:
    """Feeds live frames to the surrogate and emits clamped plant commands.

    Call :meth:`observe` once per 1 Hz frame; after 30 frames of warm-up,
    :meth:`step` forecasts the next second and applies the forecast's
    actuator row to the plant (range-clamped, rod slew-limited).
    """

    def __init__(self, model):
        self.model = model
        self.stats = _require_stats(model)
        self.history = deque(maxlen=T_ENC)
        self._act_idx = [OUTPUT_ORDER.index(ch) for ch in
                         ("Heater_AO", "Pump1_AO", "Pump2_AO", "CR_AO")]

    def observe(self, frame) -> None:
        """Record one live frame (its model-input projection)."""
        self.history.append(pack_input(frame))

    def step(self, plant, demand_kw: float) -> ControlActions:
        """Forecast and apply the next-second actuator commands."""
        if len(self.history) < T_ENC:
            raise ColdStart(
                f"need {T_ENC} frames of history, have {len(self.history)}")
        window = np.stack(self.history)
        window[:, N_MEASURED] = demand_kw     # steer with the requested demand
        win_norm = (window - self.stats.in_mean) / self.stats.in_std
        pred_n = predict(win_norm, self.model)[0]
        pred_phys = pred_n * self.stats.out_std + self.stats.out_mean
        if not np.all(np.isfinite(pred_phys)):
            raise NonFinitePrediction("non-finite forecast in closed-loop step")

        raw = {ch: float(pred_phys[j]) for ch, j in
               zip(("Heater_AO", "Pump1_AO", "Pump2_AO", "CR_AO"), self._act_idx)}
        clamped = {ch: min(max(v, _ACTUATOR_RANGES[ch][0]), _ACTUATOR_RANGES[ch][1])
                   for ch, v in raw.items()}
        # Rod commands additionally respect the drive's slew over one second.
        rod_now = plant.state.rod_position
        slew = plant.config.rod_slew_pct_s
        clamped["CR_AO"] = min(max(clamped["CR_AO"], rod_now - slew), rod_now + slew)

        plant.apply(heater_ao=clamped["Heater_AO"], pump1_hz=clamped["Pump1_AO"],
                    pump2_hz=clamped["Pump2_AO"], cr_ao=clamped["CR_AO"],
                    demand_kw=demand_kw)
        return ControlActions(heater_ao=clamped["Heater_AO"],
                              pump1_ao=clamped["Pump1_AO"],
                              pump2_ao=clamped["Pump2_AO"],
                              cr_ao=clamped["CR_AO"])


def closed_loop_step(plant, twin: ClosedLoopTwin, demand_kw: float) -> ControlActions:
    """Convenience wrapper around :meth:`ClosedLoopTwin.step`."""
    return twin.step(plant, demand_kw)
