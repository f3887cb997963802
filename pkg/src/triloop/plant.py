"""Lumped-parameter simulator of the three-loop thermal-fluid facility.

A cartridge-heater bank (4 x 3.925 kW) heats the primary loop through a
control-rod power scaler; brazed-plate heat exchangers couple primary to
secondary and secondary to the heat-sink loop, which rejects to ambient.
Each loop is a ring of lumped fluid nodes advanced by RK4 on per-node
energy balances; sheath nodes give the heaters a first-order thermal lag.
The simulator doubles as ground truth for training data and as the live
process behind the telemetry server.

Channel placement: TF11/TF12 test-section inlet/outlet, TF13 pump inlet,
TF14/TF15 HX1 hot-side inlet/outlet; TF21/TF22 HX1 cold-side inlet/outlet,
TF23 pump inlet, TF24/TF25 HX2 hot-side inlet/outlet; TF31/TF32 HX2
cold-side (heat-sink) inlet/outlet.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import _plant_kernels
from .channels import ACTUATOR_IDS, MEASURED_IDS, SensorFrame, canonical_catalog
from .errors import NonFinite, OutOfRange, TooShort

CP_WATER = 4186.0  # J/(kg K)

# Index blocks in the 16-element temperature state vector.
FLUID_IDS = MEASURED_IDS[:12]
SHEATH_IDS = MEASURED_IDS[12:16]


@dataclass
class PlantConfig:
    """Physical constants; every tunable of the facility model lives here."""

    heater_max_power_kw: float = 15.7          # total bank rating (4 heaters)
    n_heaters: int = 4
    heater_resolution_pct: float = 5.0         # power-command quantum
    pump_max_flow_kgs: float = 0.76            # at 60 Hz
    pump_max_freq_hz: float = 60.0
    vfd_resolution_hz: float = 0.1
    rod_stroke_mm: float = 609.6
    rod_speed_mm_s: float = 50.8
    conversion_efficiency: float = 0.45        # heat -> electric
    ambient_c: float = 26.3
    tertiary_flow_kgs: float = 0.1018          # fixed-speed circulator
    # Heat transfer
    hx1_ua_w_k: float = 4000.0
    hx2_ua_w_k: float = 4000.0
    sink_ua_w_k: float = 2500.0
    sheath_ha_w_k: float = 25.0                # per heater, sheath -> fluid
    sheath_tau_s: float = 20.0
    loss_ua_primary_w_k: float = 50.0          # per loop, split across nodes
    loss_ua_secondary_w_k: float = 30.0
    loss_ua_tertiary_w_k: float = 10.0
    # Thermal masses (kg of fluid+metal per lumped node)
    node_mass_primary_kg: float = 1.2
    node_mass_secondary_kg: float = 1.2
    node_mass_tertiary_kg: float = 1.2
    # Static pressure map: PT = ref + k * mdot^2 (kPa; calibrated so that
    # 10 Hz pump speed reads ~112.9/106.3/100.0/100.1 kPa).
    pressure_ref_kpa: float = 100.0
    pressure_k1_kpa: float = 798.6             # PT1, test-section inlet
    pressure_k2_kpa: float = 390.6             # PT2, test-section outlet
    pressure_k3_kpa: float = 1.86              # PT3, primary loop top
    pressure_k4_kpa: float = 3.32              # PT4, secondary loop top
    # Electrical model (standby excitation when energized but rod-blocked)
    heater_full_voltage_v: float = 208.0
    standby_voltage_v: float = 35.78
    standby_current_a: float = 0.72
    # Demand-following supervisory controller
    ctrl_ki: float = 0.01                      # kW integral trim per kW error per s
    ctrl_loss_feedforward: float = 0.183       # anticipated loss fraction of target heat
    ctrl_rate_gate_kw_s: float = 0.002         # integrate only below this output rate
    ctrl_integral_limit_kw: float = 3.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (int, float)) and not f.name.startswith("pressure_ref"):
                if v <= 0:
                    raise OutOfRange(f"PlantConfig.{f.name} must be > 0, got {v}")
        if not 0.0 < self.conversion_efficiency < 1.0:
            raise OutOfRange("conversion_efficiency must lie in (0, 1)")

    @property
    def rod_slew_pct_s(self) -> float:
        return self.rod_speed_mm_s / self.rod_stroke_mm * 100.0

    @property
    def heater_max_power_w(self) -> float:
        return self.heater_max_power_kw * 1000.0

    @classmethod
    def from_file(cls, path) -> "PlantConfig":
        """Load from TOML or JSON; keys mirror the field names."""
        data = _read_config_mapping(path)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise OutOfRange(f"unknown PlantConfig keys: {sorted(unknown)}")
        return cls(**data)


def _read_config_mapping(path) -> dict:
    text = open(path, "rb").read()
    if str(path).endswith(".json"):
        return json.loads(text.decode("utf-8"))
    try:
        import tomllib
    except ImportError:  # Python 3.10
        import tomli as tomllib
    return tomllib.loads(text.decode("utf-8"))


def quantize_heater(cmd_pct: float, resolution: float = 5.0) -> float:
    """Snap a heater power command to its controller resolution."""
    if not 0.0 <= cmd_pct <= 100.0:
        raise OutOfRange(f"heater command {cmd_pct} outside 0..100 %")
    return min(100.0, round(cmd_pct / resolution) * resolution)

def quantize_pump(freq_hz: float, resolution: float = 0.1, max_hz: float = 60.0) -> float:
    """Snap a VFD frequency command to its resolution."""
    if not 0.0 <= freq_hz <= max_hz:
        raise OutOfRange(f"pump frequency {freq_hz} outside 0..{max_hz} Hz")
    return min(max_hz, round(freq_hz / resolution) * resolution)


def rod_power_factor(position_pct: float) -> float:
    """Linear rod worth: fraction of heater power delivered at a given insertion."""
    if not 0.0 <= position_pct <= 100.0:
        raise OutOfRange(f"rod position {position_pct} outside 0..100 %")
    return 1.0 - position_pct / 100.0


def pump_flow(freq_hz: float, config: PlantConfig | None = None) -> float:
    """Affinity map from (quantized) VFD frequency to loop mass flow, kg/s."""
    cfg = config or _DEFAULT_CONFIG
    fq = quantize_pump(freq_hz, cfg.vfd_resolution_hz, cfg.pump_max_freq_hz)
    return cfg.pump_max_flow_kgs * fq / cfg.pump_max_freq_hz


def hx_heat_rate(t_hot_in, t_cold_in, mdot_hot, mdot_cold, ua, cp=CP_WATER) -> float:
    """Counter-flow effectiveness-NTU heat rate in W (0 if either stream is dry)."""
    if mdot_hot < 0 or mdot_cold < 0:
        raise OutOfRange("mass flows must be >= 0")
    if ua <= 0:
        raise OutOfRange("UA must be > 0")
    if mdot_hot == 0 or mdot_cold == 0:
        return 0.0
    c_hot = mdot_hot * cp
    c_cold = mdot_cold * cp
    c_min, c_max = min(c_hot, c_cold), max(c_hot, c_cold)
    cr = c_min / c_max
    ntu = ua / c_min
    if cr > 1.0 - 1e-12:
        eff = ntu / (1.0 + ntu)
    else:
        e = math.exp(-ntu * (1.0 - cr))
        eff = (1.0 - e) / (1.0 - cr * e)
    return eff * c_min * (t_hot_in - t_cold_in)


@dataclass
class PlantState:
    """Full simulator state at one instant."""

    temps: np.ndarray                  # (16,) fluid + sheath, deg C
    rod_position: float                # % inserted
    rod_target: float
    heater_cmd_pct: float              # quantized
    pump1_hz: float                    # quantized
    pump2_hz: float
    demand_kw: float
    t: float
    ctrl_integral_kw: float = 0.0

    def copy(self) -> "PlantState":
        return replace(self, temps=self.temps.copy())

    @property
    def node_temps(self) -> dict:
        ids = FLUID_IDS + SHEATH_IDS
        return {cid: float(self.temps[i]) for i, cid in enumerate(ids)}


def initial_state(config: PlantConfig) -> PlantState:
    """Cold state: every node at ambient, rod fully inserted, everything off."""
    return PlantState(
        temps=np.full(16, config.ambient_c, dtype=np.float64),
        rod_position=100.0, rod_target=100.0,
        heater_cmd_pct=0.0, pump1_hz=0.0, pump2_hz=0.0,
        demand_kw=0.0, t=0.0,
    )


@dataclass(frozen=True)
class ScheduleEvent:
    t: float
    action: str   # heater_ao | pump1_hz | pump2_hz | cr_ao | demand_kw
    value: float


@dataclass
class Scenario:
    """A scripted run: duration, integration step, actuator/demand schedule."""

    duration_s: float
    schedule: tuple = ()
    dt: float = 0.1
    noise_enabled: bool = True
    seed: int = 0
    control_mode: str = "manual"       # manual | demand_follow

    def __post_init__(self):
        if self.dt <= 0:
            raise OutOfRange("scenario dt must be > 0")
        for ev in self.schedule:
            if not 0 <= ev.t <= self.duration_s:
                raise OutOfRange(f"schedule event at t={ev.t} outside [0, {self.duration_s}]")
        if self.control_mode not in ("manual", "demand_follow"):
            raise OutOfRange(f"unknown control mode {self.control_mode!r}")

    @classmethod
    def from_file(cls, path) -> "Scenario":
        data = _read_config_mapping(path)
        events = tuple(
            ScheduleEvent(float(e["t"]), str(e["action"]), float(e["value"]))
            for e in data.pop("schedule", [])
        )
        return cls(schedule=events, **data)


class Simulator:
    """Owns a PlantState and advances it in 1 s frames of RK4 substeps.

    ``control_mode="demand_follow"`` enables the supervisory controller:
    each second the rod target is set from the electric-power demand via
    worth-model feedforward plus a slow integral trim on delivered output.
    """

    def __init__(self, config: PlantConfig | None = None, *, noise_enabled=False,
                 seed=0, control_mode="manual", dt=0.1):
        self.config = config or PlantConfig()
        self.state = initial_state(self.config)
        self.noise_enabled = noise_enabled
        self.control_mode = control_mode
        self.dt = float(dt)
        self._n_sub = max(1, round(1.0 / self.dt))
        self.rng = np.random.default_rng(seed)
        self._substeps_done = 0
        self._prev_elec = None
        self._advance = _plant_kernels.advance
        self._params = _kernel_params(self.config)

    # -- commands ---------------------------------------------------------

    def apply(self, heater_ao=None, pump1_hz=None, pump2_hz=None,
              cr_ao=None, demand_kw=None) -> None:
        """Ingest actuator/demand commands (quantized and range-checked)."""
        cfg = self.config
        st = self.state
        if heater_ao is not None:
            st.heater_cmd_pct = quantize_heater(heater_ao, cfg.heater_resolution_pct)
        if pump1_hz is not None:
            st.pump1_hz = quantize_pump(pump1_hz, cfg.vfd_resolution_hz, cfg.pump_max_freq_hz)
        if pump2_hz is not None:
            st.pump2_hz = quantize_pump(pump2_hz, cfg.vfd_resolution_hz, cfg.pump_max_freq_hz)
        if cr_ao is not None:
            if not 0.0 <= cr_ao <= 100.0:
                raise OutOfRange(f"rod target {cr_ao} outside 0..100 %")
            st.rod_target = float(cr_ao)
        if demand_kw is not None:
            if demand_kw < 0:
                raise OutOfRange("demand must be >= 0 kW")
            st.demand_kw = float(demand_kw)

    # -- physics ----------------------------------------------------------

    def flows(self) -> tuple:
        cfg = self.config
        return (pump_flow(self.state.pump1_hz, cfg),
                pump_flow(self.state.pump2_hz, cfg),
                cfg.tertiary_flow_kgs)

    def heater_power_w(self) -> float:
        """Instantaneous electrical power delivered to the heater bank."""
        st = self.state
        return (st.heater_cmd_pct / 100.0 * self.config.heater_max_power_w
                * rod_power_factor(st.rod_position))

    def heat_rates(self) -> dict:
        """Diagnostic heat flows (W) at the current state."""
        cfg = self.config
        T = self.state.temps
        m1, m2, m3 = self.flows()
        q1 = hx_heat_rate(T[3], T[5], m1, m2, cfg.hx1_ua_w_k)
        q2 = hx_heat_rate(T[8], T[10], m2, m3, cfg.hx2_ua_w_k)
        q_sink = cfg.sink_ua_w_k * (T[10] - cfg.ambient_c)
        q_sheath = cfg.sheath_ha_w_k * float(np.sum(T[12:16] - T[1]))
        ual = _loss_ua_vector(cfg)   # sink conductance excluded: reported separately
        losses = float(np.sum(ual * (T[:12] - cfg.ambient_c)))
        return {"hx1_w": q1, "hx2_w": q2, "sink_w": q_sink,
                "sheath_to_fluid_w": q_sheath, "ambient_loss_w": losses}

    def elec_power_kw(self) -> float:
        """Generated electric power: conversion efficiency x heat-sink-loop removal."""
        q2 = self.heat_rates()["hx2_w"]
        return max(0.0, self.config.conversion_efficiency * q2 / 1000.0)

    def electrical_readings(self) -> tuple:
        """Heater bank (voltage V, current A); standby excitation when rod-blocked.

        The exponent split keeps V*I equal to delivered power plus the
        standby draw across the whole command range.
        """
        cfg = self.config
        if self.state.heater_cmd_pct <= 0.0:
            return 0.0, 0.0
        p_standby = cfg.standby_voltage_v * cfg.standby_current_a
        p_full = cfg.heater_max_power_w
        u = (self.heater_power_w() + p_standby) / (p_full + p_standby)
        u_stdby = p_standby / (p_full + p_standby)
        a = math.log(cfg.standby_voltage_v / cfg.heater_full_voltage_v) / math.log(u_stdby)
        v = cfg.heater_full_voltage_v * u ** a
        i = (p_full + p_standby) / cfg.heater_full_voltage_v * u ** (1.0 - a)
        return v, i

    def pressures(self) -> tuple:
        cfg = self.config
        m1, m2, _ = self.flows()
        return (cfg.pressure_ref_kpa + cfg.pressure_k1_kpa * m1 * m1,
                cfg.pressure_ref_kpa + cfg.pressure_k2_kpa * m1 * m1,
                cfg.pressure_ref_kpa + cfg.pressure_k3_kpa * m1 * m1,
                cfg.pressure_ref_kpa + cfg.pressure_k4_kpa * m2 * m2)

    # -- measurement ------------------------------------------------------

    def measure(self) -> SensorFrame:
        """Sensor snapshot; adds per-channel noise and readout quantization
        when noise is enabled, otherwise returns the exact state projection."""
        return measure(self.config, self, self.noise_enabled, self.rng)

    # -- stepping ---------------------------------------------------------

    def _second_boundary(self):
        if self.control_mode == "demand_follow":
            self._controller_update()

    def _controller_update(self):
        cfg = self.config
        st = self.state
        # The supervisory regulator belongs to the facility, so it reads the
        # internal power computation directly; DAQ noise corrupts only the
        # recorded channels, not the control loop.
        elec = self.elec_power_kw()
        prev = self._prev_elec if self._prev_elec is not None else elec
        self._prev_elec = elec
        if st.heater_cmd_pct <= 0.0:
            return
        if st.demand_kw <= 0.0:
            st.ctrl_integral_kw = 0.0
            st.rod_target = 100.0
            return
        # The loss-fraction feedforward already lands within a few percent of
        # the target, so the integrator's job is a slow trim, not transient
        # shaping.  It engages only once the output has both stopped moving
        # and arrived near the target; otherwise it would wind up against the
        # minutes-long thermal lag (including the dead time right after a
        # step, when the output rate is still near zero).
        err = st.demand_kw - elec
        if abs(elec - prev) < cfg.ctrl_rate_gate_kw_s and abs(err) <= 0.15 * st.demand_kw:
            lim = cfg.ctrl_integral_limit_kw
            st.ctrl_integral_kw = min(lim, max(-lim, st.ctrl_integral_kw + cfg.ctrl_ki * err))
        q_ff = st.demand_kw / cfg.conversion_efficiency * (1.0 + cfg.ctrl_loss_feedforward)
        q_cmd = q_ff + st.ctrl_integral_kw
        q_avail = st.heater_cmd_pct / 100.0 * cfg.heater_max_power_kw
        q_cmd = min(max(q_cmd, 0.0), q_avail)
        st.rod_target = 100.0 * (1.0 - q_cmd / q_avail)

    def tick(self) -> None:
        """One RK4 substep; runs the 1 Hz supervisory layer at second boundaries."""
        if self._substeps_done % self._n_sub == 0:
            self._second_boundary()
        st = self.state
        m1, m2, m3 = self.flows()
        q_full = st.heater_cmd_pct / 100.0 * self.config.heater_max_power_w
        st.rod_position = self._advance(
            st.temps, st.rod_position, st.rod_target, self.config.rod_slew_pct_s,
            q_full, 1, self.dt, m1 * CP_WATER, m2 * CP_WATER, m3 * CP_WATER,
            *self._params)
        st.t += self.dt
        self._substeps_done += 1
        if self._substeps_done % self._n_sub == 0:
            st.t = round(st.t / self.dt) * self.dt  # keep 1 Hz boundaries exact
            if not np.all(np.isfinite(st.temps)):
                raise NonFinite(f"non-finite plant state at t={st.t:.1f}s "
                                "(unstable dt or bad config)")

    def advance_seconds(self, n: int) -> None:
        for _ in range(int(n) * self._n_sub):
            self.tick()

    def run(self, scenario: Scenario) -> list:
        """Execute a scenario, returning 1 Hz frames (duration + 1 of them)."""
        self.noise_enabled = scenario.noise_enabled
        self.control_mode = scenario.control_mode
        self.rng = np.random.default_rng(scenario.seed)
        self.dt = scenario.dt
        self._n_sub = max(1, round(1.0 / self.dt))
        self._substeps_done = 0
        events = sorted(scenario.schedule, key=lambda e: e.t)
        n_seconds = int(round(scenario.duration_s))
        frames = []
        ev_i = 0
        for k in range(n_seconds + 1):
            while ev_i < len(events) and events[ev_i].t <= k:
                self._apply_event(events[ev_i])
                ev_i += 1
            frame = self.measure()
            frames.append(frame)
            if k < n_seconds:
                self.advance_seconds(1)
        return frames

    def _apply_event(self, ev: ScheduleEvent):
        if ev.action not in ("heater_ao", "pump1_hz", "pump2_hz", "cr_ao", "demand_kw"):
            raise OutOfRange(f"unknown schedule action {ev.action!r}")
        self.apply(**{ev.action: ev.value})


def _loss_ua_vector(cfg: PlantConfig) -> np.ndarray:
    ual = np.empty(12, dtype=np.float64)
    ual[0:5] = cfg.loss_ua_primary_w_k / 5.0
    ual[5:10] = cfg.loss_ua_secondary_w_k / 5.0
    ual[10:12] = cfg.loss_ua_tertiary_w_k / 2.0
    return ual


def _kernel_params(cfg: PlantConfig) -> tuple:
    """Constant kernel arguments: (ua1, ua2, ha_per, amb, C, ual)."""
    C = np.empty(16, dtype=np.float64)
    C[0:5] = cfg.node_mass_primary_kg * CP_WATER
    C[5:10] = cfg.node_mass_secondary_kg * CP_WATER
    C[10:12] = cfg.node_mass_tertiary_kg * CP_WATER
    C[12:16] = cfg.sheath_tau_s * cfg.sheath_ha_w_k
    ual = np.zeros(16, dtype=np.float64)
    ual[:12] = _loss_ua_vector(cfg)
    ual[10] += cfg.sink_ua_w_k   # sink conductance acts on TF31
    return (cfg.hx1_ua_w_k, cfg.hx2_ua_w_k, cfg.sheath_ha_w_k,
            cfg.ambient_c, C, ual)


def step(config: PlantConfig, state: PlantState, commands: dict | None = None,
         dt: float = 0.1) -> PlantState:
    """Advance a state by one RK4 step of ``dt`` (pure function over states)."""
    if not 0 < dt <= 0.5:
        raise OutOfRange(f"dt {dt} outside (0, 0.5] s")
    sim = Simulator(config, dt=dt)
    sim.state = state.copy()
    if commands:
        sim.apply(**commands)
    st = sim.state
    m1, m2, m3 = sim.flows()
    q_full = st.heater_cmd_pct / 100.0 * config.heater_max_power_w
    st.rod_position = sim._advance(
        st.temps, st.rod_position, st.rod_target, config.rod_slew_pct_s,
        q_full, 1, dt, m1 * CP_WATER, m2 * CP_WATER, m3 * CP_WATER,
        *sim._params)
    st.t += dt
    if not np.all(np.isfinite(st.temps)):
        raise NonFinite("non-finite plant state after step")
    return st


# Display quantization (readout LSB) per channel group.
_LSB = {"temperature": 0.01, "pressure": 0.01, "flow": 1e-4, "power": 1e-3}


def measure(config: PlantConfig, sim: Simulator, noise_enabled: bool,
            rng: np.random.Generator) -> SensorFrame:
    """Project simulator state onto the 25 measured channels.

    With noise enabled each channel gets Gaussian noise at its catalog
    1-sigma (absolute for temperatures, relative for pressure/flow/power),
    the rod readback gets uniform +/-5 % of stroke, and readings are
    quantized to display resolution.  Noise draws happen in a fixed channel
    order so a fixed seed reproduces frames bitwise.
    """
    st = sim.state
    cat = canonical_catalog()
    m1, m2, m3 = sim.flows()
    p1, p2, p3, p4 = sim.pressures()
    truth = {}
    for i, cid in enumerate(FLUID_IDS + SHEATH_IDS):
        truth[cid] = float(st.temps[i])
    truth["PT1"], truth["PT2"], truth["PT3"], truth["PT4"] = p1, p2, p3, p4
    truth["FT1"], truth["FT2"], truth["FT3"] = m1, m2, m3
    truth["Heat_Power"] = sim.heater_power_w() / 1000.0
    truth["Elec_Power"] = sim.elec_power_kw()

    actuators = {
        "Heater_AO": st.heater_cmd_pct,
        "Pump1_AO": st.pump1_hz,
        "Pump2_AO": st.pump2_hz,
        "CR_AO": st.rod_position,
    }

    if noise_enabled:
        values = {}
        for cid in MEASURED_IDS:
            spec = cat.spec(cid)
            sigma = spec.uncertainty * (abs(truth[cid]) if spec.noise_is_relative else 1.0)
            noisy = truth[cid] + rng.normal(0.0, sigma)
            lsb = _LSB[spec.group]
            values[cid] = round(noisy / lsb) * lsb
        cr = st.rod_position + rng.uniform(-5.0, 5.0)
        actuators["CR_AO"] = round(min(100.0, max(0.0, cr)) / 0.01) * 0.01
    else:
        values = truth

    return SensorFrame(t=st.t, values=values, demand_elec=st.demand_kw,
                       actuators=actuators)


_DEFAULT_CONFIG = PlantConfig()


# ---------------------------------------------------------------------------
# Scenario library

def run_scenario(config: PlantConfig, scenario: Scenario) -> list:
    """Fresh simulator + scenario -> 1 Hz trajectory of SensorFrames."""
    sim = Simulator(config, dt=scenario.dt)
    return sim.run(scenario)


def _rod_for_power(power_w: float, config: PlantConfig) -> float:
    """Rod insertion that delivers ``power_w`` at 100 % heater command."""
    return 100.0 * (1.0 - power_w / config.heater_max_power_w)


def staircase_scenario(config: PlantConfig | None = None, *, plateau_s: float = 900.0,
                       noise_enabled: bool = False, seed: int = 0, dt: float = 0.1) -> Scenario:
    """Four-plateau power staircase (490/1692/4536/9220 W) on quiet pumps.

    The heater runs at 100 % command while the rod trims the delivered power
    to each plateau value exactly (the 5 % command quantum alone cannot
    realize these levels).
    """
    cfg = config or _DEFAULT_CONFIG
    powers = (490.0, 1692.0, 4536.0, 9220.0)
    sched = [ScheduleEvent(0.0, "pump1_hz", 10.0),
             ScheduleEvent(0.0, "pump2_hz", 10.0),
             ScheduleEvent(0.0, "heater_ao", 100.0)]
    for i, p in enumerate(powers):
        sched.append(ScheduleEvent(i * plateau_s, "cr_ao", _rod_for_power(p, cfg)))
    return Scenario(duration_s=plateau_s * len(powers), schedule=tuple(sched),
                    dt=dt, noise_enabled=noise_enabled, seed=seed)


STAIRCASE_POWERS_W = (490.0, 1692.0, 4536.0, 9220.0)


def idle_scenario(duration_s: float = 60.0, *, noise_enabled=False, seed=0) -> Scenario:
    """Energized standby: heater on, rod fully inserted, pumps at 10 Hz."""
    sched = (ScheduleEvent(0.0, "pump1_hz", 10.0),
             ScheduleEvent(0.0, "pump2_hz", 10.0),
             ScheduleEvent(0.0, "heater_ao", 100.0))
    return Scenario(duration_s=duration_s, schedule=sched, noise_enabled=noise_enabled,
                    seed=seed)


def dataset_scenario(steps: int = 3706, *, seed: int = 0, noise_enabled: bool = True) -> Scenario:
    """Demand-following run covering diverse power levels and pump settings.

    ``steps`` is the number of emitted 1 Hz rows (duration = steps - 1 s).
    The schedule stretches/compresses with ``steps`` so reduced smoke
    datasets keep the same texture.
    """
    if steps < 50:
        raise TooShort("dataset needs at least 50 steps")
    duration = steps - 1
    # Segment starts as fractions of the full-length 3705 s run.
    base = (
        (0.0, "pump1_hz", 10.0),
        (0.0, "pump2_hz", 10.0),
        (0.0, "heater_ao", 100.0),
        (120, "demand_kw", 1.0),
        (520, "demand_kw", 1.889),
        (1020, "demand_kw", 0.8),
        (1380, "pump1_hz", 12.0),
        (1385, "pump2_hz", 12.0),
        (1400, "demand_kw", 1.5),
        (1800, "demand_kw", 2.5),
        (2250, "pump1_hz", 10.0),
        (2255, "pump2_hz", 10.0),
        (2270, "demand_kw", 1.889),
        (2760, "demand_kw", 0.5),
        (3100, "demand_kw", 2.2),
        (3500, "demand_kw", 1.2),
    )
    scale = duration / 3705.0
    sched = tuple(ScheduleEvent(round(t * scale), a, v) for t, a, v in base)
    return Scenario(duration_s=duration, schedule=sched, noise_enabled=noise_enabled,
                    seed=seed, control_mode="demand_follow")


SCENARIOS = {
    "staircase": staircase_scenario,
    "idle": idle_scenario,
    "dataset": dataset_scenario,
}
