"""Operations-assistance pipeline.

A query travels seven stages: snapshot the facility frame, collect the
electrical readings, compute derived metrics, render the full facility
context as text, merge it with the operator's question, run inference
against a chat-completion backend, and return the reply.  Every stage
except inference is a pure function; when no backend is configured or
the backend fails, a deterministic rule-based advisor answers instead.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import requests

from .channels import SensorFrame
from .errors import (
    BackendTimeout,
    BackendUnavailable,
    BadResponse,
    EmptyQuery,
    OutOfRange,
)

#: Operational limits enforced by the advisor and stated in every prompt.
LOOP_TEMP_LIMIT_C = 80.0
HEATER_TEMP_LIMIT_C = 200.0

#: Heater electrical power (kW) to generated electric power (kW).
ELEC_CONVERSION = 0.45

#: Heater bank rating used for the percent-of-full-power figures.
FULL_POWER_KW = 15.7

_LOOP_FLUID_IDS = ("TF11", "TF12", "TF13", "TF14", "TF15",
                   "TF21", "TF22", "TF23", "TF24", "TF25",
                   "TF31", "TF32")
_HEATER_IDS = ("TH1", "TH2", "TH3", "TH4")
_FLOW_IDS = ("FT1", "FT2", "FT3")

# Location labels mirror the facility HMI strings verbatim, including its
# "2st-HX" spelling of the second exchanger.
_PRIMARY_LABELS = ("[Testsection Inlet Temp, Testsection Outlet Temp, "
                   "Top Pump Inlet Temp, 1st-HX Inlet Temp, 1st-HX Outlet Temp]")
_SECONDARY_LABELS = ("[1st-HX 2nd-side Inlet Temp, 1st-HX 2nd-side Outlet Temp, "
                     "Top Pump Inlet Temp, 2st-HX Inlet Temp, 2st-HX Outlet Temp]")
_SINK_LABELS = "[HX Inlet Temp, HX Outlet Temp]"
_PRESSURE_LABELS = ("[1st Loop Testsection Inlet, 1st Loop Testsection Outlet, "
                    "1st Loop Top, 2nd Loop Top]")
_FLOW_LABELS = "[1st Loop, 2nd Loop, 3rd Loop]"


@dataclass(frozen=True)
class DerivedMetrics:
    """Quantities computed from the raw electrical readings each cycle."""

    p_kw: float                # total heater electrical power, kW
    p_elec: float              # implied electric output at the conversion ratio
    avg_heater_temp: float     # mean of the four sheath thermocouples
    voltage_v: float
    current_a: float


def compute_derived(frame: SensorFrame, voltage: float, current: float) -> DerivedMetrics:
    """Heater power from V and I, implied electric output, mean sheath temp."""
    if voltage < 0 or current < 0:
        raise OutOfRange("voltage and current must be >= 0")
    frame.require_complete()
    p_kw = voltage * current / 1000.0
    return DerivedMetrics(
        p_kw=p_kw,
        p_elec=ELEC_CONVERSION * p_kw,
        avg_heater_temp=sum(frame.values[c] for c in _HEATER_IDS) / 4.0,
        voltage_v=voltage,
        current_a=current,
    )


@dataclass(frozen=True)
class TwinExpectation:
    """One forecast row from the twin: per-channel expected values plus the
    demand it was computed for.  Keys use the plain channel ids."""

    demand_kw: float
    values: dict

    @classmethod
    def from_nodes(cls, demand_kw: float, dt_nodes: dict) -> "TwinExpectation":
        """Build from a `dt_`-prefixed node mapping as the telemetry tree holds it."""
        values = {nid[3:]: v for nid, v in dt_nodes.items() if nid.startswith("dt_")}
        return cls(demand_kw=demand_kw, values=values)


def _fmt_group(values, ids, fmt, unit):
    return ", ".join(fmt.format(values[c]) + unit for c in ids)


def build_context(frame: SensorFrame, derived: DerivedMetrics,
                  twin: TwinExpectation | None = None) -> str:
    """Render the full facility state as deterministic text.

    Section order is fixed: electrical/power/rod, primary loop, secondary
    loop, heater sheaths, heat-sink loop, gauge pressures, flow rates.  The
    electric output line trails the standard block so the preceding lines
    stay identical to the facility HMI display.
    """
    frame.require_complete(with_actuators=True)
    v = frame.values
    heat = v["Heat_Power"]
    lines = [
        f"Facility State at t={frame.t:.0f} s",
        "",
        "Current Facility Data:",
        f"- Total Heater Voltage: {derived.voltage_v:.2f} V",
        f"- Total Heater Current: {derived.current_a:.2f} A",
        f"- Total Power: {heat:.2f} kW ({heat / FULL_POWER_KW * 100.0:.1f}%)",
        f"- Control Rod Position: {frame.actuators['CR_AO']:.2f}%",
        f"- Primary Loop Temperatures {_PRIMARY_LABELS}: "
        + _fmt_group(v, _LOOP_FLUID_IDS[0:5], "{:.2f}", "°C"),
        f"- Secondary Loop Temperatures {_SECONDARY_LABELS}: "
        + _fmt_group(v, _LOOP_FLUID_IDS[5:10], "{:.2f}", "°C"),
        "- Four Heater Temperature in Test Section: "
        + _fmt_group(v, _HEATER_IDS, "{:.2f}", "°C"),
        f"- Heat Sink Loop Temperatures {_SINK_LABELS}: "
        + _fmt_group(v, _LOOP_FLUID_IDS[10:12], "{:.2f}", "°C"),
        f"- Gauge Pressure {_PRESSURE_LABELS}: "
        + _fmt_group(v, ("PT1", "PT2", "PT3", "PT4"), "{:.2f}", " kPa"),
        f"- Flow Rate {_FLOW_LABELS}: "
        + _fmt_group(v, _FLOW_IDS, "{:.4f}", " kg/s"),
        f"- Electric Power Output: {v['Elec_Power']:.2f} kW "
        f"(Demand: {frame.demand_elec:.2f} kW)",
    ]
    if twin is not None:
        tv = twin.values
        t_heat = tv["Heat_Power"]
        lines += [
            "",
            "Digital Twin's Expectation Data for User's Demand Power: "
            f"{twin.demand_kw:.2f} kW",
            f"- Expected Total Power: {t_heat:.2f} kW "
            f"({t_heat / FULL_POWER_KW * 100.0:.1f}%)",
            f"- Expected Control Rod Position: {tv['CR_AO']:.2f}%",
            f"- Digital Twin Expectation for Primary Loop Temperatures "
            f"{_PRIMARY_LABELS}: "
            + _fmt_group(tv, _LOOP_FLUID_IDS[0:5], "{:.2f}", "°C"),
            f"- Digital Twin Expectation for Secondary Loop Temperatures "
            f"{_SECONDARY_LABELS}: "
            + _fmt_group(tv, _LOOP_FLUID_IDS[5:10], "{:.2f}", "°C"),
            "- Digital Twin Expectation for Four Heater Temperature in "
            "Test Section: " + _fmt_group(tv, _HEATER_IDS, "{:.2f}", "°C"),
            f"- Digital Twin Expectation for Heat Sink Loop Temperatures "
            f"{_SINK_LABELS}: "
            + _fmt_group(tv, _LOOP_FLUID_IDS[10:12], "{:.2f}", "°C"),
            f"- Digital Twin Expectation for Gauge Pressure {_PRESSURE_LABELS}: "
            + _fmt_group(tv, ("PT1", "PT2", "PT3", "PT4"), "{:.2f}", " kPa"),
            f"- Digital Twin Expectation for Flow Rate {_FLOW_LABELS}: "
            + _fmt_group(tv, _FLOW_IDS, "{:.4f}", " kg/s"),
            f"- Expected Electric Power Output: {tv['Elec_Power']:.2f} kW",
        ]
    return "\n".join(lines) + "\n"


_PREAMBLE = (
    "You are the operations assistant for a three-loop thermal-fluid test "
    "facility: an electrically heated primary loop, an intermediate secondary "
    "loop, and a heat-sink loop, coupled through plate heat exchangers. A "
    "control rod scales delivered heater power and variable-frequency pump "
    "drives set the loop flows; generated electric power follows an external "
    "demand signal.\n"
    f"Operational limits: coolant loop temperatures must stay below "
    f"{LOOP_TEMP_LIMIT_C:.0f}°C and heater element temperatures below "
    f"{HEATER_TEMP_LIMIT_C:.0f}°C.\n"
    "Safety takes priority over performance in every recommendation. If data "
    "is missing or contradictory, request clarification instead of assuming. "
    "Prefer stepwise actuation (5% increments with 30-second holds) for "
    "power changes."
)


@dataclass(frozen=True)
class Prompt:
    """System/user message pair; ``text`` is the flat concatenation."""

    system: str
    user: str

    @property
    def text(self) -> str:
        return self.system + "\n\n" + self.user


def augment_query(user_query: str, context: str) -> Prompt:
    """Merge the operator's question with the facility context."""
    if not user_query or not user_query.strip():
        raise EmptyQuery("assistant query is empty")
    return Prompt(system=_PREAMBLE + "\n\n" + context, user=user_query)


@dataclass(frozen=True)
class ChatBackend:
    """Chat-completion HTTP endpoint configuration."""

    base_url: str
    api_key: str | None = None
    model: str = "gpt-4o"
    temperature: float = 0.3
    timeout_s: float = 60.0

    @classmethod
    def from_env(cls, env=os.environ) -> "ChatBackend | None":
        """Build from ASSISTANT_BASE_URL / ASSISTANT_API_KEY / ASSISTANT_MODEL."""
        base = env.get("ASSISTANT_BASE_URL")
        if not base:
            return None
        kwargs = {"base_url": base, "api_key": env.get("ASSISTANT_API_KEY")}
        if env.get("ASSISTANT_MODEL"):
            kwargs["model"] = env["ASSISTANT_MODEL"]
        return cls(**kwargs)


def infer(prompt: Prompt, backend: ChatBackend) -> str:
    """One chat-completion round trip; returns the reply text verbatim."""
    if backend is None:
        raise BackendUnavailable("no chat backend configured")
    url = backend.base_url.rstrip("/") + "/chat/completions"
    headers = {"Content-Type": "application/json"}
    if backend.api_key:
        headers["Authorization"] = f"Bearer {backend.api_key}"
    body = {
        "model": backend.model,
        "temperature": backend.temperature,
        "messages": [
            {"role": "system", "content": prompt.system},
            {"role": "user", "content": prompt.user},
        ],
    }
    try:
        resp = requests.post(url, json=body, headers=headers,
                             timeout=backend.timeout_s)
    except requests.Timeout as exc:
        raise BackendTimeout(f"backend did not answer in {backend.timeout_s}s") from exc
    except requests.RequestException as exc:
        raise BackendUnavailable(str(exc)) from exc
    if resp.status_code != 200:
        raise BadResponse(f"backend returned HTTP {resp.status_code}")
    try:
        content = resp.json()["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise BadResponse(f"unexpected backend payload: {exc}") from exc
    if not isinstance(content, str):
        raise BadResponse("backend reply content is not text")
    return content


# ---------------------------------------------------------------------------
# rule-based fallback advisor


@dataclass(frozen=True)
class Flag:
    code: str
    severity: str            # info | warning | alarm
    message: str
    channel: str | None = None
    value: float | None = None
    limit: float | None = None


@dataclass(frozen=True)
class Advisory:
    flags: tuple
    recommendations: tuple
    safe_to_proceed: str     # yes | no | conditional

    def to_dict(self) -> dict:
        return {
            "flags": [vars(f) for f in self.flags],
            "recommendations": list(self.recommendations),
            "safe_to_proceed": self.safe_to_proceed,
        }


def fallback_advise(frame: SensorFrame, derived: DerivedMetrics,
                    twin: TwinExpectation | None = None) -> Advisory:
    """Deterministic advisor: fixed rules evaluated in a fixed order."""
    frame.require_complete(with_actuators=True)
    v = frame.values
    flags = []
    for cid in _LOOP_FLUID_IDS:
        if v[cid] > LOOP_TEMP_LIMIT_C:
            flags.append(Flag(
                "loop-overtemp", "alarm",
                f"{cid} at {v[cid]:.2f}°C exceeds the "
                f"{LOOP_TEMP_LIMIT_C:.0f}°C coolant loop limit",
                channel=cid, value=v[cid], limit=LOOP_TEMP_LIMIT_C))
    for cid in _HEATER_IDS:
        if v[cid] > HEATER_TEMP_LIMIT_C:
            flags.append(Flag(
                "heater-overtemp", "alarm",
                f"{cid} at {v[cid]:.2f}°C exceeds the "
                f"{HEATER_TEMP_LIMIT_C:.0f}°C heater element limit",
                channel=cid, value=v[cid], limit=HEATER_TEMP_LIMIT_C))
    for cid in _FLOW_IDS:
        if v[cid] < 0.0:
            flags.append(Flag(
                "negative-flow", "warning",
                f"{cid} reads a negative flow rate ({v[cid]:.4f} kg/s); "
                "suspect sensor fault or reverse flow",
                channel=cid, value=v[cid], limit=0.0))
    for cold_out, hot_in, name in (("TF22", "TF14", "first"),
                                   ("TF32", "TF24", "second")):
        if v[cold_out] > v[hot_in]:
            flags.append(Flag(
                "hx-temperature-inversion", "warning",
                f"temperature inversion across the {name} heat exchanger: "
                f"cold outlet {cold_out} ({v[cold_out]:.2f}°C) exceeds hot "
                f"inlet {hot_in} ({v[hot_in]:.2f}°C)",
                channel=cold_out, value=v[cold_out], limit=v[hot_in]))
    if frame.actuators["CR_AO"] >= 99.5 and derived.p_kw > 0.0:
        flags.append(Flag(
            "rod-inserted-energized", "info",
            "control rod fully inserted: zero power output despite "
            f"electrical readings ({derived.voltage_v:.2f} V, "
            f"{derived.current_a:.2f} A)",
            channel="CR_AO", value=frame.actuators["CR_AO"]))

    recommendations = []
    if any(f.code == "loop-overtemp" for f in flags):
        recommendations.append(
            "Reduce heater power and raise loop flow until all coolant "
            "temperatures are back below the limit.")
    if any(f.code == "heater-overtemp" for f in flags):
        recommendations.append(
            "Insert the control rod to cut delivered heater power; verify "
            "test-section flow before re-energizing.")
    if any(f.code == "negative-flow" for f in flags):
        recommendations.append(
            "Validate the affected flow sensor against pump speed before "
            "trusting downstream calculations.")
    demand_increase = (twin is not None
                       and twin.demand_kw > v["Elec_Power"] + 1e-9)
    if demand_increase:
        recommendations.append(
            f"Approach the {twin.demand_kw:.2f} kW demand stepwise: raise "
            "actuation in 5% increments with 30-second holds, checking loop "
            "temperatures after each hold.")

    if any(f.severity == "alarm" for f in flags):
        safe = "no"
    elif flags or demand_increase:
        safe = "conditional"
    else:
        safe = "yes"
    return Advisory(flags=tuple(flags), recommendations=tuple(recommendations),
                    safe_to_proceed=safe)


def render_advisory(advisory: Advisory) -> str:
    """Plain-text rendering used when the advisor answers in place of a backend."""
    lines = ["Advisory (rule-based fallback):", "Flags:"]
    if advisory.flags:
        lines += [f"- [{f.severity.upper()}] {f.message}" for f in advisory.flags]
    else:
        lines.append("- none")
    lines.append("Recommendations:")
    if advisory.recommendations:
        lines += [f"- {r}" for r in advisory.recommendations]
    else:
        lines.append("- none")
    lines.append(f"Safe to proceed: {advisory.safe_to_proceed}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class AssistReply:
    text: str
    advisory: Advisory | None
    used_fallback: bool


def answer_query(query: str, frame: SensorFrame, voltage: float, current: float,
                 *, twin: TwinExpectation | None = None,
                 backend: ChatBackend | None = None,
                 fallback_on_error: bool = True) -> AssistReply:
    """Run the full pipeline for one query."""
    derived = compute_derived(frame, voltage, current)
    context = build_context(frame, derived, twin)
    prompt = augment_query(query, context)
    if backend is not None:
        try:
            return AssistReply(text=infer(prompt, backend), advisory=None,
                               used_fallback=False)
        except (BackendUnavailable, BackendTimeout, BadResponse):
            if not fallback_on_error:
                raise
    advisory = fallback_advise(frame, derived, twin)
    return AssistReply(text=render_advisory(advisory), advisory=advisory,
                       used_fallback=True)
