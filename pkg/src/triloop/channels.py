"""Canonical channel catalog and dataset file I/O.

Every other module shares this vocabulary: 25 measured channels (16
temperatures, 4 pressures, 3 flows, 2 powers), one demand channel, and 4
actuator channels.  Model inputs are the 25 measured channels followed by
``Demand_Elec`` (26 columns); model outputs are the 25 measured channels
followed by the 4 actuator commands (29 columns).  Datasets are CSV files
with one row per 1 s step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MissingChannel, ParseError, SchemaMismatch

# Channel groups
TEMPERATURE = "temperature"
PRESSURE = "pressure"
FLOW = "flow"
POWER = "power"
DEMAND = "demand"
ACTUATOR = "actuator"

# Sampling classes for telemetry publication
CRITICAL = "critical"  # 10 Hz
AUXILIARY = "auxiliary"  # 1 Hz


@dataclass(frozen=True)
class ChannelSpec:
    """Static description of one channel.

    ``uncertainty`` is the 1-sigma noise magnitude: absolute (in the
    channel's unit) for temperatures, a relative fraction of the reading
    for pressure/flow/power.  Actuator readbacks are exact except the
    control rod, whose readback noise is uniform over +/-``uncertainty``
    of stroke (handled by the plant's measurement model).
    """

    id: str
    group: str
    unit: str
    max_value: float
    uncertainty: float
    sampling_class: str

    @property
    def noise_is_relative(self) -> bool:
        return self.group in (PRESSURE, FLOW, POWER)


def _t(cid):  # fluid-loop temperature
    return ChannelSpec(cid, TEMPERATURE, "degC", 220.0, 1.0, CRITICAL)


def _th(cid):  # heater-sheath temperature
    return ChannelSpec(cid, TEMPERATURE, "degC", 750.0, 2.2, CRITICAL)


def _pt(cid):  # gauge pressure
    return ChannelSpec(cid, PRESSURE, "kPa", 206.8, 0.01, AUXILIARY)


def _ft(cid):  # loop mass flow
    return ChannelSpec(cid, FLOW, "kg/s", 0.76, 0.05, CRITICAL)


_MEASURED_SPECS = (
    _t("TF11"), _t("TF12"), _t("TF13"), _t("TF14"), _t("TF15"),
    _t("TF21"), _t("TF22"), _t("TF23"), _t("TF24"), _t("TF25"),
    _t("TF31"), _t("TF32"),
    _th("TH1"), _th("TH2"), _th("TH3"), _th("TH4"),
    _pt("PT1"), _pt("PT2"), _pt("PT3"), _pt("PT4"),
    _ft("FT1"), _ft("FT2"), _ft("FT3"),
    ChannelSpec("Heat_Power", POWER, "kW", 15.7, 0.05, CRITICAL),
    ChannelSpec("Elec_Power", POWER, "kW", 15.7, 0.05, AUXILIARY),
)

_DEMAND_SPEC = ChannelSpec("Demand_Elec", DEMAND, "kW", 7.065, 0.0, AUXILIARY)

_ACTUATOR_SPECS = (
    ChannelSpec("Heater_AO", ACTUATOR, "%", 100.0, 0.0, AUXILIARY),
    ChannelSpec("Pump1_AO", ACTUATOR, "Hz", 60.0, 0.0, AUXILIARY),
    ChannelSpec("Pump2_AO", ACTUATOR, "Hz", 60.0, 0.0, AUXILIARY),
    ChannelSpec("CR_AO", ACTUATOR, "%", 100.0, 0.05, AUXILIARY),
)

MEASURED_IDS = tuple(s.id for s in _MEASURED_SPECS)
ACTUATOR_IDS = tuple(s.id for s in _ACTUATOR_SPECS)
INPUT_ORDER = MEASURED_IDS + (_DEMAND_SPEC.id,)
OUTPUT_ORDER = MEASURED_IDS + ACTUATOR_IDS

N_MEASURED = len(MEASURED_IDS)   # 25
N_INPUT = len(INPUT_ORDER)       # 26
N_OUTPUT = len(OUTPUT_ORDER)     # 29

# Dataset layout: t, 25 measured, Demand_Elec, 4 actuators = 31 columns.
CSV_COLUMNS = ("t",) + INPUT_ORDER + ACTUATOR_IDS
CSV_HEADER = ",".join(CSV_COLUMNS)


@dataclass(frozen=True)
class ChannelCatalog:
    """The fixed channel catalog plus the model input/output orderings."""

    channels: tuple[ChannelSpec, ...]
    input_order: tuple[str, ...]
    output_order: tuple[str, ...]

    def __post_init__(self):
        ids = [c.id for c in self.channels]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate channel ids")
        known = set(ids)
        for cid in self.input_order + self.output_order:
            if cid not in known:
                raise ValueError(f"ordering references unknown channel {cid!r}")

    def spec(self, cid: str) -> ChannelSpec:
        try:
            return self._by_id[cid]
        except KeyError:
            raise MissingChannel(f"unknown channel {cid!r}") from None

    @property
    def _by_id(self) -> dict[str, ChannelSpec]:
        # frozen dataclass: build lazily, cache on the instance dict
        cached = self.__dict__.get("_by_id_cache")
        if cached is None:
            cached = {c.id: c for c in self.channels}
            self.__dict__["_by_id_cache"] = cached
        return cached

    @property
    def measured_ids(self) -> tuple[str, ...]:
        return self.input_order[:-1]

    @property
    def actuator_ids(self) -> tuple[str, ...]:
        return self.output_order[N_MEASURED:]


_CATALOG = ChannelCatalog(
    channels=_MEASURED_SPECS + (_DEMAND_SPEC,) + _ACTUATOR_SPECS,
    input_order=INPUT_ORDER,
    output_order=OUTPUT_ORDER,
)


def canonical_catalog() -> ChannelCatalog:
    """Return the fixed catalog (the same instance every call)."""
    return _CATALOG


@dataclass
class SensorFrame:
    """One timestamped readout: 25 measured values, demand, 4 actuator commands."""

    t: float
    values: dict[str, float]
    demand_elec: float = 0.0
    actuators: dict[str, float] = field(default_factory=dict)

    def require_complete(self, with_actuators: bool = False) -> None:
        missing = [cid for cid in MEASURED_IDS if cid not in self.values]
        if with_actuators:
            missing += [cid for cid in ACTUATOR_IDS if cid not in self.actuators]
        if missing:
            raise MissingChannel(f"frame missing channels: {', '.join(missing)}")


def pack_input(frame: SensorFrame) -> np.ndarray:
    """Frame -> 26-vector in input order (measured channels, then demand)."""
    frame.require_complete()
    out = np.empty(N_INPUT, dtype=np.float64)
    for i, cid in enumerate(MEASURED_IDS):
        out[i] = frame.values[cid]
    out[N_MEASURED] = frame.demand_elec
    return out


def pack_output(frame: SensorFrame) -> np.ndarray:
    """Frame -> 29-vector in output order (measured channels, then actuators)."""
    frame.require_complete(with_actuators=True)
    out = np.empty(N_OUTPUT, dtype=np.float64)
    for i, cid in enumerate(MEASURED_IDS):
        out[i] = frame.values[cid]
    for j, cid in enumerate(ACTUATOR_IDS):
        out[N_MEASURED + j] = frame.actuators[cid]
    return out


def unpack_output(vec, t: float = 0.0, demand_elec: float = 0.0) -> SensorFrame:
    """Inverse of :func:`pack_output` for the 29 covered fields."""
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (N_OUTPUT,):
        raise MissingChannel(f"expected 29-vector, got shape {vec.shape}")
    values = {cid: float(vec[i]) for i, cid in enumerate(MEASURED_IDS)}
    actuators = {cid: float(vec[N_MEASURED + j]) for j, cid in enumerate(ACTUATOR_IDS)}
    return SensorFrame(t=t, values=values, demand_elec=demand_elec, actuators=actuators)


def frame_to_row(frame: SensorFrame) -> np.ndarray:
    """Frame -> 31-vector in CSV column order (t, measured, demand, actuators)."""
    frame.require_complete(with_actuators=True)
    row = np.empty(len(CSV_COLUMNS), dtype=np.float64)
    row[0] = frame.t
    row[1:1 + N_MEASURED] = [frame.values[cid] for cid in MEASURED_IDS]
    row[1 + N_MEASURED] = frame.demand_elec
    row[2 + N_MEASURED:] = [frame.actuators[cid] for cid in ACTUATOR_IDS]
    return row


def row_to_frame(row) -> SensorFrame:
    values = {cid: float(row[1 + i]) for i, cid in enumerate(MEASURED_IDS)}
    actuators = {cid: float(row[2 + N_MEASURED + j]) for j, cid in enumerate(ACTUATOR_IDS)}
    return SensorFrame(t=float(row[0]), values=values,
                       demand_elec=float(row[1 + N_MEASURED]), actuators=actuators)


def trajectory_matrix(frames) -> np.ndarray:
    """List of frames -> (n, 31) float64 matrix in CSV column order."""
    return np.stack([frame_to_row(f) for f in frames])


def matrix_to_frames(mat) -> list:
    return [row_to_frame(mat[i]) for i in range(mat.shape[0])]


def _format_value(x: float) -> str:
    if not math.isfinite(x):
        raise ParseError(f"non-finite value {x!r} cannot be written")
    return f"{x:.12g}"


def write_dataset(path, frames) -> None:
    """Write a trajectory as CSV (values round-trip to >= 9 significant digits)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for frame in frames:
            row = frame_to_row(frame)
            fh.write(",".join(_format_value(v) for v in row) + "\n")


def read_dataset(path) -> list:
    """Read a trajectory CSV, validating the header and every row."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").rstrip("\r")
        if header != CSV_HEADER:
            raise SchemaMismatch(
                f"bad dataset header: expected {len(CSV_COLUMNS)} canonical columns, "
                f"got {header.count(',') + 1}"
            )
        frames = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(CSV_COLUMNS):
                raise ParseError(
                    f"line {lineno}: expected {len(CSV_COLUMNS)} fields, got {len(parts)}"
                )
            try:
                row = [float(p) for p in parts]
            except ValueError as exc:
                raise ParseError(f"line {lineno}: {exc}") from None
            frames.append(row_to_frame(row))
    return frames


def read_dataset_matrix(path) -> np.ndarray:
    """Read a trajectory CSV directly into an (n, 31) matrix."""
    return trajectory_matrix(read_dataset(path))
