"""Shared reference data: one captured operator-console snapshot.

The values reproduce a real idle snapshot of the facility — heater bank
energized at standby excitation, control rod fully inserted, pumps at
10 Hz — together with the twin forecast that was on screen for a 1.89 kW
demand request.  Tests treat these numbers as frozen facts.
"""

from triloop.assistant import TwinExpectation
from triloop.channels import SensorFrame

REFERENCE_VOLTAGE_V = 35.78
REFERENCE_CURRENT_A = 0.72
REFERENCE_P_KW = 0.0257616          # 35.78 * 0.72 / 1000

REFERENCE_VALUES = {
    "TF11": 26.36, "TF12": 26.39, "TF13": 26.39, "TF14": 26.38, "TF15": 26.36,
    "TF21": 26.32, "TF22": 26.39, "TF23": 26.38, "TF24": 26.38, "TF25": 26.33,
    "TF31": 26.25, "TF32": 26.38,
    "TH1": 26.65, "TH2": 26.65, "TH3": 26.65, "TH4": 26.65,
    "PT1": 112.86, "PT2": 106.29, "PT3": 100.03, "PT4": 100.05,
    "FT1": 0.1269, "FT2": 0.1227, "FT3": 0.1018,
    "Heat_Power": 0.0, "Elec_Power": 0.0,
}

REFERENCE_ACTUATORS = {
    "Heater_AO": 35.0, "Pump1_AO": 10.0, "Pump2_AO": 10.0, "CR_AO": 100.0,
}

REFERENCE_TWIN_DEMAND_KW = 1.89

REFERENCE_TWIN_VALUES = {
    "TF11": 29.38, "TF12": 37.71, "TF13": 37.05, "TF14": 37.48, "TF15": 29.34,
    "TF21": 28.08, "TF22": 34.48, "TF23": 34.37, "TF24": 33.92, "TF25": 28.05,
    "TF31": 26.25, "TF32": 32.05,
    "TH1": 89.63, "TH2": 89.52, "TH3": 89.95, "TH4": 90.19,
    "PT1": 109.67, "PT2": 104.36, "PT3": 97.67, "PT4": 99.56,
    "FT1": 0.1275, "FT2": 0.1228, "FT3": 0.1018,
    "Heat_Power": 5.33, "Elec_Power": 1.89,
    "Heater_AO": 35.0, "Pump1_AO": 10.0, "Pump2_AO": 10.0, "CR_AO": 65.91,
}


def reference_frame(t: float = 0.0) -> SensorFrame:
    return SensorFrame(t=t, values=dict(REFERENCE_VALUES), demand_elec=0.0,
                       actuators=dict(REFERENCE_ACTUATORS))


def reference_twin() -> TwinExpectation:
    return TwinExpectation(demand_kw=REFERENCE_TWIN_DEMAND_KW,
                           values=dict(REFERENCE_TWIN_VALUES))
