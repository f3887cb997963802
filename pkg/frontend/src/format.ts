/** Display formatting: fixed decimals per channel family, no client-side
 * physics — a rendered number is the received number at this precision. */

export interface ChannelFormat {
  decimals: number;
  unit: string;
}

function familyOf(id: string): ChannelFormat {
  if (id.startsWith("TF") || id.startsWith("TH")) {
    return { decimals: 2, unit: "°C" };
  }
  if (id.startsWith("PT")) {
    return { decimals: 2, unit: "kPa" };
  }
  if (id.startsWith("FT")) {
    return { decimals: 4, unit: "kg/s" };
  }
  if (id === "Heat_Power" || id === "Elec_Power" || id === "Demand_Elec") {
    return { decimals: 2, unit: "kW" };
  }
  if (id === "Pump1_AO" || id === "Pump2_AO") {
    return { decimals: 1, unit: "Hz" };
  }
  if (id === "Heater_AO" || id === "CR_AO") {
    return { decimals: 1, unit: "%" };
  }
  if (id === "Heater_Voltage") {
    return { decimals: 2, unit: "V" };
  }
  if (id === "Heater_Current") {
    return { decimals: 2, unit: "A" };
  }
  return { decimals: 2, unit: "" };
}

/** The live/twin channel id a `dt_` node refers to, or null. */
export function baseId(id: string): string | null {
  return id.startsWith("dt_") ? id.slice(3) : null;
}

export function formatValue(id: string, value: number | null): string {
  if (value === null || !Number.isFinite(value)) {
    return "—";
  }
  const fam = familyOf(baseId(id) ?? id);
  return `${value.toFixed(fam.decimals)}${fam.unit ? " " + fam.unit : ""}`;
}

/** Signed live-vs-expected difference, e.g. "+11.32 °C". */
export function formatDelta(id: string, live: number, expected: number): string {
  const fam = familyOf(baseId(id) ?? id);
  const delta = expected - live;
  const sign = delta >= 0 ? "+" : "−";
  return `${sign}${Math.abs(delta).toFixed(fam.decimals)}${
    fam.unit ? " " + fam.unit : ""
  }`;
}
