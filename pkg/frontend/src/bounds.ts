/** Client-side write rules, mirroring the server's catalog bounds.
 *
 * The console may write exactly five nodes: the four actuators and the
 * electric demand.  Ranges must match the server so a doomed command is
 * refused before any network round-trip; the server stays the authority.
 */

export interface WritableSpec {
  unit: string;
  min: number;
  max: number;
  label: string;
}

export const WRITABLE_NODES: Record<string, WritableSpec> = {
  Heater_AO: { unit: "%", min: 0, max: 100, label: "Heater command" },
  Pump1_AO: { unit: "Hz", min: 0, max: 60, label: "Pump 1 speed" },
  Pump2_AO: { unit: "Hz", min: 0, max: 60, label: "Pump 2 speed" },
  CR_AO: { unit: "%", min: 0, max: 100, label: "Control rod position" },
  Demand_Elec: { unit: "kW", min: 0, max: 7.065, label: "Electric demand" },
};

/** Null when the command is sendable, else the human-readable refusal. */
export function validateCommand(node: string, value: number): string | null {
  const spec = WRITABLE_NODES[node];
  if (!spec) {
    return `${node} is not an operator-writable node`;
  }
  if (!Number.isFinite(value)) {
    return `value must be a finite number`;
  }
  if (value < spec.min || value > spec.max) {
    return (
      `${spec.label} must be between ${spec.min} and ${spec.max} ${spec.unit}` +
      `, got ${value}`
    );
  }
  return null;
}
