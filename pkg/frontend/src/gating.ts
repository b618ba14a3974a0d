/**
 * Control enablement rules, mirroring the gateway's command gating so a
 * control is disabled in the UI exactly when the server would reject it.
 */

import type { Mode, ModuleEntry } from "./protocol.js";

/** Machine states in which a mode switch is accepted. */
export const MODE_CHANGE_STATES = ["STOPPED", "ABORTED", "IDLE", "HELD"];

export function modeSwitchEnabled(machineState: string): boolean {
  return MODE_CHANGE_STATES.includes(machineState);
}

export function manualOutputEnabled(mode: Mode, module: ModuleEntry, signal: string): boolean {
  return mode === "Manual" && signal.startsWith("DO_") && signal in module.signals;
}

export function jogEnabled(mode: Mode, module: ModuleEntry): boolean {
  return mode === "Jog" && module.axis !== null;
}

/** The emergency stop is never gated. */
export function estopEnabled(): boolean {
  return true;
}

export function acknowledgeEnabled(connected: boolean): boolean {
  return connected;
}
