/**
 * Pure view functions: panel state in, HTML strings out. The browser entry
 * point mounts the result; tests compare the strings directly.
 */

import {
  estopEnabled,
  jogEnabled,
  manualOutputEnabled,
  modeSwitchEnabled,
} from "./gating.js";
import type { AxisEcho, Mode, ModuleEntry } from "./protocol.js";
import { PanelState, sortedRecords } from "./state.js";

const AXIS_ICONS: Record<string, string> = {
  RotaryLimited: "◔",
  RotaryUnlimited: "↻",
  LinearLimited: "⇤⇥",
  LinearUnlimited: "⇢",
};

function esc(text: unknown): string {
  return String(text).replace(/[&<>"]/g, (c) =>
    c === "&" ? "&amp;" : c === "<" ? "&lt;" : c === ">" ? "&gt;" : "&quot;",
  );
}

function attr(enabled: boolean): string {
  return enabled ? "" : " disabled";
}

export function renderBanner(state: PanelState): string {
  const status = state.status;
  const machine = status ? status.machineState : "–";
  const mode = status ? status.mode : "–";
  const tick = status ? status.tick : "–";
  return (
    `<header class="banner ${state.connection}">` +
    `<span class="state">${esc(machine)}</span>` +
    `<span class="mode">${esc(mode)}</span>` +
    `<span class="tick">tick ${esc(tick)}</span>` +
    `<span class="conn">${esc(state.connection)}</span>` +
    `</header>`
  );
}

export function axisIcon(axis: AxisEcho): string {
  const icon = AXIS_ICONS[axis.iconHint];
  if (icon === undefined) {
    console.warn(`unknown axis icon hint: ${axis.iconHint}`);
    return "⚙";
  }
  return icon;
}

export function renderAxisWidget(module: ModuleEntry, mode: Mode): string {
  const axis = module.axis!;
  const range = axis.limited ? `${axis.negativeLimit}…${axis.positiveLimit}` : "endless";
  const jog = jogEnabled(mode, module);
  return (
    `<div class="widget axis" data-path="${esc(module.path)}">` +
    `<span class="icon" title="${esc(axis.iconHint)}">${axisIcon(axis)}</span>` +
    `<span class="pos">${axis.actualPosition.toFixed(1)}</span>` +
    `<span class="range">${esc(range)}</span>` +
    `<button data-cmd="jog" data-path="${esc(module.path)}" data-dir="-1"${attr(jog)}>−</button>` +
    `<button data-cmd="jog" data-path="${esc(module.path)}" data-dir="1"${attr(jog)}>+</button>` +
    `</div>`
  );
}

export function renderCylinderWidget(module: ModuleEntry, mode: Mode): string {
  // one valve control per DO_* signal present on this variant
  const valves = Object.keys(module.signals).filter(
    (s) => s === "DO_Extend" || s === "DO_Retract",
  );
  const buttons = valves
    .map((signal) => {
      const on = module.signals[signal] === true;
      const enabled = manualOutputEnabled(mode, module, signal);
      return (
        `<button data-cmd="manual" data-path="${esc(module.path)}" data-signal="${esc(signal)}" ` +
        `data-value="${on ? "false" : "true"}" class="valve ${on ? "on" : "off"}"${attr(enabled)}>` +
        `${esc(signal)}</button>`
      );
    })
    .join("");
  return (
    `<div class="widget cylinder valves-${valves.length}" data-path="${esc(module.path)}">` +
    `<span class="status">${esc(module.status.Status)}</span>` +
    buttons +
    `</div>`
  );
}

export function renderModule(module: ModuleEntry, mode: Mode): string {
  const flag = module.status.hasError ? " has-error" : "";
  let body: string;
  if (module.axis) {
    body = renderAxisWidget(module, mode);
  } else if ("DO_Extend" in module.signals) {
    body = renderCylinderWidget(module, mode);
  } else if ("DO_Grip" in module.signals) {
    const holding = module.signals["DI_Product"] === true;
    body = `<div class="widget gripper">${holding ? "●" : "○"} ${esc(module.status.Status)}</div>`;
  } else {
    body = `<div class="widget plain">${esc(module.status.Status)}</div>`;
  }
  return `<section class="module${flag}" data-path="${esc(module.path)}"><h3>${esc(
    module.path,
  )}</h3>${body}</section>`;
}

export function renderPlant(state: PanelState): string {
  if (!state.status) return `<main class="plant empty">waiting for status…</main>`;
  const mode = state.status.mode;
  return `<main class="plant">${state.status.modules
    .map((m) => renderModule(m, mode))
    .join("")}</main>`;
}

export function renderErrorTable(state: PanelState): string {
  const rows = sortedRecords(state.errors)
    .map((record) => {
      const active = record.state === "Active";
      return (
        `<tr class="sev-${record.severity.toLowerCase()}${active ? " unacknowledged" : ""}" ` +
        `data-record="${record.recordId}">` +
        `<td>${record.number}</td><td>${esc(record.severity)}</td>` +
        `<td>${esc(record.origin)}</td><td>${esc(record.message)}</td>` +
        `<td>${record.tick}</td><td>${esc(record.state)}</td>` +
        `<td><button data-cmd="ack" data-record="${record.recordId}"${attr(active)}>ack</button></td>` +
        `</tr>`
      );
    })
    .join("");
  return (
    `<table class="errors"><thead><tr>` +
    `<th>#</th><th>severity</th><th>origin</th><th>message</th><th>tick</th><th>state</th><th></th>` +
    `</tr></thead><tbody>${rows}</tbody></table>` +
    `<button data-cmd="ack-all">acknowledge all</button>`
  );
}

export function renderControls(state: PanelState): string {
  const connected = state.connection === "open";
  const machine = state.status ? state.status.machineState : "–";
  const mode: Mode = state.status ? state.status.mode : "Automatic";
  const modeOk = connected && modeSwitchEnabled(machine);
  const modes = (["Automatic", "Manual", "Jog"] as Mode[])
    .map(
      (m) =>
        `<button data-cmd="mode" data-mode="${m}" class="${m === mode ? "current" : ""}"` +
        `${attr(modeOk)}>${m}</button>`,
    )
    .join("");
  const stateCommands = ["Start", "Stop", "Abort", "Clear", "Reset"]
    .map((c) => `<button data-cmd="state" data-state="${c}"${attr(connected)}>${c}</button>`)
    .join("");
  return (
    `<footer class="controls${connected ? "" : " offline"}">` +
    `<button data-cmd="estop" class="estop"${attr(estopEnabled() && connected)}>E-STOP</button>` +
    `<button data-cmd="estop-release"${attr(connected)}>release</button>` +
    `<span class="modes">${modes}</span>` +
    `<span class="state-commands">${stateCommands}</span>` +
    `</footer>`
  );
}

export function renderAlerts(state: PanelState): string {
  const rejections = state.rejections
    .slice(-3)
    .map((a) => `<li class="rejection">${esc(a.commandId)}: ${esc(a.reason ?? "rejected")}</li>`)
    .join("");
  const alerts = state.alerts.slice(-3).map((t) => `<li class="alert">${esc(t)}</li>`).join("");
  return `<ul class="notices">${rejections}${alerts}</ul>`;
}

export function renderPanel(state: PanelState): string {
  return (
    renderBanner(state) + renderPlant(state) + renderErrorTable(state) +
    renderControls(state) + renderAlerts(state)
  );
}
