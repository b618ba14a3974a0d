/**
 * Live end-to-end: spawn the gateway serving the emergency-stop recovery
 * scenario held at its error, drive the real panel logic over the NDJSON
 * stream, acknowledge the error and verify the gating mirror.
 */

import { spawn, type ChildProcess } from "node:child_process";
import net from "node:net";
import path from "node:path";
import { afterAll, beforeAll, expect, test } from "vitest";

import { CommandSender } from "../src/client.js";
import { jogEnabled, manualOutputEnabled, modeSwitchEnabled } from "../src/gating.js";
import { createLineSplitter, decodeServerMessage } from "../src/protocol.js";
import { initialState, reduce, type PanelState } from "../src/state.js";
import { renderCylinderWidget, renderErrorTable, renderPanel } from "../src/views.js";

const PORT = 9300 + Math.floor(Math.random() * 400);
const REPO_ROOT = path.resolve(__dirname, "..", "..");

let child: ChildProcess;
let socket: net.Socket;
let state: PanelState = initialState();
let sender: CommandSender;

function apply(event: Parameters<typeof reduce>[1]) {
  state = reduce(state, event);
}

function waitFor<T>(probe: () => T | undefined, what: string, timeoutMs = 30000): Promise<T> {
  return new Promise((resolve, reject) => {
    const started = Date.now();
    const poll = () => {
      const value = probe();
      if (value !== undefined) return resolve(value);
      if (Date.now() - started > timeoutMs) return reject(new Error(`timeout waiting for ${what}`));
      setTimeout(poll, 25);
    };
    poll();
  });
}

beforeAll(async () => {
  child = spawn(
    "python3",
    [
      "-m", "xppusim.cli", "run",
      "--scenario", "fig1_estop_recovery",
      "--serve", `127.0.0.1:${PORT}`,
      "--break-at", "48",
      "--no-http",
    ],
    { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
  );
  let booted = "";
  await new Promise<void>((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error(`gateway did not boot: ${booted}`)), 20000);
    child.stdout!.on("data", (chunk: Buffer) => {
      booted += chunk.toString();
      if (booted.includes("serving")) {
        clearTimeout(timer);
        resolve();
      }
    });
    child.on("exit", (code) => reject(new Error(`gateway exited early (${code}): ${booted}`)));
  });

  socket = await new Promise<net.Socket>((resolve, reject) => {
    const attempt = (left: number) => {
      const sock = net.connect(PORT, "127.0.0.1");
      sock.once("connect", () => resolve(sock));
      sock.once("error", (err) => {
        if (left <= 0) return reject(err);
        setTimeout(() => attempt(left - 1), 100);
      });
    };
    attempt(50);
  });
  socket.setEncoding("utf8");
  const splitter = createLineSplitter((line) => {
    try {
      apply({ kind: "message", message: decodeServerMessage(line) });
    } catch {
      // server only speaks v1; ignore anything else
    }
  });
  socket.on("data", (chunk: string) => splitter.push(chunk));
  apply({ kind: "connected" });
  sender = new CommandSender(
    { get open() { return !socket.destroyed; }, send: (text) => socket.write(text + "\n") },
    (command) => apply({ kind: "sent", command }),
    (text) => apply({ kind: "alert", text }),
  );
}, 40000);

afterAll(async () => {
  socket?.destroy();
  if (child && child.exitCode === null) {
    child.kill("SIGTERM");
    await new Promise((resolve) => child.once("exit", resolve));
  }
});

test("the error row appears and acknowledging transitions it", async () => {
  const record = await waitFor(
    () => state.errors?.records.find((r) => r.number === 2002 && r.state === "Active"),
    "active 2002 record",
  );
  expect(record.severity).toBe("Error");
  expect(record.origin).toBe("xPPU/Crane");

  const table = renderErrorTable(state);
  expect(table).toContain(">2002<");
  expect(table).toContain("unacknowledged");

  sender.send({ kind: "Acknowledge", recordId: record.recordId });
  const ack = await waitFor(() => state.rejections.length === 0 && Object.keys(state.pending).length === 0 ? true : undefined, "ack");
  expect(ack).toBe(true);
  const acknowledged = await waitFor(
    () => state.errors?.records.find((r) => r.recordId === record.recordId && r.state === "Acknowledged"),
    "acknowledged record in the next errors message",
  );
  expect(acknowledged.state).toBe("Acknowledged");
  expect(renderErrorTable(state)).not.toContain("unacknowledged");
}, 40000);

test("mode controls enable and disable per the gating table", async () => {
  const status = await waitFor(
    () => (state.status?.machineState === "ABORTED" ? state.status : undefined),
    "ABORTED status",
  );
  // ABORTED permits mode changes; automatic mode still gates jog/manual writes
  expect(modeSwitchEnabled(status.machineState)).toBe(true);
  const press = status.modules.find((m) => m.path === "xPPU/Stamp/Press")!;
  const base = status.modules.find((m) => m.path === "xPPU/Crane/Base")!;
  expect(manualOutputEnabled(status.mode, press, "DO_Extend")).toBe(false);
  expect(jogEnabled(status.mode, base)).toBe(false);

  sender.send({ kind: "ModeSwitch", mode: "Manual" });
  const manual = await waitFor(
    () => (state.status?.mode === "Manual" ? state.status : undefined),
    "manual mode status",
  );
  const pressManual = manual.modules.find((m) => m.path === "xPPU/Stamp/Press")!;
  const liftManual = manual.modules.find((m) => m.path === "xPPU/Crane/Lift")!;
  expect(manualOutputEnabled(manual.mode, pressManual, "DO_Extend")).toBe(true);
  expect(manualOutputEnabled(manual.mode, liftManual, "DO_Retract")).toBe(false);
  expect(renderPanel(state)).toContain('data-cmd="manual"');
}, 40000);

test("cylinder widgets show one valve for monostable, two for bistable", async () => {
  const status = await waitFor(() => state.status ?? undefined, "status");
  const lift = status.modules.find((m) => m.path === "xPPU/Crane/Lift")!;
  const press = status.modules.find((m) => m.path === "xPPU/Stamp/Press")!;
  const mono = renderCylinderWidget(lift, status.mode);
  const bi = renderCylinderWidget(press, status.mode);
  expect((mono.match(/class="valve/g) ?? []).length).toBe(1);
  expect((bi.match(/class="valve/g) ?? []).length).toBe(2);
}, 40000);
