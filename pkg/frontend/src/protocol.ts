/**
 * v1 wire protocol types and codecs (newline-delimited JSON).
 * See docs/wire-protocol.md in the repository root for the field reference.
 */

export type Mode = "Automatic" | "Manual" | "Jog";
export type Severity = "Message" | "Warning" | "Malfunction" | "Error";
export type RecordState = "Active" | "Acknowledged" | "Cleared";

export interface ModuleStatus {
  hasError: boolean;
  lastErrorNumber: number | null;
  motionActive: boolean;
  Status: string;
}

export interface AxisEcho {
  motion: "Rotary" | "Linear";
  limited: boolean;
  negativeLimit?: number | null;
  positiveLimit?: number | null;
  feedback: string;
  maxSpeed: number;
  referencePosition: number;
  actualPosition: number;
  iconHint: string;
}

export interface ModuleEntry {
  path: string;
  level: "Unit" | "EquipmentModule" | "ControlModule";
  status: ModuleStatus;
  signals: Record<string, boolean | number>;
  axis: AxisEcho | null;
}

export interface StatusMessage {
  v: "v1";
  type: "status";
  tick: number;
  machineState: string;
  mode: Mode;
  modules: ModuleEntry[];
}

export interface ErrorRecord {
  recordId: number;
  number: number;
  message: string;
  severity: Severity;
  origin: string;
  cause: string;
  tick: number;
  state: RecordState;
}

export interface ErrorsMessage {
  v: "v1";
  type: "errors";
  tick: number;
  records: ErrorRecord[];
}

export interface AckMessage {
  v: "v1";
  type: "ack";
  commandId: string;
  accepted: boolean;
  reason: string | null;
}

export type ServerMessage = StatusMessage | ErrorsMessage | AckMessage;

export interface CommandMessage {
  v: "v1";
  type: "command";
  commandId: string;
  command: Record<string, unknown>;
}

const SERVER_TYPES = new Set(["status", "errors", "ack"]);

export function decodeServerMessage(line: string): ServerMessage {
  const doc = JSON.parse(line) as { v?: string; type?: string };
  if (doc.v !== "v1" || !doc.type || !SERVER_TYPES.has(doc.type)) {
    throw new Error(`not a v1 server message: ${line.slice(0, 80)}`);
  }
  return doc as ServerMessage;
}

export function encodeCommand(message: CommandMessage): string {
  return JSON.stringify(message);
}

export function encodeLine(message: CommandMessage): string {
  return encodeCommand(message) + "\n";
}

/** Incremental NDJSON splitter for stream transports. */
export function createLineSplitter(onLine: (line: string) => void) {
  let buffer = "";
  return {
    push(chunk: string) {
      buffer += chunk;
      for (;;) {
        const idx = buffer.indexOf("\n");
        if (idx === -1) break;
        const line = buffer.slice(0, idx).trim();
        buffer = buffer.slice(idx + 1);
        if (line) onLine(line);
      }
    },
  };
}
