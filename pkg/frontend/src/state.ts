/**
 * Panel state is a pure function of the transport event stream: replaying a
 * recorded log reproduces the identical state and therefore the identical
 * rendered widgets. No plant behavior is simulated client-side.
 */

import type {
  AckMessage,
  CommandMessage,
  ErrorRecord,
  ErrorsMessage,
  ServerMessage,
  StatusMessage,
} from "./protocol.js";

export type Connection = "connecting" | "open" | "closed";

export interface PanelState {
  connection: Connection;
  status: StatusMessage | null;
  errors: ErrorsMessage | null;
  pending: Record<string, CommandMessage>;
  rejections: AckMessage[]; // surfaced to the operator, newest last
  alerts: string[];
}

export type PanelEvent =
  | { kind: "connected" }
  | { kind: "disconnected" }
  | { kind: "message"; message: ServerMessage }
  | { kind: "sent"; command: CommandMessage }
  | { kind: "alert"; text: string };

export function initialState(): PanelState {
  return {
    connection: "connecting",
    status: null,
    errors: null,
    pending: {},
    rejections: [],
    alerts: [],
  };
}

export function reduce(state: PanelState, event: PanelEvent): PanelState {
  switch (event.kind) {
    case "connected":
      return { ...state, connection: "open" };
    case "disconnected":
      return { ...state, connection: "closed" };
    case "sent":
      return {
        ...state,
        pending: { ...state.pending, [event.command.commandId]: event.command },
      };
    case "alert":
      return { ...state, alerts: [...state.alerts, event.text] };
    case "message": {
      const message = event.message;
      if (message.type === "status") {
        return { ...state, status: message };
      }
      if (message.type === "errors") {
        return { ...state, errors: message };
      }
      const pending = { ...state.pending };
      delete pending[message.commandId];
      const rejections = message.accepted ? state.rejections : [...state.rejections, message];
      return { ...state, pending, rejections };
    }
  }
}

export function replay(events: PanelEvent[]): PanelState {
  return events.reduce(reduce, initialState());
}

/** Error rows: severity descending, then newest first; for the ack workflow. */
export function sortedRecords(errors: ErrorsMessage | null): ErrorRecord[] {
  if (!errors) return [];
  const rank: Record<string, number> = { Error: 4, Malfunction: 3, Warning: 2, Message: 1 };
  return [...errors.records].sort(
    (a, b) => rank[b.severity] - rank[a.severity] || b.tick - a.tick || b.recordId - a.recordId,
  );
}
