import { describe, expect, test } from "vitest";

import {
  createLineSplitter,
  decodeServerMessage,
  encodeLine,
  type CommandMessage,
} from "../src/protocol.js";

describe("decodeServerMessage", () => {
  test("accepts the three server message types", () => {
    const status = decodeServerMessage(
      JSON.stringify({ v: "v1", type: "status", tick: 3, machineState: "IDLE", mode: "Automatic", modules: [] }),
    );
    expect(status.type).toBe("status");
    const errors = decodeServerMessage(JSON.stringify({ v: "v1", type: "errors", tick: 3, records: [] }));
    expect(errors.type).toBe("errors");
    const ack = decodeServerMessage(
      JSON.stringify({ v: "v1", type: "ack", commandId: "c1", accepted: true, reason: null }),
    );
    expect(ack.type).toBe("ack");
  });

  test("rejects unknown types, versions and client messages", () => {
    expect(() => decodeServerMessage('{"v":"v1","type":"telepathy"}')).toThrow();
    expect(() => decodeServerMessage('{"v":"v2","type":"status"}')).toThrow();
    expect(() => decodeServerMessage('{"v":"v1","type":"command","commandId":"x","command":{}}')).toThrow();
    expect(() => decodeServerMessage("not json")).toThrow();
  });
});

test("encodeLine terminates with exactly one newline", () => {
  const message: CommandMessage = { v: "v1", type: "command", commandId: "c9", command: { kind: "EStop" } };
  const line = encodeLine(message);
  expect(line.endsWith("\n")).toBe(true);
  expect(line.trim()).toBe(JSON.stringify(message));
});

test("line splitter handles chunking and blank lines", () => {
  const seen: string[] = [];
  const splitter = createLineSplitter((line) => seen.push(line));
  splitter.push('{"a":1}\n{"b"');
  splitter.push(':2}\n\n');
  expect(seen).toEqual(['{"a":1}', '{"b":2}']);
});
