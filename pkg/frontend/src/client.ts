/**
 * Command sending with ack tracking and a small offline queue: while the
 * connection is down, up to 10 commands are held back; beyond that the
 * operator gets an alert instead of silent loss.
 */

import type { CommandMessage } from "./protocol.js";

export const OFFLINE_QUEUE_LIMIT = 10;

export interface Transport {
  readonly open: boolean;
  send(text: string): void;
}

export class CommandSender {
  private counter = 0;
  private queued: CommandMessage[] = [];

  constructor(
    private readonly transport: Transport,
    private readonly onSent: (command: CommandMessage) => void,
    private readonly onAlert: (text: string) => void,
  ) {}

  send(command: Record<string, unknown>): CommandMessage {
    this.counter += 1;
    const message: CommandMessage = {
      v: "v1",
      type: "command",
      commandId: `p${this.counter}`,
      command,
    };
    if (!this.transport.open) {
      if (this.queued.length >= OFFLINE_QUEUE_LIMIT) {
        this.onAlert(`connection closed: dropping command ${message.commandId}`);
        return message;
      }
      this.queued.push(message);
      return message;
    }
    this.transport.send(JSON.stringify(message));
    this.onSent(message);
    return message;
  }

  /** Replay queued commands once the connection is back. */
  flush(): void {
    if (!this.transport.open) return;
    const queued = this.queued;
    this.queued = [];
    for (const message of queued) {
      this.transport.send(JSON.stringify(message));
      this.onSent(message);
    }
  }

  get queuedCount(): number {
    return this.queued.length;
  }
}
