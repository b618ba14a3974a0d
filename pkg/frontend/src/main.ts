/**
 * Browser bootstrap: connect the WebSocket stream, reduce messages into the
 * panel state, re-render, and translate clicks into wire commands.
 */

import { CommandSender } from "./client.js";
import { decodeServerMessage } from "./protocol.js";
import { initialState, PanelState, reduce } from "./state.js";
import { renderPanel } from "./views.js";

const root = document.getElementById("app")!;
let state: PanelState = initialState();

function apply(event: Parameters<typeof reduce>[1]): void {
  state = reduce(state, event);
  root.innerHTML = renderPanel(state);
}

const endpoint = `ws://${location.host}/v1/stream`;
const socket = new WebSocket(endpoint);

const sender = new CommandSender(
  {
    get open() {
      return socket.readyState === WebSocket.OPEN;
    },
    send: (text) => socket.send(text),
  },
  (command) => apply({ kind: "sent", command }),
  (text) => apply({ kind: "alert", text }),
);

socket.onopen = () => {
  apply({ kind: "connected" });
  sender.flush();
};
socket.onclose = () => apply({ kind: "disconnected" });
socket.onmessage = (event) => {
  try {
    apply({ kind: "message", message: decodeServerMessage(String(event.data)) });
  } catch (err) {
    console.warn("dropping malformed message", err);
  }
};

root.addEventListener("click", (ev) => {
  const target = (ev.target as HTMLElement).closest("button");
  if (!target || target.hasAttribute("disabled")) return;
  const data = target.dataset;
  switch (data.cmd) {
    case "estop":
      sender.send({ kind: "EStop" });
      break;
    case "estop-release":
      sender.send({ kind: "EStopRelease" });
      break;
    case "ack":
      sender.send({ kind: "Acknowledge", recordId: Number(data.record) });
      break;
    case "ack-all":
      sender.send({ kind: "Acknowledge", recordId: null });
      break;
    case "mode":
      sender.send({ kind: "ModeSwitch", mode: data.mode });
      break;
    case "state":
      sender.send({ kind: "StateCommand", command: data.state });
      break;
    case "jog":
      sender.send({ kind: "Jog", path: data.path, direction: Number(data.dir) });
      break;
    case "manual":
      sender.send({
        kind: "ManualOutput",
        path: data.path,
        signal: data.signal,
        value: data.value === "true",
      });
      break;
  }
});

apply({ kind: "alert", text: `connecting to ${endpoint}` });
