"""Gateway server: a live scan loop shared by NDJSON-over-TCP clients and a
FastAPI app offering the same stream over a WebSocket plus REST views.

Contract with the runtime: the gateway only enqueues commands and reads
immutable snapshots. Every client has a bounded send queue; a slow client is
dropped rather than back-pressuring the scan loop.
"""

from __future__ import annotations

import asyncio
import contextlib
import json
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, JSONResponse
from pydantic import ValidationError

from .. import data
from ..runtime import Command, CommandSource, Runtime
from ..scenario import Scenario
from . import wire

CLIENT_QUEUE_LIMIT = 256
STATUS_CADENCE_TICKS = 5


class ClientSession:
    """One connected operator client over any line-based transport."""

    def __init__(self, hub: "GatewayHub", name: str):
        self.hub = hub
        self.name = name
        self.queue: asyncio.Queue[str | None] = asyncio.Queue(maxsize=CLIENT_QUEUE_LIMIT)
        self.alive = True

    def send_line(self, line: str) -> None:
        if not self.alive:
            return
        try:
            self.queue.put_nowait(line)
        except asyncio.QueueFull:
            # Slow consumer: drop the client, never the scan loop.
            self.alive = False
            with contextlib.suppress(asyncio.QueueEmpty, asyncio.QueueFull):
                self.queue.get_nowait()
                self.queue.put_nowait(None)

    def close(self) -> None:
        self.alive = False
        with contextlib.suppress(asyncio.QueueFull):
            self.queue.put_nowait(None)

    def handle_line(self, line: str) -> str | None:
        """Process one client line; returns the ack line, or None to disconnect."""
        try:
            message = wire.decode(line)
        except (ValidationError, json.JSONDecodeError):
            return None
        if message.type != "command":
            return None
        reason = wire.gate_command(message.command, self.hub.latest_snapshot, self.hub.manifest)
        if reason is not None:
            return wire.encode(wire.AckMessage(commandId=message.commandId, accepted=False, reason=reason))
        try:
            command = Command.from_json(message.command, CommandSource.HMI)
        except (KeyError, ValueError) as exc:
            return wire.encode(
                wire.AckMessage(commandId=message.commandId, accepted=False, reason=f"malformed command: {exc}")
            )
        if not self.hub.runtime.enqueue_command(command):
            return wire.encode(
                wire.AckMessage(commandId=message.commandId, accepted=False, reason="command queue full")
            )
        return wire.encode(wire.AckMessage(commandId=message.commandId, accepted=True))


class GatewayHub:
    """Fans snapshots out to clients: errors immediately on change, full
    status at a fixed tick cadence and on connect."""

    def __init__(self, runtime: Runtime, status_cadence: int = STATUS_CADENCE_TICKS):
        self.runtime = runtime
        self.manifest = runtime.module_manifest()
        self.status_cadence = status_cadence
        self.clients: set[ClientSession] = set()
        self.latest_snapshot = runtime.snapshot()
        self._error_fingerprint = self._fingerprint(self.latest_snapshot)

    @staticmethod
    def _fingerprint(snapshot: dict):
        return tuple((e["recordId"], e["state"]) for e in snapshot["errors"])

    def publish(self, snapshot: dict) -> None:
        self.latest_snapshot = snapshot
        fingerprint = self._fingerprint(snapshot)
        errors_changed = fingerprint != self._error_fingerprint
        self._error_fingerprint = fingerprint
        lines: list[str] = []
        if errors_changed:
            lines.append(wire.encode(wire.errors_message(snapshot)))
        if errors_changed or snapshot["tick"] % self.status_cadence == 0:
            lines.append(wire.encode(wire.status_message(snapshot, self.manifest)))
        if not lines:
            return
        for client in list(self.clients):
            for line in lines:
                client.send_line(line)
            if not client.alive:
                self.clients.discard(client)

    def attach(self, name: str) -> ClientSession:
        client = ClientSession(self, name)
        self.clients.add(client)
        # connect contract: full status + error list first
        client.send_line(wire.encode(wire.status_message(self.latest_snapshot, self.manifest)))
        client.send_line(wire.encode(wire.errors_message(self.latest_snapshot)))
        return client

    def detach(self, client: ClientSession) -> None:
        client.close()
        self.clients.discard(client)


class LiveRunner:
    """Owns the scan loop of a served runtime.

    Runs the scenario schedule up to an optional break tick, then keeps
    scanning so operators can drive the machine live.
    """

    def __init__(
        self,
        runtime: Runtime,
        scenario: Scenario | None = None,
        period_s: float = 0.01,
        break_at: int | None = None,
        max_ticks: int | None = None,
    ):
        self.runtime = runtime
        self.schedule: dict[int, list[Command]] = {}
        if scenario is not None:
            for tick, command in scenario.schedule:
                if break_at is not None and tick >= break_at:
                    continue
                self.schedule.setdefault(tick, []).append(command)
        self.period_s = period_s
        self.max_ticks = max_ticks
        self.stopping = asyncio.Event()

    async def run(self, hub: GatewayHub) -> None:
        while not self.stopping.is_set():
            snapshot = self.runtime.scan()
            hub.publish(snapshot)
            for command in self.schedule.pop(snapshot["tick"], ()):
                self.runtime.enqueue_command(command)
            if self.max_ticks is not None and snapshot["tick"] + 1 >= self.max_ticks:
                break
            if self.period_s > 0:
                await asyncio.sleep(self.period_s)
            else:
                await asyncio.sleep(0)

    def stop(self) -> None:
        self.stopping.set()


async def serve_tcp(hub: GatewayHub, host: str, port: int) -> asyncio.AbstractServer:
    async def handle(reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        peer = writer.get_extra_info("peername")
        client = hub.attach(f"tcp:{peer}")

        async def sender() -> None:
            while True:
                line = await client.queue.get()
                if line is None:
                    break
                writer.write(line.encode() + b"\n")
                await writer.drain()

        send_task = asyncio.create_task(sender())
        try:
            while True:
                raw = await reader.readline()
                if not raw:
                    break
                line = raw.decode().strip()
                if not line:
                    continue
                ack = client.handle_line(line)
                if ack is None:
                    break  # protocol violation: disconnect this client
                client.send_line(ack)
        finally:
            hub.detach(client)
            send_task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await send_task
            with contextlib.suppress(Exception):
                writer.close()
                await writer.wait_closed()

    return await asyncio.start_server(handle, host, port)


def create_app(hub: GatewayHub, panel_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="xppusim gateway", version="v1")

    @app.get("/v1/health")
    def health() -> dict:
        snapshot = hub.latest_snapshot
        return {
            "status": "ok",
            "tick": snapshot["tick"],
            "machineState": snapshot["machineState"],
            "mode": snapshot["mode"],
        }

    @app.get("/v1/snapshot", response_model=wire.StatusMessage)
    def snapshot() -> wire.StatusMessage:
        return wire.status_message(hub.latest_snapshot, hub.manifest)

    @app.get("/v1/errors", response_model=wire.ErrorsMessage)
    def errors() -> wire.ErrorsMessage:
        return wire.errors_message(hub.latest_snapshot)

    @app.get("/v1/scenarios")
    def scenarios() -> dict:
        return {"scenarios": data.list_scenarios()}

    @app.post("/v1/commands", response_model=wire.AckMessage)
    def post_command(message: wire.CommandMessage) -> wire.AckMessage:
        client = ClientSession(hub, "rest")
        ack_line = client.handle_line(wire.encode(message))
        if ack_line is None:
            return wire.AckMessage(commandId=message.commandId, accepted=False, reason="malformed command")
        return wire.AckMessage.model_validate_json(ack_line)

    @app.websocket("/v1/stream")
    async def stream(websocket: WebSocket) -> None:
        await websocket.accept()
        client = hub.attach("ws")

        async def sender() -> None:
            while True:
                line = await client.queue.get()
                if line is None:
                    break
                await websocket.send_text(line)

        send_task = asyncio.create_task(sender())
        try:
            while True:
                line = await websocket.receive_text()
                ack = client.handle_line(line)
                if ack is None:
                    break
                client.send_line(ack)
        except WebSocketDisconnect:
            pass
        finally:
            hub.detach(client)
            send_task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await send_task

    if panel_dir and Path(panel_dir).is_dir():
        panel_path = Path(panel_dir)

        @app.get("/panel")
        def panel_index():
            index = panel_path / "index.html"
            if not index.is_file():
                return JSONResponse(
                    {"detail": "panel not built; run `npm run build` in frontend/"},
                    status_code=404,
                )
            return FileResponse(index)

        @app.get("/panel/{asset:path}")
        def panel_asset(asset: str):
            target = (panel_path / asset).resolve()
            if not str(target).startswith(str(panel_path.resolve())) or not target.is_file():
                return JSONResponse({"detail": "not found"}, status_code=404)
            return FileResponse(target)

    return app


async def serve_gateway(
    runtime: Runtime,
    host: str,
    port: int,
    scenario: Scenario | None = None,
    period_s: float = 0.01,
    break_at: int | None = None,
    http_port: int | None = None,
    panel_dir: str | None = None,
    ready: "asyncio.Event | None" = None,
    max_ticks: int | None = None,
    control: dict | None = None,
) -> None:
    """Run the scan loop, the TCP NDJSON listener and (optionally) the HTTP/WS
    app until cancelled.

    When a `control` dict is passed, it receives a thread-safe
    `request_stop` callable for embedding the gateway in tests.
    """
    import uvicorn

    hub = GatewayHub(runtime)
    runner = LiveRunner(runtime, scenario, period_s=period_s, break_at=break_at, max_ticks=max_ticks)
    tcp_server = await serve_tcp(hub, host, port)
    tasks = [asyncio.create_task(runner.run(hub))]
    uv_server = None
    if http_port is not None:
        config = uvicorn.Config(
            create_app(hub, panel_dir), host=host, port=http_port, log_level="warning"
        )
        uv_server = uvicorn.Server(config)
        tasks.append(asyncio.create_task(uv_server.serve()))
    stop_requested = asyncio.Event()
    if control is not None:
        loop = asyncio.get_running_loop()
        control["request_stop"] = lambda: loop.call_soon_threadsafe(stop_requested.set)
        control["hub"] = hub
    if ready is not None:
        ready.set()
    main = asyncio.gather(*tasks)
    stop_task = asyncio.create_task(stop_requested.wait())
    try:
        await asyncio.wait({main, stop_task}, return_when=asyncio.FIRST_COMPLETED)
    finally:
        runner.stop()
        stop_task.cancel()
        main.cancel()
        with contextlib.suppress(asyncio.CancelledError):
            await main
        tcp_server.close()
        await tcp_server.wait_closed()
        if uv_server is not None:
            uv_server.should_exit = True
